//! The polytope of admissible decision vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::DispatchProblem;

/// Slack allowed when testing membership.
pub const MEMBER_TOL: f64 = 1e-9;

/// Constraints `b1 ≤ A1·p_s`, `0 ≤ p_s ≤ b2`, `0 ≤ p_sum − Σp_s ≤ p_max_last`.
///
/// Row `i` of `A1` sums `p_1..p_i`.
#[derive(Debug, Clone)]
pub struct FeasiblePolytope {
    pub a1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub p_sum: f64,
    pub p_max_last: f64,
    /// Raw ceilings of all supply nodes.
    pub p_max: Vec<f64>,
}

pub fn build_polytope(prob: &DispatchProblem) -> Result<FeasiblePolytope> {
    let d = prob.decision_dim();
    let np = d + 1;
    let p_sum = prob.total_demand();
    let a1 = DMatrix::from_fn(d, d, |i, j| if j <= i { 1.0 } else { 0.0 });
    let b1 = DVector::from_fn(d, |i, _| p_sum - prob.p_max[i + 1..np].iter().sum::<f64>());
    let b2 = DVector::from_column_slice(&prob.p_max[..d]);
    let poly = FeasiblePolytope {
        a1,
        b1,
        b2,
        p_sum,
        p_max_last: prob.p_max[np - 1],
        p_max: prob.p_max.clone(),
    };
    let total: f64 = prob.p_max.iter().sum();
    let s = p_sum / total;
    let probe: Vec<f64> = prob.p_max[..d].iter().map(|p| s * p).collect();
    if p_sum > total || !poly.contains(&probe) {
        return Err(Error::Domain("feasible polytope is empty".into()));
    }
    Ok(poly)
}

impl FeasiblePolytope {
    pub fn dim(&self) -> usize {
        self.b2.len()
    }

    /// Membership via the matrix form.
    pub fn contains(&self, p: &[f64]) -> bool {
        self.violations(p).is_empty()
    }

    /// Membership evaluated directly on the full supply vector: every entry in
    /// `[0, p_max_i]` with the last entry closing the balance.
    pub fn contains_direct(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let last = self.p_sum - p.iter().sum::<f64>();
        p.iter()
            .chain(std::iter::once(&last))
            .zip(&self.p_max)
            .all(|(&x, &cap)| x >= -MEMBER_TOL && x <= cap + MEMBER_TOL)
    }

    /// Human-readable list of violated constraints.
    pub fn violations(&self, p: &[f64]) -> Vec<String> {
        let d = self.dim();
        if p.len() != d {
            return vec![format!("decision vector has length {}, expected {d}", p.len())];
        }
        if p.iter().any(|x| !x.is_finite()) {
            return vec!["decision vector is not finite".into()];
        }
        let mut out = Vec::new();
        let mut partial = 0.0;
        for i in 0..d {
            partial += p[i];
            if p[i] < -MEMBER_TOL {
                out.push(format!("p_{} = {} is negative", i + 1, p[i]));
            }
            if p[i] > self.b2[i] + MEMBER_TOL {
                out.push(format!("p_{} = {} exceeds its ceiling {}", i + 1, p[i], self.b2[i]));
            }
            if partial < self.b1[i] - MEMBER_TOL {
                out.push(format!(
                    "p_1 + … + p_{} = {partial} is below {} (remaining ceilings cannot cover demand)",
                    i + 1,
                    self.b1[i]
                ));
            }
        }
        let last = self.p_sum - partial;
        if last < -MEMBER_TOL {
            out.push(format!("induced p_{} = {last} is negative", d + 1));
        }
        if last > self.p_max_last + MEMBER_TOL {
            out.push(format!(
                "induced p_{} = {last} exceeds its ceiling {}",
                d + 1,
                self.p_max_last
            ));
        }
        out
    }

    /// Euclidean projection.
    ///
    /// The partial-sum rows are implied by `0 ≤ p ≤ b2` together with
    /// `p_sum − p_max_last ≤ Σp ≤ p_sum`, so the solve runs on that box and
    /// slab: the optimum is `clamp(q − μ·1, 0, b2)` and the set of clamped
    /// coordinates is found by walking the sorted breakpoints of `μ`.
    pub fn project(&self, q: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if q.len() != d {
            return Err(Error::Dimension { expected: d, got: q.len() });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("cannot project a non-finite point".into()));
        }
        if d == 0 || self.contains(q) {
            return Ok(q.to_vec());
        }
        let (lo, hi) = (self.p_sum - self.p_max_last, self.p_sum);
        let total = |mu: f64| -> f64 { (0..d).map(|i| (q[i] - mu).clamp(0.0, self.b2[i])).sum() };
        let s0 = total(0.0);
        let mu = if s0 > hi {
            self.solve_multiplier(q, hi)
        } else if s0 < lo {
            self.solve_multiplier(q, lo)
        } else {
            0.0
        };
        let x: Vec<f64> = (0..d).map(|i| (q[i] - mu).clamp(0.0, self.b2[i])).collect();
        if self.contains(&x) {
            Ok(x)
        } else {
            Err(Error::Numerical(format!("projection landed outside the feasible set: {x:?}")))
        }
    }

    /// `μ` with `Σ clamp(q − μ, 0, b2) = target`; the sum is piecewise linear
    /// and nonincreasing in `μ`.
    fn solve_multiplier(&self, q: &[f64], target: f64) -> f64 {
        let d = self.dim();
        let total = |mu: f64| -> f64 { (0..d).map(|i| (q[i] - mu).clamp(0.0, self.b2[i])).sum() };
        let mut knots: Vec<f64> = (0..d).flat_map(|i| [q[i], q[i] - self.b2[i]]).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut prev = (knots[0], total(knots[0]));
        if prev.1 <= target {
            return prev.0;
        }
        for &k in &knots[1..] {
            let cur = (k, total(k));
            if cur.1 <= target {
                // linear between consecutive knots
                let t = (prev.1 - target) / (prev.1 - cur.1);
                return prev.0 + t * (cur.0 - prev.0);
            }
            prev = cur;
        }
        prev.0
    }

    /// Number of lattice points before filtering.
    pub fn lattice_size(&self, steps: usize) -> usize {
        steps.pow(self.dim() as u32)
    }

    /// Lattice point with lexicographic rank `index`.
    pub fn lattice_point(&self, steps: usize, mut index: usize) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; d];
        for i in (0..d).rev() {
            let t = index % steps;
            index /= steps;
            p[i] = self.b2[i] * t as f64 / (steps - 1) as f64;
        }
        p
    }

    /// Members of the lattice over `[0, b2(i)]`, in lexicographic order.
    pub fn grid(&self, steps: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        assert!(steps >= 2, "grid needs at least two steps per dimension");
        (0..self.lattice_size(steps))
            .map(move |i| self.lattice_point(steps, i))
            .filter(move |p| self.contains(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly8() -> FeasiblePolytope {
        FeasiblePolytope {
            a1: DMatrix::from_fn(3, 3, |i, j| if j <= i { 1.0 } else { 0.0 }),
            b1: DVector::from_vec(vec![2.0, 16.0, 32.0]),
            b2: DVector::from_vec(vec![12.0, 14.0, 16.0]),
            p_sum: 50.0,
            p_max_last: 18.0,
            p_max: vec![12.0, 14.0, 16.0, 18.0],
        }
    }

    #[test]
    fn membership_examples() {
        let p = poly8();
        assert!(p.contains(&[12.0, 14.0, 16.0]));
        assert!(!p.contains(&[12.0, 14.0, 26.0]));
        assert!(p.violations(&[12.0, 14.0, 26.0]).iter().any(|v| v.contains("p_3")));
    }

    #[test]
    fn projection_clamps_to_ceiling() {
        let p = poly8();
        let x = p.project(&[13.0, 15.0, 17.0]).unwrap();
        for (a, b) in x.iter().zip([12.0, 14.0, 16.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_of_member_is_identity() {
        let p = poly8();
        assert_eq!(p.project(&[11.0, 12.0, 13.0]).unwrap(), vec![11.0, 12.0, 13.0]);
    }

    #[test]
    fn one_dimensional_grid() {
        let p = FeasiblePolytope {
            a1: DMatrix::from_element(1, 1, 1.0),
            b1: DVector::from_element(1, 2.0),
            b2: DVector::from_element(1, 10.0),
            p_sum: 12.0,
            p_max_last: 10.0,
            p_max: vec![10.0, 10.0],
        };
        let pts: Vec<_> = p.grid(2).collect();
        assert_eq!(pts, vec![vec![10.0]]);
        let pts: Vec<_> = p.grid(11).collect();
        assert_eq!(pts.first().unwrap(), &vec![2.0]);
        assert_eq!(pts.len(), 9);
    }
}
