//! Affine sine map `v = A·p_s + b`, synchronous state and synchronous frequency.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::network::{incidence_matrix, DispatchProblem, PowerNetwork};

/// Relative cutoff below which a Laplacian eigenvalue counts as zero.
pub const ZERO_EIGEN_REL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AffineSineMap {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lines: Vec<(usize, usize)>,
    pub node_count: usize,
}

impl AffineSineMap {
    pub fn sine_diffs(&self, p_s: &[f64]) -> DVector<f64> {
        let mut v = self.b.clone();
        for (c, &x) in p_s.iter().enumerate() {
            v.axpy(x, &self.a.column(c), 1.0);
        }
        v
    }
}

/// Pseudo-inverse of `B·W·Bᵀ` from its symmetric eigendecomposition.
pub fn laplacian_pseudo_inverse(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(l.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = ZERO_EIGEN_REL * max;
    let zeros = eig.eigenvalues.iter().filter(|x| x.abs() <= cut).count();
    if zeros != 1 {
        return Err(Error::Numerical(format!(
            "weighted Laplacian has {zeros} zero eigenvalues, expected 1"
        )));
    }
    // rows of U are eigenvectors: L = Uᵀ Λ U
    let u = eig.eigenvectors.transpose();
    let lam_pinv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| if x.abs() <= cut { 0.0 } else { 1.0 / x }),
    );
    let ut_lam = u.transpose() * DMatrix::from_diagonal(&lam_pinv);
    Ok(ut_lam * u)
}

pub fn weighted_laplacian(net: &PowerNetwork) -> DMatrix<f64> {
    let b = incidence_matrix(net);
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(&net.capacity));
    &b * w * b.transpose()
}

pub fn build_affine_map(prob: &DispatchProblem) -> Result<AffineSineMap> {
    let net = &prob.network;
    let n = net.node_count();
    let np = net.supply_count;
    let b = incidence_matrix(net);
    let pinv = laplacian_pseudo_inverse(&weighted_laplacian(net))?;
    // G = Bᵀ Uᵀ Λ† U; its column i is Bᵀ Uᵀ Λ† U_i
    let g = b.transpose() * pinv;
    let pivot = g.column(np - 1).clone_owned();
    let mut a = DMatrix::zeros(net.line_count(), np - 1);
    for i in 0..np - 1 {
        a.set_column(i, &(g.column(i) - &pivot));
    }
    let mut bvec = DVector::zeros(net.line_count());
    for j in np..n {
        let p_d = -prob.demand[j - np];
        bvec.axpy(p_d, &(g.column(j) - &pivot), 1.0);
    }
    Ok(AffineSineMap { a, b: bvec, lines: net.lines.clone(), node_count: n })
}

#[derive(Debug, Clone)]
pub struct SynchronousState {
    /// Node phase angles with the last node pinned to 0.
    pub theta: DVector<f64>,
    pub sine_diffs: DVector<f64>,
    /// `m_k = arcsin(v_k)`, clamped to ±π/2 when infeasible.
    pub angle_diffs: DVector<f64>,
    pub feasible: bool,
    pub gamma_margin: f64,
    /// Largest `|θ_i − θ_j − m_k|` over lines outside the spanning tree.
    pub cycle_residual: f64,
}

impl SynchronousState {
    pub fn sup_norm(&self) -> f64 {
        self.sine_diffs.amax()
    }

    /// State whose line angles are the differences of a given phase vector.
    pub fn from_theta(net: &PowerNetwork, theta: &[f64]) -> Self {
        let m = DVector::from_iterator(
            net.line_count(),
            net.lines.iter().map(|&(i, j)| theta[i] - theta[j]),
        );
        let v = m.map(f64::sin);
        let sup = v.amax();
        let feasible = m.iter().all(|x| x.abs() < std::f64::consts::FRAC_PI_2);
        SynchronousState {
            theta: DVector::from_column_slice(theta),
            sine_diffs: v,
            angle_diffs: m,
            feasible,
            gamma_margin: 1.0 - sup,
            cycle_residual: 0.0,
        }
    }
}

pub fn solve_synchronous_state(map: &AffineSineMap, p_s: &[f64]) -> Result<SynchronousState> {
    if p_s.len() != map.a.ncols() {
        return Err(Error::Dimension { expected: map.a.ncols(), got: p_s.len() });
    }
    if p_s.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("decision vector must be finite".into()));
    }
    let v = map.sine_diffs(p_s);
    let sup = v.amax();
    let feasible = sup < 1.0;
    let m = v.map(|x| x.clamp(-1.0, 1.0).asin());
    let (theta, cycle_residual) = propagate_angles(map.node_count, &map.lines, &m);
    Ok(SynchronousState {
        theta,
        sine_diffs: v,
        angle_diffs: m,
        feasible,
        gamma_margin: 1.0 - sup,
        cycle_residual,
    })
}

/// Breadth-first spanning tree from the last node (θ = 0); returns θ and the
/// worst mismatch on non-tree lines.
fn propagate_angles(n: usize, lines: &[(usize, usize)], m: &DVector<f64>) -> (DVector<f64>, f64) {
    let mut adj = vec![Vec::new(); n];
    for (k, &(i, j)) in lines.iter().enumerate() {
        adj[i].push((j, k));
        adj[j].push((i, k));
    }
    let mut theta: DVector<f64> = DVector::zeros(n);
    let mut seen = vec![false; n];
    let mut tree = vec![false; lines.len()];
    let root = n - 1;
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &(w, k) in &adj[u] {
            if seen[w] {
                continue;
            }
            seen[w] = true;
            tree[k] = true;
            // m_k = θ_i − θ_j
            theta[w] = if lines[k].0 == w { theta[u] + m[k] } else { theta[u] - m[k] };
            queue.push_back(w);
        }
    }
    let residual = lines
        .iter()
        .enumerate()
        .filter(|(k, _)| !tree[*k])
        .map(|(k, &(i, j))| (theta[i] - theta[j] - m[k]).abs())
        .fold(0.0, f64::max);
    (theta, residual)
}

/// `ω_s = Σp / ΣD`.
pub fn synchronous_frequency(prob: &DispatchProblem, p: &[f64]) -> Result<f64> {
    let d: f64 = prob.network.damping.iter().sum();
    if d <= 0.0 {
        return Err(Error::Domain("total damping is zero".into()));
    }
    Ok(p.iter().sum::<f64>() / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;
    use approx::assert_abs_diff_eq;

    fn two_node(cap: f64) -> DispatchProblem {
        parse_network(&format!(
            r#"{{"nodes":[
            {{"id":1,"role":"supply","inertia":1,"damping":1,"noise":1,"p_max":20}},
            {{"id":2,"role":"demand","inertia":1,"damping":1,"noise":1,"demand":12.5}}],
            "lines":[{{"from":1,"to":2,"capacity":{cap}}}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn two_node_sine_is_p_over_l() {
        let prob = two_node(25.0);
        let map = build_affine_map(&prob).unwrap();
        assert_eq!(map.a.ncols(), 0);
        let st = solve_synchronous_state(&map, &[]).unwrap();
        assert_abs_diff_eq!(st.sine_diffs[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(st.angle_diffs[0], 0.5f64.asin(), epsilon = 1e-14);
        assert_abs_diff_eq!(st.theta[0] - st.theta[1], 0.5236, epsilon = 1e-4);
        assert!(st.feasible);
    }

    #[test]
    fn overloaded_line_is_infeasible_not_error() {
        let prob = two_node(10.0);
        let st = solve_synchronous_state(&build_affine_map(&prob).unwrap(), &[]).unwrap();
        assert!(!st.feasible);
        assert!(st.gamma_margin < 0.0);
    }

    #[test]
    fn frequency() {
        let prob = two_node(25.0);
        assert_eq!(synchronous_frequency(&prob, &[12.5, -12.5]).unwrap(), 0.0);
        assert_abs_diff_eq!(synchronous_frequency(&prob, &[11.5, -12.5]).unwrap(), -0.5);
    }
}
