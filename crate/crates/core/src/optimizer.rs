//! Control objective, projected subgradient minimization, grid oracle and the
//! proportional baseline.

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::equilibrium::{build_affine_map, solve_synchronous_state, AffineSineMap, SynchronousState};
use crate::error::{Error, Result};
use crate::feasible_set::{build_polytope, FeasiblePolytope};
use crate::linearization::{jacobian_matrix, laplacian};
use crate::lyapunov::{line_statistics, reduce_unchecked, reduction_basis, solve_lyapunov};
use crate::network::DispatchProblem;

/// Objective value assigned when the Lyapunov solve fails at an iterate.
pub const FAILED_PENALTY: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalStatus {
    Ok,
    /// `‖A·p_s + b‖_∞ ≥ 1`; components carry the penalty.
    Infeasible,
    /// Linearization not Hurwitz or the solve broke down.
    Failed { eigenvalue: Option<f64>, message: String },
}

#[derive(Debug, Clone)]
pub struct ObjectiveEvaluation {
    pub p_s: Vec<f64>,
    pub f_value: f64,
    pub components: Vec<f64>,
    pub argmax: usize,
    pub feasible: bool,
    pub status: EvalStatus,
    pub state: SynchronousState,
    /// Empty unless the evaluation succeeded.
    pub sigma: Vec<f64>,
}

impl ObjectiveEvaluation {
    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }
}

/// Per-problem data reused across evaluations.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub problem: DispatchProblem,
    pub map: AffineSineMap,
    pub polytope: FeasiblePolytope,
    basis: DMatrix<f64>,
}

impl Evaluator {
    pub fn new(problem: &DispatchProblem) -> Result<Self> {
        problem.validate()?;
        Ok(Evaluator {
            map: build_affine_map(problem)?,
            polytope: build_polytope(problem)?,
            basis: reduction_basis(problem.network.node_count()),
            problem: problem.clone(),
        })
    }

    pub fn r_epsilon(&self) -> f64 {
        self.problem.r_epsilon
    }

    /// Affine map, means, Jacobian, reduced Lyapunov solve, then `|m_k| + r_ε·σ_k`.
    pub fn evaluate(&self, p_s: &[f64]) -> Result<ObjectiveEvaluation> {
        let state = solve_synchronous_state(&self.map, p_s)?;
        let n_e = self.problem.network.line_count();
        if !state.feasible {
            let sup = state.sup_norm();
            let components: Vec<f64> = (0..n_e)
                .map(|k| {
                    let v = state.sine_diffs[k];
                    if v.abs() >= 1.0 {
                        FRAC_PI_2 + sup - 1.0
                    } else {
                        v.asin().abs()
                    }
                })
                .collect();
            return Ok(finish(p_s, components, EvalStatus::Infeasible, state, Vec::new()));
        }
        match self.sigma(&state) {
            Ok(sigma) => {
                let r = self.problem.r_epsilon;
                let components = (0..n_e)
                    .map(|k| state.angle_diffs[k].abs() + r * sigma[k])
                    .collect();
                Ok(finish(p_s, components, EvalStatus::Ok, state, sigma))
            }
            Err(e) => {
                let eigenvalue = match e {
                    Error::Unstable { real } => Some(real),
                    _ => None,
                };
                let status = EvalStatus::Failed { eigenvalue, message: e.to_string() };
                Ok(finish(p_s, vec![FAILED_PENALTY; n_e], status, state, Vec::new()))
            }
        }
    }

    /// Standard deviations of the line angle differences at a feasible state.
    pub fn sigma(&self, state: &SynchronousState) -> Result<Vec<f64>> {
        let net = &self.problem.network;
        let lap = laplacian(net, &state.angle_diffs);
        let j = jacobian_matrix(net, &lap);
        let red = reduce_unchecked(&j, net, &self.basis);
        let q = solve_lyapunov(&red.jr, &red.kr)?;
        Ok(line_statistics(&q, &red.cr)?.sigma.iter().copied().collect())
    }

    /// Subgradient of the active component at an evaluation.
    fn subgradient(&self, ev: &ObjectiveEvaluation, h: f64) -> Result<DVector<f64>> {
        let k = ev.argmax;
        let d = ev.p_s.len();
        let v = ev.state.sine_diffs[k];
        let row = self.map.a.row(k).transpose();
        let sign = if v < 0.0 { -1.0 } else { 1.0 };
        if !ev.is_ok() {
            // penalty region: push |v_k| down
            return Ok(row * sign);
        }
        let mut g = row * (sign / (1.0 - v * v).sqrt());
        let base = ev.sigma[k];
        let r = self.problem.r_epsilon;
        for i in 0..d {
            let mut p = ev.p_s.clone();
            p[i] += h;
            let st = solve_synchronous_state(&self.map, &p)?;
            if !st.feasible {
                continue;
            }
            if let Ok(s) = self.sigma(&st) {
                g[i] += r * (s[k] - base) / h;
            }
        }
        Ok(g)
    }
}

fn finish(
    p_s: &[f64],
    components: Vec<f64>,
    status: EvalStatus,
    state: SynchronousState,
    sigma: Vec<f64>,
) -> ObjectiveEvaluation {
    let mut argmax = 0;
    for (k, &c) in components.iter().enumerate() {
        if c > components[argmax] {
            argmax = k;
        }
    }
    ObjectiveEvaluation {
        p_s: p_s.to_vec(),
        f_value: components[argmax],
        feasible: status == EvalStatus::Ok,
        components,
        argmax,
        status,
        state,
        sigma,
    }
}

pub fn evaluate(prob: &DispatchProblem, p_s: &[f64]) -> Result<ObjectiveEvaluation> {
    Evaluator::new(prob)?.evaluate(p_s)
}

/// `p⁺_i = s·p^{max}_i` with `s = Σp⁻/Σp^{max}`; the last entry absorbs rounding.
pub fn proportional_dispatch(prob: &DispatchProblem) -> Vec<f64> {
    let total = prob.total_demand();
    let s = total / prob.p_max.iter().sum::<f64>();
    let mut p: Vec<f64> = prob.p_max.iter().map(|x| s * x).collect();
    let last = p.len() - 1;
    p[last] = total - p[..last].iter().sum::<f64>();
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Step length `c/√t` in p.u. along the normalized subgradient.
    pub step: f64,
    pub tol: f64,
    /// Stop when the best value improved by less than `tol` over this many iterations.
    pub patience: usize,
    pub fd_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iter: 400, step: 0.5, tol: 1e-5, patience: 25, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stalled,
    MaxIter,
    ZeroSubgradient,
    GridExhausted,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub p_s_star: Vec<f64>,
    pub supply: Vec<f64>,
    pub f_star: f64,
    pub trace: Vec<(Vec<f64>, f64)>,
    pub termination: Termination,
    pub iterations: usize,
    pub wall_time: Duration,
}

pub fn minimize(ev: &Evaluator, start: &[f64], opts: &MinimizeOptions) -> Result<OptimizationResult> {
    let t0 = Instant::now();
    let d = ev.polytope.dim();
    if start.len() != d {
        return Err(Error::Dimension { expected: d, got: start.len() });
    }
    if start.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("start vector is not finite".into()));
    }
    let mut x = ev.polytope.project(start)?;
    let mut cur = ev.evaluate(&x)?;
    let mut best = (cur.f_value, x.clone());
    let mut history = vec![best.0];
    let mut trace = vec![(x.clone(), cur.f_value)];
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;
    for t in 1..=opts.max_iter {
        iterations = t;
        let g = ev.subgradient(&cur, opts.fd_step)?;
        let norm = g.norm();
        if !(norm > 0.0) {
            termination = Termination::ZeroSubgradient;
            break;
        }
        let step = opts.step / (t as f64).sqrt() / norm;
        let trial: Vec<f64> = x.iter().zip(g.iter()).map(|(a, b)| a - step * b).collect();
        x = ev.polytope.project(&trial)?;
        cur = ev.evaluate(&x)?;
        trace.push((x.clone(), cur.f_value));
        if cur.f_value < best.0 {
            best = (cur.f_value, x.clone());
        }
        history.push(best.0);
        if t >= opts.patience && history[t - opts.patience] - best.0 < opts.tol {
            termination = Termination::Stalled;
            break;
        }
    }
    Ok(OptimizationResult {
        supply: ev.problem.supply_vector(&best.1),
        p_s_star: best.1,
        f_star: best.0,
        trace,
        termination,
        iterations,
        wall_time: t0.elapsed(),
    })
}

/// Runs [`minimize`] from every start concurrently and keeps the best result
/// (ties go to the earlier start).
pub fn minimize_multi(ev: &Evaluator, starts: &[Vec<f64>], opts: &MinimizeOptions) -> Result<OptimizationResult> {
    if starts.is_empty() {
        return Err(Error::Domain("no start vectors given".into()));
    }
    let results: Vec<Result<OptimizationResult>> =
        starts.par_iter().map(|s| minimize(ev, s, opts)).collect();
    let mut best: Option<OptimizationResult> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.f_star < b.f_star) {
            best = Some(r);
        }
    }
    Ok(best.unwrap())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Exhaustive search over the lattice members; reduction by `(value, p_s)`.
pub fn grid_minimize(ev: &Evaluator, steps: usize) -> Result<OptimizationResult> {
    if steps < 2 {
        return Err(Error::Domain("grid needs at least two steps".into()));
    }
    let t0 = Instant::now();
    let poly = &ev.polytope;
    let size = poly.lattice_size(steps);
    let best = (0..size)
        .into_par_iter()
        .filter_map(|i| {
            let p = poly.lattice_point(steps, i);
            if !poly.contains(&p) {
                return None;
            }
            ev.evaluate(&p).ok().map(|e| (e.f_value, p))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)))
        .ok_or_else(|| Error::Domain("grid has no members".into()))?;
    Ok(OptimizationResult {
        supply: ev.problem.supply_vector(&best.1),
        trace: vec![(best.1.clone(), best.0)],
        p_s_star: best.1,
        f_star: best.0,
        termination: Termination::GridExhausted,
        iterations: size,
        wall_time: t0.elapsed(),
    })
}
