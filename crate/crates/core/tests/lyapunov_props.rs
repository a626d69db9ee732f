mod common;

use gridrisk::equilibrium::solve_synchronous_state;
use gridrisk::fixtures::{fixture, fixture_names};
use gridrisk::linearization::build_jacobian;
use gridrisk::lyapunov::{
    invariant_statistics, line_statistics, lyapunov_residual, reduce, reduce_with_basis, reduction_basis,
    solve_lyapunov, solve_lyapunov_kronecker, RESIDUAL_TOL,
};
use gridrisk::optimizer::Evaluator;
use gridrisk::{parse_network, DispatchProblem};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn reduced_at(prob: &DispatchProblem, p: &[f64]) -> gridrisk::lyapunov::ReducedSystem {
    let ev = Evaluator::new(prob).unwrap();
    let st = solve_synchronous_state(&ev.map, p).unwrap();
    reduce(&build_jacobian(&prob.network, &st).unwrap(), &prob.network).unwrap()
}

fn is_positive_definite(q: &DMatrix<f64>) -> bool {
    q.clone().cholesky().is_some()
}

/// `∫₀^T e^{Jt} K Kᵀ e^{Jᵀt} dt` by composite Simpson.
fn quadrature(j: &DMatrix<f64>, k: &DMatrix<f64>, t_end: f64, steps: usize) -> DMatrix<f64> {
    let h = t_end / steps as f64;
    let step = (j * h).exp();
    let kk = k * k.transpose();
    let mut e = DMatrix::identity(j.nrows(), j.ncols());
    let mut acc = DMatrix::zeros(j.nrows(), j.ncols());
    for s in 0..=steps {
        let w = if s == 0 || s == steps { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
        acc += (&e * &kk * e.transpose()) * w;
        e = &step * e;
    }
    acc * (h / 3.0)
}

fn two_node() -> DispatchProblem {
    parse_network(
        r#"{"nodes":[
        {"id":1,"role":"supply","inertia":1,"damping":1,"noise":1,"p_max":20},
        {"id":2,"role":"demand","inertia":1,"damping":1,"noise":1,"demand":12.5}],
        "lines":[{"from":1,"to":2,"capacity":25}]}"#,
    )
    .unwrap()
}

#[test]
fn residual_definiteness_and_positive_sigma_on_examples() {
    for name in fixture_names() {
        let prob = fixture(name).unwrap();
        let ev = Evaluator::new(&prob).unwrap();
        for p in common::random_feasible_points(&ev, 50, 3) {
            let red = reduced_at(&prob, &p);
            let q = solve_lyapunov(&red.jr, &red.kr).unwrap();
            let rel = lyapunov_residual(&red.jr, &red.kr, &q) / (&red.kr * red.kr.transpose()).norm();
            assert!(rel <= RESIDUAL_TOL, "{name}: residual {rel:e}");
            assert!(is_positive_definite(&q), "{name}: Q_xr not positive definite");
            let stats = line_statistics(&q, &red.cr).unwrap();
            assert!(stats.sigma.min() > 0.0, "{name}");
        }
    }
}

#[test]
fn two_node_matches_quadrature_oracle() {
    let prob = two_node();
    let red = reduced_at(&prob, &[]);
    let q = solve_lyapunov(&red.jr, &red.kr).unwrap();
    let oracle = quadrature(&red.jr, &red.kr, 200.0, 200_000);
    assert!((&q - &oracle).norm() <= 1e-6 * oracle.norm(), "{q} vs {oracle}");
}

#[test]
fn two_node_closed_form() {
    // one line, M = D = K = 1, L = 25·cos(π/6): variance of θ₁−θ₂ is 2·K²/(2·D·2L) = 1/(2L)
    let prob = two_node();
    let ev = Evaluator::new(&prob).unwrap();
    let st = solve_synchronous_state(&ev.map, &[]).unwrap();
    let stats = invariant_statistics(&prob.network, &build_jacobian(&prob.network, &st).unwrap()).unwrap();
    let l = 25.0 * (std::f64::consts::PI / 6.0).cos();
    let expected = (1.0 / (2.0 * l)).sqrt();
    assert!((stats.sigma[0] - expected).abs() <= 1e-12, "{} vs {expected}", stats.sigma[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn small_networks_match_quadrature(n in 2usize..5, extra in 0usize..3, seed in any::<u64>()) {
        let prob = common::random_network(n, seed, extra);
        let ev = Evaluator::new(&prob).unwrap();
        let p = &common::random_feasible_points(&ev, 1, seed)[0];
        let red = reduced_at(&prob, p);
        let q = solve_lyapunov(&red.jr, &red.kr).unwrap();
        // slowest mode sets the horizon
        let decay = red.jr.complex_eigenvalues().iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
        let t_end = (40.0 / decay).max(10.0);
        let oracle = quadrature(&red.jr, &red.kr, t_end, 20_000);
        prop_assert!((&q - &oracle).norm() <= 1e-6 * oracle.norm());
    }

    #[test]
    fn schur_solver_matches_kronecker(n in 2usize..7, extra in 0usize..5, seed in any::<u64>()) {
        let prob = common::random_network(n, seed, extra);
        let ev = Evaluator::new(&prob).unwrap();
        let p = &common::random_feasible_points(&ev, 1, seed)[0];
        let red = reduced_at(&prob, p);
        let a = solve_lyapunov(&red.jr, &red.kr).unwrap();
        let b = solve_lyapunov_kronecker(&red.jr, &red.kr).unwrap();
        prop_assert!((&a - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn noise_scaling_scales_sigma(n in 2usize..7, extra in 0usize..5, seed in any::<u64>(), c in 0.1f64..5.0) {
        let prob = common::random_network(n, seed, extra);
        let ev = Evaluator::new(&prob).unwrap();
        let p = common::random_feasible_points(&ev, 1, seed)[0].clone();
        let mut scaled = prob.clone();
        scaled.network.noise.iter_mut().for_each(|k| *k *= c);
        let s1 = ev.evaluate(&p).unwrap().sigma;
        let s2 = Evaluator::new(&scaled).unwrap().evaluate(&p).unwrap().sigma;
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!((b - c * a).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn noise_monotonicity(n in 2usize..7, extra in 0usize..5, seed in any::<u64>(),
                          bumps in prop::collection::vec(0.0f64..1.0, 7)) {
        let prob = common::random_network(n, seed, extra);
        let ev = Evaluator::new(&prob).unwrap();
        let p = common::random_feasible_points(&ev, 1, seed)[0].clone();
        let mut louder = prob.clone();
        for (k, b) in louder.network.noise.iter_mut().zip(&bumps) {
            *k += b;
        }
        let s1 = ev.evaluate(&p).unwrap().sigma;
        let s2 = Evaluator::new(&louder).unwrap().evaluate(&p).unwrap().sigma;
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!(*b >= *a - 1e-12);
        }
    }

    #[test]
    fn line_covariance_independent_of_basis(n in 2usize..7, extra in 0usize..5, seed in any::<u64>(),
                                            angle in 0.0f64..6.28) {
        let prob = common::random_network(n, seed, extra);
        let ev = Evaluator::new(&prob).unwrap();
        let p = &common::random_feasible_points(&ev, 1, seed)[0];
        let st = solve_synchronous_state(&ev.map, p).unwrap();
        let jac = build_jacobian(&prob.network, &st).unwrap();
        let u1 = reduction_basis(n);
        // rotate the first two basis vectors within the complement of 1
        let mut rot = DMatrix::identity(n - 1, n - 1);
        if n > 2 {
            let (s, c) = angle.sin_cos();
            rot[(0, 0)] = c;
            rot[(0, 1)] = -s;
            rot[(1, 0)] = s;
            rot[(1, 1)] = c;
        }
        let u2 = &u1 * rot;
        let r1 = reduce_with_basis(&jac, &prob.network, &u1).unwrap();
        let r2 = reduce_with_basis(&jac, &prob.network, &u2).unwrap();
        let q1 = line_statistics(&solve_lyapunov(&r1.jr, &r1.kr).unwrap(), &r1.cr).unwrap().q_y;
        let q2 = line_statistics(&solve_lyapunov(&r2.jr, &r2.kr).unwrap(), &r2.cr).unwrap().q_y;
        prop_assert!((&q1 - &q2).norm() <= 1e-9 * q1.norm());
    }
}
