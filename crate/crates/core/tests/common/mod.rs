#![allow(dead_code)]

use gridrisk::optimizer::{proportional_dispatch, Evaluator};
use gridrisk::{parse_network, DispatchProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Random connected network with `n` nodes; `extra` adds non-tree lines.
pub fn random_network(n: usize, seed: u64, extra: usize) -> DispatchProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supply = rng.random_range(1..n);
    let mut lines = Vec::new();
    let mut present = std::collections::BTreeSet::new();
    for i in 1..n {
        let parent = rng.random_range(0..i);
        present.insert((parent, i));
        lines.push((parent, i));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (a, b) = (a.min(b), a.max(b));
        if a != b && present.insert((a, b)) {
            lines.push((a, b));
        }
    }
    let p_max: Vec<f64> = (0..supply).map(|_| rng.random_range(10.0..20.0)).collect();
    let total: f64 = p_max.iter().sum();
    let share = rng.random_range(0.3..0.8) * total / (n - supply) as f64;
    let nodes: Vec<_> = (0..n)
        .map(|i| {
            let base = json!({
                "id": i + 1,
                "inertia": rng.random_range(0.5..5.0),
                "damping": rng.random_range(0.5..5.0),
                "noise": rng.random_range(0.1..2.0),
            });
            let mut obj = base.as_object().unwrap().clone();
            if i < supply {
                obj.insert("role".into(), json!("supply"));
                obj.insert("p_max".into(), json!(p_max[i]));
            } else {
                obj.insert("role".into(), json!("demand"));
                obj.insert("demand".into(), json!(share * rng.random_range(0.5..1.5) / 1.5));
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    let lines: Vec<_> = lines
        .iter()
        .map(|&(a, b)| json!({"from": a + 1, "to": b + 1, "capacity": rng.random_range(60.0..120.0)}))
        .collect();
    parse_network(&json!({"nodes": nodes, "lines": lines}).to_string()).expect("generated network is valid")
}

/// Members of the feasible set whose evaluation succeeds, drawn between the
/// proportional point and uniform points of the bounding box.
pub fn random_feasible_points(ev: &Evaluator, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let prob = &ev.problem;
    let d = prob.decision_dim();
    let prop = proportional_dispatch(prob);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * 1000 {
        if out.len() == count {
            break;
        }
        let t: f64 = rng.random_range(0.0..1.0);
        let p: Vec<f64> = (0..d)
            .map(|i| {
                let u = rng.random_range(0.0..=ev.polytope.b2[i]);
                prop[i] + t * (u - prop[i])
            })
            .collect();
        if !ev.polytope.contains(&p) {
            continue;
        }
        if ev.evaluate(&p).map(|e| e.is_ok()).unwrap_or(false) {
            out.push(p);
        }
    }
    assert_eq!(out.len(), count, "could not draw enough feasible points");
    out
}
