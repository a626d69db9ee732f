//! Gaussian tail probabilities, exit-probability bounds and the threshold table.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use libm::erfc;

use crate::error::{Error, Result};

/// Values below this are reported as zero.
pub const TAIL_FLOOR: f64 = 1e-300;

/// `(ε, r_ε)` pairs with `Φ(r_ε) ≈ ε`.
pub const THRESHOLD_TABLE: [(f64, f64); 6] = [
    (0.050, -1.65),
    (0.040, -1.76),
    (0.030, -1.89),
    (0.020, -2.06),
    (0.010, -2.33),
    (0.001, -3.08),
];

/// Standard normal CDF via the complementary error function.
pub fn gaussian_cdf(x: f64) -> f64 {
    let p = 0.5 * erfc(-x / SQRT_2);
    if p < TAIL_FLOOR {
        0.0
    } else {
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineRisk {
    pub m: f64,
    pub sigma: f64,
    pub r_a: f64,
    pub r_b: f64,
    pub r_ab: f64,
    pub f_a: f64,
    pub f_b: f64,
    pub p_out: f64,
    pub p_out_bound_direct: f64,
    /// `2Φ((−π/2 + f*)/σ − r_ε)`; present only when `f* < π/2`.
    pub p_out_bound_global: Option<f64>,
}

pub fn line_risk(m: f64, sigma: f64, f_star: f64, r_eps: f64) -> Result<LineRisk> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let r_a = (-FRAC_PI_2 - m) / sigma;
    let r_b = (FRAC_PI_2 - m) / sigma;
    let r_ab = r_a.max(-r_b);
    let f_a = gaussian_cdf(r_a);
    let f_b = gaussian_cdf(-r_b);
    let p_out_bound_global =
        (f_star < FRAC_PI_2).then(|| 2.0 * gaussian_cdf((-FRAC_PI_2 + f_star) / sigma - r_eps));
    Ok(LineRisk {
        m,
        sigma,
        r_a,
        r_b,
        r_ab,
        f_a,
        f_b,
        p_out: f_a + f_b,
        p_out_bound_direct: 2.0 * gaussian_cdf(r_ab),
        p_out_bound_global,
    })
}

/// Solves `Φ(r) = ε` by bisection.
pub fn threshold_for(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside (0, 0.5)")));
    }
    let (mut lo, mut hi) = (-40.0f64, 0.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gaussian_cdf(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
