//! Weighted Laplacian and Jacobian of the swing dynamics at a synchronous state.

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::SynchronousState;
use crate::error::{Error, Result};
use crate::network::PowerNetwork;

pub const SPECTRAL_ZERO: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Jacobian {
    pub j: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    /// Eigenvalue counts `(negative, zero, positive)` by real part.
    pub spectral_index: (usize, usize, usize),
}

/// `B·W·diag(cos m)·Bᵀ` from the line angle differences.
pub fn laplacian(net: &PowerNetwork, angle_diffs: &DVector<f64>) -> DMatrix<f64> {
    let n = net.node_count();
    let mut l = DMatrix::zeros(n, n);
    for (k, &(i, j)) in net.lines.iter().enumerate() {
        let w = net.capacity[k] * angle_diffs[k].cos();
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

/// Block matrix `[[0, I], [−M⁻¹·lap, −M⁻¹·D]]`.
pub fn jacobian_matrix(net: &PowerNetwork, lap: &DMatrix<f64>) -> DMatrix<f64> {
    let n = net.node_count();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        j[(r, n + r)] = 1.0;
        let minv = 1.0 / net.inertia[r];
        for c in 0..n {
            j[(n + r, c)] = -minv * lap[(r, c)];
        }
        j[(n + r, n + r)] = -minv * net.damping[r];
    }
    j
}

pub fn spectral_index(m: &DMatrix<f64>) -> (usize, usize, usize) {
    let eig = m.complex_eigenvalues();
    let mut idx = (0, 0, 0);
    for z in eig.iter() {
        if z.re < -SPECTRAL_ZERO {
            idx.0 += 1;
        } else if z.re > SPECTRAL_ZERO {
            idx.2 += 1;
        } else {
            idx.1 += 1;
        }
    }
    idx
}

pub fn build_jacobian(net: &PowerNetwork, state: &SynchronousState) -> Result<Jacobian> {
    if !state.feasible {
        return Err(Error::Infeasible(format!(
            "max |sin| = {:.6} is not below 1",
            state.sine_diffs.amax()
        )));
    }
    let lap = laplacian(net, &state.angle_diffs);
    let j = jacobian_matrix(net, &lap);
    let spectral_index = spectral_index(&j);
    Ok(Jacobian { j, laplacian: lap, spectral_index })
}

/// Laplacian of a complete graph written entrywise as `−L_ij·cos(θ_i − θ_j)`.
pub fn laplacian_complete(net: &PowerNetwork, state: &SynchronousState) -> Result<DMatrix<f64>> {
    if !net.is_complete() {
        return Err(Error::Domain("graph is not complete".into()));
    }
    let n = net.node_count();
    let mut cap = DMatrix::zeros(n, n);
    for (k, &(i, j)) in net.lines.iter().enumerate() {
        cap[(i, j)] = net.capacity[k];
        cap[(j, i)] = net.capacity[k];
    }
    let th = &state.theta;
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let e = -cap[(i, j)] * (th[i] - th[j]).cos();
                l[(i, j)] = e;
                diag -= e;
            }
        }
        l[(i, i)] = diag;
    }
    Ok(l)
}

/// Right-hand side of the swing equations, `[ω; M⁻¹(−Dω − B·W·sin(Bᵀθ) + p)]`.
pub fn swing_rhs(net: &PowerNetwork, p: &[f64], x: &[f64]) -> Vec<f64> {
    let n = net.node_count();
    let (theta, omega) = x.split_at(n);
    let mut out = vec![0.0; 2 * n];
    out[..n].copy_from_slice(omega);
    let mut acc: Vec<f64> = (0..n).map(|i| p[i] - net.damping[i] * omega[i]).collect();
    for (k, &(i, j)) in net.lines.iter().enumerate() {
        let flow = net.capacity[k] * (theta[i] - theta[j]).sin();
        acc[i] -= flow;
        acc[j] += flow;
    }
    for i in 0..n {
        out[n + i] = acc[i] / net.inertia[i];
    }
    out
}

/// Central-difference Jacobian of [`swing_rhs`].
pub fn numerical_jacobian(net: &PowerNetwork, p: &[f64], x: &[f64], h: f64) -> DMatrix<f64> {
    let dim = x.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut xp = x.to_vec();
    for c in 0..dim {
        xp[c] = x[c] + h;
        let fp = swing_rhs(net, p, &xp);
        xp[c] = x[c] - h;
        let fm = swing_rhs(net, p, &xp);
        xp[c] = x[c];
        for r in 0..dim {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}
