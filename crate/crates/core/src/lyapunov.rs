//! Zero-mode reduction, Lyapunov solve and per-line invariant statistics.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::linearization::{Jacobian, SPECTRAL_ZERO};
use crate::network::{incidence_matrix, PowerNetwork};

pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub jr: DMatrix<f64>,
    pub kr: DMatrix<f64>,
    pub cr: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct InvariantStatistics {
    pub q_y: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub q_xr: DMatrix<f64>,
}

/// Orthonormal basis (n × (n−1)) of the complement of `1`, from the Householder
/// reflector that maps `e₁` onto `1/√n`.
pub fn reduction_basis(n: usize) -> DMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    let mut w = DVector::from_element(n, s);
    w[0] -= 1.0;
    let ww = w.dot(&w);
    let mut h = DMatrix::identity(n, n);
    if ww > 0.0 {
        h -= (&w * w.transpose()) * (2.0 / ww);
    }
    h.columns(1, n - 1).into_owned()
}

/// `T_red = [[U₁ᵀ, 0], [0, I]]`.
pub fn reduction_matrix(u1: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u1.nrows();
    let mut t = DMatrix::zeros(2 * n - 1, 2 * n);
    t.view_mut((0, 0), (n - 1, n)).copy_from(&u1.transpose());
    t.view_mut((n - 1, n), (n, n)).fill_with_identity();
    t
}

/// Noise input `[0; M⁻¹·K₂]` of the stochastic linearization.
pub fn noise_matrix(net: &PowerNetwork) -> DMatrix<f64> {
    let n = net.node_count();
    let mut k = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        k[(n + i, i)] = net.noise[i] / net.inertia[i];
    }
    k
}

/// Output map `C = [Bᵀ, 0]`.
pub fn output_matrix(net: &PowerNetwork) -> DMatrix<f64> {
    let n = net.node_count();
    let mut c = DMatrix::zeros(net.line_count(), 2 * n);
    c.view_mut((0, 0), (net.line_count(), n)).copy_from(&incidence_matrix(net).transpose());
    c
}

pub(crate) fn reduce_unchecked(j: &DMatrix<f64>, net: &PowerNetwork, u1: &DMatrix<f64>) -> ReducedSystem {
    let t = reduction_matrix(u1);
    ReducedSystem {
        jr: &t * j * t.transpose(),
        kr: &t * noise_matrix(net),
        cr: output_matrix(net) * t.transpose(),
    }
}

pub fn reduce_with_basis(jac: &Jacobian, net: &PowerNetwork, u1: &DMatrix<f64>) -> Result<ReducedSystem> {
    let red = reduce_unchecked(&jac.j, net, u1);
    let worst = red
        .jr
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst >= -SPECTRAL_ZERO {
        return Err(Error::Unstable { real: worst });
    }
    Ok(red)
}

pub fn reduce(jac: &Jacobian, net: &PowerNetwork) -> Result<ReducedSystem> {
    reduce_with_basis(jac, net, &reduction_basis(net.node_count()))
}

/// Relative Frobenius residual of `J·Q + Q·Jᵀ + K·Kᵀ`.
pub fn lyapunov_residual(j: &DMatrix<f64>, k: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let kk = k * k.transpose();
    let r = j * q + q * j.transpose() + &kk;
    let scale = kk.norm();
    if scale == 0.0 {
        r.norm()
    } else {
        r.norm() / scale
    }
}

/// Solves `0 = J·Q + Q·Jᵀ + K·Kᵀ` by real Schur decomposition and
/// block back-substitution.
pub fn solve_lyapunov(j: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = j.nrows();
    if j.ncols() != n || k.nrows() != n {
        return Err(Error::Dimension { expected: n, got: k.nrows() });
    }
    let schur = Schur::try_new(j.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("schur iteration did not converge".into()))?;
    let (u, t) = schur.unpack();
    let blocks = diagonal_blocks(&t)?;
    let worst = blocks
        .iter()
        .map(|&(s, len)| block_max_real(&t, s, len))
        .fold(f64::NEG_INFINITY, f64::max);
    if worst >= -SPECTRAL_ZERO {
        return Err(Error::Unstable { real: worst });
    }
    let kk = k * k.transpose();
    let c = -(u.transpose() * &kk * &u);
    let y = solve_quasi_triangular(&t, &c, &blocks)?;
    let mut q = &u * y * u.transpose();
    q = (&q + q.transpose()) * 0.5;
    let residual = lyapunov_residual(j, k, &q);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::Residual { residual });
    }
    Ok(q)
}

/// Dense Kronecker solve of the same equation; O(n⁶), for small systems and cross-checks.
pub fn solve_lyapunov_kronecker(j: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = j.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let op = id.kronecker(j) + j.kronecker(&id);
    let rhs = -(k * k.transpose());
    let vec_rhs = DVector::from_column_slice(rhs.as_slice());
    let sol = op
        .lu()
        .solve(&vec_rhs)
        .ok_or_else(|| Error::Numerical("singular Sylvester operator".into()))?;
    let q = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&q + q.transpose()) * 0.5)
}

pub fn line_statistics(q_xr: &DMatrix<f64>, cr: &DMatrix<f64>) -> Result<InvariantStatistics> {
    let q_y = cr * q_xr * cr.transpose();
    let mut sigma = DVector::zeros(q_y.nrows());
    for k in 0..q_y.nrows() {
        let d = q_y[(k, k)];
        if !(d > 0.0) {
            return Err(Error::Numerical(format!("line {} has variance {d:e}", k + 1)));
        }
        sigma[k] = d.sqrt();
    }
    Ok(InvariantStatistics { q_y, sigma, q_xr: q_xr.clone() })
}

pub fn invariant_statistics(net: &PowerNetwork, jac: &Jacobian) -> Result<InvariantStatistics> {
    let red = reduce(jac, net)?;
    let q = solve_lyapunov(&red.jr, &red.kr)?;
    line_statistics(&q, &red.cr)
}

/// Start index and size of each 1×1 or 2×2 diagonal block.
fn diagonal_blocks(t: &DMatrix<f64>) -> Result<Vec<(usize, usize)>> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            if i + 2 < n && t[(i + 2, i + 1)] != 0.0 {
                return Err(Error::Numerical("schur form has a block larger than 2×2".into()));
            }
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    Ok(blocks)
}

fn block_max_real(t: &DMatrix<f64>, s: usize, len: usize) -> f64 {
    if len == 1 {
        return t[(s, s)];
    }
    let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        half_tr + disc.sqrt()
    } else {
        half_tr
    }
}

/// Solves `T·Y + Y·Tᵀ = C` for upper quasi-triangular `T`.
fn solve_quasi_triangular(t: &DMatrix<f64>, c: &DMatrix<f64>, blocks: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let mut y = DMatrix::zeros(n, n);
    for &(js, jl) in blocks.iter().rev() {
        let jend = js + jl;
        for &(is, il) in blocks.iter().rev() {
            let iend = is + il;
            let mut rhs = [0.0; 4];
            for c_ in 0..jl {
                for r in 0..il {
                    let (row, col) = (is + r, js + c_);
                    let mut acc = c[(row, col)];
                    for kk in iend..n {
                        acc -= t[(row, kk)] * y[(kk, col)];
                    }
                    for ll in jend..n {
                        acc -= y[(row, ll)] * t[(col, ll)];
                    }
                    rhs[r + c_ * il] = acc;
                }
            }
            let d = il * jl;
            let mut op = [0.0; 16];
            for c_ in 0..jl {
                for r in 0..il {
                    let row = r + c_ * il;
                    for r2 in 0..il {
                        op[row * 4 + (r2 + c_ * il)] += t[(is + r, is + r2)];
                    }
                    for c2 in 0..jl {
                        op[row * 4 + (r + c2 * il)] += t[(js + c_, js + c2)];
                    }
                }
            }
            let sol = small_solve(&mut op, &mut rhs, d)?;
            for c_ in 0..jl {
                for r in 0..il {
                    y[(is + r, js + c_)] = sol[r + c_ * il];
                }
            }
        }
    }
    Ok(y)
}

/// Gaussian elimination with partial pivoting on a row-major 4×4 buffer.
fn small_solve(a: &mut [f64; 16], b: &mut [f64; 4], d: usize) -> Result<[f64; 4]> {
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&x, &y| a[x * 4 + col].abs().total_cmp(&a[y * 4 + col].abs()))
            .unwrap();
        if a[piv * 4 + col].abs() < 1e-300 {
            return Err(Error::Numerical("singular Sylvester block".into()));
        }
        if piv != col {
            for k in 0..4 {
                a.swap(piv * 4 + k, col * 4 + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..d {
            let f = a[r * 4 + col] / a[col * 4 + col];
            for k in col..d {
                a[r * 4 + k] -= f * a[col * 4 + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..d).rev() {
        let mut acc = b[r];
        for k in r + 1..d {
            acc -= a[r * 4 + k] * x[k];
        }
        x[r] = acc / a[r * 4 + r];
    }
    Ok(x)
}
