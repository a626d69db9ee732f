//! Euler–Maruyama simulation of the stochastic swing dynamics.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::equilibrium::{build_affine_map, solve_synchronous_state};
use crate::error::{Error, Result};
use crate::linearization::laplacian;
use crate::network::DispatchProblem;

pub const BLOW_UP: f64 = 1e6;
pub const MAX_LAG: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Linearized,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub paths: usize,
    pub seed: u64,
    pub model: Model,
    /// Spacing of recorded samples in seconds.
    pub sample_every: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 1e-3,
            horizon: 600.0,
            burn_in: 50.0,
            paths: 1,
            seed: 0,
            model: Model::Linearized,
            sample_every: 0.1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.burn_in >= 0.0
            && self.horizon > self.burn_in
            && self.paths >= 1
            && self.sample_every >= self.dt;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid simulation config {self:?}")))
        }
    }

    fn stride(&self) -> usize {
        ((self.sample_every / self.dt).round() as usize).max(1)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }
}

/// Sample statistics of one line's angle deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct LineStats {
    /// Synchronous angle difference `m_k` added back before exit tests.
    pub mean: f64,
    pub count: u64,
    pub sum: CompensatedSum,
    pub sum_sq: CompensatedSum,
    pub exits: u64,
    /// `Σ y_t·y_{t+l}` and pair counts for lags `0..=MAX_LAG`, within paths.
    pub lag_sums: Vec<CompensatedSum>,
    pub lag_counts: Vec<u64>,
}

impl LineStats {
    pub fn new(mean: f64) -> Self {
        LineStats {
            mean,
            count: 0,
            sum: CompensatedSum::default(),
            sum_sq: CompensatedSum::default(),
            exits: 0,
            lag_sums: vec![CompensatedSum::default(); MAX_LAG + 1],
            lag_counts: vec![0; MAX_LAG + 1],
        }
    }

    /// Adds one path's series of deviations.
    pub fn push_series(&mut self, y: &[f64]) {
        for (t, &v) in y.iter().enumerate() {
            self.count += 1;
            self.sum.add(v);
            self.sum_sq.add(v * v);
            if (self.mean + v).abs() >= std::f64::consts::FRAC_PI_2 {
                self.exits += 1;
            }
            for l in 0..=MAX_LAG.min(t) {
                self.lag_sums[l].add(v * y[t - l]);
                self.lag_counts[l] += 1;
            }
        }
    }

    pub fn from_series(mean: f64, y: &[f64]) -> Self {
        let mut s = LineStats::new(mean);
        s.push_series(y);
        s
    }

    pub fn merge(&mut self, other: &LineStats) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.exits += other.exits;
        for l in 0..=MAX_LAG {
            self.lag_sums[l].merge(&other.lag_sums[l]);
            self.lag_counts[l] += other.lag_counts[l];
        }
    }

    pub fn sample_mean(&self) -> f64 {
        self.sum.value() / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.sample_mean();
        (self.sum_sq.value() / self.count as f64 - m * m).max(0.0)
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn autocorrelation(&self, lag: usize) -> f64 {
        let var = self.variance();
        if lag > MAX_LAG || self.lag_counts[lag] == 0 || var == 0.0 {
            return 0.0;
        }
        let m = self.sample_mean();
        (self.lag_sums[lag].value() / self.lag_counts[lag] as f64 - m * m) / var
    }

    /// Integrated autocorrelation time in samples, summed until the first
    /// non-positive lag or `MAX_LAG`; at least 1.
    pub fn autocorrelation_time(&self) -> f64 {
        let mut tau = 1.0;
        for l in 1..=MAX_LAG {
            let r = self.autocorrelation(l);
            if r <= 0.0 {
                break;
            }
            tau += 2.0 * r;
        }
        tau
    }

    pub fn effective_samples(&self) -> f64 {
        self.count as f64 / self.autocorrelation_time()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub lines: Vec<LineStats>,
    /// Empirical covariance of the line angle deviations.
    pub covariance: DMatrix<f64>,
}

/// Pointwise exit frequency of line `k` and a 95% Wilson half-width on the
/// effective sample count.
pub fn exit_frequency(report: &SimulationReport, k: usize) -> (f64, f64) {
    let s = &report.lines[k];
    if s.count == 0 {
        return (0.0, 0.0);
    }
    let p = s.exits as f64 / s.count as f64;
    let n = s.effective_samples();
    let z2 = 1.96f64 * 1.96;
    let half = 1.96 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (p, half)
}

struct PathOutput {
    series: Vec<Vec<f64>>,
}

struct Dynamics {
    n: usize,
    lines: Vec<(usize, usize)>,
    capacity: Vec<f64>,
    minv: Vec<f64>,
    damping: Vec<f64>,
    noise_scale: Vec<f64>,
    /// `−M⁻¹·lap`, row-major.
    coupling: Vec<f64>,
    p: Vec<f64>,
    theta_s: Vec<f64>,
    m: Vec<f64>,
}

impl Dynamics {
    fn run_path(&self, cfg: &SimulationConfig, path: u64) -> Result<PathOutput> {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(path);
        let steps = (cfg.horizon / cfg.dt).round() as usize;
        let burn = (cfg.burn_in / cfg.dt).round() as usize;
        let stride = cfg.stride();
        let sqdt = cfg.dt.sqrt();
        let mut theta = match cfg.model {
            Model::Linearized => vec![0.0; n],
            Model::Nonlinear => self.theta_s.clone(),
        };
        let mut omega = vec![0.0; n];
        let mut acc = vec![0.0; n];
        let mut series = vec![Vec::with_capacity((steps - burn) / stride + 1); self.lines.len()];
        for step in 1..=steps {
            match cfg.model {
                Model::Linearized => {
                    for i in 0..n {
                        let row = &self.coupling[i * n..(i + 1) * n];
                        let mut a = -self.minv[i] * self.damping[i] * omega[i];
                        for (c, th) in row.iter().zip(&theta) {
                            a += c * th;
                        }
                        acc[i] = a;
                    }
                }
                Model::Nonlinear => {
                    for i in 0..n {
                        acc[i] = self.p[i] - self.damping[i] * omega[i];
                    }
                    for (k, &(i, j)) in self.lines.iter().enumerate() {
                        let f = self.capacity[k] * (theta[i] - theta[j]).sin();
                        acc[i] -= f;
                        acc[j] += f;
                    }
                    for i in 0..n {
                        acc[i] *= self.minv[i];
                    }
                }
            }
            for i in 0..n {
                theta[i] += cfg.dt * omega[i];
                let xi: f64 = StandardNormal.sample(&mut rng);
                omega[i] += cfg.dt * acc[i] + self.noise_scale[i] * sqdt * xi;
            }
            if step % stride == 0 {
                if theta.iter().chain(&omega).any(|x| !(x.abs() <= BLOW_UP)) {
                    return Err(Error::BlowUp { time: step as f64 * cfg.dt });
                }
                if step > burn {
                    for (k, &(i, j)) in self.lines.iter().enumerate() {
                        let d = theta[i] - theta[j];
                        let dev = match cfg.model {
                            Model::Linearized => d,
                            Model::Nonlinear => d - self.m[k],
                        };
                        series[k].push(dev);
                    }
                }
            }
        }
        Ok(PathOutput { series })
    }
}

/// Simulates `cfg.paths` independent paths from the synchronous state at `p_s`.
///
/// Paths use disjoint streams of one ChaCha8 generator, so a seed and config
/// determine the report exactly regardless of thread count.
pub fn simulate(prob: &DispatchProblem, p_s: &[f64], cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let map = build_affine_map(prob)?;
    let state = solve_synchronous_state(&map, p_s)?;
    if !state.feasible {
        return Err(Error::Infeasible("synchronous state violates ‖v‖∞ < 1".into()));
    }
    let net = &prob.network;
    let n = net.node_count();
    let lap = laplacian(net, &state.angle_diffs);
    let minv: Vec<f64> = net.inertia.iter().map(|m| 1.0 / m).collect();
    let mut coupling = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            coupling[i * n + j] = -minv[i] * lap[(i, j)];
        }
    }
    let dynamics = Dynamics {
        n,
        lines: net.lines.clone(),
        capacity: net.capacity.clone(),
        noise_scale: net.noise.iter().zip(&minv).map(|(k, mi)| k * mi).collect(),
        minv,
        damping: net.damping.clone(),
        coupling,
        p: prob.injections(p_s),
        theta_s: state.theta.iter().copied().collect(),
        m: state.angle_diffs.iter().copied().collect(),
    };
    let outputs: Vec<Result<PathOutput>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|path| dynamics.run_path(cfg, path))
        .collect();
    let n_e = net.line_count();
    let mut lines: Vec<LineStats> = (0..n_e).map(|k| LineStats::new(state.angle_diffs[k])).collect();
    let mut cross = vec![CompensatedSum::default(); n_e * n_e];
    for out in outputs {
        let out = out?;
        for k in 0..n_e {
            let mut s = LineStats::new(state.angle_diffs[k]);
            s.push_series(&out.series[k]);
            lines[k].merge(&s);
        }
        let len = out.series.first().map_or(0, Vec::len);
        for t in 0..len {
            for a in 0..n_e {
                for b in a..n_e {
                    cross[a * n_e + b].add(out.series[a][t] * out.series[b][t]);
                }
            }
        }
    }
    let count = lines.first().map_or(0, |l| l.count) as f64;
    let means: Vec<f64> = lines.iter().map(LineStats::sample_mean).collect();
    let covariance = DMatrix::from_fn(n_e, n_e, |a, b| {
        let (lo, hi) = (a.min(b), a.max(b));
        cross[lo * n_e + hi].value() / count - means[a] * means[b]
    });
    Ok(SimulationReport { config: *cfg, lines, covariance })
}
