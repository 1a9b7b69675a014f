//! Diffusions `dX = σ(X) dB + b(X) dt`: declared structural constants,
//! Euler–Maruyama ensembles and synchronous coupling.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::measure::PathGrid;
use crate::stats::stream_rng;

/// Writes `b(x)` into the output slice.
pub type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
/// Writes `σ(x)` (`d × m`, row-major) into the output slice.
pub type DiffusionFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Declared constants of a diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeConstants {
    /// `sup_x ‖σ(x)‖_HS ≤ A`.
    pub a_hs: f64,
    /// One-sided drift bound: `⟨y − x, b(y) − b(x)⟩ ≤ B(1 + |y − x|²)` when `B ≥ 0`,
    /// `≤ B|y − x|²` when `B < 0`.
    pub b: f64,
    /// `|b(y) − b(x)| ≤ K|y − x|`.
    pub k: f64,
    /// `sup_x ‖σ(x)‖_op`.
    pub sigma_inf: f64,
    /// `½‖σ(x) − σ(x̃)‖²_HS + ⟨x − x̃, b(x) − b(x̃)⟩ ≤ −δ|x − x̃|²`.
    pub delta: f64,
}

/// How declared constants are spot-checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub pairs: usize,
    /// Points are drawn uniformly from `[−radius, radius]^d`.
    pub radius: f64,
    pub seed: u64,
}

impl Default for SpotCheck {
    fn default() -> Self {
        Self {
            pairs: 2000,
            radius: 10.0,
            seed: 0xC0FFEE,
        }
    }
}

/// A diffusion with drift, diffusion matrix and checked constants.
#[derive(Clone)]
pub struct SdeSpec {
    dim: usize,
    noise_dim: usize,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    constants: SdeConstants,
}

impl std::fmt::Debug for SdeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeSpec")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SdeSpec {
    /// Builds the diffusion and falsification-checks every declared constant on
    /// sampled points and pairs.
    pub fn new(
        dim: usize,
        noise_dim: usize,
        drift: Arc<DriftFn>,
        diffusion: Arc<DiffusionFn>,
        constants: SdeConstants,
        check: &SpotCheck,
    ) -> Result<Self> {
        if dim == 0 || noise_dim == 0 {
            return domain("dimensions must be positive");
        }
        let c = constants;
        if !(c.a_hs >= 0.0 && c.k >= 0.0 && c.sigma_inf >= 0.0) || !c.b.is_finite() || !c.delta.is_finite() {
            return domain(format!("invalid constants {c:?}"));
        }
        let spec = Self {
            dim,
            noise_dim,
            drift,
            diffusion,
            constants,
        };
        spec.spot_check(check)?;
        Ok(spec)
    }

    /// `dX = −θX dt + s dB` in `ℝ^d`.
    pub fn ornstein_uhlenbeck(theta: f64, s: f64, dim: usize) -> Result<Self> {
        Self::linear(DMatrix::identity(dim, dim) * -theta, DMatrix::identity(dim, dim) * s)
    }

    /// Standard Brownian motion in `ℝ^d`.
    pub fn brownian(dim: usize) -> Result<Self> {
        Self::linear(DMatrix::zeros(dim, dim), DMatrix::identity(dim, dim))
    }

    /// `b(x) = Mx`, constant `σ = S`; every constant is computed from `M` and `S`.
    pub fn linear(m: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || s.nrows() != m.nrows() || s.ncols() == 0 {
            return shape("M must be d×d and S must be d×m");
        }
        let d = m.nrows();
        let sym = (&m + m.transpose()) * 0.5;
        let top = sym.symmetric_eigenvalues().max();
        let constants = SdeConstants {
            a_hs: s.norm(),
            b: top,
            k: m.singular_values().max(),
            sigma_inf: s.singular_values().max(),
            delta: -top,
        };
        let noise_dim = s.ncols();
        let mm = m.clone();
        let drift: Arc<DriftFn> = Arc::new(move |x: &[f64], out: &mut [f64]| {
            for i in 0..d {
                out[i] = (0..d).map(|j| mm[(i, j)] * x[j]).sum();
            }
        });
        let flat: Vec<f64> = (0..d).flat_map(|i| (0..noise_dim).map(move |j| (i, j))).map(|(i, j)| s[(i, j)]).collect();
        let diffusion: Arc<DiffusionFn> = Arc::new(move |_x: &[f64], out: &mut [f64]| out.copy_from_slice(&flat));
        // constants are exact here; the check only guards against rounding surprises
        Self::new(d, noise_dim, drift, diffusion, constants, &SpotCheck { pairs: 64, ..SpotCheck::default() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn constants(&self) -> &SdeConstants {
        &self.constants
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    fn spot_check(&self, check: &SpotCheck) -> Result<()> {
        let (d, m) = (self.dim, self.noise_dim);
        let c = self.constants;
        let mut rng = stream_rng(check.seed, 0);
        let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
        let (mut sx, mut sy) = (vec![0.0; d * m], vec![0.0; d * m]);
        let tol = 1e-9;
        let fail = |what: &str, x: &[f64], y: &[f64], lhs: f64, rhs: f64| {
            Err(Error::ConstantViolation(format!(
                "{what}: {lhs:.6e} > {rhs:.6e} at x = {x:?}, y = {y:?}"
            )))
        };
        for k in 0..check.pairs {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-check.radius..=check.radius)).collect();
            // alternate far pairs and near pairs
            let scale = if k % 2 == 0 { check.radius } else { 10f64.powi(-((k % 7) as i32)) };
            let y: Vec<f64> = x.iter().map(|xi| xi + rng.random_range(-scale..=scale)).collect();
            self.drift(&x, &mut bx);
            self.drift(&y, &mut by);
            self.diffusion(&x, &mut sx);
            self.diffusion(&y, &mut sy);
            if bx.iter().chain(&by).chain(&sx).chain(&sy).any(|v| !v.is_finite()) {
                return Err(Error::ConstantViolation(format!("non-finite coefficients near {x:?}")));
            }
            let hs = dot(&sx, &sx).sqrt();
            if hs > c.a_hs * (1.0 + tol) + tol {
                return fail("‖σ‖_HS ≤ A", &x, &y, hs, c.a_hs);
            }
            let op = DMatrix::from_row_slice(d, m, &sx).singular_values().max();
            if op > c.sigma_inf * (1.0 + tol) + tol {
                return fail("‖σ‖_op ≤ sigma_inf", &x, &y, op, c.sigma_inf);
            }
            let dx: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let db: Vec<f64> = by.iter().zip(&bx).map(|(a, b)| a - b).collect();
            let ds: Vec<f64> = sy.iter().zip(&sx).map(|(a, b)| a - b).collect();
            let n2 = dot(&dx, &dx);
            let slack = tol * (1.0 + n2 + dot(&db, &db).sqrt() * n2.sqrt());
            let inner = dot(&dx, &db);
            let drift_rhs = if c.b >= 0.0 { c.b * (1.0 + n2) } else { c.b * n2 };
            if inner > drift_rhs + slack {
                return fail("one-sided drift bound B", &x, &y, inner, drift_rhs);
            }
            let lip = dot(&db, &db).sqrt();
            if lip > c.k * n2.sqrt() * (1.0 + tol) + slack {
                return fail("|b(y) − b(x)| ≤ K|y − x|", &x, &y, lip, c.k * n2.sqrt());
            }
            let dissip = 0.5 * dot(&ds, &ds) + inner;
            if dissip > -c.delta * n2 + slack {
                return fail("dissipativity δ", &x, &y, dissip, -c.delta * n2);
            }
        }
        Ok(())
    }

    /// One Euler–Maruyama step in place; `xi` holds `m` standard normals.
    fn em_step(&self, x: &mut [f64], xi: &[f64], dt: f64, b: &mut [f64], s: &mut [f64]) {
        let (d, m) = (self.dim, self.noise_dim);
        self.drift(x, b);
        self.diffusion(x, s);
        let sq = dt.sqrt();
        for i in 0..d {
            let noise: f64 = (0..m).map(|j| s[i * m + j] * xi[j]).sum();
            x[i] += b[i] * dt + noise * sq;
        }
    }
}

/// Step size, horizon, ensemble size and seed of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub shared_noise: bool,
}

impl SimConfig {
    /// Validates the configuration and returns the number of steps.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.dt < self.horizon) {
            return domain(format!("need 0 < dt < T, got dt={} T={}", self.dt, self.horizon));
        }
        if self.n_paths == 0 {
            return domain("n_paths must be at least 1");
        }
        let steps = (self.horizon / self.dt).round() as usize;
        if (steps as f64 * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return domain(format!("T = {} is not a multiple of dt = {}", self.horizon, self.dt));
        }
        Ok(steps)
    }

    pub fn grid(&self, dim: usize) -> Result<PathGrid> {
        PathGrid::uniform(self.horizon, self.steps()?, dim)
    }
}

fn stability_guard(sde: &SdeSpec, cfg: &SimConfig) -> Result<usize> {
    let steps = cfg.steps()?;
    if cfg.dt * sde.constants.k >= 0.5 {
        return domain(format!(
            "dt·K = {} violates the stability guard dt·K < 0.5",
            cfg.dt * sde.constants.k
        ));
    }
    Ok(steps)
}

fn check_start(sde: &SdeSpec, x: &[f64]) -> Result<()> {
    if x.len() != sde.dim {
        return shape(format!("start of dimension {}, diffusion of dimension {}", x.len(), sde.dim));
    }
    Ok(())
}

/// Stream offset used for the second start point when noise is not shared.
const INDEPENDENT_STREAM: u64 = 1 << 40;

/// Simulates one path into `out` (time-major), drawing noise from `rng`.
fn simulate_into(sde: &SdeSpec, x0: &[f64], steps: usize, dt: f64, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
    let (d, m) = (sde.dim, sde.noise_dim);
    let mut x = x0.to_vec();
    let (mut b, mut s, mut xi) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; m]);
    out[..d].copy_from_slice(&x);
    for k in 0..steps {
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        sde.em_step(&mut x, &xi, dt, &mut b, &mut s);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step: k + 1,
                detail: "Euler–Maruyama state is not finite".into(),
            });
        }
        out[(k + 1) * d..(k + 2) * d].copy_from_slice(&x);
    }
    Ok(())
}

/// Discrete paths sampled on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: PathGrid,
    /// Each path is time-major: `path[k * d + i]`.
    pub paths: Vec<Vec<f64>>,
}

impl PathEnsemble {
    /// Values of coordinate `i` at grid index `k` across paths.
    pub fn slice(&self, k: usize, i: usize) -> Vec<f64> {
        let d = self.grid.dimension();
        self.paths.iter().map(|p| p[k * d + i]).collect()
    }
}

/// Largest number of stored path samples.
pub const MAX_ENSEMBLE_VALUES: usize = 50_000_000;

/// `X_{k+1} = X_k + b(X_k)dt + σ(X_k)√dt·ξ_k`; path `p` draws its noise from
/// stream `p` of `cfg.seed`, so two calls with the same seed and different
/// starting points are synchronously coupled.
pub fn euler_maruyama(sde: &SdeSpec, x0: &[f64], cfg: &SimConfig) -> Result<PathEnsemble> {
    ensemble_with_offset(sde, x0, cfg, 0)
}

/// Ensembles from two starting points; with `cfg.shared_noise` both use the
/// same noise sequence path by path.
pub fn euler_maruyama_pair(
    sde: &SdeSpec,
    x: &[f64],
    x_tilde: &[f64],
    cfg: &SimConfig,
) -> Result<(PathEnsemble, PathEnsemble)> {
    let first = ensemble_with_offset(sde, x, cfg, 0)?;
    let offset = if cfg.shared_noise { 0 } else { INDEPENDENT_STREAM };
    let second = ensemble_with_offset(sde, x_tilde, cfg, offset)?;
    Ok((first, second))
}

fn ensemble_with_offset(sde: &SdeSpec, x0: &[f64], cfg: &SimConfig, offset: u64) -> Result<PathEnsemble> {
    check_start(sde, x0)?;
    let steps = stability_guard(sde, cfg)?;
    let grid = cfg.grid(sde.dim)?;
    let len = grid.path_len();
    let total = len as u128 * cfg.n_paths as u128;
    if total > MAX_ENSEMBLE_VALUES as u128 {
        return Err(Error::Capacity {
            what: "stored path ensemble",
            needed: total,
            limit: MAX_ENSEMBLE_VALUES as u128,
        });
    }
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(cfg.seed, offset + p as u64);
            let mut out = vec![0.0; len];
            simulate_into(sde, x0, steps, cfg.dt, &mut rng, &mut out)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble { grid, paths })
}

/// Applies `f(grid, path)` to every simulated path without storing the ensemble.
pub fn simulate_functional(
    sde: &SdeSpec,
    x0: &[f64],
    cfg: &SimConfig,
    f: &(dyn Fn(&PathGrid, &[f64]) -> f64 + Sync),
) -> Result<Vec<f64>> {
    check_start(sde, x0)?;
    let steps = stability_guard(sde, cfg)?;
    let grid = cfg.grid(sde.dim)?;
    let len = grid.path_len();
    (0..cfg.n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; len],
            |buf, p| {
                let mut rng = stream_rng(cfg.seed, p as u64);
                simulate_into(sde, x0, steps, cfg.dt, &mut rng, buf)?;
                Ok(f(&grid, buf))
            },
        )
        .collect()
}

/// Squared gap of a synchronous coupling against `|x − x̃|² e^{−2δt}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDecay {
    pub times: Vec<f64>,
    /// Mean of `|X_t(x) − X_t(x̃)|²` across paths.
    pub curve: Vec<f64>,
    pub std_err: Vec<f64>,
    pub bound: Vec<f64>,
    /// Multiplier `1 + 3·dt·K` allowing for discretization bias.
    pub allowance: f64,
    /// Largest `max − min` of the squared gap across paths at one time.
    pub spread: Vec<f64>,
    /// `max_t (curve − allowance·bound − 3·std_err)`; the check passes iff this is ≤ 0.
    pub max_excess: f64,
    pub pass: bool,
}

const CHUNK: usize = 256;

/// Runs both starting points with shared noise and compares the mean squared
/// gap with the exponential bound at every grid time.
pub fn coupling_decay(sde: &SdeSpec, x: &[f64], x_tilde: &[f64], cfg: &SimConfig) -> Result<CouplingDecay> {
    check_start(sde, x)?;
    check_start(sde, x_tilde)?;
    let delta = sde.constants.delta;
    if !(delta > 0.0) {
        return domain(format!("coupling decay needs δ > 0, declared δ = {delta}"));
    }
    if !cfg.shared_noise {
        return domain("coupling decay needs shared_noise = true");
    }
    let steps = stability_guard(sde, cfg)?;
    let grid = cfg.grid(sde.dim)?;
    let d = sde.dim;
    let len = grid.path_len();
    let nt = steps + 1;
    let chunks: Vec<(usize, usize)> = (0..cfg.n_paths)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(cfg.n_paths)))
        .collect();
    // per chunk and time: Welford (mean, M2), min and max
    type Partial = (usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
    let partials = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut mean = vec![0.0; nt];
            let mut m2 = vec![0.0; nt];
            let mut mn = vec![f64::INFINITY; nt];
            let mut mx = vec![f64::NEG_INFINITY; nt];
            let (mut a, mut b) = (vec![0.0; len], vec![0.0; len]);
            for (c, p) in (lo..hi).enumerate() {
                simulate_into(sde, x, steps, cfg.dt, &mut stream_rng(cfg.seed, p as u64), &mut a)?;
                simulate_into(sde, x_tilde, steps, cfg.dt, &mut stream_rng(cfg.seed, p as u64), &mut b)?;
                for k in 0..nt {
                    let g: f64 = (0..d).map(|i| (a[k * d + i] - b[k * d + i]).powi(2)).sum();
                    let delta_g = g - mean[k];
                    mean[k] += delta_g / (c + 1) as f64;
                    m2[k] += delta_g * (g - mean[k]);
                    mn[k] = mn[k].min(g);
                    mx[k] = mx[k].max(g);
                }
            }
            Ok((hi - lo, mean, m2, mn, mx))
        })
        .collect::<Result<Vec<Partial>>>()?;
    let n = cfg.n_paths as f64;
    let gap0: f64 = x.iter().zip(x_tilde).map(|(a, b)| (a - b).powi(2)).sum();
    let allowance = 1.0 + 3.0 * cfg.dt * sde.constants.k;
    let times = grid.times().to_vec();
    let mut curve = Vec::with_capacity(nt);
    let mut std_err = Vec::with_capacity(nt);
    let mut bound = Vec::with_capacity(nt);
    let mut spread = Vec::with_capacity(nt);
    let mut max_excess = f64::NEG_INFINITY;
    for k in 0..nt {
        // Chan et al. pairwise merge of the chunk statistics
        let (mut cnt, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
        for p in &partials {
            let (nb, mb, m2b) = (p.0 as f64, p.1[k], p.2[k]);
            let tot = cnt + nb;
            let dm = mb - mean;
            mean += dm * nb / tot;
            m2 += m2b + dm * dm * cnt * nb / tot;
            cnt = tot;
        }
        let lo = partials.iter().map(|p| p.3[k]).fold(f64::INFINITY, f64::min);
        let hi = partials.iter().map(|p| p.4[k]).fold(f64::NEG_INFINITY, f64::max);
        let var = if cfg.n_paths > 1 { m2 / (n - 1.0) } else { 0.0 };
        let se = (var / n).sqrt();
        let bd = gap0 * (-2.0 * delta * times[k]).exp();
        max_excess = max_excess.max(mean - allowance * bd - 3.0 * se);
        curve.push(mean);
        std_err.push(se);
        bound.push(bd);
        spread.push(hi - lo);
    }
    Ok(CouplingDecay {
        times,
        curve,
        std_err,
        bound,
        allowance,
        spread,
        max_excess,
        pass: max_excess <= 0.0,
    })
}
