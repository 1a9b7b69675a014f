//! Random dynamical systems `X_{n+1} = F(X_n, W_{n+1})`, Euler–Maruyama
//! simulation of diffusions, synchronous-coupling decay and empirical tails
//! compared against concentration bounds.

mod sde;
mod tail;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::measure::stable_sum;
use crate::stats::{stream_rng, Estimate};

pub use sde::{
    coupling_decay, euler_maruyama, euler_maruyama_pair, simulate_functional, CouplingDecay,
    PathEnsemble, SdeConstants, SdeSpec, SimConfig, SpotCheck,
};
pub use tail::{
    chain_additive_mean, chain_functional_samples, sde_time_average_samples, tail_vs_bound,
    BoundSpec, Centering, TailRow, TailTable,
};

/// Map `(x, w, out)` writing `F(x, w)` into `out`.
pub type MapFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// Fills a noise vector.
pub type NoiseFn = dyn Fn(&mut ChaCha8Rng, &mut [f64]) + Send + Sync;

/// `X_{n+1} = F(X_n, W_{n+1})` on `ℝ^d` with i.i.d. noise.
#[derive(Clone)]
pub struct RandomMapSystem {
    dim: usize,
    noise_dim: usize,
    map: Arc<MapFn>,
    noise: Arc<NoiseFn>,
    linear: Option<DMatrix<f64>>,
}

impl std::fmt::Debug for RandomMapSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RandomMapSystem")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("linear", &self.linear)
            .finish_non_exhaustive()
    }
}

impl RandomMapSystem {
    pub fn new(dim: usize, noise_dim: usize, map: Arc<MapFn>, noise: Arc<NoiseFn>) -> Result<Self> {
        if dim == 0 {
            return domain("state dimension must be positive");
        }
        Ok(Self {
            dim,
            noise_dim,
            map,
            noise,
            linear: None,
        })
    }

    /// `X_{n+1} = A X_n + W` with `W ~ N(0, scale²·I)` (`scale = 0` removes the noise).
    pub fn linear(a: DMatrix<f64>, noise_scale: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return shape("A must be a nonempty square matrix");
        }
        if !(noise_scale >= 0.0) {
            return domain("noise scale must be nonnegative");
        }
        let d = a.nrows();
        let mat = a.clone();
        let map: Arc<MapFn> = Arc::new(move |x: &[f64], w: &[f64], out: &mut [f64]| {
            for i in 0..d {
                let mut s = w[i];
                for j in 0..d {
                    s += mat[(i, j)] * x[j];
                }
                out[i] = s;
            }
        });
        Ok(Self {
            dim: d,
            noise_dim: d,
            map,
            noise: gaussian_noise(noise_scale),
            linear: Some(a),
        })
    }

    /// `F(x, w) = c + w`, independent of the state.
    pub fn constant(c: Vec<f64>, noise_scale: f64) -> Result<Self> {
        let d = c.len();
        let map: Arc<MapFn> = Arc::new(move |_x: &[f64], w: &[f64], out: &mut [f64]| {
            for i in 0..d {
                out[i] = c[i] + w[i];
            }
        });
        Self::new(d, d, map, gaussian_noise(noise_scale))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        self.linear.as_ref()
    }

    pub fn draw_noise(&self, rng: &mut ChaCha8Rng, w: &mut [f64]) {
        (self.noise)(rng, w)
    }

    /// `F(x, w)`, rejecting non-finite output.
    pub fn step(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        (self.map)(x, w, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step: 0,
                detail: format!("F({x:?}, w) is not finite"),
            });
        }
        Ok(())
    }
}

/// Standard Gaussian noise scaled by `scale`.
pub fn gaussian_noise(scale: f64) -> Arc<NoiseFn> {
    Arc::new(move |rng: &mut ChaCha8Rng, w: &mut [f64]| {
        for v in w.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = scale * z;
        }
    })
}

/// Operator norm (largest singular value) and spectral radius of a square matrix.
pub fn norm_vs_spectral_radius(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !a.is_square() || a.nrows() == 0 {
        return shape("expected a nonempty square matrix");
    }
    if a.iter().any(|v| !v.is_finite()) {
        return domain("matrix entries must be finite");
    }
    let op = a.singular_values().max();
    let rho = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok((op, rho))
}

/// Monte Carlo estimate at one starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTailPoint {
    pub x: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    pub divergent: bool,
}

/// Estimates of `sup_x E e^{δ|F(x, W) − F(x, W')|²}` over a grid of starting points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTail {
    /// `None` when some grid point diverges.
    pub sup: Option<f64>,
    pub divergent: bool,
    pub per_x: Vec<NoiseTailPoint>,
}

/// A Monte Carlo mean of `e^{δ|·|²}` is declared divergent when it is not
/// finite or when its relative standard error exceeds this value: for heavy
/// tails with infinite mean the relative error does not shrink with the
/// sample size, while finite-mean cases settle well below it at 10⁵ pairs.
pub const DIVERGENCE_REL_SE: f64 = 0.05;

/// For each grid point, the Monte Carlo mean of `e^{δ|F(x, W) − F(x, W')|²}`
/// over i.i.d. noise pairs, and the supremum over the grid.
pub fn noise_tail_condition(
    sys: &RandomMapSystem,
    delta: f64,
    x_grid: &[Vec<f64>],
    n_mc: usize,
    seed: u64,
) -> Result<NoiseTail> {
    if !(delta > 0.0) {
        return domain(format!("δ = {delta} must be positive"));
    }
    if n_mc < 2 {
        return domain("need at least two noise pairs");
    }
    let d = sys.dim();
    let per_x = x_grid
        .par_iter()
        .enumerate()
        .map(|(g, x)| {
            if x.len() != d {
                return shape(format!("grid point of dimension {}, system has {d}", x.len()));
            }
            let mut rng = stream_rng(seed, g as u64);
            let mut w1 = vec![0.0; sys.noise_dim()];
            let mut w2 = vec![0.0; sys.noise_dim()];
            let mut y1 = vec![0.0; d];
            let mut y2 = vec![0.0; d];
            let mut vals = Vec::with_capacity(n_mc);
            for _ in 0..n_mc {
                sys.draw_noise(&mut rng, &mut w1);
                sys.draw_noise(&mut rng, &mut w2);
                sys.step(x, &w1, &mut y1)?;
                sys.step(x, &w2, &mut y2)?;
                let dist2: f64 = y1.iter().zip(&y2).map(|(a, b)| (a - b) * (a - b)).sum();
                vals.push((delta * dist2).exp());
            }
            let est = Estimate::from_samples(&vals);
            let divergent = !est.mean.is_finite()
                || !est.std_err.is_finite()
                || est.std_err > DIVERGENCE_REL_SE * est.mean;
            Ok(NoiseTailPoint {
                x: x.clone(),
                mean: est.mean,
                std_err: est.std_err,
                divergent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let divergent = per_x.iter().any(|p| p.divergent);
    let sup = (!divergent).then(|| per_x.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max));
    Ok(NoiseTail {
        sup,
        divergent,
        per_x,
    })
}

/// One-step and summed `L¹` contraction estimates under shared noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Contraction {
    pub r_hat: f64,
    pub s_hat: f64,
    /// The last summed term exceeds `10⁻⁶·S_hat`: the truncated sum may be short.
    pub truncated: bool,
    /// Per pair: `E|X_n(x) − X_n(x̃)| / |x − x̃|` for `n = 1..=N`.
    pub ratios: Vec<Vec<f64>>,
}

/// `r_hat = max_pairs E|F(x, W) − F(x̃, W)| / |x − x̃|` and
/// `S_hat = max_pairs Σ_{n≤N} E|X_n(x) − X_n(x̃)| / |x − x̃|`, both paths driven by the same noise.
pub fn l1_contraction_estimate(
    sys: &RandomMapSystem,
    pairs: &[(Vec<f64>, Vec<f64>)],
    horizon: usize,
    n_mc: usize,
    seed: u64,
) -> Result<L1Contraction> {
    if horizon == 0 || n_mc == 0 {
        return domain("horizon and sample count must be positive");
    }
    let d = sys.dim();
    let ratios = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (x, y))| {
            if x.len() != d || y.len() != d {
                return shape("pair dimension does not match the system");
            }
            let d0 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d0 == 0.0 {
                return domain("pairs must be distinct");
            }
            let mut sums = vec![Vec::with_capacity(n_mc); horizon];
            let mut w = vec![0.0; sys.noise_dim()];
            let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
            let (mut na, mut nb) = (vec![0.0; d], vec![0.0; d]);
            for m in 0..n_mc {
                let mut rng = stream_rng(seed, ((k as u64) << 32) | m as u64);
                a.copy_from_slice(x);
                b.copy_from_slice(y);
                for slot in sums.iter_mut() {
                    sys.draw_noise(&mut rng, &mut w);
                    sys.step(&a, &w, &mut na)?;
                    sys.step(&b, &w, &mut nb)?;
                    std::mem::swap(&mut a, &mut na);
                    std::mem::swap(&mut b, &mut nb);
                    let dist = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                    slot.push(dist);
                }
            }
            Ok(sums
                .into_iter()
                .map(|v| stable_sum(v) / n_mc as f64 / d0)
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let r_hat = ratios.iter().map(|r| r[0]).fold(0.0, f64::max);
    let (mut s_hat, mut last) = (0.0f64, 0.0f64);
    for r in &ratios {
        let s = stable_sum(r.iter().copied());
        if s >= s_hat {
            s_hat = s;
            last = *r.last().expect("horizon ≥ 1");
        }
    }
    let tail_max = ratios.iter().map(|r| *r.last().expect("horizon ≥ 1")).fold(last, f64::max);
    Ok(L1Contraction {
        r_hat,
        s_hat,
        truncated: tail_max > 1e-6 * s_hat,
        ratios,
    })
}

/// `C·K² / (1 − r)²`.
pub fn discrete_sde_t2_constant(c: f64, k: f64, r: f64) -> Result<f64> {
    if !(r < 1.0) {
        return Err(Error::ContractionViolation { r });
    }
    if !(c > 0.0) || !(k >= 0.0) || !(r >= 0.0) {
        return domain(format!("need C > 0, K ≥ 0, r ≥ 0; got C={c}, K={k}, r={r}"));
    }
    Ok(c * k * k / ((1.0 - r) * (1.0 - r)))
}

/// Covariance of `(X_1, …, X_n)` for `X_{k+1} = a X_k + σW_{k+1}`, `X_0 = 0`.
pub fn ar1_path_covariance(a: f64, sigma: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        // Σ_{m=0}^{lo} a^{hi−m} a^{lo−m}
        (0..=lo)
            .map(|m| a.powi((hi - m) as i32) * a.powi((lo - m) as i32))
            .sum::<f64>()
            * sigma
            * sigma
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_lambda_max(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

/// `F(x) = f0 + ⟨c, x⟩ + ½ xᵀMx` on `(ℝ^d)^n` flattened to one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub f0: f64,
    pub c: DVector<f64>,
    pub m: Option<DMatrix<f64>>,
}

impl QuadraticForm {
    pub fn constant(f0: f64, dim: usize) -> Self {
        Self {
            f0,
            c: DVector::zeros(dim),
            m: None,
        }
    }

    pub fn linear(c: DVector<f64>) -> Self {
        Self { f0: 0.0, c, m: None }
    }

    pub fn quadratic(m: DMatrix<f64>) -> Self {
        let dim = m.nrows();
        Self {
            f0: 0.0,
            c: DVector::zeros(dim),
            m: Some(m),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.f0 + self.c.dot(x);
        if let Some(m) = &self.m {
            v += 0.5 * x.dot(&(m * x));
        }
        v
    }
}

/// `QF(x) = inf_y (F(x + y) + ½|y|²)` in closed form: with `g = c + Mx`,
/// `QF(x) = F(x) − ½ gᵀ(I + M)⁻¹g`. Requires `I + M` positive definite.
pub fn inf_convolution(f: &QuadraticForm, x: &DVector<f64>) -> Result<f64> {
    let dim = f.c.len();
    if x.len() != dim {
        return shape(format!("point of dimension {}, form of dimension {dim}", x.len()));
    }
    match &f.m {
        None => Ok(f.eval(x) - 0.5 * f.c.norm_squared()),
        Some(m) => {
            if m.nrows() != dim || m.ncols() != dim {
                return shape("quadratic part must be square and match c");
            }
            let sym = (m + m.transpose()) * 0.5;
            let g = &f.c + &sym * x;
            let shifted = DMatrix::identity(dim, dim) + &sym;
            let chol = shifted
                .cholesky()
                .ok_or_else(|| Error::Domain("I + M is not positive definite: infimum is −∞".into()))?;
            let sol = chol.solve(&g);
            Ok(f.eval(x) - 0.5 * g.dot(&sol))
        }
    }
}
