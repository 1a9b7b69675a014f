//! Gaussian path laws and diffusion path space: covariance spectra,
//! Girsanov entropy, Cameron–Martin shifts and functional inequalities
//! derived from path-space transport constants.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::PathEnsemble;
use crate::error::{domain, shape, Error, Result};
use crate::measure::{path_distance, stable_sum, PathGrid, PathMetric};
use crate::stats::{gauss_hermite_normal, gauss_legendre, Estimate};

/// Most negative eigenvalue accepted before a discretized kernel is declared indefinite.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Relative change between the last two refinements below which a spectrum is converged.
pub const REFINEMENT_RTOL: f64 = 1e-4;

pub type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelLabel {
    Wiener,
    Ou,
    Custom,
}

/// Symmetric covariance function on `[0, T]²`.
#[derive(Clone)]
pub struct CovarianceKernel {
    label: KernelLabel,
    horizon: f64,
    k: Arc<KernelFn>,
}

impl fmt::Debug for CovarianceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovarianceKernel")
            .field("label", &self.label)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl CovarianceKernel {
    /// `min(s, t)`.
    pub fn wiener(horizon: f64) -> Result<Self> {
        Self::build(KernelLabel::Wiener, horizon, Arc::new(|s: f64, t: f64| s.min(t)))
    }

    /// Covariance of `dX = −θX dt + σ dB`, `X_0 = 0`:
    /// `σ²/(2θ)·(e^{−θ|t−s|} − e^{−θ(s+t)})`. With `θ = 1/2, σ = 1` the
    /// stationary part is `e^{−|t−s|/2}`.
    pub fn ou(theta: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !(theta > 0.0) || !(sigma > 0.0) {
            return domain(format!("OU kernel needs θ > 0 and σ > 0, got θ={theta}, σ={sigma}"));
        }
        let scale = sigma * sigma / (2.0 * theta);
        Self::build(
            KernelLabel::Ou,
            horizon,
            Arc::new(move |s: f64, t: f64| scale * ((-theta * (t - s).abs()).exp() - (-theta * (s + t)).exp())),
        )
    }

    /// Any symmetric kernel; symmetry is spot-checked on a 33×33 grid.
    pub fn custom(horizon: f64, k: Arc<KernelFn>) -> Result<Self> {
        Self::build(KernelLabel::Custom, horizon, k)
    }

    fn build(label: KernelLabel, horizon: f64, k: Arc<KernelFn>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return domain(format!("horizon {horizon} must be positive and finite"));
        }
        let m = 32;
        for i in 0..=m {
            for j in 0..i {
                let (s, t) = (horizon * i as f64 / m as f64, horizon * j as f64 / m as f64);
                let (a, b) = (k(s, t), k(t, s));
                if !a.is_finite() || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::Kernel(format!("k({s}, {t}) = {a} but k({t}, {s}) = {b}")));
                }
            }
        }
        Ok(Self { label, horizon, k })
    }

    pub fn label(&self) -> KernelLabel {
        self.label
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        (self.k)(s, t)
    }

    /// `⟨K·1, 1⟩ / T = (1/T)∫∫ k`, by composite Gauss–Legendre on the two
    /// triangles either side of the diagonal, where `k` may have a kink.
    pub fn rayleigh_indicator(&self) -> f64 {
        let t_end = self.horizon;
        let (panels, order) = (64, 16);
        let (gx, gw) = gauss_legendre(order, 0.0, 1.0);
        let composite = |a: f64, b: f64| -> Vec<(f64, f64)> {
            let h = (b - a) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let lo = a + p as f64 * h;
                    gx.iter().zip(&gw).map(move |(x, w)| (lo + x * h, w * h))
                })
                .collect()
        };
        let mut terms = Vec::with_capacity(panels * order);
        for (s, ws) in composite(0.0, t_end) {
            let lower: Vec<f64> = composite(0.0, s).into_iter().map(|(t, wt)| wt * self.eval(s, t)).collect();
            let upper: Vec<f64> = composite(s, t_end).into_iter().map(|(t, wt)| wt * self.eval(s, t)).collect();
            terms.push(ws * (stable_sum(lower) + stable_sum(upper)));
        }
        stable_sum(terms) / t_end
    }
}

/// Top of the spectrum of a covariance operator on `L²[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub label: KernelLabel,
    pub horizon: f64,
    pub n: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub rayleigh_indicator: f64,
    /// `(N, λ_max)` at `N/4`, `N/2` and `N` grid intervals.
    pub refinement_history: Vec<(usize, f64)>,
    /// Relative change between the last two refinements is below [`REFINEMENT_RTOL`].
    pub converged: bool,
}

/// Extreme eigenvalues of the symmetrized trapezoid Nyström matrix
/// `W^{1/2} K W^{1/2}` on `n + 1` equally spaced nodes.
pub fn nystrom_extremes(kernel: &CovarianceKernel, n: usize) -> Result<(f64, f64)> {
    let grid = PathGrid::uniform(kernel.horizon, n, 1)?;
    let t = grid.times();
    let sw: Vec<f64> = grid.trapezoid_weights().iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(t.len(), t.len(), |i, j| sw[i] * kernel.eval(t[i], t[j]) * sw[j]);
    let eig = SymmetricEigen::new(m);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !max.is_finite() || !min.is_finite() {
        return Err(Error::Kernel("non-finite eigenvalue".into()));
    }
    Ok((max, min))
}

pub fn operator_spectrum(kernel: &CovarianceKernel, n: usize) -> Result<SpectrumResult> {
    if n < 16 {
        return domain(format!("grid size {n} below 16"));
    }
    let mut history = Vec::with_capacity(3);
    let mut lambda_min = 0.0;
    for size in [n / 4, n / 2, n] {
        let (max, min) = nystrom_extremes(kernel, size)?;
        if min < -PSD_TOLERANCE {
            return Err(Error::Kernel(format!(
                "discretized kernel at N = {size} has eigenvalue {min:e}"
            )));
        }
        history.push((size, max));
        lambda_min = min;
    }
    let lambda_max = history[2].1;
    let prev = history[1].1;
    Ok(SpectrumResult {
        label: kernel.label,
        horizon: kernel.horizon,
        n,
        lambda_max,
        lambda_min,
        rayleigh_indicator: kernel.rayleigh_indicator(),
        converged: (lambda_max - prev).abs() <= REFINEMENT_RTOL * lambda_max.abs(),
        refinement_history: history,
    })
}

/// `α²(T, K, B)`: `2(1 + K²/B²)` for `B < 0`, `2(1 + K²T²/2)` for `B = 0`,
/// `2(1 + K²e^{2BT}/(2B²))` for `B > 0`. Requires `|B| ≤ K`.
pub fn alpha_squared(t: f64, k: f64, b: f64) -> Result<f64> {
    if !(t > 0.0) || !(k >= 0.0) || !b.is_finite() {
        return domain(format!("need T > 0, K ≥ 0, finite B; got T={t}, K={k}, B={b}"));
    }
    if b.abs() > k {
        return domain(format!("|B| = {} exceeds K = {k}", b.abs()));
    }
    let k2 = k * k;
    Ok(if b < 0.0 {
        2.0 * (1.0 + k2 / (b * b))
    } else if b == 0.0 {
        2.0 * (1.0 + k2 * t * t / 2.0)
    } else {
        2.0 * (1.0 + k2 * (2.0 * b * t).exp() / (2.0 * b * b))
    })
}

/// Operator-norm growth that counts as blow-up in [`jacobian_ode`].
pub const JACOBIAN_BLOWUP: f64 = 1e12;

/// `J(s, t)` solving `∂_t J = ∇b(t)·J`, `J(s, s) = I`, by classical RK4 over
/// the grid steps between indices `from` and `to`.
pub fn jacobian_ode(
    gradient: &dyn Fn(f64) -> DMatrix<f64>,
    grid: &PathGrid,
    from: usize,
    to: usize,
) -> Result<DMatrix<f64>> {
    if from > to || to >= grid.len() {
        return domain(format!("need from ≤ to < {}, got {from}, {to}", grid.len()));
    }
    let d = gradient(grid.times()[from]).nrows();
    let mut j = DMatrix::<f64>::identity(d, d);
    for k in from..to {
        let (t, h) = (grid.times()[k], grid.step(k));
        let a0 = gradient(t);
        let am = gradient(t + 0.5 * h);
        let a1 = gradient(t + h);
        if a0.shape() != (d, d) || am.shape() != (d, d) || a1.shape() != (d, d) {
            return shape("gradient field changed shape");
        }
        let k1 = &a0 * &j;
        let k2 = &am * (&j + &k1 * (0.5 * h));
        let k3 = &am * (&j + &k2 * (0.5 * h));
        let k4 = &a1 * (&j + &k3 * h);
        j += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let norm = j.norm();
        if !(norm <= JACOBIAN_BLOWUP) {
            return Err(Error::BlowUp {
                step: k + 1,
                detail: format!("Jacobian norm {norm:e}"),
            });
        }
    }
    Ok(j)
}

/// `½·mean_paths ∫_0^T |β_t|² dt` (trapezoidal). One path gives the
/// deterministic-drift entropy; several give the ensemble mean.
pub fn girsanov_entropy(beta: &[Vec<f64>], grid: &PathGrid) -> Result<f64> {
    if beta.is_empty() {
        return domain("no drift paths");
    }
    let d = grid.dimension();
    let mut per_path = Vec::with_capacity(beta.len());
    for path in beta {
        if path.len() != grid.path_len() {
            return shape(format!("drift path has {} samples, grid expects {}", path.len(), grid.path_len()));
        }
        let sq: Vec<f64> = (0..grid.len())
            .map(|k| path[k * d..(k + 1) * d].iter().map(|v| v * v).sum())
            .collect();
        let v = 0.5 * grid.integrate(&sq);
        if !v.is_finite() {
            return domain("drift is not square-integrable on the grid");
        }
        per_path.push(v);
    }
    Ok(stable_sum(per_path) / beta.len() as f64)
}

/// `½ mᵀΣ⁻¹m`: relative entropy between `N(m, Σ)` and `N(0, Σ)`.
pub fn gaussian_shift_kl(m: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    if cov.nrows() != m.len() || cov.ncols() != m.len() {
        return shape(format!("covariance is {}×{}, mean has {}", cov.nrows(), cov.ncols(), m.len()));
    }
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
    let mv = DVector::from_column_slice(m);
    let x = chol.solve(&mv);
    Ok(0.5 * mv.dot(&x))
}

/// `min(t_i, t_j)` over the grid nodes after `t = 0`.
pub fn brownian_covariance(grid: &PathGrid) -> DMatrix<f64> {
    let t = &grid.times()[1..];
    DMatrix::from_fn(t.len(), t.len(), |i, j| t[i].min(t[j]))
}

/// Two-sided certificate for `W_2^{d_H}(P, P(· − h)) = ‖h‖_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftCertificate {
    /// Cost of the translation coupling `X ↦ X + h`.
    pub upper: f64,
    /// Mean displacement `‖E(X + h) − E X‖_H`, a lower bound for any coupling by Jensen.
    pub lower: f64,
}

/// `h` is time-major on `grid` and must start at 0. The upper bound sums squared
/// increments; the lower bound evaluates `hᵀQh` with the tridiagonal precision
/// matrix `Q` of Brownian motion on the grid nodes.
pub fn shift_w2_certificate(h: &[f64], grid: &PathGrid) -> Result<ShiftCertificate> {
    if h.len() != grid.path_len() {
        return shape(format!("path has {} samples, grid expects {}", h.len(), grid.path_len()));
    }
    let d = grid.dimension();
    if h[..d].iter().any(|v| *v != 0.0) {
        return domain("Cameron–Martin paths start at 0");
    }
    if h.iter().any(|v| !v.is_finite()) {
        return domain("path has non-finite values");
    }
    let zero = vec![0.0; h.len()];
    let upper = path_distance(h, &zero, grid, PathMetric::CameronMartin)?;

    let n = grid.steps();
    let inv: Vec<f64> = (0..n).map(|k| 1.0 / grid.step(k)).collect();
    let mut terms = Vec::with_capacity(2 * n * d);
    for c in 0..d {
        let x = |k: usize| h[k * d + c];
        for i in 1..=n {
            let diag = inv[i - 1] + if i < n { inv[i] } else { 0.0 };
            terms.push(diag * x(i) * x(i));
            if i < n {
                terms.push(-2.0 * inv[i] * x(i) * x(i + 1));
            }
        }
    }
    let lower = stable_sum(terms).max(0.0).sqrt();
    Ok(ShiftCertificate { upper, lower })
}

/// Transport constants of a dissipative diffusion's path and marginal laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathT2Constants {
    /// `‖σ‖²_∞/δ²` for the path law under the `L²` metric.
    pub c_path: f64,
    /// `‖σ‖²_∞/(2δ)` for the time-`T` marginal.
    pub c_marginal: f64,
    /// `(1 − e^{(ε−2δ)T})‖σ‖²_∞/(ε(2δ − ε))`, the path-law constant for a given `ε`.
    pub eps_coefficient: f64,
    /// `sup_{t≤T} e^{(ε−2δ)t}‖σ‖²_∞/ε = ‖σ‖²_∞/ε`, the marginal constant for that `ε`.
    pub marginal_eps_coefficient: f64,
}

pub fn pathspace_t2_constants(sigma_inf: f64, delta: f64, t: f64, eps: f64) -> Result<PathT2Constants> {
    if !(delta > 0.0) || !(sigma_inf > 0.0) || !(t > 0.0) {
        return domain(format!("need δ, ‖σ‖_∞, T > 0; got δ={delta}, σ={sigma_inf}, T={t}"));
    }
    if !(eps > 0.0 && eps < 2.0 * delta) {
        return domain(format!("ε = {eps} outside (0, 2δ) = (0, {})", 2.0 * delta));
    }
    let s2 = sigma_inf * sigma_inf;
    Ok(PathT2Constants {
        c_path: s2 / (delta * delta),
        c_marginal: s2 / (2.0 * delta),
        eps_coefficient: -((eps - 2.0 * delta) * t).exp_m1() * s2 / (eps * (2.0 * delta - eps)),
        marginal_eps_coefficient: s2 / eps,
    })
}

/// A one-dimensional law on which a Poincaré inequality is tested.
#[derive(Debug, Clone, Copy)]
pub enum Marginal<'a> {
    /// `N(mean, variance)`, integrated by 64-point Gauss–Hermite.
    Gaussian { mean: f64, variance: f64 },
    /// Monte Carlo sample.
    Samples(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareResult {
    pub variance: f64,
    /// `C·E|g'|²`.
    pub dirichlet: f64,
    /// Standard error of `variance − dirichlet` (zero for quadrature).
    pub std_err: f64,
    pub pass: bool,
}

/// `Var(g) ≤ C·E|g'|²`, passing within 3 standard errors.
pub fn poincare_check(
    marginal: Marginal<'_>,
    g: &dyn Fn(f64) -> f64,
    grad: &dyn Fn(f64) -> f64,
    c: f64,
) -> Result<PoincareResult> {
    if !(c >= 0.0) {
        return domain(format!("constant {c} must be nonnegative"));
    }
    let (variance, dirichlet, std_err) = match marginal {
        Marginal::Gaussian { mean, variance } => {
            if !(variance >= 0.0) {
                return domain("negative variance");
            }
            let (x, w) = gauss_hermite_normal(64);
            let sd = variance.sqrt();
            let ys: Vec<f64> = x.iter().map(|z| mean + sd * z).collect();
            let m = stable_sum(ys.iter().zip(&w).map(|(y, w)| w * g(*y)));
            let var = stable_sum(ys.iter().zip(&w).map(|(y, w)| w * (g(*y) - m).powi(2)));
            let dir = stable_sum(ys.iter().zip(&w).map(|(y, w)| w * grad(*y).powi(2)));
            (var, c * dir, 0.0)
        }
        Marginal::Samples(ys) => {
            if ys.len() < 2 {
                return domain("need at least two samples");
            }
            let gs: Vec<f64> = ys.iter().map(|y| g(*y)).collect();
            let m = stable_sum(gs.iter().copied()) / gs.len() as f64;
            let sq: Vec<f64> = gs.iter().map(|v| (v - m).powi(2)).collect();
            let dir: Vec<f64> = ys.iter().map(|y| c * grad(*y).powi(2)).collect();
            let diff: Vec<f64> = sq.iter().zip(&dir).map(|(a, b)| a - b).collect();
            let n = ys.len() as f64;
            let var = stable_sum(sq) / (n - 1.0);
            (var, stable_sum(dir) / n, Estimate::from_samples(&diff).std_err)
        }
    };
    if !variance.is_finite() || !dirichlet.is_finite() {
        return domain("test function moments are not finite");
    }
    Ok(PoincareResult {
        variance,
        dirichlet,
        std_err,
        pass: variance <= dirichlet + 3.0 * std_err + 1e-12 * (1.0 + dirichlet.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsirelsonResult {
    /// `E exp(ρ·sup_h[⟨γ, h⟩ − |h|²_G/2])`.
    pub lhs: f64,
    /// `exp(ρ·E sup_h⟨γ, h⟩)`.
    pub rhs: f64,
    /// Relative Monte Carlo error of `lhs` (zero for quadrature).
    pub rel_err: f64,
    pub pass: bool,
}

/// Exponent above which `exp` is refused.
const EXP_GUARD: f64 = 700.0;

fn guarded_exp(x: f64) -> Result<f64> {
    if x > EXP_GUARD {
        return Err(Error::BlowUp {
            step: 0,
            detail: format!("exponent {x} overflows"),
        });
    }
    Ok(x.exp())
}

/// Monte Carlo check over a finite set `K` of grid paths, with
/// `⟨γ, h⟩ = ∫ γ·h dt` and `|h|_G` the `L²[0, T]` norm (both trapezoidal).
pub fn tsirelson_check(k_set: &[Vec<f64>], ensemble: &PathEnsemble, rho: f64) -> Result<TsirelsonResult> {
    let grid = &ensemble.grid;
    if k_set.is_empty() || ensemble.paths.len() < 2 {
        return domain("need a nonempty K and at least two paths");
    }
    if !(rho > 0.0) {
        return domain(format!("ρ = {rho} must be positive"));
    }
    let d = grid.dimension();
    let w = grid.trapezoid_weights();
    let pair = |a: &[f64], b: &[f64]| stable_sum((0..a.len()).map(|i| w[i / d] * a[i] * b[i]));
    for h in k_set {
        if h.len() != grid.path_len() {
            return shape(format!("K path has {} samples, grid expects {}", h.len(), grid.path_len()));
        }
    }
    let half_norms: Vec<f64> = k_set.iter().map(|h| 0.5 * pair(h, h)).collect();
    let mut exps = Vec::with_capacity(ensemble.paths.len());
    let mut sups = Vec::with_capacity(ensemble.paths.len());
    for gamma in &ensemble.paths {
        let inner: Vec<f64> = k_set.iter().map(|h| pair(gamma, h)).collect();
        let z = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let penalized = inner
            .iter()
            .zip(&half_norms)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        exps.push(guarded_exp(rho * penalized)?);
        sups.push(z);
    }
    let lhs = Estimate::from_samples(&exps);
    let mean_z = stable_sum(sups.iter().copied()) / sups.len() as f64;
    let rhs = guarded_exp(rho * mean_z)?;
    let rel_err = if lhs.mean > 0.0 { lhs.std_err / lhs.mean } else { 0.0 };
    Ok(TsirelsonResult {
        lhs: lhs.mean,
        rhs,
        rel_err,
        pass: lhs.mean <= rhs * (1.0 + 3.0 * rel_err),
    })
}

/// `Var⟨γ, h⟩ = ∫∫ h(s)k(s, t)h(t)` with trapezoid weights on `grid` (scalar paths).
pub fn pairing_variance(kernel: &CovarianceKernel, h: &[f64], grid: &PathGrid) -> Result<f64> {
    if grid.dimension() != 1 || h.len() != grid.len() {
        return shape("pairing variance needs a scalar path on the grid");
    }
    let t = grid.times();
    let w = grid.trapezoid_weights();
    let wh: Vec<f64> = w.iter().zip(h).map(|(a, b)| a * b).collect();
    let v = stable_sum((0..t.len()).flat_map(|i| {
        let wh = &wh;
        (0..t.len()).map(move |j| wh[i] * kernel.eval(t[i], t[j]) * wh[j])
    }));
    Ok(v.max(0.0))
}

/// Exact check for `K = {h}` (`symmetric = false`) or `K = {h, −h}` for a
/// centred Gaussian path law with covariance `kernel`. With `v = Var⟨γ, h⟩`
/// and `a = |h|²_G`, the singleton case is the closed-form Gaussian MGF and
/// the pair case integrates `e^{ρ|x|}` against `N(0, v)` by Gauss–Legendre.
pub fn tsirelson_quadrature(
    kernel: &CovarianceKernel,
    h: &[f64],
    grid: &PathGrid,
    rho: f64,
    symmetric: bool,
) -> Result<TsirelsonResult> {
    if !(rho > 0.0) {
        return domain(format!("ρ = {rho} must be positive"));
    }
    let v = pairing_variance(kernel, h, grid)?;
    let sq: Vec<f64> = h.iter().map(|x| x * x).collect();
    let a = grid.integrate(&sq);
    let (lhs, rhs) = if !symmetric {
        (guarded_exp(rho * rho * v / 2.0 - rho * a / 2.0)?, 1.0)
    } else if v == 0.0 {
        (guarded_exp(-rho * a / 2.0)?, 1.0)
    } else {
        let sd = v.sqrt();
        let upper = (rho * sd + 12.0) * sd;
        let panels = 32;
        let mut terms = Vec::new();
        for p in 0..panels {
            let (lo, hi) = (upper * p as f64 / panels as f64, upper * (p + 1) as f64 / panels as f64);
            let (x, w) = gauss_legendre(16, lo, hi);
            for (x, w) in x.iter().zip(&w) {
                let log_density = -x * x / (2.0 * v) - (2.0 * std::f64::consts::PI * v).ln() / 2.0;
                terms.push(2.0 * w * guarded_exp(rho * x + log_density)?);
            }
        }
        let mgf = stable_sum(terms);
        let mean_abs = (2.0 * v / std::f64::consts::PI).sqrt();
        (mgf * guarded_exp(-rho * a / 2.0)?, guarded_exp(rho * mean_abs)?)
    };
    Ok(TsirelsonResult {
        lhs,
        rhs,
        rel_err: 0.0,
        pass: lhs <= rhs * (1.0 + 1e-12),
    })
}
