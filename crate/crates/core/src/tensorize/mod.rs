//! Transport inequalities for dependent sequences: entropy chain rule,
//! contraction coefficients, the step-by-step coupling, and the resulting
//! constants and tail bounds.

mod coupling;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::measure::{DiscreteMeasure, FiniteMetricSpace};
use crate::transport::wasserstein_exact;

pub use coupling::{marton_coupling, MartonCoupling};
pub use model::{
    backward_coefficients, entropy_chain_rule, forward_coefficient, joint_law, kernel_lipschitz,
    ChainRule, ContractionProfile, MarkovDocument, ModelDocument, SequentialModel,
    FORWARD_LP_LIMIT, HISTORY_SCAN_LIMIT,
};

/// `(1/(1 − r))·√(2C·n^{2/p − 1})`: multiplied by `√H(Q|P)` it bounds
/// `W_p^{d_{l_p}}(Q, P)`.
pub fn tensorized_constant(c: f64, r: f64, n: usize, p: f64) -> Result<f64> {
    if !(r < 1.0) {
        return Err(Error::ContractionViolation { r });
    }
    if !(r >= 0.0) || !(c > 0.0) || n == 0 || !(1.0..=2.0).contains(&p) {
        return domain(format!("need C > 0, r ≥ 0, n ≥ 1, p ∈ [1, 2]; got C={c}, r={r}, n={n}, p={p}"));
    }
    Ok((2.0 * c * (n as f64).powf(2.0 / p - 1.0)).sqrt() / (1.0 - r))
}

/// Positive weights `z` summing to one with `Σ_{i>k} z_i a_{i−k} ≤ δ z_k` for every `k`.
///
/// Backward recursion `z̃_n = 1`, `z̃_k = max(1, (1/δ) Σ_{i>k} z̃_i a_{i−k})`,
/// then normalization. The floor of 1 (rather than a tiny constant) makes
/// the weights uniform whenever the constraints allow it.
pub fn weight_vector(a: &[f64], n: usize, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("δ = {delta} outside (0, 1)"));
    }
    if n == 0 {
        return domain("n must be positive");
    }
    if a.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return domain("coefficients must be finite and nonnegative");
    }
    let coeff = |j: usize| a.get(j - 1).copied().unwrap_or(0.0);
    let mut z = vec![0.0; n];
    z[n - 1] = 1.0;
    for k in (0..n - 1).rev() {
        let s: f64 = ((k + 1)..n).map(|i| z[i] * coeff(i - k)).sum();
        z[k] = (s / delta).max(1.0);
    }
    let total: f64 = z.iter().sum();
    if !total.is_finite() {
        return Err(Error::BlowUp {
            step: 0,
            detail: "weight recursion overflowed".into(),
        });
    }
    Ok(z.into_iter().map(|x| x / total).collect())
}

/// `(zA)_k = Σ_{i>k} z_i a_{i−k}` for each `k` (0-based).
pub fn weight_constraint_lhs(z: &[f64], a: &[f64]) -> Vec<f64> {
    let n = z.len();
    let coeff = |j: usize| a.get(j - 1).copied().unwrap_or(0.0);
    (0..n)
        .map(|k| ((k + 1)..n).map(|i| z[i] * coeff(i - k)).sum())
        .collect()
}

/// Default `δ` for [`weight_vector`] given the contraction coefficient `r`.
pub fn default_weight_delta(r: f64) -> f64 {
    r.max(0.5)
}

/// Invariant law of a contracting kernel and the constant it inherits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub mu: DiscreteMeasure,
    /// `W_1`-Lipschitz constant of the kernel.
    pub r: f64,
    /// `C / (1 − r²)`.
    pub c_infty: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Iterates `ν ↦ νP` from the uniform law until `W_1(νP, ν) < tol`.
pub fn invariant_fixed_point(
    kernel: &[Vec<f64>],
    space: &FiniteMetricSpace,
    c: f64,
    tol: f64,
) -> Result<FixedPoint> {
    let k = space.len();
    if kernel.len() != k || kernel.iter().any(|row| row.len() != k) {
        return Err(Error::Shape(format!("kernel must be {k}×{k}")));
    }
    for row in kernel {
        DiscreteMeasure::new(row.clone())?;
    }
    let r = kernel_lipschitz(kernel, space, 1.0)?;
    if r >= 1.0 {
        return Err(Error::ContractionViolation { r });
    }
    let mut nu = DiscreteMeasure::uniform(k);
    let mut residual = f64::INFINITY;
    for it in 1..=FIXED_POINT_MAX_ITER {
        let raw: Vec<f64> = (0..k)
            .map(|y| (0..k).map(|x| nu.weights()[x] * kernel[x][y]).sum())
            .collect();
        let next = DiscreteMeasure::normalized(raw)?;
        residual = wasserstein_exact(&nu, &next, space, 1.0)?.0;
        nu = next;
        if residual < tol {
            return Ok(FixedPoint {
                mu: nu,
                r,
                c_infty: c / (1.0 - r * r),
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: FIXED_POINT_MAX_ITER,
        residual,
    })
}

/// `C_n = n·C·(1 + S)²`.
pub fn martingale_constant(c: f64, s: f64, n: usize) -> f64 {
    n as f64 * c * (1.0 + s) * (1.0 + s)
}

/// `exp(−t²(1 − r)² / (2nCα²))`, a bound on `P(f > E f + t)` for `α`-Lipschitz `f`
/// under `d_{l_1}`.
pub fn dependent_hoeffding_bound(c: f64, r: f64, n: usize, alpha: f64, t: f64) -> Result<f64> {
    if !(r < 1.0) {
        return Err(Error::ContractionViolation { r });
    }
    if !(c > 0.0) || n == 0 || !(alpha > 0.0) || !(t >= 0.0) {
        return domain(format!("need C > 0, n ≥ 1, α > 0, t ≥ 0; got C={c}, n={n}, α={alpha}, t={t}"));
    }
    Ok((-t * t * (1.0 - r) * (1.0 - r) / (2.0 * n as f64 * c * alpha * alpha)).exp())
}
