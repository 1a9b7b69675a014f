//! Empirical exceedance frequencies compared with concentration bounds.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::measure::{stable_sum, PathGrid};
use crate::stats::{stream_rng, wilson_interval, Z95};
use crate::tensorize::{dependent_hoeffding_bound, SequentialModel};

use super::sde::{simulate_functional, SdeSpec, SimConfig};

/// Which concentration bound a tail experiment is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundSpec {
    /// `exp(−t²(1 − r)² / (2nCα²))` for an `α`-Lipschitz function of a
    /// contracting sequence of length `n`.
    DependentHoeffding { c: f64, r: f64, n: usize },
    /// `exp(−r² / (2nCα²))` for `∫_0^n V(X_t) dt` when the path law on `[0, n]`
    /// satisfies `T_1(nC)` for the sum of unit-interval sup distances.
    PathIntegral { c: f64, n: usize },
    /// Time average `(1/T)∫_0^T V(X_t) dt` of a diffusion with dissipativity
    /// `δ` and `‖σ‖_∞`: the bound `exp(−Tr²δ²/(2α²‖σ‖²_∞))` obtained from
    /// `T_1(‖σ‖²_∞/δ²)` and `‖F‖_Lip ≤ α/√T`. The alternate value
    /// `exp(−Tr²‖σ‖²_∞/(2α²δ²))` is reported alongside it.
    TimeAverage { horizon: f64, delta: f64, sigma_inf: f64 },
}

impl BoundSpec {
    /// `(bound, alternate)` at deviation `r` for Lipschitz constant `alpha`.
    pub fn evaluate(&self, r: f64, alpha: f64) -> Result<(f64, Option<f64>)> {
        if !(alpha > 0.0) || !(r >= 0.0) {
            return domain(format!("need α > 0 and r ≥ 0, got α={alpha}, r={r}"));
        }
        match *self {
            BoundSpec::DependentHoeffding { c, r: rho, n } => {
                Ok((dependent_hoeffding_bound(c, rho, n, alpha, r)?, None))
            }
            BoundSpec::PathIntegral { c, n } => {
                if !(c > 0.0) || n == 0 {
                    return domain("path-integral bound needs C > 0 and n ≥ 1");
                }
                Ok(((-r * r / (2.0 * n as f64 * c * alpha * alpha)).exp(), None))
            }
            BoundSpec::TimeAverage {
                horizon,
                delta,
                sigma_inf,
            } => {
                if !(horizon > 0.0 && delta > 0.0 && sigma_inf > 0.0) {
                    return domain("time-average bound needs T, δ, ‖σ‖_∞ > 0");
                }
                let a2 = alpha * alpha;
                let derived = (-horizon * r * r * delta * delta / (2.0 * a2 * sigma_inf * sigma_inf)).exp();
                let alternate = (-horizon * r * r * sigma_inf * sigma_inf / (2.0 * a2 * delta * delta)).exp();
                Ok((derived, Some(alternate)))
            }
        }
    }
}

/// How the functional is centred before counting exceedances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Exact expectation known in closed form.
    Exact(f64),
    /// Sample mean of the ensemble.
    Empirical,
}

/// One deviation level of a tail experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub r: f64,
    pub empirical: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternate_bound: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `bound ≥ 10 / n_paths`, so the binomial interval can resolve it.
    pub informative: bool,
    pub pass: bool,
}

/// Exceedance table over a grid of deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub center: f64,
    pub samples: usize,
    pub rows: Vec<TailRow>,
    pub pass: bool,
    /// Whether the alternate bound would also pass at every row (when reported).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternate_pass: Option<bool>,
}

impl TailTable {
    /// CSV with columns `r,empirical,bound,ci_low,ci_high,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,empirical,bound,ci_low,ci_high,verdict\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{}",
                row.r,
                row.empirical,
                row.bound,
                row.ci_low,
                row.ci_high,
                if row.pass { "pass" } else { "fail" }
            );
        }
        out
    }
}

/// For each `r`, the frequency of `F − E F > r`, the bound and a 95% Wilson
/// interval. A row passes iff `frequency − bound ≤ ci_high − frequency`.
pub fn tail_vs_bound(
    samples: &[f64],
    centering: Centering,
    r_grid: &[f64],
    alpha: f64,
    bound: &BoundSpec,
) -> Result<TailTable> {
    if samples.is_empty() {
        return domain("no samples");
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite functional value".into()));
    }
    let n = samples.len();
    let center = match centering {
        Centering::Exact(m) => m,
        Centering::Empirical => stable_sum(samples.iter().copied()) / n as f64,
    };
    let mut rows = Vec::with_capacity(r_grid.len());
    let mut alternate_pass = None;
    for &r in r_grid {
        let (b, alt) = bound.evaluate(r, alpha)?;
        let hits = samples.iter().filter(|&&v| v - center > r).count();
        let freq = hits as f64 / n as f64;
        let (lo, hi) = wilson_interval(hits, n, Z95);
        let pass = freq - b <= hi - freq;
        if let Some(a) = alt {
            let ok = freq - a <= hi - freq;
            alternate_pass = Some(alternate_pass.unwrap_or(true) && ok);
        }
        rows.push(TailRow {
            r,
            empirical: freq,
            bound: b,
            alternate_bound: alt,
            ci_low: lo,
            ci_high: hi,
            informative: b >= 10.0 / n as f64,
            pass,
        });
    }
    Ok(TailTable {
        center,
        samples: n,
        pass: rows.iter().all(|r| r.pass),
        rows,
        alternate_pass,
    })
}

fn sample_row(row: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Simulates `n_paths` trajectories of a sequential model and applies `f`.
/// Path `p` uses stream `p` of `seed`.
pub fn chain_functional_samples(
    model: &SequentialModel,
    f: &(dyn Fn(&[usize]) -> f64 + Sync),
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = model.horizon();
    let k = model.base().len();
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let mut path: Vec<usize> = Vec::with_capacity(n);
            let mut hist = 0usize;
            for i in 0..n {
                let x = if let (true, Some(t)) = (i > 0, model.transition()) {
                    sample_row(&t[path[i - 1]], &mut rng)
                } else {
                    sample_row(model.row(i, hist), &mut rng)
                };
                if !model.is_markov() {
                    hist = hist * k + x;
                }
                path.push(x);
            }
            f(&path)
        })
        .collect())
}

/// `E Σ_i g(X_i)` for a Markov model, by propagating marginals.
pub fn chain_additive_mean(model: &SequentialModel, g: &[f64]) -> Result<f64> {
    let t = model
        .transition()
        .ok_or_else(|| Error::Domain("exact additive mean needs a Markov model".into()))?;
    let k = model.base().len();
    if g.len() != k {
        return Err(Error::Shape(format!("g has {} values for {k} states", g.len())));
    }
    let mut law = model.row(0, 0).to_vec();
    let mut total = 0.0;
    for i in 0..model.horizon() {
        if i > 0 {
            law = (0..k).map(|y| (0..k).map(|x| law[x] * t[x][y]).sum()).collect();
        }
        total += law.iter().zip(g).map(|(p, v)| p * v).sum::<f64>();
    }
    Ok(total)
}

/// `(1/T) ∫_0^T V(X_t) dt` (trapezoidal rule on the simulation grid) per path.
pub fn sde_time_average_samples(
    sde: &SdeSpec,
    x0: &[f64],
    cfg: &SimConfig,
    v: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let f = |grid: &PathGrid, path: &[f64]| {
        let d = grid.dimension();
        let vals: Vec<f64> = (0..grid.len()).map(|k| v(&path[k * d..(k + 1) * d])).collect();
        grid.integrate(&vals) / grid.horizon()
    };
    simulate_functional(sde, x0, cfg, &f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::FiniteMetricSpace;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bounds() {
        let spec = BoundSpec::TimeAverage {
            horizon: 10.0,
            delta: 0.5,
            sigma_inf: 1.0,
        };
        let (b, alt) = spec.evaluate(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(b, (-1.25f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(alt.unwrap(), (-20f64).exp(), epsilon = 1e-20);
        let h = BoundSpec::DependentHoeffding { c: 0.25, r: 0.7, n: 50 };
        assert_abs_diff_eq!(h.evaluate(10.0, 1.0).unwrap().0, (-0.36f64).exp(), epsilon = 1e-14);
        assert_eq!(h.evaluate(0.0, 1.0).unwrap().0, 1.0);
    }

    #[test]
    fn zero_deviation_passes() {
        let t = tail_vs_bound(&[0.0, 1.0, 2.0], Centering::Empirical, &[0.0], 1.0, &BoundSpec::PathIntegral { c: 1.0, n: 1 }).unwrap();
        assert!(t.pass);
        assert_eq!(t.rows[0].bound, 1.0);
        assert!(t.to_csv().lines().nth(1).unwrap().ends_with("pass"));
    }

    #[test]
    fn chain_means() {
        let m = SequentialModel::markov(
            FiniteMetricSpace::trivial(2),
            3,
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        )
        .unwrap();
        // P(X=1): 0.5, 0.45, 0.415
        assert_abs_diff_eq!(chain_additive_mean(&m, &[0.0, 1.0]).unwrap(), 1.365, epsilon = 1e-14);
        let s = chain_functional_samples(&m, &|p: &[usize]| p.iter().sum::<usize>() as f64, 20_000, 3).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 1.365).abs() < 0.03);
    }
}
