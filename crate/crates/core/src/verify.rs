//! Checkers for `T_p(C)`: falsification scans over candidate measures, the dual
//! Laplace-transform test for `T_1`, the moment estimator of the `T_1` constant,
//! Pinsker's inequality and entropy under pushforward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::measure::{stable_sum, DiscreteMeasure, FiniteMetricSpace, LipschitzFunction};
use crate::stats::{stream_rng, Estimate};
use crate::transport::{kl_divergence, kl_weights, total_variation, wasserstein_exact};

/// One tested candidate `ν` with its exact transport cost and entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub nu: Vec<f64>,
    pub w_p: f64,
    pub entropy: f64,
    /// `W_p² / (2H)`, absent when `H` is 0 or infinite.
    pub ratio: Option<f64>,
}

/// Outcome of scanning candidates against `W_p(μ, ν) ≤ √(2C·H(ν|μ))`.
///
/// A pass is a certificate of non-refutation on the tested candidates only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpCertificate {
    pub p: f64,
    pub c: f64,
    pub worst_ratio: f64,
    /// Index into `witnesses` of the candidate attaining `worst_ratio`.
    pub worst_index: Option<usize>,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
}

/// Evaluates every candidate and reports the largest `W_p² / (2H)`.
pub fn check_tp(
    mu: &DiscreteMeasure,
    candidates: &[DiscreteMeasure],
    space: &FiniteMetricSpace,
    p: f64,
    c: f64,
) -> Result<TpCertificate> {
    if !(c > 0.0) {
        return domain(format!("constant C = {c} must be positive"));
    }
    let witnesses = candidates
        .par_iter()
        .map(|nu| {
            let h = kl_divergence(nu, mu);
            let (w, _) = wasserstein_exact(mu, nu, space, p)?;
            let ratio = (h > 0.0 && h.is_finite()).then(|| w * w / (2.0 * h));
            Ok(Witness {
                nu: nu.weights().to_vec(),
                w_p: w,
                entropy: h,
                ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst_ratio = 0.0;
    let mut worst_index = None;
    for (k, w) in witnesses.iter().enumerate() {
        if let Some(r) = w.ratio {
            if r > worst_ratio {
                worst_ratio = r;
                worst_index = Some(k);
            }
        }
    }
    Ok(TpCertificate {
        p,
        c,
        worst_ratio,
        worst_index,
        pass: worst_ratio <= c,
        witnesses,
    })
}

/// 81 points: zero and ±40 log-spaced magnitudes in `[10⁻³Λ, Λ]`, `Λ = 20 / lip`.
pub fn default_lambda_grid(lip: f64) -> Vec<f64> {
    let top = 20.0 / lip;
    let lo = (1e-3 * top).ln();
    let hi = top.ln();
    let mut grid = vec![0.0];
    for k in 0..40 {
        let lam = (lo + (hi - lo) * k as f64 / 39.0).exp();
        grid.push(lam);
        grid.push(-lam);
    }
    grid.sort_by(f64::total_cmp);
    grid
}

/// `log ∫ e^{λ(f − ⟨f⟩)} dμ`, computed with the maximum exponent factored out.
pub fn log_laplace(mu: &DiscreteMeasure, values: &[f64], lambda: f64) -> f64 {
    let mean = mu.expectation(values);
    let w = mu.weights();
    let top = values
        .iter()
        .zip(w)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, _)| lambda * (v - mean))
        .fold(f64::NEG_INFINITY, f64::max);
    let s = stable_sum(
        values
            .iter()
            .zip(w)
            .filter(|(_, &w)| w > 0.0)
            .map(|(v, w)| w * (lambda * (v - mean) - top).exp()),
    );
    top + s.ln()
}

/// `max_λ [log ∫ e^{λ(f − ⟨f⟩)} dμ − C λ² ‖f‖²_Lip / 2]` over the grid
/// (the default grid when `lambda_grid` is `None`). `T_1(C)` holds for this
/// `f` iff the result is at most zero.
pub fn bg_dual_gap(
    mu: &DiscreteMeasure,
    f: &LipschitzFunction,
    c: f64,
    lambda_grid: Option<&[f64]>,
) -> Result<f64> {
    if f.values().len() != mu.len() {
        return shape(format!("function on {} points, measure on {}", f.values().len(), mu.len()));
    }
    let lip = f.lip_const();
    let owned;
    let grid = match lambda_grid {
        Some(g) => g,
        None => {
            if !(lip > 0.0) {
                return domain("default λ grid needs a positive Lipschitz constant");
            }
            owned = default_lambda_grid(lip);
            &owned
        }
    };
    Ok(grid
        .iter()
        .map(|&lam| log_laplace(mu, f.values(), lam) - c * lam * lam * lip * lip / 2.0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Parameters of the moment estimator of the `T_1` constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1EstimatorConfig {
    pub delta: f64,
    pub k_max: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl T1EstimatorConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            k_max: 50,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return domain(format!("δ = {} must be positive", self.delta));
        }
        if self.k_max == 0 {
            return domain("k_max must be at least 1");
        }
        Ok(())
    }
}

/// Source of `E = ∬ e^{δ d(x, y)²} dμ(x) dμ(y)`.
pub enum PairMoment<'a> {
    /// `E` known in closed form.
    Analytic(f64),
    /// Distances `d(ξ_i, ξ'_i)` of i.i.d. pairs already drawn.
    Distances(&'a [f64]),
    /// Draws the distance of one independent pair; called `mc_samples` times
    /// on the stream selected by `seed`.
    Sampler(&'a dyn Fn(&mut ChaCha8Rng) -> f64),
}

/// Result of the moment estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Estimate {
    pub constant: f64,
    /// `k` attaining the maximum.
    pub argmax_k: usize,
    pub moment: f64,
    /// Standard error of `constant` (Monte Carlo mode only), by the delta method.
    pub std_err: Option<f64>,
    /// `(2/δ)·max_{j ≤ k} [((j!)²/(2j)!)·E]^{1/j}` for `k = 1..=k_max`.
    pub partial_maxima: Vec<f64>,
}

/// `(2/δ)·max_{1≤k≤k_max} [((k!)²/(2k)!)·E]^{1/k}`, with the factorial ratio
/// accumulated in log-space.
pub fn estimate_t1_constant(source: PairMoment<'_>, cfg: &T1EstimatorConfig) -> Result<T1Estimate> {
    cfg.validate()?;
    let (moment, se) = match source {
        PairMoment::Analytic(e) => {
            if !(e >= 1.0) || !e.is_finite() {
                return domain(format!("moment E = {e} must be finite and at least 1"));
            }
            (e, None)
        }
        PairMoment::Distances(d) => {
            if d.len() < 2 {
                return domain("at least two sample pairs are needed");
            }
            mc_moment(d.iter().map(|x| (cfg.delta * x * x).exp()).collect())?
        }
        PairMoment::Sampler(draw) => {
            if cfg.mc_samples < 2 {
                return domain("at least two sample pairs are needed");
            }
            let mut rng = stream_rng(cfg.seed, 0);
            let vals = (0..cfg.mc_samples)
                .map(|_| {
                    let d = draw(&mut rng);
                    (cfg.delta * d * d).exp()
                })
                .collect();
            mc_moment(vals)?
        }
    };
    let log_e = moment.ln();
    let mut log_ratio = 0.0; // log((k!)² / (2k)!)
    let mut best = f64::NEG_INFINITY;
    let mut argmax_k = 1;
    let mut partial_maxima = Vec::with_capacity(cfg.k_max);
    let scale = 2.0 / cfg.delta;
    for k in 1..=cfg.k_max {
        let kf = k as f64;
        // (k!)²/(2k)! = ((k−1)!)²/(2k−2)! · k² / ((2k)(2k−1))
        log_ratio += (kf * kf / (2.0 * kf * (2.0 * kf - 1.0))).ln();
        let term = (log_ratio + log_e) / kf;
        if term > best {
            best = term;
            argmax_k = k;
        }
        partial_maxima.push(scale * best.exp());
    }
    let constant = scale * best.exp();
    let std_err = se.map(|s| constant / (argmax_k as f64 * moment) * s);
    Ok(T1Estimate {
        constant,
        argmax_k,
        moment,
        std_err,
        partial_maxima,
    })
}

fn mc_moment(values: Vec<f64>) -> Result<(f64, Option<f64>)> {
    let est = Estimate::from_samples(&values);
    if !est.mean.is_finite() || !est.std_err.is_finite() {
        return Err(Error::Divergence(format!(
            "sample mean of e^(δd²) is {} over {} pairs; δ is too large for this law",
            est.mean, est.samples
        )));
    }
    Ok((est.mean, Some(est.std_err)))
}

/// Pinsker's inequality in the form `Σ|μ_i − ν_i| ≤ 2√(H/2) = √(2H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinskerResult {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares `Σ|μ_i − ν_i|` with `√(2H(ν|μ))`, i.e. `W_1 ≤ √(H/2)` for the
/// trivial metric scaled by two.
pub fn pinsker_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> PinskerResult {
    let lhs = total_variation(mu, nu);
    let h = kl_divergence(nu, mu);
    let rhs = (2.0 * h).sqrt();
    PinskerResult {
        lhs,
        rhs,
        pass: lhs <= rhs + 1e-12,
    }
}

/// Constant of the image measure under an `α`-Lipschitz map: `C·α²`.
pub fn pushforward_constant(c: f64, alpha: f64) -> f64 {
    c * alpha * alpha
}

/// `min{H(ν|μ) : ν∘ψ⁻¹ = ν̃}` and its minimizer `ν₀(x) = (dν̃/dμ̃)(ψ(x))·μ(x)`,
/// where `μ̃ = μ∘ψ⁻¹`. Returns `(+∞, None)` when `ν̃` is not absolutely
/// continuous with respect to `μ̃`.
pub fn entropy_pushforward_min(
    mu: &DiscreteMeasure,
    psi: &[usize],
    nu_tilde: &DiscreteMeasure,
) -> Result<(f64, Option<DiscreteMeasure>)> {
    let mu_tilde = mu.pushforward(psi, nu_tilde.len())?;
    let value = kl_weights(nu_tilde.weights(), mu_tilde.weights());
    if !value.is_finite() {
        return Ok((f64::INFINITY, None));
    }
    let (mt, nt) = (mu_tilde.weights(), nu_tilde.weights());
    let raw: Vec<f64> = psi
        .iter()
        .zip(mu.weights())
        .map(|(&y, &m)| if mt[y] > 0.0 { nt[y] / mt[y] * m } else { 0.0 })
        .collect();
    Ok((value, Some(DiscreteMeasure::normalized(raw)?)))
}

/// Exponential tilts `ν_λ ∝ e^{λf}μ`; `λ = 0` returns `μ` itself.
pub fn tilt_family(mu: &DiscreteMeasure, f: &LipschitzFunction, lambdas: &[f64]) -> Result<Vec<DiscreteMeasure>> {
    tilt_values(mu, f.values(), lambdas)
}

pub(crate) fn tilt_values(mu: &DiscreteMeasure, values: &[f64], lambdas: &[f64]) -> Result<Vec<DiscreteMeasure>> {
    if values.len() != mu.len() {
        return shape(format!("function on {} points, measure on {}", values.len(), mu.len()));
    }
    lambdas
        .iter()
        .map(|&lam| {
            if lam == 0.0 {
                return Ok(mu.clone());
            }
            let w = mu.weights();
            let top = values
                .iter()
                .zip(w)
                .filter(|(_, &w)| w > 0.0)
                .map(|(v, _)| lam * v)
                .fold(f64::NEG_INFINITY, f64::max);
            let raw = values
                .iter()
                .zip(w)
                .map(|(v, &w)| if w > 0.0 { w * (lam * v - top).exp() } else { 0.0 })
                .collect();
            DiscreteMeasure::normalized(raw)
        })
        .collect()
}

/// Draws `count` points of `{0, …, n−1}` i.i.d. from a measure.
pub fn sample_indices(mu: &DiscreteMeasure, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(mu.len());
    let mut acc = 0.0;
    for &w in mu.weights() {
        acc += w;
        cdf.push(acc);
    }
    (0..count)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(mu.len() - 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bern(q: f64) -> DiscreteMeasure {
        DiscreteMeasure::bernoulli(q).unwrap()
    }

    #[test]
    fn tp_trivial_and_bernoulli() {
        let e = FiniteMetricSpace::trivial(2);
        let mu = bern(0.5);
        let cert = check_tp(&mu, &[mu.clone()], &e, 1.0, 0.25).unwrap();
        assert_eq!(cert.worst_ratio, 0.0);
        assert!(cert.pass);
        let cands: Vec<_> = (1..100).map(|k| bern(k as f64 / 100.0)).collect();
        let cert = check_tp(&mu, &cands, &e, 1.0, 0.25).unwrap();
        assert!(cert.pass, "worst ratio {}", cert.worst_ratio);
        let fail = check_tp(&mu, &cands, &e, 1.0, 0.2).unwrap();
        assert!(!fail.pass);
        let q = fail.witnesses[fail.worst_index.unwrap()].nu[1];
        assert!(q <= 0.02 || q >= 0.98 || (q - 0.5).abs() < 0.02, "witness at {q}");
        let empty = check_tp(&mu, &[], &e, 1.0, 0.2).unwrap();
        assert!(empty.pass && empty.worst_ratio == 0.0);
    }

    #[test]
    fn dual_gap_examples() {
        let e = FiniteMetricSpace::trivial(2);
        let mu = bern(0.5);
        let f = LipschitzFunction::new(vec![0.0, 1.0], &e).unwrap();
        assert_eq!(bg_dual_gap(&mu, &f, 0.25, Some(&[0.0])).unwrap(), 0.0);
        let grid: Vec<f64> = (0..=400).map(|k| -20.0 + 0.1 * k as f64).collect();
        assert!(bg_dual_gap(&mu, &f, 0.25, Some(&grid)).unwrap() <= 1e-12);
        assert!(bg_dual_gap(&mu, &f, 0.05, Some(&grid)).unwrap() > 0.0);
        // log cosh(2) − 0.05·16/2 at λ = 4
        let at4 = 2f64.cosh().ln() - 0.4;
        assert_abs_diff_eq!(bg_dual_gap(&mu, &f, 0.05, Some(&[4.0])).unwrap(), at4, epsilon = 1e-14);
        assert_eq!(default_lambda_grid(1.0).len(), 81);
    }

    #[test]
    fn estimator_examples() {
        let cfg = T1EstimatorConfig::new(0.125);
        let dirac = estimate_t1_constant(PairMoment::Analytic(1.0), &cfg).unwrap();
        assert_abs_diff_eq!(dirac.constant, 8.0, epsilon = 1e-12);
        assert_eq!(dirac.argmax_k, 1);
        let g = estimate_t1_constant(PairMoment::Analytic(2f64.sqrt()), &cfg).unwrap();
        assert_abs_diff_eq!(g.constant, 8.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert!(g.partial_maxima.windows(2).all(|w| w[1] >= w[0]));
        assert!(estimate_t1_constant(PairMoment::Analytic(0.5), &cfg).is_err());
        let bad = estimate_t1_constant(PairMoment::Distances(&[1e3, 1.0]), &cfg);
        assert!(matches!(bad, Err(Error::Divergence(_))));
    }

    #[test]
    fn pinsker_examples() {
        let r = pinsker_check(&bern(0.5), &bern(0.5));
        assert_eq!((r.lhs, r.rhs, r.pass), (0.0, 0.0, true));
        let r = pinsker_check(&bern(0.5), &bern(0.75));
        assert_abs_diff_eq!(r.lhs, 0.5);
        assert_abs_diff_eq!(r.rhs, 0.511_492, epsilon = 1e-6);
        assert!(r.pass);
        let r = pinsker_check(&bern(0.0), &bern(1.0));
        assert!(r.pass && r.rhs.is_infinite());
    }

    #[test]
    fn pushforward_examples() {
        assert_eq!(pushforward_constant(1.0, 2.0), 4.0);
        assert_eq!(pushforward_constant(0.3, 0.0), 0.0);
        let mu = DiscreteMeasure::uniform(4);
        let nt = DiscreteMeasure::new(vec![0.75, 0.25]).unwrap();
        let (h, nu0) = entropy_pushforward_min(&mu, &[0, 0, 1, 1], &nt).unwrap();
        assert_abs_diff_eq!(h, 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(), epsilon = 1e-15);
        assert_eq!(nu0.unwrap().weights(), &[0.375, 0.375, 0.125, 0.125]);
        let (h, _) = entropy_pushforward_min(&mu, &[0, 1, 2, 3], &mu).unwrap();
        assert_eq!(h, 0.0);
        let off = DiscreteMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let (h, m) = entropy_pushforward_min(&mu, &[0, 0, 2, 2], &off).unwrap();
        assert!(h.is_infinite() && m.is_none());
    }

    #[test]
    fn tilts() {
        let e = FiniteMetricSpace::trivial(2);
        let mu = DiscreteMeasure::uniform(2);
        let f = LipschitzFunction::new(vec![0.0, 1.0], &e).unwrap();
        let t = tilt_family(&mu, &f, &[0.0, 3f64.ln(), -1e6]).unwrap();
        assert_eq!(t[0], mu);
        assert_abs_diff_eq!(t[1].weights()[1], 0.75, epsilon = 1e-15);
        assert_eq!(t[2].weights(), &[1.0, 0.0]);
    }
}
