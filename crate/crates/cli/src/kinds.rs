//! One executor per experiment kind. Each parses its own parameter schema,
//! calls into `tcilab` and returns values, verdicts and CSV tables.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tcilab::dynamics::{
    chain_additive_mean, chain_functional_samples, coupling_decay, noise_tail_condition,
    sde_time_average_samples, tail_vs_bound, BoundSpec, Centering, RandomMapSystem, SdeSpec,
    SimConfig,
};
use tcilab::measure::{lipschitz_regularize, product_space, PathGrid, SpaceDocument};
use tcilab::pathspace::{
    alpha_squared, brownian_covariance, gaussian_shift_kl, girsanov_entropy, operator_spectrum,
    pathspace_t2_constants, poincare_check, shift_w2_certificate, tsirelson_quadrature,
    CovarianceKernel, Marginal,
};
use tcilab::stats::stream_rng;
use tcilab::tensorize::{
    backward_coefficients, default_weight_delta, entropy_chain_rule, forward_coefficient,
    invariant_fixed_point, joint_law, marton_coupling, martingale_constant, tensorized_constant,
    weight_constraint_lhs, weight_vector, ModelDocument,
};
use tcilab::verify::{
    bg_dual_gap, check_tp, default_lambda_grid, estimate_t1_constant, pinsker_check, tilt_family,
    PairMoment, T1EstimatorConfig,
};
use tcilab::{
    kl_divergence, transport_lp, wasserstein_exact, DiscreteMeasure, FiniteMetricSpace,
    LipschitzFunction,
};

use crate::{csv_field, Kind, Outcome, RunError, Table};

/// Primal-dual agreement of the transport solver.
const DUALITY_TOL: f64 = 1e-7;
/// Marginal and complementary-slackness residuals of a transport plan.
const PLAN_TOL: f64 = 1e-9;
/// Largest admissible Laplace dual gap when `T_1(C)` holds.
const DUAL_GAP_TOL: f64 = 1e-9;
/// Agreement of exact identities such as the entropy chain rule.
const IDENTITY_TOL: f64 = 1e-10;
/// Number of standard errors a Monte Carlo estimate may deviate.
const MC_SIGMAS: f64 = 3.0;

pub fn execute(kind: Kind, params: &Value, seed: u64) -> Result<Outcome, RunError> {
    match kind {
        Kind::TransportCheck => transport_check(parse(kind, params)?, seed),
        Kind::TpVerify => tp_verify(parse(kind, params)?),
        Kind::T1Estimate => t1_estimate(parse(kind, params)?, seed),
        Kind::TensorizeCheck => tensorize_check(parse(kind, params)?, seed),
        Kind::DynamicsTail => dynamics_tail(parse(kind, params)?, seed),
        Kind::CouplingDecay => coupling(parse(kind, params)?, seed),
        Kind::Spectrum => spectrum(parse(kind, params)?),
        Kind::PathspaceCheck => pathspace(parse(kind, params)?),
    }
}

fn parse<T: DeserializeOwned>(kind: Kind, params: &Value) -> Result<T, RunError> {
    let v = if params.is_null() {
        Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(v).map_err(|e| RunError::Schema(format!("{} params: {e}", kind.name())))
}

fn schema<T>(msg: impl Into<String>) -> Result<T, RunError> {
    Err(RunError::Schema(msg.into()))
}

fn verdicts(items: &[(&str, bool)]) -> BTreeMap<String, bool> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn table(name: &str, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Table {
    let mut csv = format!("{header}\n");
    for r in rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    Table {
        name: name.to_string(),
        csv,
    }
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<nalgebra::DMatrix<f64>, RunError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return schema(format!("{what} must be a nonempty rectangular matrix"));
    }
    Ok(nalgebra::DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportParams {
    space: Option<SpaceDocument>,
    mu: Option<Vec<f64>>,
    nu: Option<Vec<f64>>,
    #[serde(default = "one")]
    p: f64,
    /// Random Euclidean instances instead of an explicit pair.
    random_instances: Option<usize>,
    #[serde(default = "twelve")]
    max_points: usize,
}

fn twelve() -> usize {
    12
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Result<DiscreteMeasure, RunError> {
    let mut raw: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random_range(0.01..1.0) })
        .collect();
    if raw.iter().all(|x| *x == 0.0) {
        raw[0] = 1.0;
    }
    Ok(DiscreteMeasure::normalized(raw)?)
}

fn transport_check(p: TransportParams, seed: u64) -> Result<Outcome, RunError> {
    match (p.random_instances, p.space, p.mu, p.nu) {
        (Some(count), None, None, None) => {
            if count == 0 || p.max_points < 2 {
                return schema("random_instances must be positive and max_points at least 2");
            }
            let mut rows = Vec::with_capacity(count);
            let (mut gap, mut marg, mut feas, mut slack) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for k in 0..count {
                let mut rng = stream_rng(seed, k as u64);
                let n = rng.random_range(2..=p.max_points);
                let pts: Vec<Vec<f64>> = (0..n)
                    .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
                    .collect();
                let space = FiniteMetricSpace::euclidean(&pts)?;
                let (a, b) = (random_masses(&mut rng, n)?, random_masses(&mut rng, n)?);
                let cost = space.cost_matrix(p.p);
                let plan = transport_lp(a.weights(), b.weights(), &cost)?;
                let g = (plan.cost - plan.dual_value(a.weights(), b.weights())).abs();
                let m = marginal_error(&plan, &a, &b);
                let (f, s) = plan.certificate_violations(&cost);
                gap = gap.max(g);
                marg = marg.max(m);
                feas = feas.max(f);
                slack = slack.max(s);
                rows.push(vec![k.to_string(), n.to_string(), plan.cost.to_string(), g.to_string(), m.to_string()]);
            }
            Ok(Outcome {
                values: json!({
                    "instances": count,
                    "max_duality_gap": gap,
                    "max_marginal_error": marg,
                    "max_dual_infeasibility": feas,
                    "max_slackness_violation": slack,
                }),
                verdicts: verdicts(&[
                    ("duality", gap <= DUALITY_TOL),
                    ("marginals", marg <= PLAN_TOL),
                    ("certificate", feas <= PLAN_TOL && slack <= PLAN_TOL),
                ]),
                tables: vec![table("instances", "instance,points,cost,duality_gap,marginal_error", rows)],
            })
        }
        (None, Some(space), Some(mu), Some(nu)) => {
            let (space, _) = space.into_parts()?;
            let (a, b) = (DiscreteMeasure::new(mu)?, DiscreteMeasure::new(nu)?);
            let (w, plan) = wasserstein_exact(&a, &b, &space, p.p)?;
            let cost = space.cost_matrix(p.p);
            let gap = (plan.cost - plan.dual_value(a.weights(), b.weights())).abs();
            let marg = marginal_error(&plan, &a, &b);
            let (feas, slack) = plan.certificate_violations(&cost);
            Ok(Outcome {
                values: json!({
                    "w_p": w,
                    "primal": plan.cost,
                    "dual": plan.dual_value(a.weights(), b.weights()),
                    "duality_gap": gap,
                    "marginal_error": marg,
                    "dual_infeasibility": feas,
                    "slackness_violation": slack,
                    "potential_u": plan.potential_u,
                    "potential_v": plan.potential_v,
                }),
                verdicts: verdicts(&[
                    ("duality", gap <= DUALITY_TOL),
                    ("marginals", marg <= PLAN_TOL),
                    ("certificate", feas <= PLAN_TOL && slack <= PLAN_TOL),
                ]),
                tables: vec![Table {
                    name: "plan".into(),
                    csv: plan.to_csv(),
                }],
            })
        }
        _ => schema("transport_check needs either random_instances or all of space, mu and nu"),
    }
}

fn marginal_error(plan: &tcilab::TransportPlan, a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let (rows, cols) = (plan.row_sums(), plan.col_sums());
    let r = rows.iter().zip(a.weights()).map(|(x, y)| (x - y).abs());
    let c = cols.iter().zip(b.weights()).map(|(x, y)| (x - y).abs());
    r.chain(c).fold(0.0, f64::max)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TpParams {
    /// `μ = Bernoulli(q)` on two points at distance 1.
    bernoulli: Option<f64>,
    space: Option<SpaceDocument>,
    /// Weights of `μ` when the space document carries none.
    mu: Option<Vec<f64>>,
    c: f64,
    #[serde(default = "one")]
    p: f64,
    #[serde(default)]
    candidates: Vec<Vec<f64>>,
    /// Add exponential tilts of `μ` along every distance function `d(x_i, ·)`.
    #[serde(default = "yes")]
    tilts: bool,
}

fn tp_verify(p: TpParams) -> Result<Outcome, RunError> {
    let (space, mu) = match (p.bernoulli, p.space) {
        (Some(q), None) => {
            if p.mu.is_some() {
                return schema("bernoulli and mu are exclusive");
            }
            (FiniteMetricSpace::trivial(2), DiscreteMeasure::bernoulli(q)?)
        }
        (None, Some(doc)) => {
            let (space, weights) = doc.into_parts()?;
            let mu = match (weights, p.mu) {
                (Some(_), Some(_)) => return schema("give the weights of mu once"),
                (Some(m), None) => m,
                (None, Some(w)) => DiscreteMeasure::new(w)?,
                (None, None) => return schema("tp_verify needs the weights of mu"),
            };
            (space, mu)
        }
        _ => return schema("tp_verify needs exactly one of bernoulli or space"),
    };
    let mut cands = p
        .candidates
        .into_iter()
        .map(DiscreteMeasure::new)
        .collect::<tcilab::Result<Vec<_>>>()?;
    let mut functions: Vec<LipschitzFunction> = Vec::new();
    for i in 0..space.len() {
        let d: Vec<f64> = (0..space.len()).map(|j| space.d(i, j)).collect();
        let f = lipschitz_regularize(&d, 1.0, &space)?;
        if f.lip_const() > 0.0 && !functions.iter().any(|g| g.values() == f.values()) {
            functions.push(f);
        }
    }
    if p.tilts {
        for f in &functions {
            cands.extend(tilt_family(&mu, f, &default_lambda_grid(f.lip_const()))?);
        }
    }
    if cands.is_empty() {
        return schema("no candidate measures");
    }
    let cert = check_tp(&mu, &cands, &space, p.p, p.c)?;
    let pinsker: Vec<_> = cands.iter().map(|nu| pinsker_check(&mu, nu)).collect();
    let pinsker_ok = pinsker.iter().all(|r| r.pass);
    let mut checks = vec![("transport_inequality", cert.pass), ("pinsker", pinsker_ok)];
    let mut dual_gap = Value::Null;
    if p.p == 1.0 && !functions.is_empty() {
        let gap = functions
            .iter()
            .map(|f| bg_dual_gap(&mu, f, p.c, None))
            .collect::<tcilab::Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(("laplace_dual", gap <= DUAL_GAP_TOL));
        dual_gap = json!(gap);
    }
    let worst = cert.worst_index.map(|k| cert.witnesses[k].nu.clone());
    let rows = cert.witnesses.iter().enumerate().map(|(k, w)| {
        vec![
            k.to_string(),
            w.w_p.to_string(),
            w.entropy.to_string(),
            w.ratio.map_or(String::new(), |r| r.to_string()),
            joined(&w.nu),
        ]
    });
    Ok(Outcome {
        values: json!({
            "mu": mu.weights(),
            "c": p.c,
            "p": p.p,
            "candidates": cands.len(),
            "worst_ratio": cert.worst_ratio,
            "worst_candidate": worst,
            "max_laplace_dual_gap": dual_gap,
        }),
        verdicts: verdicts(&checks),
        tables: vec![table("witnesses", "index,w_p,entropy,ratio,nu", rows)],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct T1Params {
    delta: f64,
    /// Known `E e^{δd²(X,Y)}`.
    moment: Option<f64>,
    /// `X, Y` i.i.d. `N(0, v)` sampled by Monte Carlo.
    gaussian_variance: Option<f64>,
    /// Observed distances `d(X_i, Y_i)`.
    distances: Option<Vec<f64>>,
    #[serde(default = "fifty")]
    k_max: usize,
    #[serde(default = "million")]
    mc_samples: usize,
    /// Value the estimate is compared with.
    expected: Option<f64>,
    /// A constant the estimate must not fall below.
    lower_bound: Option<f64>,
}

fn fifty() -> usize {
    50
}

fn million() -> usize {
    1_000_000
}

fn t1_estimate(p: T1Params, seed: u64) -> Result<Outcome, RunError> {
    let cfg = T1EstimatorConfig {
        delta: p.delta,
        k_max: p.k_max,
        mc_samples: p.mc_samples,
        seed,
    };
    let est = match (p.moment, p.gaussian_variance, p.distances.as_deref()) {
        (Some(e), None, None) => estimate_t1_constant(PairMoment::Analytic(e), &cfg)?,
        (None, Some(v), None) => {
            if !(v > 0.0) {
                return schema("gaussian_variance must be positive");
            }
            let sd = v.sqrt();
            let draw = |rng: &mut ChaCha8Rng| {
                let x: f64 = StandardNormal.sample(rng);
                let y: f64 = StandardNormal.sample(rng);
                sd * (x - y)
            };
            estimate_t1_constant(PairMoment::Sampler(&draw), &cfg)?
        }
        (None, None, Some(d)) => estimate_t1_constant(PairMoment::Distances(d), &cfg)?,
        _ => return schema("t1_estimate needs exactly one of moment, gaussian_variance or distances"),
    };
    let mut checks = vec![("finite", est.constant.is_finite())];
    if let Some(target) = p.expected {
        let ok = match est.std_err {
            Some(se) => (est.constant - target).abs() <= MC_SIGMAS * se,
            None => (est.constant - target).abs() <= DUAL_GAP_TOL,
        };
        checks.push(("matches_expected", ok));
    }
    if let Some(lb) = p.lower_bound {
        checks.push(("above_lower_bound", est.constant >= lb));
    }
    let rows = est
        .partial_maxima
        .iter()
        .enumerate()
        .map(|(k, m)| vec![(k + 1).to_string(), m.to_string()]);
    Ok(Outcome {
        values: json!({
            "constant": est.constant,
            "argmax_k": est.argmax_k,
            "moment": est.moment,
            "std_err": est.std_err,
            "expected": p.expected,
        }),
        verdicts: verdicts(&checks),
        tables: vec![table("partial_maxima", "k,partial_max", rows)],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorizeParams {
    model: ModelDocument,
    /// Second law for the chain rule and the coupling bound.
    q_model: Option<ModelDocument>,
    /// `T_p(C)` constant of every conditional law.
    c: f64,
    #[serde(default = "one")]
    p: f64,
    weight_delta: Option<f64>,
    #[serde(default)]
    forward: bool,
    /// Random 1-Lipschitz functions tested against the invariant law's constant.
    #[serde(default)]
    dual_functions: usize,
    #[serde(default = "fixed_point_tol")]
    fixed_point_tol: f64,
}

fn fixed_point_tol() -> f64 {
    1e-13
}

fn tensorize_check(p: TensorizeParams, seed: u64) -> Result<Outcome, RunError> {
    let model = p.model.build()?;
    let n = model.horizon();
    let prof = backward_coefficients(&model, p.p)?;
    let constant = tensorized_constant(p.c, prof.r, n, p.p)?;
    let delta = p.weight_delta.unwrap_or_else(|| default_weight_delta(prof.r));
    let z = weight_vector(&prof.a, n, delta)?;
    let lhs = weight_constraint_lhs(&z, &prof.a);
    let weights_ok = lhs.iter().zip(&z).all(|(l, zk)| *l <= delta * zk * (1.0 + 1e-12));
    let mut checks = vec![("weight_constraint", weights_ok)];
    let mut values = json!({
        "horizon": n,
        "p": p.p,
        "c": p.c,
        "a": prof.a,
        "r": prof.r,
        "sampled_histories": prof.sampled,
        "tensorized_constant": constant,
        "weight_delta": delta,
        "weights": z,
    });
    let obj = values.as_object_mut().expect("object literal");

    if p.forward {
        let s = forward_coefficient(&model)?;
        obj.insert("forward_coefficient".into(), json!(s));
        obj.insert("martingale_constant".into(), json!(martingale_constant(p.c, s, n)));
    }

    let mut per_step = vec![String::new(); n];
    if let Some(q_doc) = p.q_model {
        let q = q_doc.build()?;
        let chain = entropy_chain_rule(&q, &model)?;
        let (jq, jp) = (joint_law(&q)?, joint_law(&model)?);
        let h = kl_divergence(&jq, &jp);
        let coupling = marton_coupling(&model, &q, p.p)?;
        let prod = product_space(model.base(), n, p.p)?;
        let (w, _) = wasserstein_exact(&jq, &jp, &prod, p.p)?;
        let bound = constant * h.sqrt();
        checks.push(("chain_rule", (chain.total - h).abs() <= IDENTITY_TOL * (1.0 + h)));
        checks.push(("coupling_above_wasserstein", coupling.cost >= w - IDENTITY_TOL));
        checks.push(("coupling_within_bound", coupling.cost <= bound + IDENTITY_TOL));
        for (slot, e) in per_step.iter_mut().zip(&chain.per_step) {
            *slot = e.to_string();
        }
        obj.insert("entropy".into(), json!(h));
        obj.insert("chain_rule_total".into(), json!(chain.total));
        obj.insert("coupling_cost".into(), json!(coupling.cost));
        obj.insert("wasserstein".into(), json!(w));
        obj.insert("bound".into(), json!(bound));
    }

    if let (Some(t), true) = (model.transition(), p.p == 1.0) {
        let fp = invariant_fixed_point(t, model.base(), p.c, p.fixed_point_tol)?;
        obj.insert("invariant_law".into(), json!(fp.mu.weights()));
        obj.insert("invariant_constant".into(), json!(fp.c_infty));
        obj.insert("fixed_point_iterations".into(), json!(fp.iterations));
        if p.dual_functions > 0 {
            let k = model.base().len();
            let mut gap = f64::NEG_INFINITY;
            for j in 0..p.dual_functions {
                let mut rng = stream_rng(seed, j as u64);
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let f = lipschitz_regularize(&raw, 1.0, model.base())?;
                if f.lip_const() > 0.0 {
                    gap = gap.max(bg_dual_gap(&fp.mu, &f, fp.c_infty, None)?);
                }
            }
            checks.push(("invariant_laplace_dual", gap <= DUAL_GAP_TOL));
            obj.insert("max_invariant_dual_gap".into(), json!(gap));
        }
    }

    let rows = (0..n).map(|i| {
        vec![
            (i + 1).to_string(),
            prof.a.get(i).map_or(String::new(), f64::to_string),
            z[i].to_string(),
            lhs[i].to_string(),
            per_step[i].clone(),
        ]
    });
    Ok(Outcome {
        values,
        verdicts: verdicts(&checks),
        tables: vec![table("steps", "step,a,weight,constraint_lhs,conditional_entropy", rows)],
    })
}

#[derive(Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
enum TailParams {
    /// `Σ_i g(X_i)` along a sequential model.
    MarkovChain {
        model: ModelDocument,
        g: Vec<f64>,
        c: f64,
        #[serde(default = "hundred_thousand")]
        n_paths: usize,
        r_grid: Vec<f64>,
    },
    /// `(1/T)∫_0^T X_t dt` for a scalar Ornstein–Uhlenbeck process.
    OuTimeAverage {
        theta: f64,
        sigma: f64,
        #[serde(default)]
        x0: f64,
        horizon: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "hundred_thousand")]
        n_paths: usize,
        r_grid: Vec<f64>,
    },
    /// `E e^{δ|F(x, W) − F(x, W')|²}` for `F(x, w) = Ax + scale·w`.
    NoiseMoment {
        matrix: Vec<Vec<f64>>,
        #[serde(default = "one")]
        noise_scale: f64,
        delta: f64,
        x_grid: Vec<Vec<f64>>,
        #[serde(default = "two_hundred_thousand")]
        n_mc: usize,
        expected: Option<f64>,
        #[serde(default)]
        expect_divergent: bool,
    },
}

fn hundred_thousand() -> usize {
    100_000
}

fn two_hundred_thousand() -> usize {
    200_000
}

fn default_dt() -> f64 {
    0.01
}

fn dynamics_tail(p: TailParams, seed: u64) -> Result<Outcome, RunError> {
    match p {
        TailParams::MarkovChain {
            model,
            g,
            c,
            n_paths,
            r_grid,
        } => {
            let model = model.build()?;
            let k = model.base().len();
            if g.len() != k {
                return schema(format!("g has {} values for {k} states", g.len()));
            }
            let alpha = LipschitzFunction::new(g.clone(), model.base())?.lip_const();
            if !(alpha > 0.0) {
                return schema("g must not be constant");
            }
            let n = model.horizon();
            let r = backward_coefficients(&model, 1.0)?.r;
            let centering = if model.is_markov() {
                Centering::Exact(chain_additive_mean(&model, &g)?)
            } else {
                Centering::Empirical
            };
            let samples = chain_functional_samples(&model, &|path: &[usize]| path.iter().map(|&x| g[x]).sum(), n_paths, seed)?;
            let spec = BoundSpec::DependentHoeffding { c, r, n };
            let t = tail_vs_bound(&samples, centering, &r_grid, alpha, &spec)?;
            Ok(Outcome {
                values: json!({
                    "horizon": n,
                    "r": r,
                    "alpha": alpha,
                    "center": t.center,
                    "samples": t.samples,
                    "informative_rows": t.rows.iter().filter(|row| row.informative).count(),
                }),
                verdicts: verdicts(&[("tail_bound", t.pass)]),
                tables: vec![Table {
                    name: "tail".into(),
                    csv: t.to_csv(),
                }],
            })
        }
        TailParams::OuTimeAverage {
            theta,
            sigma,
            x0,
            horizon,
            dt,
            n_paths,
            r_grid,
        } => {
            let sde = SdeSpec::ornstein_uhlenbeck(theta, sigma, 1)?;
            let cfg = SimConfig {
                dt,
                horizon,
                n_paths,
                seed,
                shared_noise: false,
            };
            let samples = sde_time_average_samples(&sde, &[x0], &cfg, &|x: &[f64]| x[0])?;
            // E X_t = x0·e^{−θt}, averaged over [0, T]
            let mean = x0 * -(-theta * horizon).exp_m1() / (theta * horizon);
            let spec = BoundSpec::TimeAverage {
                horizon,
                delta: theta,
                sigma_inf: sigma,
            };
            let t = tail_vs_bound(&samples, Centering::Exact(mean), &r_grid, 1.0, &spec)?;
            Ok(Outcome {
                values: json!({
                    "center": t.center,
                    "samples": t.samples,
                    "alternate_exponent_holds": t.alternate_pass,
                    "informative_rows": t.rows.iter().filter(|row| row.informative).count(),
                    "alternate_bounds": t.rows.iter().map(|row| row.alternate_bound).collect::<Vec<_>>(),
                }),
                verdicts: verdicts(&[("tail_bound", t.pass)]),
                tables: vec![Table {
                    name: "tail".into(),
                    csv: t.to_csv(),
                }],
            })
        }
        TailParams::NoiseMoment {
            matrix: a,
            noise_scale,
            delta,
            x_grid,
            n_mc,
            expected,
            expect_divergent,
        } => {
            let sys = RandomMapSystem::linear(matrix(&a, "matrix")?, noise_scale)?;
            let tail = noise_tail_condition(&sys, delta, &x_grid, n_mc, seed)?;
            let mut checks = Vec::new();
            if expect_divergent {
                checks.push(("reports_divergence", tail.divergent));
            } else {
                checks.push(("moment_finite", !tail.divergent));
                if let Some(e) = expected {
                    let ok = tail.per_x.iter().all(|pt| (pt.mean - e).abs() <= MC_SIGMAS * pt.std_err);
                    checks.push(("matches_expected", ok));
                }
            }
            let rows = tail.per_x.iter().map(|pt| {
                vec![
                    csv_field(&joined(&pt.x)),
                    pt.mean.to_string(),
                    pt.std_err.to_string(),
                    pt.divergent.to_string(),
                ]
            });
            Ok(Outcome {
                values: json!({
                    "sup": tail.sup,
                    "divergent": tail.divergent,
                    "expected": expected,
                }),
                verdicts: verdicts(&checks),
                tables: vec![table("moments", "x,mean,std_err,divergent", rows)],
            })
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingParams {
    /// `M` in the drift `b(x) = Mx`.
    drift: Vec<Vec<f64>>,
    /// Constant diffusion matrix.
    diffusion: Vec<Vec<f64>>,
    x: Vec<f64>,
    x_tilde: Vec<f64>,
    #[serde(default = "default_dt")]
    dt: f64,
    horizon: f64,
    #[serde(default = "thousand")]
    n_paths: usize,
}

fn thousand() -> usize {
    1000
}

fn coupling(p: CouplingParams, seed: u64) -> Result<Outcome, RunError> {
    let sde = SdeSpec::linear(matrix(&p.drift, "drift")?, matrix(&p.diffusion, "diffusion")?)?;
    let cfg = SimConfig {
        dt: p.dt,
        horizon: p.horizon,
        n_paths: p.n_paths,
        seed,
        shared_noise: true,
    };
    let d = coupling_decay(&sde, &p.x, &p.x_tilde, &cfg)?;
    let rows = (0..d.times.len()).map(|k| {
        vec![
            d.times[k].to_string(),
            d.curve[k].to_string(),
            d.std_err[k].to_string(),
            d.bound[k].to_string(),
            d.spread[k].to_string(),
        ]
    });
    Ok(Outcome {
        values: json!({
            "delta": sde.constants().delta,
            "allowance": d.allowance,
            "max_excess": d.max_excess,
            "max_std_err": d.std_err.iter().copied().fold(0.0, f64::max),
            "max_spread": d.spread.iter().copied().fold(0.0, f64::max),
        }),
        verdicts: verdicts(&[("decay_bound", d.pass)]),
        tables: vec![table("decay", "time,mean_sq_gap,std_err,bound,spread", rows)],
    })
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum KernelChoice {
    Wiener,
    Ou,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumParams {
    kernel: KernelChoice,
    horizon: f64,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "half")]
    theta: f64,
    #[serde(default = "one")]
    sigma: f64,
}

fn default_n() -> usize {
    512
}

fn half() -> f64 {
    0.5
}

/// Agreement between a discretized top eigenvalue and its limit.
const SPECTRUM_TOL: f64 = 1e-3;

fn spectrum(p: SpectrumParams) -> Result<Outcome, RunError> {
    let kernel = match p.kernel {
        KernelChoice::Wiener => CovarianceKernel::wiener(p.horizon)?,
        KernelChoice::Ou => CovarianceKernel::ou(p.theta, p.sigma, p.horizon)?,
    };
    let s = operator_spectrum(&kernel, p.n)?;
    let mut checks = vec![("rayleigh_below_top", s.lambda_max >= s.rayleigh_indicator - DUAL_GAP_TOL)];
    let reference = match p.kernel {
        KernelChoice::Wiener => {
            let exact = 4.0 * p.horizon * p.horizon / (PI * PI);
            checks.push(("matches_closed_form", (s.lambda_max - exact).abs() <= SPECTRUM_TOL * exact.max(1.0)));
            json!({ "closed_form_lambda_max": exact })
        }
        KernelChoice::Ou => {
            let c_path = p.sigma * p.sigma / (p.theta * p.theta);
            checks.push(("below_path_constant", s.lambda_max <= c_path + SPECTRUM_TOL));
            json!({ "path_constant": c_path })
        }
    };
    let rows = s.refinement_history.iter().map(|(n, l)| vec![n.to_string(), l.to_string()]);
    Ok(Outcome {
        values: json!({
            "lambda_max": s.lambda_max,
            "lambda_min": s.lambda_min,
            "rayleigh_indicator": s.rayleigh_indicator,
            "converged": s.converged,
            "reference": reference,
        }),
        verdicts: verdicts(&checks),
        tables: vec![table("refinement", "n,lambda_max", rows)],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PathspaceParams {
    /// Drift rate of `dX = −θX dt + σ dB`, which is also the dissipativity `δ`.
    theta: f64,
    sigma: f64,
    horizon: f64,
    #[serde(default)]
    x0: f64,
    eps: Option<f64>,
    #[serde(default = "default_n")]
    steps: usize,
    /// Defaults to the inverse path constant.
    rho: Option<f64>,
}

fn pathspace(p: PathspaceParams) -> Result<Outcome, RunError> {
    let (theta, sigma, t) = (p.theta, p.sigma, p.horizon);
    let consts = pathspace_t2_constants(sigma, theta, t, p.eps.unwrap_or(theta))?;
    let alpha2 = alpha_squared(t, theta, -theta)?;

    let variance = -sigma * sigma * (-2.0 * theta * t).exp_m1() / (2.0 * theta);
    let marginal = Marginal::Gaussian {
        mean: p.x0 * (-theta * t).exp(),
        variance,
    };
    let tests: [(&str, &dyn Fn(f64) -> f64, &dyn Fn(f64) -> f64); 3] = [
        ("y", &|y| y, &|_| 1.0),
        ("y^2", &|y| y * y, &|y| 2.0 * y),
        ("sin y", &|y| y.sin(), &|y| y.cos()),
    ];
    let mut poincare = Vec::new();
    for (label, g, dg) in tests {
        poincare.push((label, poincare_check(marginal, g, dg, consts.c_marginal)?));
    }

    let kernel = CovarianceKernel::ou(theta, sigma, t)?;
    let grid = PathGrid::uniform(t, p.steps, 1)?;
    let rho = p.rho.unwrap_or(1.0 / consts.c_path);
    let shapes: [(&str, &dyn Fn(f64) -> f64); 3] = [
        ("constant", &|_| 1.0),
        ("sine", &|s| (PI * s / t).sin()),
        ("ramp", &|s| s / t),
    ];
    let mut tsirelson = Vec::new();
    for (label, h) in shapes {
        let path: Vec<f64> = grid.times().iter().map(|s| h(*s)).collect();
        for symmetric in [false, true] {
            tsirelson.push((label, symmetric, tsirelson_quadrature(&kernel, &path, &grid, rho, symmetric)?));
        }
    }

    // unit drift: the path is shifted by m(t) = t
    let entropy = girsanov_entropy(&[vec![1.0; grid.len()]], &grid)?;
    let kl = gaussian_shift_kl(&grid.times()[1..], &brownian_covariance(&grid))?;
    let shift: Vec<f64> = grid.times().iter().map(|s| sigma * (PI * s / t).sin()).collect();
    let cert = shift_w2_certificate(&shift, &grid)?;

    let checks = [
        ("poincare", poincare.iter().all(|(_, r)| r.pass)),
        ("tsirelson", tsirelson.iter().all(|(_, _, r)| r.pass)),
        ("girsanov_exact", (entropy - t / 2.0).abs() <= 1e-12 * t.max(1.0)),
        ("girsanov_oracle", (entropy - kl).abs() <= SPECTRUM_TOL * kl.max(1.0)),
        ("shift_certificate", (cert.upper - cert.lower).abs() <= 1e-12 * cert.upper.max(1.0)),
    ];
    let rows = tsirelson.iter().map(|(label, sym, r)| {
        vec![
            label.to_string(),
            if *sym { "pair" } else { "singleton" }.to_string(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.pass.to_string(),
        ]
    });
    Ok(Outcome {
        values: json!({
            "c_path": consts.c_path,
            "c_marginal": consts.c_marginal,
            "eps_coefficient": consts.eps_coefficient,
            "marginal_eps_coefficient": consts.marginal_eps_coefficient,
            "alpha_squared": alpha2,
            "marginal_variance": variance,
            "rho": rho,
            "poincare": poincare.iter().map(|(l, r)| json!({"g": l, "variance": r.variance, "dirichlet": r.dirichlet})).collect::<Vec<_>>(),
            "girsanov_entropy": entropy,
            "gaussian_kl": kl,
            "shift_upper": cert.upper,
            "shift_lower": cert.lower,
        }),
        verdicts: verdicts(&checks),
        tables: vec![table("tsirelson", "h,set,lhs,rhs,pass", rows)],
    })
}
