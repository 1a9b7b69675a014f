//! Sequential models `P_i(· | x^{i−1})` on a finite space and the quantities
//! computed directly from their kernels.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::measure::{
    checked_power, decode_index, product_space, stable_sum, DiscreteMeasure, FiniteMetricSpace,
    SpaceDocument, MASS_TOL,
};
use crate::stats::stream_rng;
use crate::transport::{kl_weights, transport_lp, wasserstein_exact};

/// Histories longer than this many points are sampled rather than scanned.
pub const HISTORY_SCAN_LIMIT: usize = 10_000;

/// Largest product space on which the forward coefficient solves transport problems.
pub const FORWARD_LP_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Kernels {
    /// Initial law and a transition matrix reused at every later step.
    Markov {
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
    /// `rows[i][h]` is the law of `x_{i+1}` given the history with index `h`
    /// among `|E|^i` histories (first coordinate most significant).
    History(Vec<Vec<Vec<f64>>>),
}

/// Conditional laws of `x_1, …, x_n` given the past, on a finite base space.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialModel {
    base: FiniteMetricSpace,
    horizon: usize,
    kernels: Kernels,
}

fn check_row(row: &[f64], k: usize, what: &str) -> Result<()> {
    if row.len() != k {
        return shape(format!("{what}: row of length {} on {k} points", row.len()));
    }
    DiscreteMeasure::new(row.to_vec())
        .map(|_| ())
        .map_err(|e| Error::InvalidMeasure(format!("{what}: {e}")))
}

impl SequentialModel {
    /// Time-homogeneous Markov chain started from `initial`.
    pub fn markov(
        base: FiniteMetricSpace,
        horizon: usize,
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if horizon == 0 {
            return domain("horizon must be positive");
        }
        let k = base.len();
        check_row(&initial, k, "initial law")?;
        if transition.len() != k {
            return shape(format!("transition has {} rows for {k} states", transition.len()));
        }
        for (x, row) in transition.iter().enumerate() {
            check_row(row, k, &format!("transition row {x}"))?;
        }
        Ok(Self {
            base,
            horizon,
            kernels: Kernels::Markov { initial, transition },
        })
    }

    /// `n` independent draws from `law`.
    pub fn iid(base: FiniteMetricSpace, horizon: usize, law: Vec<f64>) -> Result<Self> {
        let transition = vec![law.clone(); base.len()];
        Self::markov(base, horizon, law, transition)
    }

    /// Independent coordinates with laws `laws[0], …, laws[n−1]`.
    pub fn product(base: FiniteMetricSpace, laws: Vec<Vec<f64>>) -> Result<Self> {
        let k = base.len();
        let mut rows = Vec::with_capacity(laws.len());
        for (i, law) in laws.into_iter().enumerate() {
            let count = checked_power(k, i, "history table")?;
            rows.push(vec![law; count]);
        }
        Self::from_rows(base, rows)
    }

    /// Explicit history tables: `rows[i]` holds `|E|^i` rows.
    pub fn from_rows(base: FiniteMetricSpace, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if rows.is_empty() {
            return domain("horizon must be positive");
        }
        let k = base.len();
        for (i, step) in rows.iter().enumerate() {
            let expected = checked_power(k, i, "history table")?;
            if step.len() != expected {
                return shape(format!("step {} has {} rows, expected {expected}", i + 1, step.len()));
            }
            for (h, row) in step.iter().enumerate() {
                check_row(row, k, &format!("step {} history {h}", i + 1))?;
            }
        }
        Ok(Self {
            base,
            horizon: rows.len(),
            kernels: Kernels::History(rows),
        })
    }

    pub fn base(&self) -> &FiniteMetricSpace {
        &self.base
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.kernels, Kernels::Markov { .. })
    }

    /// Transition rows of a Markov model.
    pub fn transition(&self) -> Option<&[Vec<f64>]> {
        match &self.kernels {
            Kernels::Markov { transition, .. } => Some(transition),
            Kernels::History(_) => None,
        }
    }

    /// Law of `x_{i+1}` given the history `x^i` with index `hist` (`i` is 0-based).
    pub fn row(&self, i: usize, hist: usize) -> &[f64] {
        match &self.kernels {
            Kernels::Markov { initial, transition } => {
                if i == 0 {
                    initial
                } else {
                    &transition[hist % self.base.len()]
                }
            }
            Kernels::History(rows) => &rows[i][hist],
        }
    }

    /// Law of the first `len` coordinates, indexed like `E^len`.
    pub fn prefix_law(&self, len: usize) -> Result<Vec<f64>> {
        let k = self.base.len();
        checked_power(k, len, "joint law")?;
        let mut w = vec![1.0];
        for i in 0..len {
            let mut next = Vec::with_capacity(w.len() * k);
            for (h, &wh) in w.iter().enumerate() {
                let row = self.row(i, h);
                next.extend(row.iter().map(|p| wh * p));
            }
            w = next;
        }
        Ok(w)
    }

    /// Law of `(x_{s+1}, …, x_n)` given the history with index `hist` of length `s`.
    pub fn future_law(&self, s: usize, hist: usize) -> Result<Vec<f64>> {
        let k = self.base.len();
        checked_power(k, self.horizon - s, "future law")?;
        let mut w = vec![1.0];
        let mut stride = 1usize;
        for i in s..self.horizon {
            let mut next = Vec::with_capacity(w.len() * k);
            for (f, &wf) in w.iter().enumerate() {
                let row = self.row(i, hist * stride + f);
                next.extend(row.iter().map(|p| wf * p));
            }
            w = next;
            stride *= k;
        }
        Ok(w)
    }

    /// Reads `{"space": {...}, "horizon": n, "markov": {"initial": [...], "transition": [[...]]}}`
    /// or `{"space": {...}, "rows": [[[...]]]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.build()
    }
}

/// JSON form of a [`SequentialModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub space: SpaceDocument,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub markov: Option<MarkovDocument>,
    #[serde(default)]
    pub rows: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovDocument {
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl ModelDocument {
    pub fn build(self) -> Result<SequentialModel> {
        let (space, _) = self.space.into_parts()?;
        match (self.markov, self.rows) {
            (Some(m), None) => {
                let n = self
                    .horizon
                    .ok_or_else(|| Error::Parse("a Markov model needs a horizon".into()))?;
                SequentialModel::markov(space, n, m.initial, m.transition)
            }
            (None, Some(rows)) => {
                if let Some(n) = self.horizon {
                    if n != rows.len() {
                        return shape(format!("horizon {n} but {} steps of rows", rows.len()));
                    }
                }
                SequentialModel::from_rows(space, rows)
            }
            _ => Err(Error::Parse("declare exactly one of \"markov\" or \"rows\"".into())),
        }
    }
}

/// Law of `(x_1, …, x_n)` on `E^n`: weight of `x` is `Π_i P_i(x_i | x^{i−1})`.
pub fn joint_law(model: &SequentialModel) -> Result<DiscreteMeasure> {
    let w = model.prefix_law(model.horizon)?;
    let total = stable_sum(w.iter().copied());
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidMeasure(format!("joint law sums to {total}")));
    }
    DiscreteMeasure::new(w)
}

/// Per-step conditional entropies and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRule {
    pub per_step: Vec<f64>,
    pub total: f64,
}

fn same_shape(q: &SequentialModel, p: &SequentialModel) -> Result<()> {
    if q.base != p.base || q.horizon != p.horizon {
        return shape("models must share the base space and horizon");
    }
    Ok(())
}

/// `H(Q|P) = Σ_i E_Q H(Q_i(·|x̃^{i−1}) | P_i(·|x̃^{i−1}))`, step by step.
pub fn entropy_chain_rule(q: &SequentialModel, p: &SequentialModel) -> Result<ChainRule> {
    same_shape(q, p)?;
    let mut per_step = Vec::with_capacity(q.horizon);
    let mut prefix = vec![1.0];
    let k = q.base.len();
    for i in 0..q.horizon {
        let terms: Vec<f64> = prefix
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(h, &w)| {
                let kl = kl_weights(q.row(i, h), p.row(i, h));
                if kl.is_infinite() {
                    f64::INFINITY
                } else {
                    w * kl
                }
            })
            .collect();
        per_step.push(if terms.iter().any(|t| t.is_infinite()) {
            f64::INFINITY
        } else {
            stable_sum(terms)
        });
        if i + 1 < q.horizon {
            checked_power(k, i + 1, "history table")?;
            let mut next = Vec::with_capacity(prefix.len() * k);
            for (h, &w) in prefix.iter().enumerate() {
                next.extend(q.row(i, h).iter().map(|r| w * r));
            }
            prefix = next;
        }
    }
    let total = if per_step.iter().any(|s| s.is_infinite()) {
        f64::INFINITY
    } else {
        stable_sum(per_step.iter().copied())
    };
    Ok(ChainRule { per_step, total })
}

/// Backward coefficients `a_j` with `r^p = Σ a_j^p`, and optionally the
/// forward coefficient `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionProfile {
    pub p: f64,
    /// `a_1, …, a_{n−1}`.
    pub a: Vec<f64>,
    pub r: f64,
    pub s: Option<f64>,
    /// Set when some history table was sampled: the `a_j` are then lower bounds.
    pub sampled: bool,
}

fn r_from(a: &[f64], p: f64) -> f64 {
    stable_sum(a.iter().map(|x| x.powf(p))).powf(1.0 / p)
}

/// Largest `W_p(row_x, row_y) / d(x, y)` over distinct pairs of rows.
pub fn kernel_lipschitz(rows: &[Vec<f64>], space: &FiniteMetricSpace, p: f64) -> Result<f64> {
    let k = rows.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|x| ((x + 1)..k).map(move |y| (x, y))).collect();
    let vals = pairs
        .par_iter()
        .map(|&(x, y)| {
            let mx = DiscreteMeasure::new(rows[x].clone())?;
            let my = DiscreteMeasure::new(rows[y].clone())?;
            Ok(wasserstein_exact(&mx, &my, space, p)?.0 / space.d(x, y))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `a_j^p = max_i max W_p(P_i(·|x^{i−1}), P_i(·|x̃^{i−1}))^p / d(x_{i−j}, x̃_{i−j})^p`
/// over history pairs differing only in coordinate `i − j`.
///
/// Markov models only have `a_1`, the `W_p`-Lipschitz constant of the kernel.
/// History tables with more than [`HISTORY_SCAN_LIMIT`] rows are sampled with
/// a fixed seed and flagged.
pub fn backward_coefficients(model: &SequentialModel, p: f64) -> Result<ContractionProfile> {
    if !(1.0..=2.0).contains(&p) {
        return domain(format!("p = {p} outside [1, 2]"));
    }
    let n = model.horizon;
    let mut a = vec![0.0; n.saturating_sub(1)];
    let mut sampled = false;
    let space = &model.base;
    let k = space.len();
    match &model.kernels {
        Kernels::Markov { transition, .. } => {
            if n >= 2 {
                a[0] = kernel_lipschitz(transition, space, p)?;
            }
        }
        Kernels::History(rows) => {
            for (i, step) in rows.iter().enumerate().skip(1) {
                let count = step.len();
                let hists: Vec<usize> = if count <= HISTORY_SCAN_LIMIT {
                    (0..count).collect()
                } else {
                    sampled = true;
                    let mut rng = stream_rng(0x5eed, i as u64);
                    (0..HISTORY_SCAN_LIMIT).map(|_| rng.random_range(0..count)).collect()
                };
                // a history x^i and a change in coordinate pos = i − j
                let found = hists
                    .par_iter()
                    .map(|&h| {
                        let coords = decode_index(h, k, i);
                        let mut local = vec![0.0f64; i];
                        for pos in 0..i {
                            let j = i - pos;
                            let stride = k.pow((i - 1 - pos) as u32);
                            for alt in (coords[pos] + 1)..k {
                                let h2 = h + (alt - coords[pos]) * stride;
                                let d = space.d(coords[pos], alt);
                                let w = row_distance(&step[h], &step[h2], space, p)?;
                                local[j - 1] = local[j - 1].max(w.powf(p) / d.powf(p));
                            }
                        }
                        Ok(local)
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                for local in found {
                    for (j, v) in local.into_iter().enumerate() {
                        a[j] = a[j].max(v);
                    }
                }
            }
            for x in a.iter_mut() {
                *x = x.powf(1.0 / p);
            }
        }
    }
    let r = r_from(&a, p);
    Ok(ContractionProfile {
        p,
        a,
        r,
        s: None,
        sampled,
    })
}

fn row_distance(x: &[f64], y: &[f64], space: &FiniteMetricSpace, p: f64) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    let cost = space.cost_matrix(p);
    let plan = transport_lp(x, y, &cost)?;
    Ok(if p == 1.0 { plan.cost } else { plan.cost.powf(1.0 / p) })
}

/// `S = max W_1^{d_{l1}}(P(dx_{k+1}^n | x^{k−1}, x_k), P(dx_{k+1}^n | x^{k−1}, y_k)) / d(x_k, y_k)`,
/// each transport problem solved exactly on the product space of future coordinates.
pub fn forward_coefficient(model: &SequentialModel) -> Result<f64> {
    let n = model.horizon;
    let k = model.base.len();
    let mut best = 0.0f64;
    for s in 1..n {
        // s = number of fixed coordinates including x_k; future has n − s coordinates
        let future = n - s;
        let size = checked_power(k, future, "future product space")?;
        if size > FORWARD_LP_LIMIT {
            return Err(Error::Capacity {
                what: "future product space for exact transport",
                needed: size as u128,
                limit: FORWARD_LP_LIMIT as u128,
            });
        }
        let space = product_space(&model.base, future, 1.0)?;
        let cost = space.cost_matrix(1.0);
        let prefixes = checked_power(k, s - 1, "history table")?;
        let jobs: Vec<(usize, usize, usize)> = (0..prefixes)
            .flat_map(|h| (0..k).flat_map(move |x| ((x + 1)..k).map(move |y| (h, x, y))))
            .collect();
        let vals = jobs
            .par_iter()
            .map(|&(h, x, y)| {
                let fx = model.future_law(s, h * k + x)?;
                let fy = model.future_law(s, h * k + y)?;
                let w = if fx == fy { 0.0 } else { transport_lp(&fx, &fy, &cost)?.cost };
                Ok(w / model.base.d(x, y))
            })
            .collect::<Result<Vec<f64>>>()?;
        best = vals.into_iter().fold(best, f64::max);
    }
    Ok(best)
}
