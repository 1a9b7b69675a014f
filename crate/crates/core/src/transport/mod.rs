//! Exact optimal transport, relative entropy, total variation and the
//! one-dimensional Gaussian closed forms.

mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Result};
use crate::measure::{stable_sum, DiscreteMeasure, FiniteMetricSpace};

/// An optimal coupling together with Kantorovich potentials certifying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// `rows × cols`, row-major.
    pub mass: Vec<f64>,
    /// Optimal value `Σ π_ij c_ij` of the linear program.
    pub cost: f64,
    pub potential_u: Vec<f64>,
    pub potential_v: Vec<f64>,
}

impl TransportPlan {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| stable_sum(self.mass[i * self.cols..(i + 1) * self.cols].iter().copied()))
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| stable_sum((0..self.rows).map(|i| self.at(i, j))))
            .collect()
    }

    /// `Σ a_i u_i + Σ b_j v_j`.
    pub fn dual_value(&self, a: &[f64], b: &[f64]) -> f64 {
        stable_sum(
            a.iter()
                .zip(&self.potential_u)
                .chain(b.iter().zip(&self.potential_v))
                .map(|(w, p)| w * p),
        )
    }

    /// Largest violation of `u_i + v_j ≤ c_ij` (dual feasibility) and of
    /// `u_i + v_j = c_ij` on the support of the plan (complementary slackness).
    pub fn certificate_violations(&self, cost: &[f64]) -> (f64, f64) {
        let mut feas = 0.0f64;
        let mut slack = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let c = cost[i * self.cols + j];
                let s = self.potential_u[i] + self.potential_v[j] - c;
                feas = feas.max(s);
                if self.at(i, j) > 0.0 {
                    slack = slack.max(s.abs());
                }
            }
        }
        (feas, slack)
    }

    /// CSV rows `source_index,target_index,mass` for the support of the plan.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source_index,target_index,mass\n");
        for i in 0..self.rows {
            for j in 0..self.cols {
                let m = self.at(i, j);
                if m > 0.0 {
                    let _ = writeln!(out, "{i},{j},{m:.14e}");
                }
            }
        }
        out
    }
}

/// Solves the transport LP between weight vectors `a` (rows) and `b` (columns)
/// for an arbitrary `a.len() × b.len()` cost matrix.
///
/// Zero-weight points are removed before solving; their potentials are then
/// chosen as the largest values keeping the dual feasible.
pub fn transport_lp(a: &[f64], b: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (a.len(), b.len());
    if cost.len() != m * n {
        return shape(format!("cost matrix has {} entries, expected {m}×{n}", cost.len()));
    }
    if m == 0 || n == 0 {
        return shape("empty marginal");
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return domain("cost matrix must be finite");
    }
    let rows: Vec<usize> = (0..m).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return domain("marginals carry no mass");
    }
    let sub_a: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let sub_b: Vec<f64> = cols.iter().map(|&j| b[j]).collect();
    let sub_cost: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost[i * n + j]))
        .collect();
    let sol = simplex::solve(&sub_a, &sub_b, &sub_cost)?;

    let mut mass = vec![0.0; m * n];
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    for (si, &i) in rows.iter().enumerate() {
        u[i] = sol.u[si];
        for (sj, &j) in cols.iter().enumerate() {
            mass[i * n + j] = sol.flow[si * cols.len() + sj];
        }
    }
    for (sj, &j) in cols.iter().enumerate() {
        v[j] = sol.v[sj];
    }
    for i in 0..m {
        if u[i].is_nan() {
            u[i] = cols
                .iter()
                .map(|&j| cost[i * n + j] - v[j])
                .fold(f64::INFINITY, f64::min);
        }
    }
    for j in 0..n {
        if v[j].is_nan() {
            v[j] = (0..m)
                .map(|i| cost[i * n + j] - u[i])
                .fold(f64::INFINITY, f64::min);
        }
    }
    let total = stable_sum(mass.iter().zip(cost).map(|(x, c)| x * c));
    Ok(TransportPlan {
        rows: m,
        cols: n,
        mass,
        cost: total.max(0.0),
        potential_u: u,
        potential_v: v,
    })
}

/// `W_p(μ, ν) = (min_π Σ π_ij d_ij^p)^{1/p}` by exact linear programming.
pub fn wasserstein_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    space: &FiniteMetricSpace,
    p: f64,
) -> Result<(f64, TransportPlan)> {
    if !(1.0..=2.0).contains(&p) {
        return domain(format!("p = {p} outside [1, 2]"));
    }
    if mu.len() != space.len() || nu.len() != space.len() {
        return shape(format!(
            "measures of sizes {} and {} on a space of {} points",
            mu.len(),
            nu.len(),
            space.len()
        ));
    }
    let cost = space.cost_matrix(p);
    let plan = transport_lp(mu.weights(), nu.weights(), &cost)?;
    let value = if p == 1.0 { plan.cost } else { plan.cost.powf(1.0 / p) };
    Ok((value, plan))
}

/// Relative entropy `H(ν | μ) = Σ ν_i log(ν_i / μ_i)`; `+∞` when `ν` charges a `μ`-null point.
pub fn kl_divergence(nu: &DiscreteMeasure, mu: &DiscreteMeasure) -> f64 {
    kl_weights(nu.weights(), mu.weights())
}

pub(crate) fn kl_weights(nu: &[f64], mu: &[f64]) -> f64 {
    let mut terms = Vec::with_capacity(nu.len());
    for (&q, &p) in nu.iter().zip(mu) {
        if q > 0.0 {
            if p <= 0.0 {
                return f64::INFINITY;
            }
            terms.push(q * (q / p).ln());
        }
    }
    stable_sum(terms).max(0.0)
}

/// `Σ |μ_i − ν_i|`, so that `W_1` under the trivial metric is half of it.
pub fn total_variation(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    stable_sum(mu.weights().iter().zip(nu.weights()).map(|(a, b)| (a - b).abs()))
}

/// `W_2(N(m1, s1²), N(m2, s2²)) = √((m1 − m2)² + (s1 − s2)²)`.
pub fn gaussian_w2(m1: f64, s1: f64, m2: f64, s2: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0) {
        return domain(format!("scales must be positive, got {s1} and {s2}"));
    }
    Ok(((m1 - m2).powi(2) + (s1 - s2).powi(2)).sqrt())
}

/// `H(N(m1, s1²) | N(m2, s2²))`.
pub fn gaussian_kl(m1: f64, s1: f64, m2: f64, s2: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0) {
        return domain(format!("scales must be positive, got {s1} and {s2}"));
    }
    Ok((s2 / s1).ln() + (s1 * s1 + (m1 - m2).powi(2)) / (2.0 * s2 * s2) - 0.5)
}
