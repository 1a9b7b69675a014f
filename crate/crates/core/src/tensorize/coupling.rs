//! Step-by-step coupling of two sequential models from exact conditional
//! optimal couplings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{checked_power, stable_sum, MAX_POINTS};
use crate::transport::transport_lp;

use super::model::SequentialModel;

/// A coupling of `Q` and `P` on `E^n × E^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartonCoupling {
    /// Number of points of `E^n`.
    pub size: usize,
    /// `size × size`, row = path of `Q`, column = path of `P`.
    pub mass: Vec<f64>,
    /// `(E Σ_i d(X̃_i, X_i)^p)^{1/p}`.
    pub cost: f64,
}

impl MartonCoupling {
    pub fn q_marginal(&self) -> Vec<f64> {
        (0..self.size)
            .map(|i| stable_sum(self.mass[i * self.size..(i + 1) * self.size].iter().copied()))
            .collect()
    }

    pub fn p_marginal(&self) -> Vec<f64> {
        (0..self.size)
            .map(|j| stable_sum((0..self.size).map(|i| self.mass[i * self.size + j])))
            .collect()
    }
}

/// Couples `Q` and `P` coordinate by coordinate: given the two histories, the
/// next pair receives an optimal `W_p` coupling of `Q_i(·|x̃^{i−1})` and
/// `P_i(·|x^{i−1})`.
pub fn marton_coupling(p_model: &SequentialModel, q_model: &SequentialModel, p: f64) -> Result<MartonCoupling> {
    if p_model.base() != q_model.base() || p_model.horizon() != q_model.horizon() {
        return Err(Error::Shape("models must share the base space and horizon".into()));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [1, 2]")));
    }
    let base = p_model.base();
    let k = base.len();
    let n = p_model.horizon();
    let size = checked_power(k, n, "coupling marginal")?;
    let cells = (size as u128) * (size as u128);
    if cells > MAX_POINTS as u128 {
        return Err(Error::Capacity {
            what: "coupling on E^n × E^n",
            needed: cells,
            limit: MAX_POINTS as u128,
        });
    }
    let cost = base.cost_matrix(p);

    // (q-history, p-history, mass, accumulated Σ d^p)
    let mut layer: Vec<(usize, usize, f64, f64)> = vec![(0, 0, 1.0, 0.0)];
    for i in 0..n {
        let mut next = Vec::with_capacity(layer.len() * k);
        for &(hq, hp, w, acc) in &layer {
            let rq = q_model.row(i, hq);
            let rp = p_model.row(i, hp);
            let plan = transport_lp(rq, rp, &cost)?;
            for a in 0..k {
                for b in 0..k {
                    let m = plan.at(a, b);
                    if m > 0.0 {
                        next.push((hq * k + a, hp * k + b, w * m, acc + cost[a * k + b]));
                    }
                }
            }
        }
        layer = next;
    }
    let mut mass = vec![0.0; size * size];
    let mut terms = Vec::with_capacity(layer.len());
    for (hq, hp, w, acc) in layer {
        mass[hq * size + hp] += w;
        terms.push(w * acc);
    }
    let total = stable_sum(terms).max(0.0);
    Ok(MartonCoupling {
        size,
        mass,
        cost: if p == 1.0 { total } else { total.powf(1.0 / p) },
    })
}
