//! Finite metric spaces, probability measures on them, Lipschitz functions,
//! and discretized path spaces.
//!
//! Every exact transport computation in the crate runs on a
//! [`FiniteMetricSpace`]. Product spaces `E^n` carry the `l_p` metric
//! `(Σ d(x_i, y_i)^p)^{1/p}`; they are enumerated point by point in
//! lexicographic order (first coordinate most significant), but distances are
//! evaluated from the factor space rather than stored as an `|E|^n × |E|^n`
//! matrix.

use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};

/// Largest number of points any constructed space or joint law may have.
pub const MAX_POINTS: usize = 1_000_000;

/// Tolerance for `Σ weights = 1`.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Distances {
    Dense(Vec<f64>),
    Product {
        base: Box<FiniteMetricSpace>,
        factors: usize,
        p: f64,
    },
}

/// A finite set of labelled points with a symmetric distance.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    points: Vec<String>,
    dist: Distances,
}

impl FiniteMetricSpace {
    /// Builds a space from labels and a dense distance matrix.
    ///
    /// Checks zero diagonal, symmetry, positivity off the diagonal and the
    /// triangle inequality (the latter is an `O(n³)` sweep).
    pub fn new(points: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty space".into()));
        }
        if n > MAX_POINTS {
            return Err(Error::Capacity {
                what: "metric space",
                needed: n as u128,
                limit: MAX_POINTS as u128,
            });
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return shape(format!("distance matrix must be {n}×{n}"));
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        let space = Self {
            points,
            dist: Distances::Dense(flat),
        };
        space.check_axioms()?;
        space.check_triangle()?;
        Ok(space)
    }

    /// The trivial metric `d(x, y) = 1{x ≠ y}` on `n` points labelled `0..n`.
    pub fn trivial(n: usize) -> Self {
        let mut flat = vec![1.0; n * n];
        for i in 0..n {
            flat[i * n + i] = 0.0;
        }
        Self {
            points: (0..n).map(|i| i.to_string()).collect(),
            dist: Distances::Dense(flat),
        }
    }

    /// Points on the real line with `d(x, y) = |x − y|`. Coordinates must be distinct.
    pub fn line(coords: &[f64]) -> Result<Self> {
        let pts: Vec<Vec<f64>> = coords.iter().map(|&c| vec![c]).collect();
        Self::euclidean(&pts)
    }

    /// Points of `ℝ^d` with the Euclidean distance.
    pub fn euclidean(coords: &[Vec<f64>]) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty space".into()));
        }
        let dim = coords[0].len();
        if coords.iter().any(|c| c.len() != dim) {
            return shape("all points must share one dimension");
        }
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return domain("non-finite coordinate");
        }
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d == 0.0 {
                    return Err(Error::InvalidMetric(format!("points {i} and {j} coincide")));
                }
                flat[i * n + j] = d;
                flat[j * n + i] = d;
            }
        }
        let points = coords
            .iter()
            .map(|c| {
                if c.len() == 1 {
                    format!("{}", c[0])
                } else {
                    format!("{c:?}")
                }
            })
            .collect();
        Ok(Self {
            points,
            dist: Distances::Dense(flat),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    /// Distance between points `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        match &self.dist {
            Distances::Dense(flat) => flat[i * self.points.len() + j],
            Distances::Product { base, factors, p } => {
                let b = base.len();
                let (mut x, mut y) = (i, j);
                let mut acc = 0.0;
                for _ in 0..*factors {
                    let d = base.d(x % b, y % b);
                    acc += if *p == 1.0 { d } else { d.powf(*p) };
                    x /= b;
                    y /= b;
                }
                if *p == 1.0 {
                    acc
                } else {
                    acc.powf(1.0 / p)
                }
            }
        }
    }

    pub fn max_distance(&self) -> f64 {
        let n = self.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                m = m.max(self.d(i, j));
            }
        }
        m
    }

    /// Cost matrix `d(i, j)^p`, row-major.
    pub fn cost_matrix(&self, p: f64) -> Vec<f64> {
        let n = self.len();
        let mut c = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let d = self.d(i, j);
                c.push(if p == 1.0 { d } else { d.powf(p) });
            }
        }
        c
    }

    /// For a product space, the factor space and the number of factors.
    pub fn factorization(&self) -> Option<(&FiniteMetricSpace, usize)> {
        match &self.dist {
            Distances::Product { base, factors, .. } => Some((base, *factors)),
            Distances::Dense(_) => None,
        }
    }

    fn check_axioms(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("d[{i}][{i}] = {} ≠ 0", self.d(i, i))));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.d(i, j), self.d(j, i));
                if !a.is_finite() || a <= 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "d[{i}][{j}] = {a} must be finite and positive"
                    )));
                }
                if a != b {
                    return Err(Error::InvalidMetric(format!("asymmetric at ({i}, {j}): {a} vs {b}")));
                }
            }
        }
        Ok(())
    }

    /// Sweeps all triples for `d(i,k) ≤ d(i,j) + d(j,k)` (relative slack 1e-12).
    pub fn check_triangle(&self) -> Result<()> {
        let n = self.len();
        let scale = self.max_distance().max(1.0);
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    if self.d(i, k) > dij + self.d(j, k) + 1e-12 * scale {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense copy of the distance matrix.
    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|i| (0..n).map(|j| self.d(i, j)).collect()).collect()
    }
}

/// Decodes a product-space index into coordinates (first coordinate most significant).
pub fn decode_index(mut idx: usize, base: usize, factors: usize) -> Vec<usize> {
    let mut out = vec![0; factors];
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    out
}

/// Inverse of [`decode_index`].
pub fn encode_index(coords: &[usize], base: usize) -> usize {
    coords.iter().fold(0, |acc, &c| acc * base + c)
}

/// Checked `base^n` against [`MAX_POINTS`].
pub fn checked_power(base: usize, n: usize, what: &'static str) -> Result<usize> {
    let needed = (base as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > MAX_POINTS as u128 {
        return Err(Error::Capacity {
            what,
            needed,
            limit: MAX_POINTS as u128,
        });
    }
    Ok(needed as usize)
}

/// The space `E^n` with metric `d_{l_p}(x, y) = (Σ_i d(x_i, y_i)^p)^{1/p}`.
pub fn product_space(space: &FiniteMetricSpace, n: usize, p: f64) -> Result<FiniteMetricSpace> {
    if n == 0 {
        return domain("number of factors must be positive");
    }
    if !(1.0..=2.0).contains(&p) {
        return domain(format!("p = {p} outside [1, 2]"));
    }
    if n == 1 {
        return Ok(space.clone());
    }
    let b = space.len();
    let size = checked_power(b, n, "product space")?;
    let points = (0..size)
        .map(|idx| {
            let coords = decode_index(idx, b, n);
            let labels: Vec<&str> = coords.iter().map(|&c| space.points[c].as_str()).collect();
            format!("({})", labels.join(","))
        })
        .collect();
    Ok(FiniteMetricSpace {
        points,
        dist: Distances::Product {
            base: Box::new(space.clone()),
            factors: n,
            p,
        },
    })
}

/// Nonnegative weights summing to one, indexed like the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscreteMeasure {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<DiscreteMeasure> for Vec<f64> {
    fn from(m: DiscreteMeasure) -> Self {
        m.weights
    }
}

/// Neumaier-compensated sum.
pub(crate) fn stable_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl DiscreteMeasure {
    /// Validates that weights are finite, nonnegative and sum to 1 within [`MASS_TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no weights".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidMeasure(format!("weight {i} = {w}")));
        }
        let total = stable_sum(weights.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative raw masses.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("raw masses must be finite and nonnegative".into()));
        }
        let total = stable_sum(raw.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        Self::new(raw.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        Self { weights: w }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// `Bernoulli(q)` on `{0, 1}`: weights `(1 − q, q)`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return domain(format!("Bernoulli parameter {q} outside [0, 1]"));
        }
        Ok(Self {
            weights: vec![1.0 - q, q],
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        stable_sum(self.weights.iter().zip(f).map(|(w, v)| w * v))
    }

    /// Image measure under an index map into a set of `target_len` points.
    pub fn pushforward(&self, map: &[usize], target_len: usize) -> Result<Self> {
        if map.len() != self.len() {
            return shape(format!("map has {} entries for {} points", map.len(), self.len()));
        }
        let mut w = vec![0.0; target_len];
        for (i, &y) in map.iter().enumerate() {
            if y >= target_len {
                return shape(format!("map sends {i} to {y} ≥ {target_len}"));
            }
            w[y] += self.weights[i];
        }
        Ok(Self { weights: w })
    }
}

/// Values of a real function on a finite space together with its Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzFunction {
    values: Vec<f64>,
    lip_const: f64,
}

impl LipschitzFunction {
    /// Computes `max_{i≠j} |f_i − f_j| / d_ij` exactly.
    pub fn new(values: Vec<f64>, space: &FiniteMetricSpace) -> Result<Self> {
        if values.len() != space.len() {
            return shape(format!("{} values on {} points", values.len(), space.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("function values must be finite");
        }
        let n = values.len();
        let mut lip = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                lip = lip.max((values[i] - values[j]).abs() / space.d(i, j));
            }
        }
        Ok(Self {
            values,
            lip_const: lip,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lip_const(&self) -> f64 {
        self.lip_const
    }
}

/// McShane envelope `f(x) = min_y (g(y) + L·d(x, y))`: the largest `L`-Lipschitz
/// minorant of `g`. Leaves `g` unchanged when it is already `L`-Lipschitz.
pub fn lipschitz_regularize(
    raw_values: &[f64],
    lip: f64,
    space: &FiniteMetricSpace,
) -> Result<LipschitzFunction> {
    if raw_values.len() != space.len() {
        return shape(format!("{} values on {} points", raw_values.len(), space.len()));
    }
    if !(lip > 0.0) || !lip.is_finite() {
        return domain(format!("Lipschitz bound {lip} must be positive"));
    }
    if raw_values.iter().any(|v| !v.is_finite()) {
        return domain("raw values must be finite");
    }
    let n = raw_values.len();
    let values = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| raw_values[y] + lip * space.d(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    LipschitzFunction::new(values, space)
}

/// Strictly increasing times `0 = t_0 < … < t_N = T` for paths in `ℝ^dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    times: Vec<f64>,
    dimension: usize,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, dimension: usize) -> Result<Self> {
        if times.len() < 2 {
            return domain("a path grid needs at least two times");
        }
        if times[0] != 0.0 {
            return domain("path grids start at t = 0");
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return domain("grid times must be finite and strictly increasing");
        }
        if dimension == 0 {
            return domain("dimension must be positive");
        }
        Ok(Self { times, dimension })
    }

    /// `steps + 1` equally spaced times on `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize, dimension: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return domain("uniform grid needs a positive horizon and at least one step");
        }
        let h = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        times[steps] = horizon;
        Self::new(times, dimension)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is nonempty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Trapezoidal quadrature weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.times.len();
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            let h = self.step(k);
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }

    /// Number of scalars in a path sampled on this grid.
    pub fn path_len(&self) -> usize {
        self.times.len() * self.dimension
    }

    /// Trapezoidal `∫_0^T g(t) dt` for scalar samples `g(t_k)`.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        stable_sum((0..self.steps()).map(|k| 0.5 * self.step(k) * (samples[k] + samples[k + 1])))
    }
}

/// Metric used to compare two paths sampled on a common grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMetric {
    /// `max_k |γ1(t_k) − γ2(t_k)|`.
    Sup,
    /// `L²[0, T]` norm of the piecewise-linear interpolant of the difference.
    L2,
    /// Discrete Cameron–Martin norm `(Σ_k |Δ(γ1 − γ2)_k|² / Δt_k)^{1/2}`.
    CameronMartin,
}

/// Distance between two paths stored time-major (`path[k * d + c]`).
pub fn path_distance(g1: &[f64], g2: &[f64], grid: &PathGrid, kind: PathMetric) -> Result<f64> {
    let len = grid.path_len();
    if g1.len() != len || g2.len() != len {
        return shape(format!(
            "paths have {} and {} samples, grid expects {len}",
            g1.len(),
            g2.len()
        ));
    }
    let d = grid.dimension();
    let diff: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| a - b).collect();
    let at = |k: usize| &diff[k * d..(k + 1) * d];
    let value = match kind {
        PathMetric::Sup => (0..grid.len())
            .map(|k| at(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max),
        PathMetric::L2 => {
            // ∫ over [t_k, t_{k+1}] of |a + (b − a)s|² = Δt (|a|² + a·b + |b|²) / 3
            let total = stable_sum((0..grid.steps()).map(|k| {
                let (a, b) = (at(k), at(k + 1));
                let s: f64 = a.iter().zip(b).map(|(x, y)| x * x + x * y + y * y).sum();
                grid.step(k) * s / 3.0
            }));
            total.max(0.0).sqrt()
        }
        PathMetric::CameronMartin => {
            let total = stable_sum((0..grid.steps()).map(|k| {
                let s: f64 = at(k + 1)
                    .iter()
                    .zip(at(k))
                    .map(|(b, a)| (b - a) * (b - a))
                    .sum();
                s / grid.step(k)
            }));
            total.sqrt()
        }
    };
    Ok(value)
}

/// JSON document describing a space and, optionally, a measure on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub points: Vec<serde_json::Value>,
    pub dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl SpaceDocument {
    pub fn into_parts(self) -> Result<(FiniteMetricSpace, Option<DiscreteMeasure>)> {
        let labels = self
            .points
            .into_iter()
            .map(|v| match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            })
            .collect();
        let space = FiniteMetricSpace::new(labels, self.dist)?;
        let measure = match self.weights {
            Some(w) => {
                if w.len() != space.len() {
                    return shape(format!("{} weights for {} points", w.len(), space.len()));
                }
                Some(DiscreteMeasure::new(w)?)
            }
            None => None,
        };
        Ok((space, measure))
    }

    pub fn from_parts(space: &FiniteMetricSpace, measure: Option<&DiscreteMeasure>) -> Self {
        Self {
            points: space
                .points()
                .iter()
                .map(|p| serde_json::Value::String(p.clone()))
                .collect(),
            dist: space.to_matrix(),
            weights: measure.map(|m| m.weights().to_vec()),
        }
    }
}

/// Parses `{"points": [...], "dist": [[...]], "weights": [...]}`.
pub fn load_space_json(text: &str) -> Result<(FiniteMetricSpace, Option<DiscreteMeasure>)> {
    let doc: SpaceDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.into_parts()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_of_one_factor_is_identity() {
        let e = FiniteMetricSpace::trivial(2);
        let p = product_space(&e, 1, 1.0).unwrap();
        assert_eq!(p, e);
    }

    #[test]
    fn hamming_square() {
        let e = FiniteMetricSpace::trivial(2);
        let p = product_space(&e, 2, 1.0).unwrap();
        assert_eq!(p.len(), 4);
        // enumerate all 16 ordered pairs: distance = number of differing coordinates
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (decode_index(i, 2, 2), decode_index(j, 2, 2));
                let hamming = a.iter().zip(&b).filter(|(x, y)| x != y).count() as f64;
                assert_eq!(p.d(i, j), hamming);
            }
        }
        assert_eq!(p.max_distance(), 2.0);
        p.check_triangle().unwrap();
        let p2 = product_space(&e, 2, 2.0).unwrap();
        assert_abs_diff_eq!(p2.max_distance(), 2f64.sqrt(), epsilon = 1e-15);
        p2.check_triangle().unwrap();
    }

    #[test]
    fn product_capacity_guard() {
        let e = FiniteMetricSpace::trivial(10);
        assert!(product_space(&e, 6, 1.0).is_ok());
        assert!(matches!(product_space(&e, 7, 1.0), Err(Error::Capacity { .. })));
        assert!(product_space(&e, 2, 2.5).is_err());
    }

    #[test]
    fn rejects_bad_metrics() {
        let pts = vec!["a".to_string(), "b".into(), "c".into()];
        let asym = vec![vec![0.0, 1.0, 1.0], vec![2.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::new(pts.clone(), asym).is_err());
        let tri = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::new(pts.clone(), tri).is_err());
        let diag = vec![vec![0.1, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::new(pts, diag).is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0.5, 0.5]).is_ok());
        assert!(DiscreteMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.5, 0.5 + 1e-11]).is_err());
        let m = DiscreteMeasure::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn regularize_examples() {
        let e = FiniteMetricSpace::trivial(2);
        let c = lipschitz_regularize(&[3.0, 3.0], 0.7, &e).unwrap();
        assert_eq!(c.values(), &[3.0, 3.0]);
        assert_eq!(c.lip_const(), 0.0);
        let f = lipschitz_regularize(&[0.0, 5.0], 1.0, &e).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0]);
        let g = lipschitz_regularize(&[0.0, 1.0], 1.0, &e).unwrap();
        assert_eq!(g.values(), &[0.0, 1.0]);
    }

    #[test]
    fn linear_path_distances() {
        let grid = PathGrid::uniform(1.0, 7, 1).unwrap();
        let g1: Vec<f64> = grid.times().to_vec();
        let g0 = vec![0.0; g1.len()];
        for kind in [PathMetric::Sup, PathMetric::L2, PathMetric::CameronMartin] {
            assert_eq!(path_distance(&g1, &g1, &grid, kind).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(
            path_distance(&g1, &g0, &grid, PathMetric::CameronMartin).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            path_distance(&g1, &g0, &grid, PathMetric::L2).unwrap(),
            (1.0f64 / 3.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(path_distance(&g1, &g0, &grid, PathMetric::Sup).unwrap(), 1.0);
        let short = vec![0.0; 3];
        assert!(path_distance(&short, &g0, &grid, PathMetric::Sup).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"points": ["a", 2, "c"], "dist": [[0,1,2],[1,0,1],[2,1,0]], "weights": [0.25, 0.25, 0.5]}"#;
        let (space, m) = load_space_json(text).unwrap();
        assert_eq!(space.points(), &["a", "2", "c"]);
        assert_eq!(space.d(0, 2), 2.0);
        assert_eq!(m.unwrap().weights(), &[0.25, 0.25, 0.5]);
        let bad = r#"{"points": ["a"], "dist": [[0]], "weights": [0.5]}"#;
        assert!(load_space_json(bad).is_err());
    }
}
