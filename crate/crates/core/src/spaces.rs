//! Finite metric spaces and their p-sum products.
//!
//! A [`FiniteMetricSpace`] is a labelled point set with a validated distance
//! matrix. Products are never materialized eagerly: a [`ProductSpace`] keeps
//! its factors and addresses points by index tuples, computing the p-sum
//! metric `(Σ ρᵢ(xᵢ, x'ᵢ)^p)^{1/p}` on demand.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed in the triangle inequality, scaled by the largest entry.
pub const TRIANGLE_REL_TOL: f64 = 1e-9;

/// A point of a product space: one index per factor.
pub type Point = Vec<usize>;

/// The first metric axiom a matrix violates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    Asymmetry { i: usize, j: usize },
    NonzeroDiagonal { i: usize },
    Negative { i: usize, j: usize },
    /// `d[i][j] > d[i][via] + d[via][j]` beyond tolerance.
    Triangle { i: usize, j: usize, via: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Asymmetry { i, j } => write!(f, "asymmetry at ({i},{j})"),
            Violation::NonzeroDiagonal { i } => write!(f, "nonzero diagonal at ({i},{i})"),
            Violation::Negative { i, j } => write!(f, "negative entry at ({i},{j})"),
            Violation::Triangle { i, j, via } => write!(f, "triangle at ({i},{j}) via {via}"),
        }
    }
}

/// Checks that `d` is a square matrix of finite reals satisfying the metric axioms.
///
/// Returns `Error::Malformed` for non-square or non-finite input and
/// `Error::Metric` with the first violated axiom otherwise. Axioms are checked
/// in the order asymmetry, diagonal, sign, triangle.
pub fn validate_metric(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(Error::malformed(format!(
                "distance matrix is not square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::malformed(format!("non-finite distance at ({i},{j})")));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if d[i][j] != d[j][i] {
                return Err(Error::Metric(Violation::Asymmetry { i, j }));
            }
        }
    }
    if let Some(i) = (0..n).find(|&i| d[i][i] != 0.0) {
        return Err(Error::Metric(Violation::NonzeroDiagonal { i }));
    }
    for i in 0..n {
        if let Some(j) = (0..n).find(|&j| d[i][j] < 0.0) {
            return Err(Error::Metric(Violation::Negative { i, j }));
        }
    }
    let max = d.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
    let tol = TRIANGLE_REL_TOL * max;
    for i in 0..n {
        for j in 0..n {
            for via in 0..n {
                if d[i][j] > d[i][via] + d[via][j] + tol {
                    return Err(Error::Metric(Violation::Triangle { i, j, via }));
                }
            }
        }
    }
    Ok(())
}

/// A finite set of labelled points with a validated metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDoc", into = "SpaceDoc")]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    d: Vec<Vec<f64>>,
    base_point: usize,
}

#[derive(Serialize, Deserialize)]
struct SpaceDoc {
    labels: Vec<String>,
    d: Vec<Vec<f64>>,
    #[serde(default)]
    base_point: usize,
}

impl TryFrom<SpaceDoc> for FiniteMetricSpace {
    type Error = Error;

    fn try_from(doc: SpaceDoc) -> Result<Self> {
        FiniteMetricSpace::new(doc.labels, doc.d, doc.base_point)
    }
}

impl From<FiniteMetricSpace> for SpaceDoc {
    fn from(s: FiniteMetricSpace) -> Self {
        SpaceDoc { labels: s.labels, d: s.d, base_point: s.base_point }
    }
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<String>, d: Vec<Vec<f64>>, base_point: usize) -> Result<Self> {
        validate_metric(&d)?;
        if labels.len() != d.len() {
            return Err(Error::malformed(format!(
                "{} labels for {} points",
                labels.len(),
                d.len()
            )));
        }
        if d.is_empty() {
            return Err(Error::malformed("a metric space needs at least one point"));
        }
        if base_point >= d.len() {
            return Err(Error::malformed(format!("base point {base_point} out of range")));
        }
        Ok(FiniteMetricSpace { labels, d, base_point })
    }

    /// Points on the real line with `|a - b|` as metric, labelled by their value.
    pub fn from_line(coords: &[f64]) -> Result<Self> {
        let labels = coords.iter().map(|c| format!("{c}")).collect();
        let d = coords
            .iter()
            .map(|a| coords.iter().map(|b| (a - b).abs()).collect())
            .collect();
        Self::new(labels, d, 0)
    }

    /// Points in the plane with the Euclidean metric.
    pub fn from_plane(coords: &[(f64, f64)]) -> Result<Self> {
        let labels = coords.iter().map(|(x, y)| format!("({x},{y})")).collect();
        let n = coords.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
                let v = dx.hypot(dy);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        Self::new(labels, d, 0)
    }

    /// Builds a space from a symmetric matrix that is known to be a metric,
    /// e.g. a Wasserstein distance matrix. Only shape and finiteness are checked,
    /// plus symmetry which is enforced by copying the upper triangle.
    pub(crate) fn from_trusted(labels: Vec<String>, mut d: Vec<Vec<f64>>) -> Result<Self> {
        let n = d.len();
        if n == 0 || labels.len() != n || d.iter().any(|r| r.len() != n) {
            return Err(Error::malformed("trusted metric has inconsistent shape"));
        }
        for i in 0..n {
            d[i][i] = 0.0;
            for j in (i + 1)..n {
                if !d[i][j].is_finite() {
                    return Err(Error::malformed("non-finite trusted distance"));
                }
                let v = d[i][j].max(0.0);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        Ok(FiniteMetricSpace { labels, d, base_point: 0 })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn base_point(&self) -> usize {
        self.base_point
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().flatten().fold(0.0, |m: f64, &v| m.max(v))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// An ordered product of finite metric spaces carrying the p-sum metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpace {
    factors: Vec<Arc<FiniteMetricSpace>>,
}

impl ProductSpace {
    pub fn new(factors: Vec<Arc<FiniteMetricSpace>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::malformed("a product needs at least one factor"));
        }
        Ok(ProductSpace { factors })
    }

    pub fn single(space: Arc<FiniteMetricSpace>) -> Self {
        ProductSpace { factors: vec![space] }
    }

    pub fn factors(&self) -> &[Arc<FiniteMetricSpace>] {
        &self.factors
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    /// Number of points, `Π nᵢ`. Saturates instead of overflowing.
    pub fn cardinality(&self) -> usize {
        self.factors.iter().fold(1usize, |acc, f| acc.saturating_mul(f.len()))
    }

    /// Product with the factors of `other` appended: `self × other`.
    pub fn times(&self, other: &ProductSpace) -> ProductSpace {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        ProductSpace { factors }
    }

    /// The sub-product over the given factor positions.
    pub fn select(&self, axes: &[usize]) -> Result<ProductSpace> {
        if axes.is_empty() {
            return Err(Error::malformed("empty axis selection"));
        }
        let factors = axes
            .iter()
            .map(|&a| {
                self.factors
                    .get(a)
                    .cloned()
                    .ok_or_else(|| Error::malformed(format!("axis {a} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductSpace { factors })
    }

    /// Factors `range`, as a product.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<ProductSpace> {
        let axes: Vec<usize> = range.collect();
        self.select(&axes)
    }

    /// Checks arity and per-factor index ranges of a point.
    pub fn check_point(&self, point: &[usize]) -> Result<()> {
        if point.len() != self.arity() {
            return Err(Error::malformed(format!(
                "point {point:?} has arity {}, space has {} factors",
                point.len(),
                self.arity()
            )));
        }
        for (k, (&i, f)) in point.iter().zip(&self.factors).enumerate() {
            if i >= f.len() {
                return Err(Error::malformed(format!(
                    "index {i} out of range for factor {k} ({} points)",
                    f.len()
                )));
            }
        }
        Ok(())
    }

    /// `Σᵢ ρᵢ(aᵢ, bᵢ)^p`, the p-th power of the product distance.
    #[inline]
    pub fn cost(&self, a: &[usize], b: &[usize], p: f64) -> f64 {
        self.cost_over(a, b, p, 0..self.arity())
    }

    /// p-th power distance restricted to factors in `range`.
    #[inline]
    pub fn cost_over(&self, a: &[usize], b: &[usize], p: f64, range: std::ops::Range<usize>) -> f64 {
        range
            .map(|k| pow_p(self.factors[k].dist(a[k], b[k]), p))
            .sum()
    }

    pub fn dist(&self, a: &[usize], b: &[usize], p: f64) -> f64 {
        root_p(self.cost(a, b, p), p)
    }

    /// The tuple of base points.
    pub fn base_point(&self) -> Point {
        self.factors.iter().map(|f| f.base_point()).collect()
    }

    /// Enumerates all points in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let dims: Vec<usize> = self.factors.iter().map(|f| f.len()).collect();
        let total = self.cardinality();
        (0..total).map(move |mut idx| {
            let mut pt = vec![0; dims.len()];
            for k in (0..dims.len()).rev() {
                pt[k] = idx % dims[k];
                idx /= dims[k];
            }
            pt
        })
    }

    /// Materializes the product as a single finite metric space.
    pub fn materialize(&self, p: f64) -> Result<FiniteMetricSpace> {
        check_exponent(p)?;
        let points: Vec<Point> = self.points().collect();
        let labels = points
            .iter()
            .map(|pt| {
                let parts: Vec<&str> = pt
                    .iter()
                    .zip(&self.factors)
                    .map(|(&i, f)| f.labels()[i].as_str())
                    .collect();
                format!("({})", parts.join(","))
            })
            .collect();
        let d = points
            .iter()
            .map(|a| points.iter().map(|b| self.dist(a, b, p)).collect())
            .collect();
        let base = self.base_point();
        let base_idx = points.iter().position(|pt| *pt == base).unwrap_or(0);
        let mut space = FiniteMetricSpace::from_trusted(labels, d)?;
        space.base_point = base_idx;
        Ok(space)
    }
}

/// Materialized p-sum product of the given spaces.
pub fn product(spaces: &[Arc<FiniteMetricSpace>], p: f64) -> Result<FiniteMetricSpace> {
    ProductSpace::new(spaces.to_vec())?.materialize(p)
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::precondition(format!("exponent p must be finite and >= 1, got {p}")))
    }
}

#[inline]
pub(crate) fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

#[inline]
pub(crate) fn root_p(x: f64, p: f64) -> f64 {
    let x = x.max(0.0);
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::from_line(&[0.0, 1.0]).unwrap())
    }

    #[test]
    fn valid_two_point_space() {
        assert!(validate_metric(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
    }

    #[test]
    fn asymmetry_reported() {
        let err = validate_metric(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Metric(Violation::Asymmetry { i: 0, j: 1 })));
    }

    #[test]
    fn triangle_reported_with_witness() {
        let d = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        let err = validate_metric(&d).unwrap_err();
        assert!(matches!(err, Error::Metric(Violation::Triangle { i: 0, j: 2, via: 1 })));
        assert_eq!(err.to_string(), "metric axiom violated: triangle at (0,2) via 1");
    }

    #[test]
    fn diagonal_and_sign() {
        let err = validate_metric(&[vec![0.5, 1.0], vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Metric(Violation::NonzeroDiagonal { i: 0 })));
        let err = validate_metric(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Metric(Violation::Negative { i: 0, j: 1 })));
    }

    #[test]
    fn malformed_inputs() {
        assert!(validate_metric(&[vec![0.0, 1.0]]).unwrap_err().is_malformed());
        assert!(validate_metric(&[vec![0.0, f64::NAN], vec![f64::NAN, 0.0]])
            .unwrap_err()
            .is_malformed());
        assert!(ProductSpace::new(vec![]).unwrap_err().is_malformed());
    }

    #[test]
    fn product_l1_and_l2() {
        let s = two_point();
        let p1 = product(&[s.clone(), s.clone()], 1.0).unwrap();
        assert_eq!(p1.len(), 4);
        // points enumerate lexicographically: (0,0) is 0, (1,1) is 3
        assert_eq!(p1.dist(0, 3), 2.0);
        let p2 = product(&[s.clone(), s], 2.0).unwrap();
        assert!((p2.dist(0, 3) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn product_of_one_space_is_isometric() {
        let s = Arc::new(FiniteMetricSpace::from_line(&[0.0, 0.3, 2.0]).unwrap());
        for p in [1.0, 1.5, 3.0] {
            let m = product(std::slice::from_ref(&s), p).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((m.dist(i, j) - s.dist(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_validates() {
        let s = FiniteMetricSpace::from_line(&[0.0, 2.5]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        let back: FiniteMetricSpace = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"labels":["a","b"],"d":[[0,1],[2,0]],"base_point":0}"#;
        assert!(serde_json::from_str::<FiniteMetricSpace>(bad).is_err());
    }
}
