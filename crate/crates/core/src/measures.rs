//! Finitely supported (sub)probability measures on product spaces.
//!
//! Measures are always kept in canonical form: atoms sorted by point,
//! duplicate points merged, zero weights dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{FiniteMetricSpace, Point, ProductSpace};

/// Tolerance on total mass.
pub const MASS_TOL: f64 = 1e-9;
/// Tolerance on individual atom comparisons.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    Probability,
    Subprobability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

#[derive(Clone)]
pub struct DiscreteMeasure {
    space: Arc<ProductSpace>,
    atoms: Vec<Atom>,
    kind: MassKind,
}

impl fmt::Debug for DiscreteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteMeasure")
            .field("kind", &self.kind)
            .field("atoms", &self.atoms)
            .finish_non_exhaustive()
    }
}

impl PartialEq for DiscreteMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.atoms == other.atoms && same_space(&self.space, &other.space)
    }
}

pub(crate) fn same_space(a: &Arc<ProductSpace>, b: &Arc<ProductSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn ensure_same_space(a: &Arc<ProductSpace>, b: &Arc<ProductSpace>) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(format!(
            "measures live on different spaces ({} vs {} factors)",
            a.arity(),
            b.arity()
        )))
    }
}

impl DiscreteMeasure {
    /// Builds a canonical measure. Duplicate points are merged, zero weights
    /// dropped; negative or non-finite weights are rejected.
    pub fn new(
        space: Arc<ProductSpace>,
        atoms: impl IntoIterator<Item = (Point, f64)>,
        kind: MassKind,
    ) -> Result<Self> {
        let mut merged: BTreeMap<Point, f64> = BTreeMap::new();
        for (point, w) in atoms {
            space.check_point(&point)?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Mass(format!("invalid weight {w} at {point:?}")));
            }
            *merged.entry(point).or_insert(0.0) += w;
        }
        let atoms = merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(point, weight)| Atom { point, weight })
            .collect();
        let m = DiscreteMeasure { space, atoms, kind };
        m.check_mass()?;
        Ok(m)
    }

    pub fn probability(space: Arc<ProductSpace>, atoms: impl IntoIterator<Item = (Point, f64)>) -> Result<Self> {
        Self::new(space, atoms, MassKind::Probability)
    }

    pub fn subprobability(space: Arc<ProductSpace>, atoms: impl IntoIterator<Item = (Point, f64)>) -> Result<Self> {
        Self::new(space, atoms, MassKind::Subprobability)
    }

    pub fn dirac(space: Arc<ProductSpace>, point: Point) -> Result<Self> {
        Self::probability(space, [(point, 1.0)])
    }

    /// The zero subprobability on `space`.
    pub fn zero(space: Arc<ProductSpace>) -> Self {
        DiscreteMeasure { space, atoms: Vec::new(), kind: MassKind::Subprobability }
    }

    /// Measure on a single (non-product) space, atoms given by point index.
    pub fn on_space(
        space: Arc<FiniteMetricSpace>,
        atoms: impl IntoIterator<Item = (usize, f64)>,
        kind: MassKind,
    ) -> Result<Self> {
        Self::new(
            Arc::new(ProductSpace::single(space)),
            atoms.into_iter().map(|(i, w)| (vec![i], w)),
            kind,
        )
    }

    fn check_mass(&self) -> Result<()> {
        let total = self.total_mass();
        match self.kind {
            MassKind::Probability if (total - 1.0).abs() > MASS_TOL => {
                Err(Error::Mass(format!("probability measure has total mass {total}")))
            }
            MassKind::Subprobability if total > 1.0 + MASS_TOL => {
                Err(Error::Mass(format!("subprobability measure has total mass {total}")))
            }
            _ => Ok(()),
        }
    }

    /// Re-canonicalizes (a no-op on values built through the constructors).
    pub fn canonical(&self) -> Result<Self> {
        Self::new(self.space.clone(), self.pairs(), self.kind)
    }

    pub fn space(&self) -> &Arc<ProductSpace> {
        &self.space
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn kind(&self) -> MassKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        self.kind == MassKind::Probability
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Owned `(point, weight)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.atoms.iter().map(|a| (a.point.clone(), a.weight))
    }

    pub fn weight_at(&self, point: &[usize]) -> f64 {
        self.atoms
            .binary_search_by(|a| a.point.as_slice().cmp(point))
            .map(|i| self.atoms[i].weight)
            .unwrap_or(0.0)
    }

    /// Same atoms, different declared kind (mass is re-checked).
    pub fn with_kind(&self, kind: MassKind) -> Result<Self> {
        let m = DiscreteMeasure { space: self.space.clone(), atoms: self.atoms.clone(), kind };
        m.check_mass()?;
        Ok(m)
    }

    /// `r·μ`, always typed as a subprobability.
    pub fn scale(&self, r: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::malformed(format!("scale factor {r} must be finite and >= 0")));
        }
        Self::new(
            self.space.clone(),
            self.atoms.iter().map(|a| (a.point.clone(), r * a.weight)),
            MassKind::Subprobability,
        )
    }

    /// `μ + ν` with the requested kind.
    pub fn add(&self, other: &Self, kind: MassKind) -> Result<Self> {
        ensure_same_space(&self.space, &other.space)?;
        Self::new(self.space.clone(), self.pairs().chain(other.pairs()), kind)
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.point)).sum()
    }

    /// Pushforward under projection onto the given factors.
    pub fn marginal(&self, axes: &[usize]) -> Result<Self> {
        let target = Arc::new(self.space.select(axes)?);
        let atoms = self
            .atoms
            .iter()
            .map(|a| (axes.iter().map(|&k| a.point[k]).collect::<Point>(), a.weight));
        Self::new(target, atoms, self.kind)
    }

    /// Marginal on the contiguous factor range.
    pub fn marginal_range(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let axes: Vec<usize> = range.collect();
        self.marginal(&axes)
    }

    /// Image measure under `f`, which must be defined on every atom.
    pub fn pushforward(
        &self,
        target: Arc<ProductSpace>,
        mut f: impl FnMut(&[usize]) -> Option<Point>,
    ) -> Result<Self> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let image = f(&a.point)
                .ok_or_else(|| Error::precondition(format!("map undefined at atom {:?}", a.point)))?;
            atoms.push((image, a.weight));
        }
        Self::new(target, atoms, self.kind)
    }

    /// Pushforward under `(a₁, a₂) ↦ (a₂, a₁)` on a self-product `S × S`.
    pub fn mirror(&self) -> Result<Self> {
        let half = self.self_product_half()?;
        let atoms = self.atoms.iter().map(|a| {
            let mut pt = a.point[half..].to_vec();
            pt.extend_from_slice(&a.point[..half]);
            (pt, a.weight)
        });
        Self::new(self.space.clone(), atoms, self.kind)
    }

    /// For a measure on `S × S`, the number of factors of `S`.
    pub(crate) fn self_product_half(&self) -> Result<usize> {
        let f = self.space.factors();
        let n = f.len();
        if !n.is_multiple_of(2) || f[..n / 2] != f[n / 2..] {
            return Err(Error::malformed(format!(
                "expected a measure on a self-product S×S, got {n} factors"
            )));
        }
        Ok(n / 2)
    }

    /// Atomwise domination `μ ≤ ν` with per-atom slack `ATOM_TOL`.
    pub fn leq(&self, other: &Self) -> Result<bool> {
        ensure_same_space(&self.space, &other.space)?;
        Ok(self
            .atoms
            .iter()
            .all(|a| a.weight <= other.weight_at(&a.point) + ATOM_TOL))
    }

    /// Largest per-point weight difference over the union of supports.
    pub fn max_atom_diff(&self, other: &Self) -> Result<f64> {
        ensure_same_space(&self.space, &other.space)?;
        let mut diff = 0.0_f64;
        for a in &self.atoms {
            diff = diff.max((a.weight - other.weight_at(&a.point)).abs());
        }
        for b in &other.atoms {
            diff = diff.max((b.weight - self.weight_at(&b.point)).abs());
        }
        Ok(diff)
    }

    /// Same support and every weight within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        same_space(&self.space, &other.space)
            && self.atoms.len() == other.atoms.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(a, b)| a.point == b.point && (a.weight - b.weight).abs() <= tol)
    }

    /// Rebinds the measure to a structurally equal space.
    pub(crate) fn rebind(&self, space: Arc<ProductSpace>) -> Result<Self> {
        ensure_same_space(&self.space, &space)?;
        Ok(DiscreteMeasure { space, atoms: self.atoms.clone(), kind: self.kind })
    }
}

/// A measure on `X × Y` where `X` is the first `split` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedMeasure {
    measure: DiscreteMeasure,
    split: usize,
    x_marginal: DiscreteMeasure,
    y_marginal: DiscreteMeasure,
}

impl PairedMeasure {
    pub fn new(measure: DiscreteMeasure, split: usize) -> Result<Self> {
        let arity = measure.space().arity();
        if split == 0 || split >= arity {
            return Err(Error::malformed(format!(
                "split {split} must leave both X and Y nonempty ({arity} factors)"
            )));
        }
        let x_marginal = measure.marginal_range(0..split)?;
        let y_marginal = measure.marginal_range(split..arity)?;
        Ok(PairedMeasure { measure, split, x_marginal, y_marginal })
    }

    /// Measure on `X × Y` with one factor on each side.
    pub fn from_pairs(
        x: Arc<FiniteMetricSpace>,
        y: Arc<FiniteMetricSpace>,
        atoms: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self> {
        let space = Arc::new(ProductSpace::new(vec![x, y])?);
        let m = DiscreteMeasure::probability(space, atoms.into_iter().map(|((i, j), w)| (vec![i, j], w)))?;
        Self::new(m, 1)
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn into_measure(self) -> DiscreteMeasure {
        self.measure
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn x_arity(&self) -> usize {
        self.split
    }

    pub fn y_arity(&self) -> usize {
        self.measure.space().arity() - self.split
    }

    pub fn x_marginal(&self) -> &DiscreteMeasure {
        &self.x_marginal
    }

    pub fn y_marginal(&self) -> &DiscreteMeasure {
        &self.y_marginal
    }

    pub fn x_space(&self) -> &Arc<ProductSpace> {
        self.x_marginal.space()
    }

    pub fn y_space(&self) -> &Arc<ProductSpace> {
        self.y_marginal.space()
    }

    pub fn atoms(&self) -> &[Atom] {
        self.measure.atoms()
    }

    /// `ρ_X(a, b)^p` for two points of `X × Y`.
    pub fn x_cost(&self, a: &[usize], b: &[usize], p: f64) -> f64 {
        self.measure.space().cost_over(a, b, p, 0..self.split)
    }

    /// `ρ_Y(a, b)^p` for two points of `X × Y`.
    pub fn y_cost(&self, a: &[usize], b: &[usize], p: f64) -> f64 {
        let n = self.measure.space().arity();
        self.measure.space().cost_over(a, b, p, self.split..n)
    }

    /// No two atoms share an `x` with different `y`.
    pub fn has_functional_support(&self) -> bool {
        let s = self.split;
        // atoms are sorted, so equal x-prefixes are adjacent
        self.atoms()
            .windows(2)
            .all(|w| w[0].point[..s] != w[1].point[..s])
    }
}

/// Law of a discrete-time process with values in `Z_1 × … × Z_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessLaw {
    measure: DiscreteMeasure,
}

impl ProcessLaw {
    pub fn new(spaces: Vec<Arc<FiniteMetricSpace>>, paths: impl IntoIterator<Item = (Point, f64)>) -> Result<Self> {
        let space = Arc::new(ProductSpace::new(spaces)?);
        Self::from_measure(DiscreteMeasure::probability(space, paths)?)
    }

    pub fn from_measure(measure: DiscreteMeasure) -> Result<Self> {
        if !measure.is_probability() {
            return Err(Error::Mass("a process law must be a probability measure".into()));
        }
        Ok(ProcessLaw { measure })
    }

    pub fn horizon(&self) -> usize {
        self.measure.space().arity()
    }

    pub fn spaces(&self) -> &[Arc<FiniteMetricSpace>] {
        self.measure.space().factors()
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn paths(&self) -> &[Atom] {
        self.measure.atoms()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(coords: &[f64]) -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::from_line(coords).unwrap())
    }

    fn square() -> Arc<ProductSpace> {
        let s = line(&[0.0, 1.0, 2.0]);
        Arc::new(ProductSpace::new(vec![s.clone(), s]).unwrap())
    }

    #[test]
    fn marginal_of_dirac() {
        let mu = DiscreteMeasure::dirac(square(), vec![0, 1]).unwrap();
        let m = mu.marginal(&[0]).unwrap();
        assert_eq!(m.atoms(), &[Atom { point: vec![0], weight: 1.0 }]);
    }

    #[test]
    fn marginal_merges_atoms() {
        let mu = DiscreteMeasure::probability(square(), [(vec![0, 1], 0.5), (vec![0, 2], 0.5)]).unwrap();
        let m = mu.marginal(&[0]).unwrap();
        assert_eq!(m.atoms(), &[Atom { point: vec![0], weight: 1.0 }]);
        let mu = DiscreteMeasure::probability(square(), [(vec![0, 1], 0.3), (vec![2, 1], 0.7)]).unwrap();
        let m = mu.marginal(&[1]).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.atoms()[0].weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_axis_out_of_range() {
        let mu = DiscreteMeasure::dirac(square(), vec![0, 1]).unwrap();
        assert!(mu.marginal(&[2]).unwrap_err().is_malformed());
        assert!(mu.marginal(&[]).unwrap_err().is_malformed());
    }

    #[test]
    fn leq_examples() {
        let s = line(&[0.0, 1.0]);
        let mu = DiscreteMeasure::on_space(s.clone(), [(0, 0.5), (1, 0.5)], MassKind::Probability).unwrap();
        let half = mu.scale(0.5).unwrap();
        assert!(half.leq(&mu).unwrap());
        assert!(mu.leq(&mu).unwrap());
        let a = DiscreteMeasure::on_space(s, [(0, 0.6)], MassKind::Subprobability).unwrap();
        assert!(!a.leq(&mu).unwrap());
    }

    #[test]
    fn leq_space_mismatch() {
        let a = DiscreteMeasure::on_space(line(&[0.0, 1.0]), [(0, 1.0)], MassKind::Probability).unwrap();
        let b = DiscreteMeasure::on_space(line(&[0.0, 2.0]), [(0, 1.0)], MassKind::Probability).unwrap();
        assert!(matches!(a.leq(&b), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn pushforward_examples() {
        let sp = square();
        let mu = DiscreteMeasure::probability(sp.clone(), [(vec![0, 1], 0.25), (vec![2, 2], 0.75)]).unwrap();
        let id = mu.pushforward(sp.clone(), |p| Some(p.to_vec())).unwrap();
        assert_eq!(id, mu);
        let c = mu.pushforward(sp.clone(), |_| Some(vec![1, 1])).unwrap();
        assert_eq!(c.atoms(), &[Atom { point: vec![1, 1], weight: 1.0 }]);
        let quad = Arc::new(sp.times(&sp));
        let diag = DiscreteMeasure::dirac(sp, vec![0, 1])
            .unwrap()
            .pushforward(quad, |p| Some([p, p].concat()))
            .unwrap();
        assert_eq!(diag.atoms()[0].point, vec![0, 1, 0, 1]);
        assert!(mu.pushforward(square(), |_| None).is_err());
    }

    #[test]
    fn mirror_examples() {
        let sp = square();
        let quad = Arc::new(sp.times(&sp));
        let g = DiscreteMeasure::subprobability(quad.clone(), [(vec![0, 1, 2, 0], 1.0)]).unwrap();
        assert_eq!(g.mirror().unwrap().atoms()[0].point, vec![2, 0, 0, 1]);
        assert_eq!(g.mirror().unwrap().mirror().unwrap(), g);
        let sym = DiscreteMeasure::subprobability(quad, [(vec![0, 1, 2, 0], 0.5), (vec![2, 0, 0, 1], 0.5)]).unwrap();
        assert_eq!(sym.mirror().unwrap(), sym);
        let three = Arc::new(ProductSpace::new(vec![line(&[0.0]), line(&[0.0]), line(&[0.0])]).unwrap());
        assert!(DiscreteMeasure::dirac(three, vec![0, 0, 0]).unwrap().mirror().is_err());
    }

    #[test]
    fn canonical_form_drops_zeros_and_rejects_negatives() {
        let sp = square();
        let mu = DiscreteMeasure::probability(sp.clone(), [(vec![1, 1], 0.0), (vec![0, 0], 1.0)]).unwrap();
        assert_eq!(mu.len(), 1);
        assert!(DiscreteMeasure::probability(sp.clone(), [(vec![0, 0], -0.5), (vec![1, 1], 1.5)]).is_err());
        assert!(DiscreteMeasure::probability(sp, [(vec![0, 0], 0.5)]).is_err());
    }

    #[test]
    fn functional_support() {
        let x = line(&[0.0, 1.0]);
        let y = line(&[0.0, 1.0]);
        let g = PairedMeasure::from_pairs(x.clone(), y.clone(), [((0, 0), 0.5), ((1, 1), 0.5)]).unwrap();
        assert!(g.has_functional_support());
        let ng = PairedMeasure::from_pairs(x, y, [((0, 0), 0.5), ((0, 1), 0.5)]).unwrap();
        assert!(!ng.has_functional_support());
    }
}
