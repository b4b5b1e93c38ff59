//! Adapted lifts of process laws and the kernel algebra around them.
//!
//! `lift(μ, t)` is the joint law of the prefix `(Z_1, …, Z_t)` and the
//! conditional law of the tail given that prefix: a measure on
//! `X̄^t × P(X̄_{t+1})`. The law component is metrized by `W_p` over the tail
//! space, and the whole lifted space by the p-sum of prefix distance and
//! that `W_p`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{same_space, DiscreteMeasure, PairedMeasure, ProcessLaw, MASS_TOL};
#[cfg(test)]
use crate::measures::{Atom, MassKind};
use crate::spaces::{check_exponent, FiniteMetricSpace, Point, ProductSpace};
use crate::transport::{wasserstein, wasserstein_distance};

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedAtom {
    pub x: Point,
    pub law: usize,
    pub weight: f64,
}

/// A finitely supported probability on `X × P(Y)`.
#[derive(Debug, Clone)]
pub struct LiftedMeasure {
    x_space: Arc<ProductSpace>,
    y_space: Arc<ProductSpace>,
    laws: Vec<DiscreteMeasure>,
    law_space: Arc<FiniteMetricSpace>,
    atoms: Vec<LiftedAtom>,
    p: f64,
}

/// Exact-equality key for a canonical measure.
fn law_key(m: &DiscreteMeasure) -> Vec<(Point, u64)> {
    m.atoms().iter().map(|a| (a.point.clone(), a.weight.to_bits())).collect()
}

/// Pairwise `W_p` matrix between laws, as a metric space.
fn law_metric(laws: &[DiscreteMeasure], p: f64) -> Result<FiniteMetricSpace> {
    let m = laws.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
    let dists = crate::par_map(&pairs, |&(i, j)| wasserstein_distance(&laws[i], &laws[j], p));
    let mut d = vec![vec![0.0; m]; m];
    for (&(i, j), w) in pairs.iter().zip(dists) {
        let w = w?;
        d[i][j] = w;
        d[j][i] = w;
    }
    let labels = (0..m).map(|i| format!("law{i}")).collect();
    FiniteMetricSpace::from_trusted(labels, d)
}

impl LiftedMeasure {
    /// Builds a lifted measure from `(x, law, weight)` triples. Equal laws are
    /// shared and atoms with the same `(x, law)` are merged.
    pub fn new(
        x_space: Arc<ProductSpace>,
        y_space: Arc<ProductSpace>,
        atoms: Vec<(Point, DiscreteMeasure, f64)>,
        p: f64,
    ) -> Result<Self> {
        check_exponent(p)?;
        let mut index: BTreeMap<Vec<(Point, u64)>, usize> = BTreeMap::new();
        let mut laws = Vec::new();
        let mut merged: BTreeMap<(Point, usize), f64> = BTreeMap::new();
        for (x, law, w) in atoms {
            x_space.check_point(&x)?;
            if !same_space(law.space(), &y_space) {
                return Err(Error::SpaceMismatch("conditional law lives on the wrong space".into()));
            }
            if !law.is_probability() {
                return Err(Error::Mass("conditional laws must be probability measures".into()));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Mass(format!("invalid lifted weight {w}")));
            }
            let next = laws.len();
            let id = *index.entry(law_key(&law)).or_insert(next);
            if id == next {
                laws.push(law);
            }
            *merged.entry((x, id)).or_insert(0.0) += w;
        }
        if laws.is_empty() {
            return Err(Error::malformed("a lifted measure needs at least one atom"));
        }
        let atoms: Vec<LiftedAtom> = merged
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|((x, law), weight)| LiftedAtom { x, law, weight })
            .collect();
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Mass(format!("lifted measure has total mass {total}")));
        }
        let law_space = Arc::new(law_metric(&laws, p)?);
        Ok(LiftedMeasure { x_space, y_space, laws, law_space, atoms, p })
    }

    pub fn x_space(&self) -> &Arc<ProductSpace> {
        &self.x_space
    }

    pub fn y_space(&self) -> &Arc<ProductSpace> {
        &self.y_space
    }

    pub fn laws(&self) -> &[DiscreteMeasure] {
        &self.laws
    }

    pub fn atoms(&self) -> &[LiftedAtom] {
        &self.atoms
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Pairwise `W_p` distances between the distinct laws.
    pub fn law_distances(&self) -> &FiniteMetricSpace {
        &self.law_space
    }

    /// The lifted measure as a paired measure on `X × L`, where `L` is the
    /// finite space of its distinct laws under `W_p`.
    pub fn as_paired(&self) -> Result<PairedMeasure> {
        let mut factors = self.x_space.factors().to_vec();
        factors.push(self.law_space.clone());
        let space = Arc::new(ProductSpace::new(factors)?);
        let atoms = self.atoms.iter().map(|a| {
            let mut pt = a.x.clone();
            pt.push(a.law);
            (pt, a.weight)
        });
        PairedMeasure::new(DiscreteMeasure::probability(space, atoms.collect::<Vec<_>>())?, self.x_space.arity())
    }

    /// Each prefix carries exactly one law.
    pub fn is_graph(&self) -> bool {
        self.atoms.windows(2).all(|w| w[0].x != w[1].x)
    }

    /// Marginal on the law coordinate, as `(law index, weight)`.
    pub fn law_marginal(&self) -> Vec<(usize, f64)> {
        let mut acc = vec![0.0; self.laws.len()];
        for a in &self.atoms {
            acc[a.law] += a.weight;
        }
        acc.into_iter().enumerate().filter(|&(_, w)| w > 0.0).collect()
    }

    /// Flattens `X × P(Y)` to `X × Y` by integrating out the law coordinate.
    pub fn und(&self) -> Result<DiscreteMeasure> {
        let space = Arc::new(self.x_space.times(&self.y_space));
        let mut atoms = Vec::new();
        for a in &self.atoms {
            for y in self.laws[a.law].atoms() {
                atoms.push(([a.x.as_slice(), y.point.as_slice()].concat(), a.weight * y.weight));
            }
        }
        DiscreteMeasure::probability(space, atoms)
    }

    /// `W_p` between two lifted measures over the same `X` and `Y`, in the
    /// metric `(ρ_X^p + W_p^p)^{1/p}` on `X × P(Y)`.
    pub fn distance(&self, other: &LiftedMeasure) -> Result<f64> {
        if !same_space(&self.x_space, &other.x_space) || !same_space(&self.y_space, &other.y_space) {
            return Err(Error::SpaceMismatch("lifted measures over different spaces".into()));
        }
        if self.p != other.p {
            return Err(Error::precondition("lifted measures built with different exponents"));
        }
        let p = self.p;
        // union catalogue: own laws first, then the other's unseen laws
        let mut index: BTreeMap<Vec<(Point, u64)>, usize> = BTreeMap::new();
        let mut laws: Vec<DiscreteMeasure> = Vec::new();
        for l in &self.laws {
            index.insert(law_key(l), laws.len());
            laws.push(l.clone());
        }
        let mut remap = Vec::with_capacity(other.laws.len());
        for l in &other.laws {
            let next = laws.len();
            let id = *index.entry(law_key(l)).or_insert(next);
            if id == next {
                laws.push(l.clone());
            }
            remap.push(id);
        }
        let law_space = Arc::new(law_metric(&laws, p)?);
        let mut factors = self.x_space.factors().to_vec();
        factors.push(law_space);
        let space = Arc::new(ProductSpace::new(factors)?);
        let embed = |a: &LiftedAtom, id: usize| {
            let mut pt = a.x.clone();
            pt.push(id);
            (pt, a.weight)
        };
        let lhs = DiscreteMeasure::probability(space.clone(), self.atoms.iter().map(|a| embed(a, a.law)).collect::<Vec<_>>())?;
        let rhs = DiscreteMeasure::probability(space, other.atoms.iter().map(|a| embed(a, remap[a.law])).collect::<Vec<_>>())?;
        wasserstein_distance(&lhs, &rhs, p)
    }
}

/// `ℐ_t(μ)`: group paths by their length-`t` prefix and attach the
/// conditional law of the tail.
pub fn lift(mu: &ProcessLaw, t: usize, p: f64) -> Result<LiftedMeasure> {
    let n = mu.horizon();
    if t == 0 || t >= n {
        return Err(Error::precondition(format!("lift time t={t} must satisfy 1 <= t < N={n}")));
    }
    let space = mu.measure().space();
    let x_space = Arc::new(space.slice(0..t)?);
    let y_space = Arc::new(space.slice(t..n)?);
    // paths are sorted, so equal prefixes are contiguous
    let mut atoms = Vec::new();
    let paths = mu.paths();
    let mut start = 0;
    while start < paths.len() {
        let prefix = &paths[start].point[..t];
        let end = start + paths[start..].iter().take_while(|a| &a.point[..t] == prefix).count();
        let group = &paths[start..end];
        let mass: f64 = group.iter().map(|a| a.weight).sum();
        let law = DiscreteMeasure::probability(
            y_space.clone(),
            group.iter().map(|a| (a.point[t..].to_vec(), a.weight / mass)).collect::<Vec<_>>(),
        )?;
        atoms.push((prefix.to_vec(), law, mass));
        start = end;
    }
    LiftedMeasure::new(x_space, y_space, atoms, p)
}

/// Barycenter of a finite mixture of probability measures.
pub fn avg(mixture: &[(&DiscreteMeasure, f64)]) -> Result<DiscreteMeasure> {
    let first = mixture.first().ok_or_else(|| Error::malformed("empty mixture"))?.0;
    let mut atoms = Vec::new();
    for &(law, w) in mixture {
        if !same_space(law.space(), first.space()) {
            return Err(Error::SpaceMismatch("mixture components on different spaces".into()));
        }
        if !law.is_probability() {
            return Err(Error::Mass("mixture components must be probability measures".into()));
        }
        atoms.extend(law.atoms().iter().map(|a| (a.point.clone(), w * a.weight)));
    }
    DiscreteMeasure::probability(first.space().clone(), atoms)
}

/// Kernel `y ↦ λ_y` of a measure on `Y × Z`, keyed by `y`.
fn disintegrate_left(m: &PairedMeasure) -> BTreeMap<&[usize], Vec<(&[usize], f64)>> {
    let s = m.split();
    let mut out: BTreeMap<&[usize], Vec<(&[usize], f64)>> = BTreeMap::new();
    for a in m.atoms() {
        let (y, z) = a.point.split_at(s);
        let mass = m.x_marginal().weight_at(y);
        out.entry(y).or_default().push((z, a.weight / mass));
    }
    out
}

/// Kernel `y ↦ γ_y` of a measure on `X × Y`, keyed by `y`.
fn disintegrate_right(m: &PairedMeasure) -> BTreeMap<&[usize], Vec<(&[usize], f64)>> {
    let s = m.split();
    let mut out: BTreeMap<&[usize], Vec<(&[usize], f64)>> = BTreeMap::new();
    for a in m.atoms() {
        let (x, y) = a.point.split_at(s);
        let mass = m.y_marginal().weight_at(y);
        out.entry(y).or_default().push((x, a.weight / mass));
    }
    out
}

fn check_glue(gamma: &PairedMeasure, lambda: &PairedMeasure) -> Result<Arc<ProductSpace>> {
    if !gamma.measure().is_probability() || !lambda.measure().is_probability() {
        return Err(Error::Mass("gluing needs probability measures".into()));
    }
    if !same_space(gamma.y_space(), lambda.x_space()) {
        return Err(Error::SpaceMismatch("shared coordinate spaces differ".into()));
    }
    let (gy, ly) = (gamma.y_marginal(), lambda.x_marginal());
    for a in gy.atoms().iter().chain(ly.atoms()) {
        let (u, v) = (gy.weight_at(&a.point), ly.weight_at(&a.point));
        if (u - v).abs() > MASS_TOL {
            return Err(Error::Mass(format!(
                "shared marginals disagree at {:?}: {u} vs {v}",
                a.point
            )));
        }
    }
    let n = lambda.measure().space().arity();
    let z = lambda.measure().space().slice(lambda.split()..n)?;
    Ok(Arc::new(gamma.measure().space().times(&z)))
}

/// Conditionally independent product `γ ⊗̇ λ` on `X × Y × Z`, built by
/// disintegrating `λ` along `Y`.
pub fn glue_full(gamma: &PairedMeasure, lambda: &PairedMeasure) -> Result<DiscreteMeasure> {
    let space = check_glue(gamma, lambda)?;
    let kernel = disintegrate_left(lambda);
    let s = gamma.split();
    let mut atoms = Vec::new();
    for a in gamma.atoms() {
        let y = &a.point[s..];
        for &(z, k) in kernel.get(y).into_iter().flatten() {
            atoms.push(([a.point.as_slice(), z].concat(), a.weight * k));
        }
    }
    DiscreteMeasure::probability(space, atoms)
}

/// `γ ⊗̇ λ` computed by disintegrating `γ` along `Y` instead of `λ`.
pub fn glue_full_via_left(gamma: &PairedMeasure, lambda: &PairedMeasure) -> Result<DiscreteMeasure> {
    let space = check_glue(gamma, lambda)?;
    let kernel = disintegrate_right(gamma);
    let s = lambda.split();
    let mut atoms = Vec::new();
    for a in lambda.atoms() {
        let (y, z) = a.point.split_at(s);
        for &(x, k) in kernel.get(y).into_iter().flatten() {
            atoms.push(([x, y, z].concat(), a.weight * k));
        }
    }
    DiscreteMeasure::probability(space, atoms)
}

/// Composition `γ ∘ λ` on `X × Z`.
pub fn glue_compose(gamma: &PairedMeasure, lambda: &PairedMeasure) -> Result<PairedMeasure> {
    let full = glue_full(gamma, lambda)?;
    let sx = gamma.split();
    let sy = gamma.y_arity();
    let n = full.space().arity();
    let axes: Vec<usize> = (0..sx).chain((sx + sy)..n).collect();
    PairedMeasure::new(full.marginal(&axes)?, sx)
}

/// Per-time lifted distances between two process laws.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoDistance {
    /// `W_p(ℐ_t(μ), ℐ_t(ν))` for `t = 1, …, N-1`.
    pub per_t: Vec<f64>,
    /// Plain `W_p(μ, ν)` on the path space.
    pub plain: f64,
}

impl InfoDistance {
    pub fn max(&self) -> f64 {
        self.per_t.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.per_t.iter().sum()
    }
}

pub fn info_pseudometric(mu: &ProcessLaw, nu: &ProcessLaw, p: f64) -> Result<InfoDistance> {
    if !same_space(mu.measure().space(), nu.measure().space()) {
        return Err(Error::SpaceMismatch("process laws over different path spaces".into()));
    }
    let n = mu.horizon();
    if n < 2 {
        return Err(Error::precondition("the information pseudometric needs horizon N >= 2"));
    }
    let times: Vec<usize> = (1..n).collect();
    let per_t = crate::par_map(&times, |&t| lift(mu, t, p)?.distance(&lift(nu, t, p)?))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let plain = wasserstein(mu.measure(), nu.measure(), p)?.distance;
    Ok(InfoDistance { per_t, plain })
}

/// Tail marginal `(Z_{t+1}, …, Z_N)` of a process law.
pub fn tail_marginal(mu: &ProcessLaw, t: usize) -> Result<DiscreteMeasure> {
    let n = mu.horizon();
    mu.measure().marginal_range(t..n)
}

#[cfg(test)]
fn atoms_of(m: &DiscreteMeasure) -> Vec<(Point, f64)> {
    m.atoms().iter().map(|Atom { point, weight }| (point.clone(), *weight)).collect()
}
