//! Modulus of continuity of a measure on `X × Y`.
//!
//! `ω_μ(δ)` is the largest `ρ^Y(γ)` over subprobabilities `γ` on `(X × Y)²`
//! whose two `X × Y` marginals are dominated by `μ` and with `ρ^X(γ) ≤ δ`.
//! At finite support this is a linear program in the mass `γ(aᵢ, aⱼ)`
//! placed on ordered pairs of atoms of `μ`: maximize `Σ γᵢⱼ ρ_Y(yᵢ, yⱼ)^p`
//! subject to row and column sums `≤ wᵢ` and `Σ γᵢⱼ ρ_X(xᵢ, xⱼ)^p ≤ δ^p`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpOutcome, LpProblem};
use crate::measures::{DiscreteMeasure, MassKind, PairedMeasure, MASS_TOL};
use crate::spaces::{check_exponent, pow_p, root_p, Point};
use crate::transport::{cost_functionals, Displacement};

/// Threshold on `ω(0)` below which a measure counts as concentrated on a graph.
pub const GRAPH_TOL: f64 = 1e-9;
/// Slack allowed when checking curve monotonicity and the scaling bound.
pub const CURVE_TOL: f64 = 1e-8;

/// How the marginals of the partial self-coupling relate to `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginals {
    /// Both marginals `≤ μ`; `γ` is a subprobability.
    Dominated,
    /// Both marginals `= μ`; `γ` is a probability.
    Exact,
}

#[derive(Debug, Clone)]
pub struct ModulusValue {
    pub delta: f64,
    /// `ω_μ(δ)`.
    pub omega: f64,
    /// The LP optimum, `ω_μ(δ)^p`.
    pub lp_value: f64,
    /// A maximizing partial self-coupling on `(X × Y)²`.
    pub gamma: DiscreteMeasure,
}

fn check_reference(mu: &PairedMeasure) -> Result<()> {
    if !mu.measure().is_probability() {
        return Err(Error::Mass("the modulus of continuity needs a probability measure".into()));
    }
    Ok(())
}

/// `ω_μ(δ)` with dominated marginals.
pub fn modulus(mu: &PairedMeasure, delta: f64, p: f64) -> Result<ModulusValue> {
    modulus_with(mu, delta, p, Marginals::Dominated)
}

pub fn modulus_with(mu: &PairedMeasure, delta: f64, p: f64, marginals: Marginals) -> Result<ModulusValue> {
    check_exponent(p)?;
    check_reference(mu)?;
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::malformed(format!("delta must be finite and >= 0, got {delta}")));
    }
    let atoms = mu.atoms();
    let k = atoms.len();
    let quad = Arc::new(mu.measure().space().times(mu.measure().space()));

    // Pairs that cannot move Y are useless to the maximizer, but the
    // exact-marginal variant needs every pair to stay feasible.
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let cy = mu.y_cost(&atoms[i].point, &atoms[j].point, p);
            if cy > 0.0 || marginals == Marginals::Exact {
                let cx = mu.x_cost(&atoms[i].point, &atoms[j].point, p);
                pairs.push((i, j, cx, cy));
            }
        }
    }
    if pairs.is_empty() {
        return Ok(ModulusValue { delta, omega: 0.0, lp_value: 0.0, gamma: DiscreteMeasure::zero(quad) });
    }

    let nv = pairs.len();
    let mut lp = LpProblem::maximize(pairs.iter().map(|q| q.3).collect());
    // first-marginal rows, then second-marginal rows
    for second in [false, true] {
        for (a, atom) in atoms.iter().enumerate() {
            let row: Vec<f64> = pairs
                .iter()
                .map(|&(i, j, _, _)| if (if second { j } else { i }) == a { 1.0 } else { 0.0 })
                .collect();
            lp = match marginals {
                Marginals::Dominated => lp.le(row, atom.weight),
                Marginals::Exact => lp.eq(row, atom.weight),
            };
        }
    }
    lp = lp.le(pairs.iter().map(|q| q.2).collect(), pow_p(delta, p));
    debug_assert_eq!(lp.num_vars(), nv);

    let sol = match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => return Err(Error::Lp("for the modulus was infeasible")),
        LpOutcome::Unbounded => return Err(Error::Lp("for the modulus was unbounded")),
    };
    let gamma_atoms: Vec<(Point, f64)> = pairs
        .iter()
        .zip(&sol.x)
        .map(|(&(i, j, _, _), &w)| ([atoms[i].point.as_slice(), atoms[j].point.as_slice()].concat(), w))
        .collect();
    let kind = match marginals {
        Marginals::Dominated => MassKind::Subprobability,
        Marginals::Exact => MassKind::Probability,
    };
    let gamma = DiscreteMeasure::new(quad, gamma_atoms, kind)?;
    let lp_value = sol.value.max(0.0);
    Ok(ModulusValue { delta, omega: root_p(lp_value, p), lp_value, gamma })
}

/// Displacements of a candidate partial self-coupling of `μ`.
pub fn displacement(mu: &PairedMeasure, gamma: &DiscreteMeasure, p: f64) -> Result<Displacement> {
    cost_functionals(gamma, mu.x_arity(), p)
}

/// Checks that `γ` lives on `(X × Y)²` with both marginals `≤ μ`.
pub fn check_partial_self_coupling(mu: &PairedMeasure, gamma: &DiscreteMeasure) -> Result<()> {
    let s = mu.measure().space();
    let expected = s.times(s);
    if **gamma.space() != expected {
        return Err(Error::SpaceMismatch("partial self-coupling must live on (X×Y)²".into()));
    }
    if gamma.total_mass() > 1.0 + MASS_TOL {
        return Err(Error::Mass("partial self-coupling has mass above 1".into()));
    }
    let half = s.arity();
    for (name, range) in [("first", 0..half), ("second", half..2 * half)] {
        let m = gamma.marginal_range(range)?.with_kind(MassKind::Subprobability)?.rebind(s.clone())?;
        for a in m.atoms() {
            if a.weight > mu.measure().weight_at(&a.point) + MASS_TOL {
                return Err(Error::Mass(format!(
                    "{name} marginal exceeds the reference at {:?}",
                    a.point
                )));
            }
        }
    }
    Ok(())
}

/// Turns a partial self-coupling `γ'` of `μ` into a symmetric probability
/// coupling of `(μ, μ)` with the same displacements: average `γ'` with its
/// mirror image, then put the missing mass `μ - μ'` on the diagonal.
pub fn symmetrize(mu: &PairedMeasure, gamma: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    check_reference(mu)?;
    check_partial_self_coupling(mu, gamma)?;
    let half = mu.measure().space().arity();
    let mut acc: BTreeMap<Point, f64> = BTreeMap::new();
    for a in gamma.atoms() {
        let w = 0.5 * a.weight;
        let mut m = a.point[half..].to_vec();
        m.extend_from_slice(&a.point[..half]);
        *acc.entry(a.point.clone()).or_insert(0.0) += w;
        *acc.entry(m).or_insert(0.0) += w;
    }
    let mut first: BTreeMap<Point, f64> = BTreeMap::new();
    for (pt, &w) in &acc {
        *first.entry(pt[..half].to_vec()).or_insert(0.0) += w;
    }
    for (pt, &w) in &first {
        if mu.measure().weight_at(pt) == 0.0 && w > MASS_TOL {
            return Err(Error::Mass(format!("partial coupling charges {pt:?} outside the support of μ")));
        }
    }
    for atom in mu.atoms() {
        let used = first.get(&atom.point).copied().unwrap_or(0.0);
        let defect = atom.weight - used;
        if defect < -MASS_TOL {
            return Err(Error::Mass(format!(
                "marginal defect is negative ({defect}) at {:?}",
                atom.point
            )));
        }
        if defect > 0.0 {
            let diag = [atom.point.as_slice(), atom.point.as_slice()].concat();
            *acc.entry(diag).or_insert(0.0) += defect;
        }
    }
    DiscreteMeasure::new(gamma.space().clone(), acc, MassKind::Probability)
}

/// `ω_μ(0) ≤ GRAPH_TOL`, i.e. `μ` is concentrated on the graph of a function.
pub fn is_graph_measure(mu: &PairedMeasure, p: f64) -> Result<bool> {
    let graph = modulus(mu, 0.0, p)?.omega <= GRAPH_TOL;
    debug_assert_eq!(graph, mu.has_functional_support());
    Ok(graph)
}

/// Monotonicity or scaling failure on a modulus curve.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveViolation {
    NotMonotone { i: usize, j: usize },
    /// `ω(δᵢ) < (δᵢ/δⱼ) ω(δⱼ)` beyond tolerance.
    Scaling { i: usize, j: usize },
    Negative { i: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusCurve {
    pub p: f64,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub lp_values: Vec<f64>,
}

impl ModulusCurve {
    /// Checks nonnegativity, monotonicity and `ω(δ₁) ≥ (δ₁/δ₂) ω(δ₂)` over all grid pairs.
    pub fn violations(&self) -> Vec<CurveViolation> {
        check_curve(&self.deltas, &self.values)
    }

    pub fn diameter_bound_holds(&self, diam_y: f64) -> bool {
        self.values.iter().all(|&v| v <= diam_y + CURVE_TOL)
    }

    /// Value at the smallest positive grid point.
    pub fn at_smallest_positive(&self) -> Option<(f64, f64)> {
        self.deltas
            .iter()
            .zip(&self.values)
            .find(|(d, _)| **d > 0.0)
            .map(|(&d, &v)| (d, v))
    }
}

pub(crate) fn check_curve(deltas: &[f64], values: &[f64]) -> Vec<CurveViolation> {
    let mut out = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v < 0.0 {
            out.push(CurveViolation::Negative { i });
        }
    }
    for i in 0..deltas.len() {
        for j in (i + 1)..deltas.len() {
            let (d1, d2) = (deltas[i], deltas[j]);
            if values[i] > values[j] + CURVE_TOL {
                out.push(CurveViolation::NotMonotone { i, j });
            }
            if d1 > 0.0 && d1 < d2 && values[i] < (d1 / d2) * values[j] - CURVE_TOL {
                out.push(CurveViolation::Scaling { i, j });
            }
        }
    }
    out
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::malformed("empty delta grid"));
    }
    if grid.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::malformed("delta grid entries must be finite and >= 0"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::malformed("delta grid must be strictly ascending"));
    }
    Ok(())
}

/// Pointwise evaluation of `ω_μ` over an ascending grid.
pub fn modulus_curve(mu: &PairedMeasure, grid: &[f64], p: f64) -> Result<ModulusCurve> {
    check_grid(grid)?;
    let vals = crate::par_map(grid, |&d| modulus(mu, d, p).map(|v| (v.omega, v.lp_value)));
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ModulusCurve {
        p,
        deltas: grid.to_vec(),
        values: vals.iter().map(|v| v.0).collect(),
        lp_values: vals.iter().map(|v| v.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::FiniteMetricSpace;

    fn line(coords: &[f64]) -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::from_line(coords).unwrap())
    }

    /// X = {-ε, +ε}, Y = {-1, +1}, mass ½ on (−ε,−1) and (+ε,+1).
    fn branching(eps: f64) -> PairedMeasure {
        PairedMeasure::from_pairs(line(&[-eps, eps]), line(&[-1.0, 1.0]), [((0, 0), 0.5), ((1, 1), 0.5)]).unwrap()
    }

    #[test]
    fn dirac_has_zero_modulus() {
        let mu = PairedMeasure::from_pairs(line(&[0.0, 1.0]), line(&[0.0, 3.0]), [((1, 0), 1.0)]).unwrap();
        for d in [0.0, 0.5, 10.0] {
            assert_eq!(modulus(&mu, d, 1.0).unwrap().omega, 0.0);
        }
    }

    #[test]
    fn branching_closed_form() {
        for eps in [0.5, 0.25, 0.1] {
            for p in [1.0, 2.0] {
                let mu = branching(eps);
                for d in [0.0, 0.05, 0.1, 0.3, 1.0, 2.0] {
                    let w = modulus(&mu, d, p).unwrap().omega;
                    let expect = 2.0 * f64::min(1.0, d / (2.0 * eps));
                    assert!((w - expect).abs() < 1e-9, "eps={eps} p={p} d={d}: {w} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn rejects_non_probability() {
        let x = line(&[0.0, 1.0]);
        let xy = Arc::new(crate::spaces::ProductSpace::new(vec![x.clone(), x]).unwrap());
        let m = DiscreteMeasure::subprobability(xy, [(vec![0, 0], 0.5)]).unwrap();
        let mu = PairedMeasure::new(m, 1).unwrap();
        assert!(matches!(modulus(&mu, 0.1, 1.0), Err(Error::Mass(_))));
        assert!(modulus(&branching(0.5), -1.0, 1.0).is_err());
    }

    #[test]
    fn graph_dichotomy_two_atoms() {
        let x = line(&[0.0, 1.0]);
        let y = line(&[0.0, 2.0]);
        let g = PairedMeasure::from_pairs(x.clone(), y.clone(), [((0, 0), 0.5), ((1, 1), 0.5)]).unwrap();
        assert!(is_graph_measure(&g, 1.0).unwrap());
        // same x, different y. Enumerating the four vertices of the δ=0
        // polytope {γ01, γ10 ∈ [0, ½]} gives the optimum γ01 = γ10 = ½,
        // so ω(0)^p = ρ(u,v)^p and ω(0) = ρ(u,v) for every p.
        let ng = PairedMeasure::from_pairs(x, y, [((0, 0), 0.5), ((0, 1), 0.5)]).unwrap();
        for p in [1.0, 2.0, 3.0] {
            assert!(!is_graph_measure(&ng, p).unwrap());
            let w = modulus(&ng, 0.0, p).unwrap().omega;
            assert!((w - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrize_single_off_diagonal_atom() {
        let mu = branching(0.5);
        let s = mu.measure().space().clone();
        let quad = Arc::new(s.times(&s));
        let g = DiscreteMeasure::subprobability(quad, [(vec![0, 0, 1, 1], 0.2)]).unwrap();
        check_partial_self_coupling(&mu, &g).unwrap();
        let sym = symmetrize(&mu, &g).unwrap();
        let expect = [(vec![0, 0, 0, 0], 0.4), (vec![0, 0, 1, 1], 0.1), (vec![1, 1, 0, 0], 0.1), (vec![1, 1, 1, 1], 0.4)];
        assert_eq!(sym.len(), 4);
        for (pt, w) in expect {
            assert!((sym.weight_at(&pt) - w).abs() < 1e-15);
        }
        assert_eq!(sym.mirror().unwrap(), sym);
        let before = displacement(&mu, &g, 1.0).unwrap();
        let after = displacement(&mu, &sym, 1.0).unwrap();
        assert!((before.x - after.x).abs() < 1e-12 && (before.y - after.y).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_empty_is_diagonal() {
        let mu = branching(0.5);
        let s = mu.measure().space().clone();
        let sym = symmetrize(&mu, &DiscreteMeasure::zero(Arc::new(s.times(&s)))).unwrap();
        let d = displacement(&mu, &sym, 1.0).unwrap();
        assert_eq!((d.x, d.y), (0.0, 0.0));
        assert!((sym.weight_at(&[0, 0, 0, 0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_rejects_overfull_marginal() {
        let mu = branching(0.5);
        let s = mu.measure().space().clone();
        let quad = Arc::new(s.times(&s));
        let g = DiscreteMeasure::subprobability(quad, [(vec![0, 0, 1, 1], 0.8)]).unwrap();
        assert!(check_partial_self_coupling(&mu, &g).is_err());
        assert!(matches!(symmetrize(&mu, &g), Err(Error::Mass(_))));
    }

    #[test]
    fn curve_properties() {
        let mu = branching(0.25);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let c = modulus_curve(&mu, &grid, 1.0).unwrap();
        assert!(c.violations().is_empty());
        assert!(c.diameter_bound_holds(2.0));
        assert_eq!(c.at_smallest_positive().unwrap().0, 0.05);
        assert!(modulus_curve(&mu, &[], 1.0).is_err());
        assert!(modulus_curve(&mu, &[0.2, 0.1], 1.0).is_err());
    }

    #[test]
    fn exact_marginals_give_same_value() {
        let mu = branching(0.3);
        for d in [0.0, 0.1, 0.4, 1.0] {
            let a = modulus_with(&mu, d, 1.0, Marginals::Dominated).unwrap();
            let b = modulus_with(&mu, d, 1.0, Marginals::Exact).unwrap();
            assert!((a.omega - b.omega).abs() < 1e-9);
        }
    }
}
