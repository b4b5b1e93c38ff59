//! p-Wasserstein distances with optimal couplings, and the displacement
//! functionals `ρ^X`, `ρ^Y` of measures on `(X × Y)²`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpOutcome, LpProblem};
use crate::measures::{DiscreteMeasure, MassKind};
use crate::spaces::{check_exponent, root_p, ProductSpace};

/// Result of an optimal transport solve.
#[derive(Debug, Clone)]
pub struct Transport {
    /// `W_p = cost^{1/p}`.
    pub distance: f64,
    /// Optimal value of `∫ ρ^p dγ`.
    pub cost: f64,
    /// Optimal coupling on `S × S`; its first half is the source.
    pub coupling: DiscreteMeasure,
    /// Kantorovich potentials `(φ, ψ)` indexed by the atoms of source and
    /// target, with `Σ φᵢaᵢ + Σ ψⱼbⱼ = cost`. Absent for closed-form solves.
    pub potentials: Option<(Vec<f64>, Vec<f64>)>,
}

/// Computes `W_p(μ, ν)` and an optimal coupling.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<Transport> {
    check_exponent(p)?;
    if !crate::measures::same_space(mu.space(), nu.space()) {
        return Err(Error::SpaceMismatch("wasserstein needs both measures on the same space".into()));
    }
    for (name, m) in [("first", mu), ("second", nu)] {
        if !m.is_probability() {
            return Err(Error::Mass(format!("{name} argument of wasserstein is not a probability measure")));
        }
    }
    let space = mu.space();
    let pair_space = Arc::new(space.times(space));
    let (a, b) = (mu.atoms(), nu.atoms());

    if a.len() == 1 || b.len() == 1 {
        // the product coupling is the only coupling
        let mut cost = 0.0;
        let mut atoms = Vec::with_capacity(a.len() * b.len());
        for x in a {
            for y in b {
                let w = x.weight * y.weight;
                cost += w * space.cost(&x.point, &y.point, p);
                atoms.push(([x.point.as_slice(), y.point.as_slice()].concat(), w));
            }
        }
        let coupling = DiscreteMeasure::new(pair_space, atoms, MassKind::Probability)?;
        return Ok(Transport { distance: root_p(cost, p), cost, coupling, potentials: None });
    }

    let (n, m) = (a.len(), b.len());
    let objective = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| space.cost(&x.point, &y.point, p)))
        .collect();
    let mut lp = LpProblem::minimize(objective);
    for i in 0..n {
        let mut row = vec![0.0; n * m];
        row[i * m..(i + 1) * m].iter_mut().for_each(|v| *v = 1.0);
        lp = lp.eq(row, a[i].weight);
    }
    for j in 0..m {
        let mut row = vec![0.0; n * m];
        (0..n).for_each(|i| row[i * m + j] = 1.0);
        lp = lp.eq(row, b[j].weight);
    }
    let sol = match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => return Err(Error::Lp("for a transport problem was infeasible")),
        LpOutcome::Unbounded => return Err(Error::Lp("for a transport problem was unbounded")),
    };
    let atoms = (0..n).flat_map(|i| {
        let x = &sol.x;
        (0..m).map(move |j| ([a[i].point.as_slice(), b[j].point.as_slice()].concat(), x[i * m + j]))
    });
    let coupling = DiscreteMeasure::new(pair_space, atoms.collect::<Vec<_>>(), MassKind::Probability)?;
    let cost = sol.value.max(0.0);
    let phi = sol.eq_duals[..n].to_vec();
    let psi = sol.eq_duals[n..].to_vec();
    Ok(Transport { distance: root_p(cost, p), cost, coupling, potentials: Some((phi, psi)) })
}

/// Shorthand for the distance only.
pub fn wasserstein_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    wasserstein(mu, nu, p).map(|t| t.distance)
}

/// `ρ^X(γ)` and `ρ^Y(γ)` together with their p-th powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub x: f64,
    pub y: f64,
    pub x_pow: f64,
    pub y_pow: f64,
}

/// Displacement functionals of a measure on `(X × Y)²`, where `X` is the
/// first `x_arity` factors of each half.
pub fn cost_functionals(gamma: &DiscreteMeasure, x_arity: usize, p: f64) -> Result<Displacement> {
    check_exponent(p)?;
    let half = gamma.self_product_half()?;
    if x_arity == 0 || x_arity >= half {
        return Err(Error::malformed(format!(
            "x arity {x_arity} must split each half of {half} factors into nonempty X and Y"
        )));
    }
    let base: ProductSpace = gamma.space().slice(0..half)?;
    let (mut x_pow, mut y_pow) = (0.0, 0.0);
    for atom in gamma.atoms() {
        let (l, r) = atom.point.split_at(half);
        x_pow += atom.weight * base.cost_over(l, r, p, 0..x_arity);
        y_pow += atom.weight * base.cost_over(l, r, p, x_arity..half);
    }
    Ok(Displacement { x: root_p(x_pow, p), y: root_p(y_pow, p), x_pow, y_pow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::FiniteMetricSpace;

    fn line(coords: &[f64]) -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::from_line(coords).unwrap())
    }

    fn on(s: &Arc<FiniteMetricSpace>, atoms: &[(usize, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::on_space(s.clone(), atoms.iter().copied(), MassKind::Probability).unwrap()
    }

    #[test]
    fn self_distance_is_zero_with_identity_coupling() {
        let s = line(&[0.0, 1.0, 3.0]);
        let mu = on(&s, &[(0, 0.2), (1, 0.5), (2, 0.3)]);
        let t = wasserstein(&mu, &mu, 1.0).unwrap();
        assert!(t.distance.abs() < 1e-12);
        for a in t.coupling.atoms() {
            assert_eq!(a.point[0], a.point[1]);
        }
    }

    #[test]
    fn diracs() {
        let s = line(&[0.0, 2.5]);
        for p in [1.0, 2.0, 3.5] {
            let d = wasserstein_distance(&on(&s, &[(0, 1.0)]), &on(&s, &[(1, 1.0)]), p).unwrap();
            assert!((d - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_shift() {
        // brute force: couplings are [[.25+t? ...]]; the one-parameter family
        // γ = [[s, .5-s], [.25-s, .25+s]], s ∈ [0,.25], cost = (.5-s)+(.25-s)
        let s = line(&[0.0, 1.0]);
        let mu = on(&s, &[(0, 0.5), (1, 0.5)]);
        let nu = on(&s, &[(0, 0.25), (1, 0.75)]);
        let brute = (0..=1000)
            .map(|k| 0.25 * k as f64 / 1000.0)
            .map(|t| (0.5 - t) + (0.25 - t))
            .fold(f64::INFINITY, f64::min);
        assert!((brute - 0.25).abs() < 1e-12);
        let t = wasserstein(&mu, &nu, 1.0).unwrap();
        assert!((t.distance - 0.25).abs() < 1e-12);
        let left = t.coupling.marginal(&[0]).unwrap();
        let right = t.coupling.marginal(&[1]).unwrap();
        assert!(left.max_atom_diff(&mu).unwrap() < 1e-9);
        assert!(right.max_atom_diff(&nu).unwrap() < 1e-9);
    }

    #[test]
    fn rejects_subprobability_and_mismatched_spaces() {
        let s = line(&[0.0, 1.0]);
        let mu = on(&s, &[(0, 1.0)]);
        let half = mu.scale(0.5).unwrap();
        assert!(matches!(wasserstein(&mu, &half, 1.0), Err(Error::Mass(_))));
        let other = on(&line(&[0.0, 2.0]), &[(0, 1.0)]);
        assert!(matches!(wasserstein(&mu, &other, 1.0), Err(Error::SpaceMismatch(_))));
    }

    fn quad() -> (Arc<ProductSpace>, Arc<ProductSpace>) {
        let x = line(&[0.0, 1.0, 4.0]);
        let y = line(&[0.0, 2.0]);
        let xy = Arc::new(ProductSpace::new(vec![x, y]).unwrap());
        (xy.clone(), Arc::new(xy.times(&xy)))
    }

    #[test]
    fn displacement_of_diagonal_and_single_atom() {
        let (_, q) = quad();
        let diag = DiscreteMeasure::subprobability(q.clone(), [(vec![1, 0, 1, 0], 0.4), (vec![2, 1, 2, 1], 0.6)]).unwrap();
        let d = cost_functionals(&diag, 1, 1.0).unwrap();
        assert_eq!((d.x, d.y), (0.0, 0.0));
        let single = DiscreteMeasure::subprobability(q, [(vec![0, 0, 2, 1], 1.0)]).unwrap();
        for p in [1.0, 2.0] {
            let d = cost_functionals(&single, 1, p).unwrap();
            assert!((d.x - 4.0).abs() < 1e-12 && (d.y - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn displacement_homogeneity() {
        let (_, q) = quad();
        let g = DiscreteMeasure::subprobability(q, [(vec![0, 0, 2, 1], 0.3), (vec![1, 1, 0, 0], 0.5)]).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let d = cost_functionals(&g, 1, p).unwrap();
            let ds = cost_functionals(&g.scale(0.25).unwrap(), 1, p).unwrap();
            let r = 0.25f64.powf(1.0 / p);
            assert!((ds.x - r * d.x).abs() < 1e-12);
            assert!((ds.y - r * d.y).abs() < 1e-12);
        }
    }

    #[test]
    fn displacement_arity_errors() {
        let (xy, _) = quad();
        let m = DiscreteMeasure::dirac(xy, vec![0, 0]).unwrap();
        assert!(cost_functionals(&m, 1, 1.0).is_err());
    }
}
