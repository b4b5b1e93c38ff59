//! Finite-sample diagnostics for the compactness criterion and the
//! continuity results: equicontinuity sweeps over families, the modulus
//! sandwich bound, gluing continuity, and tail reports.
//!
//! None of these prove anything about limits. They evaluate the relevant
//! quantities on a grid and report what they see.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapted::{glue_full, info_pseudometric, lift};
use crate::error::{Error, Result};
use crate::measures::{same_space, DiscreteMeasure, MassKind, PairedMeasure, ProcessLaw};
use crate::modulus::{check_curve, check_grid, is_graph_measure, modulus, symmetrize, CURVE_TOL};
use crate::spaces::{FiniteMetricSpace, Point, ProductSpace};
use crate::transport::{cost_functionals, wasserstein_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Plausible,
    Fails,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Plausible => f.write_str("equicontinuity plausible"),
            Verdict::Fails => f.write_str("fails equicontinuity"),
        }
    }
}

/// Modulus curves of a family, per member and per lift time, with their
/// pointwise suprema.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySweep {
    pub p: f64,
    pub deltas: Vec<f64>,
    /// Lift times. `0` stands for the member itself when sweeping paired
    /// measures directly.
    pub times: Vec<usize>,
    /// `values[member][t][δ]`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `sup[t][δ]` over members.
    pub sup: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl FamilySweep {
    fn smallest_positive(&self) -> usize {
        self.deltas.iter().position(|&d| d > 0.0).expect("grid checked to have a positive entry")
    }

    /// Largest supremum over lift times at the smallest positive `δ`.
    pub fn worst_at_smallest(&self) -> (f64, f64) {
        let k = self.smallest_positive();
        (self.deltas[k], self.sup.iter().map(|row| row[k]).fold(0.0, f64::max))
    }

    pub fn verdict(&self) -> Verdict {
        if self.worst_at_smallest().1 < self.threshold {
            Verdict::Plausible
        } else {
            Verdict::Fails
        }
    }

    /// Difference quotient of the worst sup curve between the two smallest
    /// positive grid points.
    pub fn slope(&self) -> Option<f64> {
        let k = self.smallest_positive();
        if k + 1 >= self.deltas.len() {
            return None;
        }
        let worst = |i: usize| self.sup.iter().map(|row| row[i]).fold(0.0, f64::max);
        Some((worst(k + 1) - worst(k)) / (self.deltas[k + 1] - self.deltas[k]))
    }

    /// Sup rows dominate member rows and every curve obeys the modulus laws.
    pub fn consistent(&self) -> bool {
        let dominated = self.values.iter().all(|member| {
            member
                .iter()
                .zip(&self.sup)
                .all(|(row, sup)| row.iter().zip(sup).all(|(v, s)| v <= s))
        });
        let lawful = self
            .values
            .iter()
            .flatten()
            .chain(&self.sup)
            .all(|row| check_curve(&self.deltas, row).is_empty());
        dominated && lawful
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,t,delta,omega\n");
        for (m, member) in self.values.iter().enumerate() {
            for (ti, row) in member.iter().enumerate() {
                for (d, v) in self.deltas.iter().zip(row) {
                    out.push_str(&format!("{m},{},{d:?},{v:?}\n", self.times[ti]));
                }
            }
        }
        for (ti, row) in self.sup.iter().enumerate() {
            for (d, v) in self.deltas.iter().zip(row) {
                out.push_str(&format!("sup,{},{d:?},{v:?}\n", self.times[ti]));
            }
        }
        out
    }

    pub fn verdict_line(&self) -> String {
        let (d, v) = self.worst_at_smallest();
        let slope = self.slope().map_or("n/a".to_string(), |s| format!("{s:?}"));
        format!(
            "verdict: {} (sup {v:?} at delta {d:?}, threshold {:?}, slope {slope})",
            self.verdict(),
            self.threshold
        )
    }
}

fn check_sweep_args(grid: &[f64], threshold: f64) -> Result<()> {
    check_grid(grid)?;
    if !grid.iter().any(|&d| d > 0.0) {
        return Err(Error::malformed("the sweep grid needs a positive delta"));
    }
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::malformed(format!("threshold must be positive, got {threshold}")));
    }
    Ok(())
}

/// Evaluates `ω` on every `(member, row, δ)` and assembles the sweep.
fn sweep_rows(rows: Vec<Vec<PairedMeasure>>, times: Vec<usize>, grid: &[f64], p: f64, threshold: f64) -> Result<FamilySweep> {
    let jobs: Vec<(usize, usize, usize)> = rows
        .iter()
        .enumerate()
        .flat_map(|(m, r)| (0..r.len()).flat_map(move |t| (0..grid.len()).map(move |k| (m, t, k))))
        .collect();
    let results = crate::par_map(&jobs, |&(m, t, k)| modulus(&rows[m][t], grid[k], p).map(|v| v.omega));
    let mut values = vec![vec![vec![0.0; grid.len()]; times.len()]; rows.len()];
    for (&(m, t, k), r) in jobs.iter().zip(results) {
        values[m][t][k] = r?;
    }
    let mut sup = vec![vec![0.0f64; grid.len()]; times.len()];
    for member in &values {
        for (s, row) in sup.iter_mut().zip(member) {
            for (a, &b) in s.iter_mut().zip(row) {
                *a = a.max(b);
            }
        }
    }
    Ok(FamilySweep { p, deltas: grid.to_vec(), times, values, sup, threshold })
}

/// Sweeps `ω(ℐ_t(μ), δ)` over a family of process laws, for every lift time.
pub fn equicontinuity_sweep(family: &[ProcessLaw], grid: &[f64], p: f64, threshold: f64) -> Result<FamilySweep> {
    check_sweep_args(grid, threshold)?;
    let first = family.first().ok_or_else(|| Error::malformed("empty family"))?;
    if family.iter().any(|m| !same_space(m.measure().space(), first.measure().space())) {
        return Err(Error::SpaceMismatch("family members live on different path spaces".into()));
    }
    let n = first.horizon();
    if n < 2 {
        return Err(Error::precondition("sweeping lifts needs horizon N >= 2"));
    }
    let times: Vec<usize> = (1..n).collect();
    let jobs: Vec<(usize, usize)> = (0..family.len()).flat_map(|m| times.iter().map(move |&t| (m, t))).collect();
    let lifted = crate::par_map(&jobs, |&(m, t)| lift(&family[m], t, p)?.as_paired());
    let mut rows: Vec<Vec<PairedMeasure>> = vec![Vec::with_capacity(times.len()); family.len()];
    for (&(m, _), l) in jobs.iter().zip(lifted) {
        rows[m].push(l?);
    }
    sweep_rows(rows, times, grid, p, threshold)
}

/// Sweeps `ω(μ, δ)` over a family of paired measures directly.
pub fn paired_sweep(family: &[PairedMeasure], grid: &[f64], p: f64, threshold: f64) -> Result<FamilySweep> {
    check_sweep_args(grid, threshold)?;
    if family.is_empty() {
        return Err(Error::malformed("empty family"));
    }
    let rows = family.iter().map(|m| vec![m.clone()]).collect();
    sweep_rows(rows, vec![0], grid, p, threshold)
}

/// Evaluation of the two-sided modulus bound between `μ` and a nearby `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub delta: f64,
    pub wasserstein: f64,
    pub eps: f64,
    pub omega_mu: f64,
    pub omega_nu: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SandwichReport {
    pub fn lower_slack(&self) -> f64 {
        self.omega_nu - self.lower
    }

    pub fn upper_slack(&self) -> f64 {
        self.upper - self.omega_nu
    }

    pub fn holds(&self) -> bool {
        self.lower < self.omega_nu && self.omega_nu < self.upper
    }
}

/// Bounds `ω_ν(δ)` in terms of `ω_μ(δ)` and any `ε > W_p(μ, ν)`.
pub fn sandwich_check(mu: &PairedMeasure, nu: &PairedMeasure, delta: f64, p: f64) -> Result<SandwichReport> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::malformed(format!("delta must be positive, got {delta}")));
    }
    if mu.split() != nu.split() {
        return Err(Error::SpaceMismatch("paired measures split differently".into()));
    }
    let w = wasserstein_distance(mu.measure(), nu.measure(), p)?;
    // strictness needs ε > W; the absolute floor covers W = 0 and solver noise
    let eps = w * (1.0 + 1e-6) + 1e-9;
    let omega_mu = modulus(mu, delta, p)?.omega;
    let omega_nu = modulus(nu, delta, p)?.omega;
    let factor = 1.0 + 2.0 * eps / delta;
    Ok(SandwichReport {
        delta,
        wasserstein: w,
        eps,
        omega_mu,
        omega_nu,
        lower: (omega_mu - 2.0 * eps) / factor,
        upper: factor * omega_mu + 2.0 * eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GluingMode {
    /// Requires the kernel measure to be a graph measure.
    Theorem,
    /// Runs without that hypothesis, to show what goes wrong.
    Counterexample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GluingRow {
    /// `max(W_p(μ_k, μ), W_p(ν_k, ν))`.
    pub input: f64,
    /// `W_p(μ_k ⊗̇ ν_k, μ ⊗̇ ν)`.
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluingTable {
    pub mode: GluingMode,
    pub rows: Vec<GluingRow>,
}

impl GluingTable {
    /// Every row whose input is within `input_tol` has output within `output_tol`.
    pub fn converges(&self, input_tol: f64, output_tol: f64) -> bool {
        self.rows.iter().filter(|r| r.input <= input_tol).all(|r| r.output <= output_tol)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,input,output\n");
        for (k, r) in self.rows.iter().enumerate() {
            out.push_str(&format!("{k},{:?},{:?}\n", r.input, r.output));
        }
        out
    }
}

pub fn gluing_continuity_experiment(
    mu_seq: &[PairedMeasure],
    nu_seq: &[PairedMeasure],
    mu: &PairedMeasure,
    nu: &PairedMeasure,
    p: f64,
    mode: GluingMode,
) -> Result<GluingTable> {
    if mu_seq.len() != nu_seq.len() {
        return Err(Error::malformed("sequences of different lengths"));
    }
    if mode == GluingMode::Theorem && !is_graph_measure(nu, p)? {
        return Err(Error::precondition("the kernel measure is not concentrated on a graph"));
    }
    let limit = glue_full(mu, nu)?;
    let idx: Vec<usize> = (0..mu_seq.len()).collect();
    let rows = crate::par_map(&idx, |&k| -> Result<GluingRow> {
        let glued = glue_full(&mu_seq[k], &nu_seq[k])?;
        let input = wasserstein_distance(mu_seq[k].measure(), mu.measure(), p)?
            .max(wasserstein_distance(nu_seq[k].measure(), nu.measure(), p)?);
        let output = wasserstein_distance(&glued, &limit, p)?;
        Ok(GluingRow { input, output })
    });
    Ok(GluingTable { mode, rows: rows.into_iter().collect::<Result<_>>()? })
}

/// A sequence of graph measures whose limit is not a graph measure, with
/// matching first factors, for the counterexample mode.
///
/// `Y` is a line containing `0` and `±2^{-k}`; `X = Z = {0, 1}`.
/// `μ_k = ½δ(0, -h) + ½δ(1, +h)`, `ν_k = ½δ(-h, 0) + ½δ(+h, 1)` with `h = 2^{-k}`,
/// and in the limit both `y`-atoms merge at `0`.
pub fn nongraph_sequence(len: usize) -> Result<(Vec<PairedMeasure>, Vec<PairedMeasure>, PairedMeasure, PairedMeasure)> {
    let hs: Vec<f64> = (1..=len).map(|k| 0.5f64.powi(k as i32)).collect();
    let mut coords: Vec<f64> = hs.iter().flat_map(|&h| [-h, h]).chain([0.0]).collect();
    coords.sort_by(f64::total_cmp);
    let y = Arc::new(FiniteMetricSpace::from_line(&coords)?);
    let x = Arc::new(FiniteMetricSpace::from_line(&[0.0, 1.0])?);
    let at = |c: f64| coords.iter().position(|&v| v == c).expect("coordinate on the grid");
    let zero = at(0.0);
    let mut mus = Vec::with_capacity(len);
    let mut nus = Vec::with_capacity(len);
    for &h in &hs {
        let (lo, hi) = (at(-h), at(h));
        mus.push(PairedMeasure::from_pairs(x.clone(), y.clone(), [((0, lo), 0.5), ((1, hi), 0.5)])?);
        nus.push(PairedMeasure::from_pairs(y.clone(), x.clone(), [((lo, 0), 0.5), ((hi, 1), 0.5)])?);
    }
    let mu = PairedMeasure::from_pairs(x.clone(), y.clone(), [((0, zero), 0.5), ((1, zero), 0.5)])?;
    let nu = PairedMeasure::from_pairs(y, x, [((zero, 0), 0.5), ((zero, 1), 0.5)])?;
    Ok((mus, nus, mu, nu))
}

/// Outcome of the `δ`-certificate search for a graph measure.
#[derive(Debug, Clone, PartialEq)]
pub struct HelperCertificate {
    pub eps: f64,
    /// A `δ′` with `ω_μ(δ′) < ε/2`.
    pub delta_prime: f64,
    pub omega_at_delta_prime: f64,
    /// `min(δ′/2, ε/2)`.
    pub delta: f64,
    pub samples: usize,
    /// Largest `ρ^Y(γ)` seen over the samples.
    pub max_rho_y: f64,
}

impl HelperCertificate {
    pub fn holds(&self) -> bool {
        self.max_rho_y < self.eps
    }
}

/// Finds `δ` such that couplings within `δ` of a graph measure `μ` in the
/// `X` direction move `Y` by less than `ε`, then spot-checks it on random
/// couplings `γ ∈ Cpl(μ, ν)` with `W_p(μ, ν) < δ` and `ρ^X(γ) < δ`.
///
/// The first sample is adversarial: the symmetrized optimal partial
/// self-coupling at `δ`, with `ν = μ`.
pub fn helper_lemma_check(mu: &PairedMeasure, eps: f64, p: f64, samples: usize, seed: u64) -> Result<HelperCertificate> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::malformed(format!("epsilon must be positive, got {eps}")));
    }
    if !is_graph_measure(mu, p)? {
        return Err(Error::precondition("the measure is not concentrated on a graph"));
    }
    let xs = mu.x_marginal();
    let x_space = xs.space();
    let diam_x = xs
        .atoms()
        .iter()
        .flat_map(|a| xs.atoms().iter().map(move |b| x_space.dist(&a.point, &b.point, p)))
        .fold(0.0, f64::max);
    // beyond the X-diameter of the support ω is flat
    let top = if diam_x > 0.0 { diam_x } else { 1.0 };
    let omega = |d: f64| modulus(mu, d, p).map(|v| v.omega);
    let target = eps / 2.0;
    let (delta_prime, omega_at) = if omega(top)? < target {
        (top, omega(top)?)
    } else {
        let (mut lo, mut hi) = (0.0, top);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if omega(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == 0.0 {
            return Err(Error::precondition("no positive delta found with small modulus"));
        }
        (lo, omega(lo)?)
    };
    let delta = (delta_prime / 2.0).min(eps / 2.0);

    let x_arity = mu.x_arity();
    let base = mu.measure().space();
    let pair = Arc::new(base.times(base));
    let mut max_rho_y: f64 = 0.0;
    let mut check = |gamma: &DiscreteMeasure, nu: &DiscreteMeasure| -> Result<()> {
        let d = cost_functionals(gamma, x_arity, p)?;
        let w = wasserstein_distance(mu.measure(), nu, p)?;
        if !(w < delta && d.x < delta) {
            return Err(Error::precondition("sampled coupling left the delta ball"));
        }
        max_rho_y = max_rho_y.max(d.y);
        Ok(())
    };

    let mut taken = 0;
    if samples > 0 {
        let partial = modulus(mu, delta, p)?.gamma;
        let full = symmetrize(mu, &partial)?;
        let d = cost_functionals(&full, x_arity, p)?;
        // ρ^X(γ) ≤ δ holds with equality at the optimum; shrink toward the
        // diagonal to make it strict
        let full = if d.x < delta { full } else { toward_diagonal(mu, &full, 0.5)? };
        check(&full, mu.measure())?;
        taken += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = base.points().collect();
    while taken < samples {
        let k = rng.gen_range(1..=3usize);
        let eta_atoms: Vec<(Point, f64)> =
            (0..k).map(|_| (points[rng.gen_range(0..points.len())].clone(), rng.gen_range(0.1..1.0))).collect();
        let total: f64 = eta_atoms.iter().map(|a| a.1).sum();
        let eta = DiscreteMeasure::probability(base.clone(), eta_atoms.into_iter().map(|(pt, w)| (pt, w / total)))?;
        // γ = (1-r)·diag(μ) + r·(μ ⊗ η); its transport cost is r·∫c d(μ⊗η)
        let cross: f64 = mu
            .atoms()
            .iter()
            .flat_map(|a| eta.atoms().iter().map(move |b| a.weight * b.weight * base.cost(&a.point, &b.point, p)))
            .sum();
        let r_max = if cross > 0.0 { (delta.powf(p) / cross).min(1.0) } else { 1.0 };
        let r = rng.gen_range(0.0..1.0) * r_max * (1.0 - 1e-9);
        let mut atoms = Vec::new();
        for a in mu.atoms() {
            atoms.push(([a.point.as_slice(), a.point.as_slice()].concat(), (1.0 - r) * a.weight));
            for b in eta.atoms() {
                atoms.push(([a.point.as_slice(), b.point.as_slice()].concat(), r * a.weight * b.weight));
            }
        }
        let gamma = DiscreteMeasure::probability(pair.clone(), atoms)?;
        let nu = mu.measure().scale(1.0 - r)?.add(&eta.scale(r)?, MassKind::Probability)?;
        check(&gamma, &nu)?;
        taken += 1;
    }
    Ok(HelperCertificate {
        eps,
        delta_prime,
        omega_at_delta_prime: omega_at,
        delta,
        samples,
        max_rho_y,
    })
}

/// `(1-s)·γ + s·diag(μ)`.
fn toward_diagonal(mu: &PairedMeasure, gamma: &DiscreteMeasure, s: f64) -> Result<DiscreteMeasure> {
    let diag = mu
        .atoms()
        .iter()
        .map(|a| ([a.point.as_slice(), a.point.as_slice()].concat(), a.weight));
    let diag = DiscreteMeasure::probability(gamma.space().clone(), diag.collect::<Vec<_>>())?;
    gamma.scale(1.0 - s)?.add(&diag.scale(s)?, MassKind::Probability)
}

/// `∫φ dμ` and `sup_μ ∫_{L^c} φ dμ` with `φ = 1 + ρ(x₀, ·)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub p: f64,
    /// `∫φ dμ` per member.
    pub phi_integrals: Vec<f64>,
    /// `tails[member][set]`.
    pub tails: Vec<Vec<f64>>,
    /// `sup_tails[set]`.
    pub sup_tails: Vec<f64>,
}

impl TailReport {
    pub fn nonincreasing(&self) -> bool {
        self.sup_tails.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("set,sup_tail\n");
        for (l, v) in labels.iter().zip(&self.sup_tails) {
            out.push_str(&format!("{l},{v:?}\n"));
        }
        out
    }
}

pub fn tail_report(family: &[DiscreteMeasure], sets: &[Vec<Point>], p: f64) -> Result<TailReport> {
    crate::spaces::check_exponent(p)?;
    let first = family.first().ok_or_else(|| Error::malformed("empty family"))?;
    let space = first.space().clone();
    if family.iter().any(|m| !same_space(m.space(), &space)) {
        return Err(Error::SpaceMismatch("family members live on different spaces".into()));
    }
    for set in sets {
        for pt in set {
            space.check_point(pt)?;
        }
    }
    let origin = space.base_point();
    let phi = |x: &[usize]| 1.0 + space.cost(&origin, x, p);
    let phi_integrals: Vec<f64> = family.iter().map(|m| m.integrate(phi)).collect();
    let sorted: Vec<Vec<&[usize]>> = sets
        .iter()
        .map(|s| {
            let mut v: Vec<&[usize]> = s.iter().map(|x| x.as_slice()).collect();
            v.sort();
            v
        })
        .collect();
    let tails: Vec<Vec<f64>> = family
        .iter()
        .map(|m| {
            sorted
                .iter()
                .map(|set| m.integrate(|x| if set.binary_search(&x).is_ok() { 0.0 } else { phi(x) }))
                .collect()
        })
        .collect();
    let sup_tails = (0..sets.len()).map(|j| tails.iter().map(|row| row[j]).fold(0.0, f64::max)).collect();
    Ok(TailReport { p, phi_integrals, tails, sup_tails })
}

/// Closed balls `{x : ρ(x₀, x) ≤ r}` around the base point, one per radius.
pub fn balls(space: &ProductSpace, radii: &[f64], p: f64) -> Vec<Vec<Point>> {
    let origin = space.base_point();
    radii
        .iter()
        .map(|&r| space.points().filter(|x| space.dist(&origin, x, p) <= r).collect())
        .collect()
}

/// The motivating pair of processes on a shared line.
///
/// The left process starts at `0` and then moves to `±sep/2` with
/// probability ½ each. The right process with gap `g` starts at `±g` and
/// then moves deterministically to `±sep/2` with the matching sign. As
/// `g → 0` the right processes converge to the left one in `W_p` but not in
/// the information topology.
#[derive(Debug, Clone)]
pub struct BranchingExample {
    space: Arc<FiniteMetricSpace>,
    coords: Vec<f64>,
    gaps: Vec<f64>,
    separation: f64,
}

impl BranchingExample {
    pub fn new(gaps: &[f64], separation: f64) -> Result<Self> {
        if !(separation > 0.0) || !separation.is_finite() {
            return Err(Error::malformed(format!("branch separation must be positive, got {separation}")));
        }
        let half = separation / 2.0;
        if gaps.is_empty() || gaps.iter().any(|&g| !(g > 0.0 && g < half)) {
            return Err(Error::malformed(format!("gaps must lie in (0, {half})")));
        }
        let mut coords: Vec<f64> = gaps.iter().flat_map(|&g| [-g, g]).chain([0.0, -half, half]).collect();
        coords.sort_by(f64::total_cmp);
        coords.dedup();
        let space = Arc::new(FiniteMetricSpace::from_line(&coords)?);
        Ok(BranchingExample { space, coords, gaps: gaps.to_vec(), separation })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    fn at(&self, c: f64) -> usize {
        self.coords.iter().position(|&v| v == c).expect("coordinate on the grid")
    }

    fn law(&self, paths: [(f64, f64); 2]) -> ProcessLaw {
        let paths = paths.map(|(a, b)| (vec![self.at(a), self.at(b)], 0.5));
        ProcessLaw::new(vec![self.space.clone(), self.space.clone()], paths).expect("valid by construction")
    }

    pub fn left(&self) -> ProcessLaw {
        let h = self.separation / 2.0;
        self.law([(0.0, h), (0.0, -h)])
    }

    pub fn right(&self, k: usize) -> ProcessLaw {
        let (g, h) = (self.gaps[k], self.separation / 2.0);
        self.law([(g, h), (-g, -h)])
    }

    pub fn family(&self) -> Vec<ProcessLaw> {
        (0..self.gaps.len()).map(|k| self.right(k)).collect()
    }

    /// `ω(ℐ₁(right), δ) = sep · min(1, δ / 2g)`, for every `p`.
    pub fn closed_form(&self, k: usize, delta: f64) -> f64 {
        self.separation * (delta / (2.0 * self.gaps[k])).min(1.0)
    }

    /// One row per gap.
    pub fn table(&self, delta: f64, p: f64) -> Result<Vec<BranchingRow>> {
        let left = self.left();
        let idx: Vec<usize> = (0..self.gaps.len()).collect();
        let rows = crate::par_map(&idx, |&k| -> Result<BranchingRow> {
            let right = self.right(k);
            let info = info_pseudometric(&left, &right, p)?;
            let omega = modulus(&lift(&right, 1, p)?.as_paired()?, delta, p)?.omega;
            Ok(BranchingRow {
                gap: self.gaps[k],
                plain: info.plain,
                lifted: info.per_t[0],
                omega,
                closed_form: self.closed_form(k, delta),
            })
        });
        rows.into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchingRow {
    pub gap: f64,
    /// `W_p(left, right)` on paths.
    pub plain: f64,
    /// `W_p(ℐ₁(left), ℐ₁(right))`.
    pub lifted: f64,
    /// `ω(ℐ₁(right), δ)` from the LP.
    pub omega: f64,
    pub closed_form: f64,
}

/// Whether the LP and closed form agree on every row.
pub fn branching_agrees(rows: &[BranchingRow]) -> bool {
    rows.iter().all(|r| (r.omega - r.closed_form).abs() <= CURVE_TOL)
}
