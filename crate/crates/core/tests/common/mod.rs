//! Brute-force oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use adapted_ot::adapted::LiftedMeasure;
use adapted_ot::measures::{DiscreteMeasure, PairedMeasure, ProcessLaw};
use adapted_ot::spaces::{FiniteMetricSpace, Point, ProductSpace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// vertex enumeration

/// Solves the square system `m x = rhs` by Gaussian elimination with
/// partial pivoting. `None` if singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

/// Calls `f` on every `k`-subset of `0..n`, in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `max c·x` over the bounded polyhedron `{A x ≤ b, x ≥ 0}`, by trying
/// every choice of `n` tight constraints.
pub fn vertex_max_ineq(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = -1.0;
        rows.push((r, 0.0));
    }
    let mut best: Option<f64> = None;
    for_each_subset(rows.len(), n, |tight| {
        let m = tight.iter().map(|&i| rows[i].0.clone()).collect();
        let rhs = tight.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(m, rhs) {
            let feasible = rows.iter().all(|(r, bi)| {
                let lhs: f64 = r.iter().zip(&x).map(|(u, v)| u * v).sum();
                lhs <= bi + 1e-9 * (1.0 + bi.abs())
            });
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(u, v)| u * v).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    });
    best
}

/// `min c·x` over `{A x = b, x ≥ 0}` with `A` of full row rank, by
/// enumerating every basis.
pub fn vertex_min_eq(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let (rows, n) = (a.len(), c.len());
    let mut best: Option<f64> = None;
    for_each_subset(n, rows, |basis| {
        let m = (0..rows).map(|r| basis.iter().map(|&j| a[r][j]).collect()).collect();
        if let Some(xb) = solve_square(m, b.to_vec()) {
            if xb.iter().all(|&v| v >= -1e-10) {
                let v: f64 = basis.iter().zip(&xb).map(|(&j, x)| c[j] * x).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    });
    best
}

/// `W_p^p(μ, ν)` by enumerating the vertices of the transportation polytope.
pub fn transport_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    let (a, b) = (mu.atoms(), nu.atoms());
    let (n, m) = (a.len(), b.len());
    let space = mu.space();
    let c: Vec<f64> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| space.cost(&x.point, &y.point, p)))
        .collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        rows.push((0..n * m).map(|v| if v / m == i { 1.0 } else { 0.0 }).collect());
        rhs.push(a[i].weight);
    }
    // the last column constraint is implied by the others
    for j in 0..m.saturating_sub(1) {
        rows.push((0..n * m).map(|v| if v % m == j { 1.0 } else { 0.0 }).collect());
        rhs.push(b[j].weight);
    }
    vertex_min_eq(&c, &rows, &rhs).expect("transportation polytope is nonempty")
}

/// `ω_μ(δ)^p` by enumerating the vertices of the partial self-coupling
/// polytope, over all ordered atom pairs.
pub fn modulus_oracle(mu: &PairedMeasure, delta: f64, p: f64) -> f64 {
    let atoms = mu.atoms();
    let k = atoms.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let c: Vec<f64> = pairs.iter().map(|&(i, j)| mu.y_cost(&atoms[i].point, &atoms[j].point, p)).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for side in 0..2 {
        for (t, atom) in atoms.iter().enumerate() {
            a.push(pairs.iter().map(|&(i, j)| if (if side == 0 { i } else { j }) == t { 1.0 } else { 0.0 }).collect());
            b.push(atom.weight);
        }
    }
    a.push(pairs.iter().map(|&(i, j)| mu.x_cost(&atoms[i].point, &atoms[j].point, p)).collect());
    b.push(delta.powf(p));
    vertex_max_ineq(&c, &a, &b).expect("the zero coupling is feasible")
}

// ---------------------------------------------------------------------------
// generators

/// A random metric space of `n` distinct points in the plane.
pub fn random_space(rng: &mut ChaCha8Rng, n: usize) -> Arc<FiniteMetricSpace> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n);
    while pts.len() < n {
        let q = ((rng.gen_range(0..8) as f64) * 0.5, (rng.gen_range(0..8) as f64) * 0.5);
        if !pts.contains(&q) {
            pts.push(q);
        }
    }
    Arc::new(FiniteMetricSpace::from_plane(&pts).unwrap())
}

/// A random metric space with between `lo` and `hi` points.
pub fn space_between(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Arc<FiniteMetricSpace> {
    let n = rng.gen_range(lo..=hi);
    random_space(rng, n)
}

pub fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// A random probability on `space` with between 1 and `max_atoms` atoms.
pub fn random_measure(rng: &mut ChaCha8Rng, space: &Arc<ProductSpace>, max_atoms: usize) -> DiscreteMeasure {
    let mut all: Vec<Point> = space.points().collect();
    all.shuffle(rng);
    let k = rng.gen_range(1..=max_atoms.min(all.len()));
    let w = random_weights(rng, k);
    DiscreteMeasure::probability(space.clone(), all.into_iter().take(k).zip(w)).unwrap()
}

/// A random paired measure on `X × Y` with single-factor `X` and `Y`.
pub fn random_paired(rng: &mut ChaCha8Rng, max_atoms: usize) -> PairedMeasure {
    let x = space_between(rng, 1, 3);
    let y = space_between(rng, 1, 3);
    let space = Arc::new(ProductSpace::new(vec![x, y]).unwrap());
    PairedMeasure::new(random_measure(rng, &space, max_atoms), 1).unwrap()
}

/// A random measure concentrated on the graph of a function `X → Y`.
pub fn random_graph_paired(rng: &mut ChaCha8Rng, max_atoms: usize) -> PairedMeasure {
    let nx = rng.gen_range(1..=max_atoms.max(1));
    let x = random_space(rng, nx);
    let y = space_between(rng, 1, 3);
    let k = rng.gen_range(1..=nx);
    let mut xs: Vec<usize> = (0..nx).collect();
    xs.shuffle(rng);
    let w = random_weights(rng, k);
    let atoms: Vec<((usize, usize), f64)> = xs
        .into_iter()
        .take(k)
        .zip(w)
        .map(|(i, w)| ((i, rng.gen_range(0..y.len())), w))
        .collect();
    PairedMeasure::from_pairs(x, y, atoms).unwrap()
}

/// A random measure with some `x` carrying two distinct `y`s.
pub fn random_nongraph_paired(rng: &mut ChaCha8Rng, max_atoms: usize) -> PairedMeasure {
    let x = space_between(rng, 1, 2);
    let y = space_between(rng, 2, 3);
    let x0 = rng.gen_range(0..x.len());
    let mut ys: Vec<usize> = (0..y.len()).collect();
    ys.shuffle(rng);
    let mut atoms = vec![(x0, ys[0]), (x0, ys[1])];
    let extra = rng.gen_range(0..=max_atoms.saturating_sub(2));
    for _ in 0..extra {
        let cand = (rng.gen_range(0..x.len()), rng.gen_range(0..y.len()));
        if !atoms.contains(&cand) {
            atoms.push(cand);
        }
    }
    let w = random_weights(rng, atoms.len());
    PairedMeasure::from_pairs(x, y, atoms.into_iter().zip(w)).unwrap()
}

/// A random process law with horizon 2 or 3 and up to 5 paths.
pub fn random_process(rng: &mut ChaCha8Rng) -> ProcessLaw {
    let n = rng.gen_range(2..=3);
    let spaces: Vec<_> = (0..n).map(|_| space_between(rng, 2, 3)).collect();
    let k = rng.gen_range(1..=5);
    let w = random_weights(rng, k);
    let paths: Vec<(Point, f64)> = w
        .into_iter()
        .map(|w| (spaces.iter().map(|s| rng.gen_range(0..s.len())).collect(), w))
        .collect();
    ProcessLaw::new(spaces, paths).unwrap()
}

/// Two random lifted measures over shared prefix and tail spaces. Atoms
/// need not form a graph.
pub fn random_lifted_pair(rng: &mut ChaCha8Rng, p: f64) -> (LiftedMeasure, LiftedMeasure) {
    let x = Arc::new(ProductSpace::single(space_between(rng, 1, 3)));
    let y = Arc::new(ProductSpace::single(space_between(rng, 2, 3)));
    let mut one = || {
        let k = rng.gen_range(1..=3);
        let w = random_weights(rng, k);
        let atoms = w
            .into_iter()
            .map(|w| {
                let pt = vec![rng.gen_range(0..x.factors()[0].len())];
                (pt, random_measure(rng, &y, 3), w)
            })
            .collect();
        LiftedMeasure::new(x.clone(), y.clone(), atoms, p).unwrap()
    };
    let a = one();
    let b = one();
    (a, b)
}

/// `marg_Y(γ) ⊗ K` for a random kernel `K: Y → Z`, so that the result
/// can be glued onto `γ`.
pub fn random_continuation(rng: &mut ChaCha8Rng, gamma: &PairedMeasure, z: &Arc<FiniteMetricSpace>) -> PairedMeasure {
    let ym = gamma.y_marginal();
    let space = Arc::new(ym.space().times(&ProductSpace::single(z.clone())));
    let mut atoms = Vec::new();
    for a in ym.atoms() {
        let k = rng.gen_range(1..=z.len().min(2));
        let mut zs: Vec<usize> = (0..z.len()).collect();
        zs.shuffle(rng);
        for (zi, w) in zs.into_iter().take(k).zip(random_weights(rng, k)) {
            let mut pt = a.point.clone();
            pt.push(zi);
            atoms.push((pt, a.weight * w));
        }
    }
    PairedMeasure::new(DiscreteMeasure::probability(space, atoms).unwrap(), ym.space().arity()).unwrap()
}

/// A random `γ ≤ μ ⊗ μ`-dominated partial self-coupling of `μ`.
pub fn random_partial_self_coupling(rng: &mut ChaCha8Rng, mu: &PairedMeasure) -> DiscreteMeasure {
    let atoms = mu.atoms();
    let k = atoms.len();
    let g: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..k).map(|_| if rng.gen_bool(0.7) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect())
        .collect();
    let mut scale = f64::INFINITY;
    for i in 0..k {
        let row: f64 = g[i].iter().sum();
        let col: f64 = (0..k).map(|r| g[r][i]).sum();
        for s in [row, col] {
            if s > 0.0 {
                scale = scale.min(atoms[i].weight / s);
            }
        }
    }
    if !scale.is_finite() {
        scale = 0.0;
    }
    let scale = scale * rng.gen_range(0.2..=1.0);
    let quad = Arc::new(mu.measure().space().times(mu.measure().space()));
    let pts = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| {
        ([atoms[i].point.as_slice(), atoms[j].point.as_slice()].concat(), g[i][j] * scale * (1.0 - 1e-12))
    });
    DiscreteMeasure::subprobability(quad, pts.collect::<Vec<_>>()).unwrap()
}
