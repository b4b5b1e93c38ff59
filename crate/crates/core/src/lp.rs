//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems have the form `opt cᵀx` subject to `A_eq x = b_eq`,
//! `A_le x ≤ b_le`, `x ≥ 0`. Instances here are small (a few hundred
//! columns at most), so a dense tableau is used throughout. The pivot order
//! is fixed, which makes the returned vertex a deterministic function of the
//! input.

use crate::error::{Error, Result};

/// Reduced costs below `-COST_EPS` are considered improving.
const COST_EPS: f64 = 1e-11;
/// Smallest admissible pivot magnitude.
const PIVOT_EPS: f64 = 1e-11;
/// Phase-one residual above which a problem is declared infeasible (scaled by the rhs).
const FEAS_EPS: f64 = 1e-8;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub le_matrix: Vec<Vec<f64>>,
    pub le_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Dual values of the equality rows, with `b_eq·y_eq + b_le·y_le = value`.
    pub eq_duals: Vec<f64>,
    pub le_duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        LpProblem {
            sense,
            objective,
            eq_matrix: Vec::new(),
            eq_rhs: Vec::new(),
            le_matrix: Vec::new(),
            le_rhs: Vec::new(),
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.le_matrix.push(row);
        self.le_rhs.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::malformed("non-finite objective coefficient"));
        }
        let blocks = [(&self.eq_matrix, &self.eq_rhs, "equality"), (&self.le_matrix, &self.le_rhs, "inequality")];
        for (mat, rhs, what) in blocks {
            if mat.len() != rhs.len() {
                return Err(Error::malformed(format!("{what} block has {} rows but {} rhs entries", mat.len(), rhs.len())));
            }
            for (i, row) in mat.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::malformed(format!("{what} row {i} has {} entries, expected {n}", row.len())));
                }
                if row.iter().any(|v| !v.is_finite()) || !rhs[i].is_finite() {
                    return Err(Error::malformed(format!("{what} row {i} has non-finite entries")));
                }
            }
        }
        Ok(())
    }

    /// Maximum constraint violation of `x` (including `x ≥ 0`).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let eq = self
            .eq_matrix
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (dot(r) - b).abs());
        let le = self
            .le_matrix
            .iter()
            .zip(&self.le_rhs)
            .map(|(r, b)| (dot(r) - b).max(0.0));
        let neg = x.iter().map(|v| (-v).max(0.0));
        eq.chain(le).chain(neg).fold(0.0, f64::max)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [f64]) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = cost[c];
        if f != 0.0 {
            for (v, p) in cost.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for objective `c` (length `width + 1`, last entry `-value`).
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut cost = c.to_vec();
        cost.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != 0.0 {
                for (v, t) in cost.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * t;
                }
            }
        }
        cost
    }

    /// Runs Bland's-rule pivots to optimality. Returns `false` if unbounded.
    fn optimize(&mut self, cost: &mut [f64], allowed: &[bool], pivots: &mut usize) -> Result<bool> {
        loop {
            let entering = (0..self.width).find(|&j| allowed[j] && cost[j] < -COST_EPS);
            let Some(c) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else { return Ok(false) };
            self.pivot(r, c, cost);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Lp("exceeded the pivot limit"));
            }
        }
    }
}

/// Solves `prob` exactly up to floating-point pivoting error.
pub fn solve_lp(prob: &LpProblem) -> Result<LpOutcome> {
    prob.validate()?;
    let n = prob.num_vars();
    let m_eq = prob.eq_rhs.len();
    let m_le = prob.le_rhs.len();
    let m = m_eq + m_le;

    // Columns: originals, one slack per ≤ row, then artificials as needed.
    let slack0 = n;
    let art0 = n + m_le;
    let mut signs = vec![1.0; m];
    let mut identity_col = vec![0usize; m];
    let mut needs_art = Vec::new();
    for i in 0..m {
        let b = if i < m_eq { prob.eq_rhs[i] } else { prob.le_rhs[i - m_eq] };
        if b < 0.0 {
            signs[i] = -1.0;
        }
        if i >= m_eq && signs[i] > 0.0 {
            identity_col[i] = slack0 + (i - m_eq);
        } else {
            identity_col[i] = art0 + needs_art.len();
            needs_art.push(i);
        }
    }
    let width = art0 + needs_art.len();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let (src, b) = if i < m_eq {
            (&prob.eq_matrix[i], prob.eq_rhs[i])
        } else {
            (&prob.le_matrix[i - m_eq], prob.le_rhs[i - m_eq])
        };
        let s = signs[i];
        let mut row = vec![0.0; width + 1];
        for (v, a) in row.iter_mut().zip(src) {
            *v = s * a;
        }
        if i >= m_eq {
            row[slack0 + (i - m_eq)] = s;
        }
        row[identity_col[i]] = 1.0;
        row[width] = s * b;
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis: identity_col.clone(), width };
    let mut pivots = 0;

    // Phase one: drive the artificials to zero.
    if !needs_art.is_empty() {
        let mut c1 = vec![0.0; width];
        for c in c1.iter_mut().skip(art0) {
            *c = 1.0;
        }
        let mut cost = tab.reduced_costs(&c1);
        let allowed = vec![true; width];
        tab.optimize(&mut cost, &allowed, &mut pivots)?;
        let residual = -cost[width];
        let scale = 1.0 + prob.eq_rhs.iter().chain(&prob.le_rhs).fold(0.0_f64, |a, b| a.max(b.abs()));
        if residual > FEAS_EPS * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Pivot basic artificials out where the row still has support.
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&j| tab.rows[r][j].abs() > 1e-9) {
                    tab.pivot(r, c, &mut cost);
                }
            }
        }
    }

    // Phase two on the original objective in minimization form.
    let flip = if prob.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut c2 = vec![0.0; width];
    for (c, o) in c2.iter_mut().zip(&prob.objective) {
        *c = flip * o;
    }
    let mut cost = tab.reduced_costs(&c2);
    let allowed: Vec<bool> = (0..width).map(|j| j < art0).collect();
    if !tab.optimize(&mut cost, &allowed, &mut pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i).max(0.0);
        }
    }
    let value = prob.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    // y_i = -(reduced cost of the row's identity column) in minimization form.
    let duals: Vec<f64> = (0..m).map(|i| -flip * signs[i] * cost[identity_col[i]]).collect();
    Ok(LpOutcome::Optimal(LpSolution {
        value,
        x,
        eq_duals: duals[..m_eq].to_vec(),
        le_duals: duals[m_eq..].to_vec(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(p: &LpProblem) -> LpSolution {
        solve_lp(p).unwrap().optimal().expect("optimal")
    }

    #[test]
    fn max_single_bound() {
        let s = opt(&LpProblem::maximize(vec![1.0]).le(vec![1.0], 3.0));
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_with_equality() {
        let s = opt(&LpProblem::minimize(vec![1.0, 1.0]).eq(vec![1.0, 1.0], 1.0));
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = LpProblem::minimize(vec![1.0]).le(vec![1.0], -1.0);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Infeasible);
        let p = LpProblem::maximize(vec![1.0, 0.0]).le(vec![0.0, 1.0], 1.0);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn malformed_problem() {
        let p = LpProblem::minimize(vec![1.0, 2.0]).le(vec![1.0], 1.0);
        assert!(solve_lp(&p).unwrap_err().is_malformed());
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        // min x + y s.t. -x - y <= -2, x - y = 0
        let p = LpProblem::minimize(vec![1.0, 1.0]).le(vec![-1.0, -1.0], -2.0).eq(vec![1.0, -1.0], 0.0);
        let s = opt(&p);
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duals_certify_optimum() {
        // classic: max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36
        let p = LpProblem::maximize(vec![3.0, 5.0])
            .le(vec![1.0, 0.0], 4.0)
            .le(vec![0.0, 2.0], 12.0)
            .le(vec![3.0, 2.0], 18.0);
        let s = opt(&p);
        assert!((s.value - 36.0).abs() < 1e-12);
        let dual_obj: f64 = s.le_duals.iter().zip(&p.le_rhs).map(|(y, b)| y * b).sum();
        assert!((dual_obj - 36.0).abs() < 1e-9);
        assert!(s.le_duals.iter().all(|&y| y >= -1e-12));
        // Aᵀy ≥ c for a maximization with ≤ rows
        for j in 0..2 {
            let col: f64 = p.le_matrix.iter().zip(&s.le_duals).map(|(r, y)| r[j] * y).sum();
            assert!(col >= p.objective[j] - 1e-9);
        }
    }

    #[test]
    fn degenerate_transportation_terminates() {
        // 3x3 with equal uniform marginals: highly degenerate.
        let c = [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        let mut p = LpProblem::minimize(c.iter().flatten().copied().collect());
        for i in 0..3 {
            let mut row = vec![0.0; 9];
            for j in 0..3 {
                row[3 * i + j] = 1.0;
            }
            p = p.eq(row, 1.0 / 3.0);
        }
        for j in 0..3 {
            let mut row = vec![0.0; 9];
            for i in 0..3 {
                row[3 * i + j] = 1.0;
            }
            p = p.eq(row, 1.0 / 3.0);
        }
        let s = opt(&p);
        assert!(s.value.abs() < 1e-12);
        assert!(p.violation(&s.x) < 1e-12);
    }
}
