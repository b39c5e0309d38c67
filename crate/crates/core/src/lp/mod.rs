//! Bounded-variable primal simplex with dense basis inverse.
//!
//! Sign convention (minimization): the dual of a `≥` row is nonnegative, of a
//! `≤` row nonpositive, of an `=` row free; reduced costs are
//! `r̃_j = c_j − λ̃ᵀA_j`. At an optimum
//! `cᵀx̃ = λ̃ᵀb + Σ_j r̃_j · (active bound of j)`.

mod dense;
mod simplex;

use crate::rlt::{LinearRelaxation, RowSense};

pub use simplex::SimplexOptions;

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub coefs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `min cᵀx` subject to sparse rows and finite column bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new(num_cols: usize) -> Self {
        Self {
            objective: vec![0.0; num_cols],
            col_lower: vec![0.0; num_cols],
            col_upper: vec![0.0; num_cols],
            rows: Vec::new(),
        }
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) {
        self.rows.push(LpRow { coefs, sense, rhs });
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rhs).collect()
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].coefs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Worst row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let a = self.row_activity(i, x);
            let v = match row.sense {
                RowSense::Ge => row.rhs - a,
                RowSense::Le => a - row.rhs,
                RowSense::Eq => (a - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.col_lower[j] - v).max(v - self.col_upper[j]);
        }
        worst
    }

    /// The relaxation's rows, bounds and objective (constant dropped).
    pub fn from_relaxation(relax: &LinearRelaxation) -> Self {
        let mut objective = vec![0.0; relax.num_cols];
        for &(c, a) in &relax.objective.terms {
            objective[c] += a;
        }
        Self {
            objective,
            col_lower: relax.col_lower.clone(),
            col_upper: relax.col_upper.clone(),
            rows: relax
                .rows
                .iter()
                .map(|r| LpRow {
                    coefs: r.expr.terms.clone(),
                    sense: r.sense,
                    rhs: r.rhs,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColStatus {
    AtLower,
    AtUpper,
    Basic,
}

/// Basis snapshot for warm starts: one basic index per row over the
/// `cols + rows` structural and logical variables, plus nonbasic sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub col_status: Vec<ColStatus>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(p: &LpProblem, warm_basis: Option<&Basis>) -> LpResult {
    simplex::Simplex::new(p, SimplexOptions::default()).solve(warm_basis)
}

pub fn solve_lp_with(p: &LpProblem, warm_basis: Option<&Basis>, opts: SimplexOptions) -> LpResult {
    simplex::Simplex::new(p, opts).solve(warm_basis)
}

/// `λ̃ᵀb + Σ_j r̃_j · active_bound_j`, with basic columns contributing 0.
pub fn dual_objective(res: &LpResult, p: &LpProblem) -> f64 {
    let mut v: f64 = res.duals.iter().zip(&p.rows).map(|(y, r)| y * r.rhs).sum();
    for (j, st) in res.col_status.iter().enumerate() {
        v += match st {
            ColStatus::AtLower => res.reduced_costs[j] * p.col_lower[j],
            ColStatus::AtUpper => res.reduced_costs[j] * p.col_upper[j],
            ColStatus::Basic => 0.0,
        };
    }
    v
}
