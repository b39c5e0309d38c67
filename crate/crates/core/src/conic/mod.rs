//! First-order conic solver: ADMM splitting over products of zero,
//! nonnegative, second-order and PSD cones.
//!
//! Problems have the form `min cᵀz  s.t.  Az + s = h,  s ∈ K,  lo ≤ z ≤ hi`.
//! Finite column bounds are enforced through extra nonnegative rows and are
//! also used to turn any dual iterate into a valid lower bound.

use crate::lp::LpProblem;
use crate::rlt::RowSense;

mod admm;
mod proj;

pub use admm::solve_conic_with;
pub use proj::{jacobi_eigen, project_psd, project_soc, smat, svec, svec_index, svec_len, svec_side};

/// One block of the product cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `s = 0`.
    Zero(usize),
    /// `s ≥ 0`.
    NonNeg(usize),
    /// `s₀ ≥ ‖s₁..‖₂`.
    SecondOrder(usize),
    /// Symmetric `n × n` PSD matrix in [`svec`] layout; the payload is `n`.
    Psd(usize),
}

impl Cone {
    /// Number of rows the block occupies.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::SecondOrder(d) => d,
            Cone::Psd(n) => svec_len(n),
        }
    }

    pub(crate) fn project(&self, v: &mut [f64]) {
        match self {
            Cone::Zero(_) => v.iter_mut().for_each(|x| *x = 0.0),
            Cone::NonNeg(_) => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::SecondOrder(_) => proj::project_soc_in_place(v),
            Cone::Psd(_) => proj::project_psd_in_place(v),
        }
    }

    /// Projection onto the dual cone (all supported cones are self-dual
    /// except `Zero`, whose dual is the whole space).
    pub(crate) fn project_dual(&self, v: &mut [f64]) {
        if !matches!(self, Cone::Zero(_)) {
            self.project(v);
        }
    }

    /// Whether a single block scale keeps the cone invariant only when shared
    /// by all of its rows.
    pub(crate) fn is_coupled(&self) -> bool {
        matches!(self, Cone::SecondOrder(_) | Cone::Psd(_))
    }
}

/// A conic program `min cᵀz  s.t.  Az + s = h,  s ∈ K,  lo ≤ z ≤ hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    /// Sparse rows of `A`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub h: Vec<f64>,
    /// Cone blocks in row order.
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    /// Free columns, no rows.
    pub fn new(num_cols: usize) -> Self {
        ConicProblem {
            c: vec![0.0; num_cols],
            col_lower: vec![f64::NEG_INFINITY; num_cols],
            col_upper: vec![f64::INFINITY; num_cols],
            rows: Vec::new(),
            h: Vec::new(),
            cones: Vec::new(),
        }
    }

    /// The same feasible set and objective as a linear program.
    pub fn from_lp(lp: &LpProblem) -> Self {
        let mut p = ConicProblem::new(lp.num_cols());
        p.c = lp.objective.clone();
        p.col_lower = lp.col_lower.clone();
        p.col_upper = lp.col_upper.clone();
        for row in &lp.rows {
            match row.sense {
                RowSense::Ge => p.add_ge(row.coefs.clone(), row.rhs),
                RowSense::Le => p.add_le(row.coefs.clone(), row.rhs),
                RowSense::Eq => p.add_eq(row.coefs.clone(), row.rhs),
            }
        }
        p
    }

    pub fn num_cols(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a cone block; `rows[k]` is `(a_k, h_k)` meaning
    /// `s_k = h_k − a_k·z`. Consecutive nonnegative or zero blocks merge.
    pub fn push_block(&mut self, cone: Cone, rows: Vec<(Vec<(usize, f64)>, f64)>) {
        assert_eq!(cone.dim(), rows.len(), "cone dimension mismatch");
        for (a, h) in rows {
            self.rows.push(a);
            self.h.push(h);
        }
        match (self.cones.last_mut(), cone) {
            (Some(Cone::NonNeg(d)), Cone::NonNeg(k)) => *d += k,
            (Some(Cone::Zero(d)), Cone::Zero(k)) => *d += k,
            _ => self.cones.push(cone),
        }
    }

    /// `a·z ≤ b`.
    pub fn add_le(&mut self, a: Vec<(usize, f64)>, b: f64) {
        self.push_block(Cone::NonNeg(1), vec![(a, b)]);
    }

    /// `a·z ≥ b`.
    pub fn add_ge(&mut self, a: Vec<(usize, f64)>, b: f64) {
        let neg = a.into_iter().map(|(j, v)| (j, -v)).collect();
        self.push_block(Cone::NonNeg(1), vec![(neg, -b)]);
    }

    /// `a·z = b`.
    pub fn add_eq(&mut self, a: Vec<(usize, f64)>, b: f64) {
        self.push_block(Cone::Zero(1), vec![(a, b)]);
    }

    /// `Σ_j a_kj z_j + b_k` over the block rows must lie in the cone; the
    /// affine expressions are given as `(coefs, constant)`.
    pub fn add_cone_affine(&mut self, cone: Cone, exprs: Vec<(Vec<(usize, f64)>, f64)>) {
        // s = h − a·z = constant + coefs·z  ⇒  a = −coefs, h = constant
        let rows = exprs
            .into_iter()
            .map(|(a, b)| (a.into_iter().map(|(j, v)| (j, -v)).collect(), b))
            .collect();
        self.push_block(cone, rows);
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, z)| c * z).sum()
    }

    /// `h − Az` for every row.
    pub fn slack(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.h)
            .map(|(a, h)| h - a.iter().map(|&(j, v)| v * z[j]).sum::<f64>())
            .collect()
    }

    /// Largest distance of `h − Az` from the cone (blockwise ∞-norm) and of
    /// `z` from its bounds.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let s = self.slack(z);
        let mut worst: f64 = 0.0;
        let mut at = 0;
        for cone in &self.cones {
            let d = cone.dim();
            let mut p = s[at..at + d].to_vec();
            cone.project(&mut p);
            for (a, b) in p.iter().zip(&s[at..at + d]) {
                worst = worst.max((a - b).abs());
            }
            at += d;
        }
        for (j, &x) in z.iter().enumerate() {
            worst = worst.max(self.col_lower[j] - x).max(x - self.col_upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Outcome of [`solve_conic`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConicResult {
    pub status: ConicStatus,
    /// Best primal iterate.
    pub z: Vec<f64>,
    pub objective: f64,
    /// Relative residuals of the reported iterate.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Largest Lagrangian lower bound certified by any dual iterate; valid
    /// regardless of status (−∞ when no bound could be certified).
    pub lower_bound: f64,
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    /// Window length of the divergence heuristic.
    pub divergence_window: usize,
    pub scaling_passes: usize,
    /// Iterations between penalty updates.
    pub adapt_every: usize,
    pub adapt_scaled: bool,
}

impl Default for ConicOptions {
    fn default() -> Self {
        ConicOptions {
            tol: 1e-6,
            max_iter: 20_000,
            rho: 1.0,
            sigma: 1e-6,
            alpha: 1.6,
            check_every: 10,
            divergence_window: 500,
            scaling_passes: 10,
            adapt_every: 200,
            adapt_scaled: true,
        }
    }
}

/// Solves with default options.
pub fn solve_conic(p: &ConicProblem) -> ConicResult {
    solve_conic_with(p, &ConicOptions::default())
}
