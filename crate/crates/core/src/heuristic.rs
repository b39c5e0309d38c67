//! Incumbent discovery from relaxation points.
//!
//! A relaxation's x-part is rarely feasible for equality-constrained
//! problems, so candidates get a few projected Gauss-Newton steps toward the
//! constraint set before being judged.

use crate::poly::{Bounds, Problem, Sense};

/// Constraint violation accepted for an incumbent.
pub const FEAS_TOL: f64 = 1e-7;
const REPAIR_ITERS: usize = 30;

/// A feasible point and its objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Judges `x` (clamped into `bounds`) and, failing that, a repaired copy.
pub fn try_point(prob: &Problem, bounds: &Bounds, x: &[f64]) -> Option<Candidate> {
    let x = bounds.clamp(&x[..prob.num_vars()]);
    if prob.is_feasible(&x, FEAS_TOL) {
        let value = prob.objective.evaluate(&x);
        return Some(Candidate { x, value });
    }
    let x = repair(prob, bounds, &x)?;
    let value = prob.objective.evaluate(&x);
    Some(Candidate { x, value })
}

/// Minimum-norm Newton steps on the violated constraints, projected onto the
/// box; variables pinned at a bound the step points out of are frozen.
pub fn repair(prob: &Problem, bounds: &Bounds, x0: &[f64]) -> Option<Vec<f64>> {
    repair_to(prob, bounds, x0, FEAS_TOL)
}

/// [`repair`] with an explicit violation tolerance.
pub fn repair_to(prob: &Problem, bounds: &Bounds, x0: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = prob.num_vars();
    let mut x = bounds.clamp(x0);
    for _ in 0..REPAIR_ITERS {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut res: Vec<f64> = Vec::new();
        for c in &prob.constraints {
            let r = c.body.evaluate(&x) - c.rhs;
            let active = match c.sense {
                Sense::Eq => true,
                Sense::Ge => r < 0.0,
            };
            if active {
                rows.push(c.body.gradient(&x, n));
                // aim slightly inside ≥ constraints so rounding cannot undo it
                res.push(if c.sense == Sense::Ge { r - 1e-10 } else { r });
            }
        }
        if prob.is_feasible(&x, tol * 0.1) {
            return Some(x);
        }
        let mut free = vec![true; n];
        let mut dx = vec![0.0; n];
        for _ in 0..=n {
            dx = min_norm_step(&rows, &res, &free)?;
            let mut changed = false;
            for j in 0..n {
                let at_lo = x[j] <= bounds.lower[j] && dx[j] < 0.0;
                let at_hi = x[j] >= bounds.upper[j] && dx[j] > 0.0;
                if free[j] && (at_lo || at_hi) {
                    free[j] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let next = bounds.clamp(&x.iter().zip(&dx).map(|(a, d)| a + d).collect::<Vec<_>>());
        if next == x {
            break;
        }
        x = next;
    }
    prob.is_feasible(&x, tol).then_some(x)
}

/// `dx = −Jᵀ(JJᵀ)⁻¹ r` over the free columns.
fn min_norm_step(rows: &[Vec<f64>], res: &[f64], free: &[bool]) -> Option<Vec<f64>> {
    let m = rows.len();
    let n = free.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        for k in 0..m {
            a[i][k] = (0..n).filter(|&j| free[j]).map(|j| rows[i][j] * rows[k][j]).sum();
        }
        a[i][i] += 1e-12;
        a[i][m] = res[i];
    }
    let lam = gauss_solve(a)?;
    let mut dx = vec![0.0; n];
    for j in (0..n).filter(|&j| free[j]) {
        dx[j] = -(0..m).map(|i| rows[i][j] * lam[i]).sum::<f64>();
    }
    Some(dx)
}

/// Solves an augmented `[A | b]` system by partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][m] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Constraint, Monomial, Polynomial};

    #[test]
    fn repairs_onto_curve() {
        // x0·x1 = 0.25 from (0.9, 0.9)
        let body = Polynomial::from_terms([(Monomial::from_factors(&[0, 1]), 1.0)]);
        let prob = Problem::new(
            2,
            Polynomial::var(0),
            vec![Constraint::new(body, Sense::Eq, 0.25)],
            Bounds::uniform(2, 0.0, 1.0),
        )
        .unwrap();
        let c = try_point(&prob, &prob.bounds, &[0.9, 0.9]).unwrap();
        assert!((c.x[0] * c.x[1] - 0.25).abs() < 1e-7);
    }

    #[test]
    fn frozen_bound_still_allows_progress() {
        // x0 + x1 ≥ 1.5 from (1, 0): x0 is stuck at its upper bound
        let body = &Polynomial::var(0) + &Polynomial::var(1);
        let prob = Problem::new(
            2,
            Polynomial::var(0),
            vec![Constraint::new(body, Sense::Ge, 1.5)],
            Bounds::uniform(2, 0.0, 1.0),
        )
        .unwrap();
        let c = try_point(&prob, &prob.bounds, &[1.0, 0.0]).unwrap();
        assert!(c.x[0] + c.x[1] >= 1.5 - 1e-9);
    }

    #[test]
    fn infeasible_returns_none() {
        let prob = Problem::new(
            1,
            Polynomial::var(0),
            vec![Constraint::new(Polynomial::var(0), Sense::Ge, 2.0)],
            Bounds::uniform(1, 0.0, 1.0),
        )
        .unwrap();
        assert!(try_point(&prob, &prob.bounds, &[0.5]).is_none());
    }
}
