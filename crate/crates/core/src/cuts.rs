//! Lagrangian cuts from LP duals.
//!
//! Every cut here comes from the same inequality: for `z` satisfying the
//! relaxation rows and any dual vector `y` with the LP sign convention,
//! `cᵀz = r̃ᵀz + yᵀAz ≥ r̃ᵀz + yᵀb`. Fixing a bound on `cᵀz` (the incumbent
//! `U`) and moving terms around yields bounds that stay valid while `U`
//! shrinks.

use crate::interval::Interval;
use crate::lp::{dual_objective, ColStatus, LpProblem, LpResult};
use crate::poly::{Bounds, Monomial, Polynomial, Problem};
use crate::rlt::{LinearRelaxation, RltVarMap, Row, RowSense, RowTag};

/// Multipliers below this are treated as zero.
pub const MULTIPLIER_TOL: f64 = 1e-7;
const COEF_DROP: f64 = 1e-12;

/// A constraint `body ∈ range` handed to bound propagation.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCut {
    pub body: Polynomial,
    pub range: Interval,
}

impl PolyCut {
    pub fn holds(&self, x: &[f64], tol: f64) -> bool {
        let v = self.body.evaluate(x);
        v >= self.range.lo - tol && v <= self.range.hi + tol
    }
}

/// Cut from an optimal OBBT subproblem `min ±x_k` over the relaxation with
/// the cutoff row `cᵀz ≤ U − c₀`:
///
/// `s·x_k − Σ r̃_j z_j ≥ λᵀb − μ(U − c₀)`, `s = +1` for the minimization
/// (a lower bound on `x_k`) and `−1` for the maximization.
#[derive(Clone, Debug, PartialEq)]
pub struct ObCut {
    pub var: usize,
    /// `Ge` for the cut from `min x_k`, `Le` for the one from `max x_k`.
    pub sense: RowSense,
    /// Nonzero reduced costs, keyed by column monomial.
    pub reduced_costs: Vec<(Monomial, f64)>,
    /// Multiplier of the cutoff row, `≥ 0`; zero without a cutoff row.
    pub mu: f64,
    /// Nonzero row duals as `(row, λ)`.
    pub duals: Vec<(usize, f64)>,
    /// Right-hand sides of the subproblem rows (cutoff row excluded).
    pub rhs: Vec<f64>,
    pub objective_constant: f64,
}

impl ObCut {
    fn sign(&self) -> f64 {
        if self.sense == RowSense::Le {
            -1.0
        } else {
            1.0
        }
    }

    pub fn lambda_b(&self) -> f64 {
        self.duals.iter().map(|&(i, l)| l * self.rhs[i]).sum()
    }

    /// Right-hand side of the `≥` form at incumbent value `upper`.
    pub fn rhs_at(&self, upper: f64) -> f64 {
        if self.mu == 0.0 {
            self.lambda_b()
        } else {
            self.lambda_b() - self.mu * (upper - self.objective_constant)
        }
    }

    /// `s·x_k − Σ r̃_j m_j(x) ≥ rhs` as a polynomial cut.
    pub fn materialize(&self, upper: f64) -> PolyCut {
        let mut body = Polynomial::zero();
        body.add_term(Monomial::var(self.var), self.sign());
        for (m, r) in &self.reduced_costs {
            body.add_term(m.clone(), -r);
        }
        PolyCut {
            body,
            range: Interval::at_least(self.rhs_at(upper)),
        }
    }

    /// The same cut as a linear row over `map`'s columns; `None` if a column
    /// is unknown to `map`.
    pub fn linear_row(&self, map: &RltVarMap, upper: f64) -> Option<Row> {
        let mut terms = vec![(map.column_of(&Monomial::var(self.var))?, self.sign())];
        for (m, r) in &self.reduced_costs {
            terms.push((map.column_of(m)?, -r));
        }
        Some(Row {
            expr: crate::rlt::LinExpr::from_unsorted(terms),
            sense: RowSense::Ge,
            rhs: self.rhs_at(upper),
            tag: RowTag::Cut,
        })
    }

    /// Whether the cut involves only `x_k` itself.
    pub fn is_simple_bound(&self) -> bool {
        let own = Monomial::var(self.var);
        self.reduced_costs.iter().all(|(m, _)| *m == own)
    }
}

/// Builds the cut for OBBT subproblem `lp` (objective `±e_k`) from its
/// optimal result. `cutoff_row` is the index of `cᵀz ≤ U − c₀` in `lp`.
/// Cuts that only restate a bound no tighter than `bounds` are dropped.
pub fn derive_ob_cut(
    var: usize,
    lp: &LpProblem,
    res: &LpResult,
    cutoff_row: Option<usize>,
    map: &RltVarMap,
    objective_constant: f64,
    bounds: &Bounds,
) -> Option<ObCut> {
    if !res.is_optimal() {
        return None;
    }
    let col = map.column_of(&Monomial::var(var))?;
    let sense = if lp.objective[col] < 0.0 {
        RowSense::Le
    } else {
        RowSense::Ge
    };
    let reduced_costs = res
        .reduced_costs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.abs() > COEF_DROP)
        .map(|(j, &r)| (map.monomial(j).clone(), r))
        .collect();
    let mut duals = Vec::new();
    let mut rhs = Vec::new();
    let mut mu = 0.0;
    for (i, row) in lp.rows.iter().enumerate() {
        if Some(i) == cutoff_row {
            // ≤ row: dual ≤ 0
            mu = (-res.duals[i]).max(0.0);
            continue;
        }
        let y = res.duals[i];
        if y.abs() > COEF_DROP {
            duals.push((rhs.len(), y));
        }
        rhs.push(row.rhs);
    }
    let cut = ObCut {
        var,
        sense,
        reduced_costs,
        mu,
        duals,
        rhs,
        objective_constant,
    };
    if cut.is_simple_bound() && cut.mu == 0.0 {
        // a·x_k ≥ λᵀb with a = s − r̃_k: a constant bound, kept only if new
        let a = cut.sign() - cut.reduced_costs.first().map_or(0.0, |(_, r)| *r);
        if a.abs() <= COEF_DROP {
            return None;
        }
        let v = cut.lambda_b() / a;
        let tightens = if a > 0.0 {
            v > bounds.lower[var]
        } else {
            v < bounds.upper[var]
        };
        if !tightens {
            return None;
        }
    }
    Some(cut)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NbSide {
    /// Column at its upper bound; the cut raises the lower bound.
    FromUpper,
    /// Column at its lower bound; the cut lowers the upper bound.
    FromLower,
}

/// Bound cut `x_k ≥ x_k^U − (U − L)/μ` (or the mirror) from a node LP whose
/// column `k` sits at an active bound with multiplier `μ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NbCut {
    pub var: usize,
    pub side: NbSide,
    pub mu: f64,
    /// `x_k^U` or `x_k^L` at the derivation node.
    pub bound: f64,
    /// Relaxation optimum `L` of the derivation node.
    pub node_lower: f64,
}

impl NbCut {
    /// The implied interval for `x_k`.
    pub fn materialize(&self, upper: f64) -> Interval {
        let slack = (upper - self.node_lower).max(0.0) / self.mu;
        match self.side {
            NbSide::FromUpper => Interval::at_least(self.bound - slack),
            NbSide::FromLower => Interval::new(f64::NEG_INFINITY, self.bound + slack),
        }
    }
}

/// Node lower bound usable in cut derivation: the smaller of the primal and
/// dual LP objectives, plus the objective constant.
pub fn certified_node_bound(lp: &LpProblem, res: &LpResult, objective_constant: f64) -> f64 {
    res.objective.min(dual_objective(res, lp)) + objective_constant
}

/// Bound cuts for every original variable whose column is at an active bound
/// with multiplier above [`MULTIPLIER_TOL`].
pub fn derive_nb_cuts(res: &LpResult, bounds: &Bounds, node_lower: f64) -> Vec<NbCut> {
    if !res.is_optimal() {
        return Vec::new();
    }
    let mut cuts = Vec::new();
    for k in 0..bounds.len() {
        if bounds.upper[k] <= bounds.lower[k] {
            continue;
        }
        let r = res.reduced_costs[k];
        let (side, mu, bound) = match res.col_status[k] {
            ColStatus::AtUpper => (NbSide::FromUpper, -r, bounds.upper[k]),
            ColStatus::AtLower => (NbSide::FromLower, r, bounds.lower[k]),
            ColStatus::Basic => continue,
        };
        if mu > MULTIPLIER_TOL {
            cuts.push(NbCut {
                var: k,
                side,
                mu,
                bound,
                node_lower,
            });
        }
    }
    cuts
}

/// Cut on an original constraint body from its node dual `μ`:
/// `g(x) ≤ rhs + (U − L)/μ` for `μ > 0`, `g(x) ≥ rhs − (U − L)/|μ|` for
/// `μ < 0` (equality rows only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintCut {
    pub constraint: usize,
    pub mu: f64,
    pub rhs: f64,
    pub node_lower: f64,
}

impl ConstraintCut {
    pub fn materialize(&self, prob: &Problem, upper: f64) -> PolyCut {
        let slack = (upper - self.node_lower).max(0.0) / self.mu.abs();
        let range = if self.mu > 0.0 {
            Interval::new(f64::NEG_INFINITY, self.rhs + slack)
        } else {
            Interval::at_least(self.rhs - slack)
        };
        PolyCut {
            body: prob.constraints[self.constraint].body.clone(),
            range,
        }
    }
}

/// Constraint cuts for the original rows of a node relaxation.
pub fn derive_constraint_cuts(
    prob: &Problem,
    relax: &LinearRelaxation,
    res: &LpResult,
    node_lower: f64,
) -> Vec<ConstraintCut> {
    if !res.is_optimal() {
        return Vec::new();
    }
    let mut cuts = Vec::new();
    for (i, row) in relax.rows.iter().enumerate() {
        let RowTag::Original(r) = row.tag else { continue };
        let y = res.duals[i];
        let useful = match row.sense {
            RowSense::Ge => y > MULTIPLIER_TOL,
            RowSense::Eq => y.abs() > MULTIPLIER_TOL,
            RowSense::Le => false,
        };
        if useful {
            cuts.push(ConstraintCut {
                constraint: r,
                mu: y,
                rhs: prob.constraints[r].rhs,
                node_lower,
            });
        }
    }
    cuts
}
