//! Optimality-based bound tightening at the root: minimize and maximize each
//! original variable over the (optionally conic-strengthened) relaxation.

use std::collections::BTreeSet;

use crate::clock::{admm_ticks, lp_ticks, Clock};
use crate::conic::{solve_conic_with, svec_index, svec_len, Cone, ConicOptions, ConicProblem, ConicStatus};
use crate::cuts::{derive_ob_cut, ObCut};
use crate::lp::{dual_objective, solve_lp, Basis, LpProblem, LpResult, LpStatus};
use crate::poly::{Bounds, Monomial, Problem};
use crate::rlt::{build_relaxation, LinearRelaxation, RltVarMap, RowSense};

/// Slack added outward to every tightened bound.
pub const BOUND_SLACK: f64 = 1e-9;
/// Safety factor on the gap residual of conic solves that hit the
/// iteration cap.
pub const MAXITER_GAP_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObbtMode {
    Lp,
    Socp,
    Sdp1,
    Sdp2,
}

impl ObbtMode {
    pub fn name(&self) -> &'static str {
        match self {
            ObbtMode::Lp => "LP",
            ObbtMode::Socp => "SOCP",
            ObbtMode::Sdp1 => "SDP1",
            ObbtMode::Sdp2 => "SDP2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObbtOptions {
    pub mode: ObbtMode,
    /// Clock seconds the pass may use.
    pub budget: f64,
    /// Feed each tightened bound into later subproblems (otherwise all
    /// subproblems see the input box and updates merge at the end).
    pub sequential: bool,
    pub conic: ConicOptions,
}

impl Default for ObbtOptions {
    fn default() -> Self {
        ObbtOptions {
            mode: ObbtMode::Lp,
            budget: f64::INFINITY,
            sequential: true,
            conic: ConicOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObbtReport {
    pub bounds: Bounds,
    pub width_before: Vec<f64>,
    pub width_after: Vec<f64>,
    /// Mean relative width reduction over the original variables.
    pub btbound: f64,
    /// Clock seconds spent.
    pub bttime: f64,
    pub ob_cuts: Vec<ObCut>,
    pub subproblems_solved: usize,
    /// Clock seconds of the slowest subproblem.
    pub longest_subproblem: f64,
    /// Some subproblem was infeasible: no point of the box has objective
    /// `≤ U` (or the relaxation is empty).
    pub infeasible: bool,
    /// Conic solves that ended at the iteration cap.
    pub conic_maxiter: usize,
    /// Conic solves that reported infeasibility and fell back to the LP.
    pub conic_fallbacks: usize,
}

/// Mean of `(before − after)/before`, zero-width variables counting 0.
pub fn btbound(before: &[f64], after: &[f64]) -> f64 {
    if before.is_empty() {
        return 0.0;
    }
    let total: f64 = before
        .iter()
        .zip(after)
        .map(|(&b, &a)| if b > 0.0 { ((b - a) / b).clamp(0.0, 1.0) } else { 0.0 })
        .sum();
    total / before.len() as f64
}

/// Distinct variables of each J-set, deduplicated.
fn supports(jsets: &BTreeSet<Monomial>) -> BTreeSet<Vec<usize>> {
    jsets.iter().map(|j| j.support().collect()).collect()
}

fn product(a: usize, b: usize) -> Monomial {
    Monomial::from_factors(&[a, b])
}

/// Registers the `x_i x_j` columns the conic rows of `mode` refer to.
pub fn register_conic_columns(jsets: &BTreeSet<Monomial>, map: &mut RltVarMap, mode: ObbtMode) {
    if mode == ObbtMode::Lp {
        return;
    }
    for s in supports(jsets) {
        if mode == ObbtMode::Socp && s.len() < 2 {
            continue;
        }
        for (a, &i) in s.iter().enumerate() {
            for &j in &s[a..] {
                map.register(&product(i, j));
            }
        }
    }
}

/// One 3-dimensional cone `(X_ii + X_jj)/2 ≥ ‖(X_ij, (X_ii − X_jj)/2)‖`
/// per distinct variable pair of each J-set. Returns the number of cones.
pub fn add_socp_rows(p: &mut ConicProblem, jsets: &BTreeSet<Monomial>, map: &RltVarMap) -> usize {
    let mut pairs = BTreeSet::new();
    for s in supports(jsets) {
        for (a, &i) in s.iter().enumerate() {
            for &j in &s[a + 1..] {
                pairs.insert((i, j));
            }
        }
    }
    for &(i, j) in &pairs {
        let col = |m: Monomial| map.column_of(&m).expect("conic column registered");
        let (xii, xjj, xij) = (col(product(i, i)), col(product(j, j)), col(product(i, j)));
        p.add_cone_affine(
            Cone::SecondOrder(3),
            vec![
                (vec![(xii, 0.5), (xjj, 0.5)], 0.0),
                (vec![(xij, 1.0)], 0.0),
                (vec![(xii, 0.5), (xjj, -0.5)], 0.0),
            ],
        );
    }
    pairs.len()
}

/// Per J-set PSD block over the linearized outer product of its variables
/// (`Sdp1`), or of `(1, x)` (`Sdp2`). Returns the number of blocks.
pub fn add_sdp_rows(
    p: &mut ConicProblem,
    jsets: &BTreeSet<Monomial>,
    map: &RltVarMap,
    bordered: bool,
) -> usize {
    let mut blocks = 0;
    for s in supports(jsets) {
        if !bordered && s.len() < 2 {
            continue;
        }
        let off = usize::from(bordered);
        let side = s.len() + off;
        let mut exprs = vec![(Vec::new(), 0.0); svec_len(side)];
        for r in 0..side {
            for c in 0..=r {
                let w = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
                let k = svec_index(side, r, c);
                exprs[k] = match (r.checked_sub(off), c.checked_sub(off)) {
                    (None, None) => (Vec::new(), 1.0),
                    (Some(a), None) | (None, Some(a)) => {
                        (vec![(map.column_of(&Monomial::var(s[a])).unwrap(), w)], 0.0)
                    }
                    (Some(a), Some(b)) => {
                        let col = map.column_of(&product(s[a], s[b])).expect("conic column registered");
                        (vec![(col, w)], 0.0)
                    }
                };
            }
        }
        p.add_cone_affine(Cone::Psd(side), exprs);
        blocks += 1;
    }
    blocks
}

/// A subproblem's certified optimum.
enum Bound {
    Value(f64),
    Infeasible,
    Unknown,
}

struct Engine<'a> {
    lp: LpProblem,
    conic_base: Option<ConicProblem>,
    cutoff_row: Option<usize>,
    map: &'a RltVarMap,
    opts: &'a ObbtOptions,
    basis: Option<Basis>,
    maxiter: usize,
    fallbacks: usize,
    solved: usize,
}

impl Engine<'_> {
    fn nnz(&self) -> usize {
        self.lp.rows.iter().map(|r| r.coefs.len()).sum()
    }

    fn solve_lp(&mut self, clock: &mut Clock) -> (LpResult, Bound) {
        let res = solve_lp(&self.lp, self.basis.as_ref());
        clock.charge(lp_ticks(self.lp.num_rows(), self.lp.num_cols(), self.nnz(), res.iterations));
        if res.basis.is_some() {
            self.basis = res.basis.clone();
        }
        let bound = match res.status {
            LpStatus::Optimal => Bound::Value(res.objective.min(dual_objective(&res, &self.lp))),
            LpStatus::Infeasible => Bound::Infeasible,
            LpStatus::IterLimit => Bound::Unknown,
        };
        (res, bound)
    }

    /// Minimizes the current objective; returns the LP result when the LP
    /// was solved (for cut derivation).
    fn minimize(&mut self, clock: &mut Clock) -> (Option<LpResult>, Bound) {
        self.solved += 1;
        let Some(base) = &self.conic_base else {
            let (res, b) = self.solve_lp(clock);
            return (Some(res), b);
        };
        let mut p = base.clone();
        p.c = self.lp.objective.clone();
        p.col_lower = self.lp.col_lower.clone();
        p.col_upper = self.lp.col_upper.clone();
        let r = solve_conic_with(&p, &self.opts.conic);
        let nnz: usize = p.rows.iter().map(Vec::len).sum();
        clock.charge(admm_ticks(p.num_cols(), nnz, r.iterations));
        match r.status {
            ConicStatus::Optimal => (None, Bound::Value(r.lower_bound)),
            ConicStatus::MaxIter => {
                self.maxiter += 1;
                let gap_abs = r.gap * (1.0 + 2.0 * r.objective.abs());
                let v = r.lower_bound.min(r.objective - MAXITER_GAP_FACTOR * gap_abs);
                (None, if v.is_finite() { Bound::Value(v) } else { Bound::Unknown })
            }
            ConicStatus::Infeasible => {
                self.fallbacks += 1;
                let (res, b) = self.solve_lp(clock);
                (Some(res), b)
            }
        }
    }
}

/// One OBBT pass over the original variables of `prob` in index order.
///
/// `relax`/`map` must come from `build_relaxation(prob, bounds, jsets)`.
/// With an incumbent `upper`, every subproblem carries the cutoff row
/// `f(x) ≤ upper`. LP-mode optima also yield [`ObCut`]s.
#[allow(clippy::too_many_arguments)]
pub fn run_obbt(
    prob: &Problem,
    relax: &LinearRelaxation,
    map: &RltVarMap,
    jsets: &BTreeSet<Monomial>,
    bounds: &Bounds,
    upper: Option<f64>,
    opts: &ObbtOptions,
    clock: &mut Clock,
) -> ObbtReport {
    let start = clock.elapsed();
    let n = prob.num_vars();

    // Conic modes may need extra product columns.
    let mut cmap = map.clone();
    let mut crelax = relax.clone();
    register_conic_columns(jsets, &mut cmap, opts.mode);
    crelax.sync_columns(&cmap, bounds);

    let mut lp = LpProblem::from_relaxation(&crelax);
    let cutoff_row = upper.map(|u| {
        lp.add_row(relax.objective.terms.clone(), RowSense::Le, u - relax.objective_constant);
        lp.num_rows() - 1
    });
    let conic_base = match opts.mode {
        ObbtMode::Lp => None,
        mode => {
            let mut p = ConicProblem::from_lp(&lp);
            match mode {
                ObbtMode::Socp => add_socp_rows(&mut p, jsets, &cmap),
                ObbtMode::Sdp1 => add_sdp_rows(&mut p, jsets, &cmap, false),
                _ => add_sdp_rows(&mut p, jsets, &cmap, true),
            };
            Some(p)
        }
    };
    lp.objective = vec![0.0; lp.num_cols()];

    let mut eng = Engine {
        lp,
        conic_base,
        cutoff_row,
        map: &cmap,
        opts,
        basis: None,
        maxiter: 0,
        fallbacks: 0,
        solved: 0,
    };
    let input = bounds.clone();
    let mut out = bounds.clone();
    let mut cuts = Vec::new();
    let mut infeasible = false;
    let mut longest: f64 = 0.0;

    'vars: for j in 0..n {
        for dir in [1.0, -1.0] {
            if clock.elapsed() - start >= opts.budget {
                break 'vars;
            }
            if out.width(j) <= 0.0 {
                continue;
            }
            let col = cmap.column_of(&Monomial::var(j)).expect("original column");
            eng.lp.objective[col] = dir;
            let t0 = clock.elapsed();
            let (res, bound) = eng.minimize(clock);
            longest = longest.max(clock.elapsed() - t0);
            eng.lp.objective[col] = 0.0;
            match bound {
                Bound::Infeasible => {
                    infeasible = true;
                    break 'vars;
                }
                Bound::Unknown => {}
                Bound::Value(v) => {
                    if dir > 0.0 {
                        let lo = v - BOUND_SLACK;
                        if lo > out.lower[j] {
                            out.lower[j] = lo.min(out.upper[j]);
                        }
                    } else {
                        let hi = -v + BOUND_SLACK;
                        if hi < out.upper[j] {
                            out.upper[j] = hi.max(out.lower[j]);
                        }
                    }
                    if opts.sequential {
                        eng.lp.col_lower[col] = out.lower[j];
                        eng.lp.col_upper[col] = out.upper[j];
                    }
                }
            }
            if opts.mode == ObbtMode::Lp {
                if let Some(res) = res {
                    let cut = derive_ob_cut(
                        j,
                        &eng.lp_with_objective(col, dir),
                        &res,
                        eng.cutoff_row,
                        eng.map,
                        relax.objective_constant,
                        &out,
                    );
                    cuts.extend(cut);
                }
            }
        }
    }

    let width_before: Vec<f64> = (0..n).map(|j| input.width(j)).collect();
    let width_after: Vec<f64> = (0..n).map(|j| out.width(j)).collect();
    ObbtReport {
        btbound: btbound(&width_before, &width_after),
        bounds: out,
        width_before,
        width_after,
        bttime: clock.elapsed() - start,
        ob_cuts: cuts,
        subproblems_solved: eng.solved,
        longest_subproblem: longest,
        infeasible,
        conic_maxiter: eng.maxiter,
        conic_fallbacks: eng.fallbacks,
    }
}

impl Engine<'_> {
    /// The LP as it was solved for `(col, dir)`, for cut derivation.
    fn lp_with_objective(&self, col: usize, dir: f64) -> LpProblem {
        let mut lp = self.lp.clone();
        lp.objective[col] = dir;
        lp
    }
}

/// Convenience wrapper: builds the relaxation of `prob` over its own box and
/// runs one pass.
pub fn obbt_root(
    prob: &Problem,
    jsets: &BTreeSet<Monomial>,
    upper: Option<f64>,
    opts: &ObbtOptions,
    clock: &mut Clock,
) -> ObbtReport {
    let (relax, map) = build_relaxation(prob, &prob.bounds, jsets);
    run_obbt(prob, &relax, &map, jsets, &prob.bounds, upper, opts, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ClockKind;
    use crate::poly::{compute_jsets, Constraint, Polynomial, Sense};

    fn xy() -> Polynomial {
        Polynomial::from_terms([(Monomial::from_factors(&[0, 1]), 1.0)])
    }

    #[test]
    fn lower_bound_stays_at_zero() {
        let c = Constraint::new(&Polynomial::var(0) + &Polynomial::var(1), Sense::Ge, 1.0);
        let prob = Problem::new(2, xy(), vec![c], Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let jsets = compute_jsets(&prob);
        let r = obbt_root(&prob, &jsets, None, &ObbtOptions::default(), &mut Clock::new(ClockKind::Work));
        assert!(r.bounds.lower[0].abs() < 1e-8);
        assert!(!r.infeasible);
        assert_eq!(r.subproblems_solved, 4);
    }

    #[test]
    fn equality_fixes_variable() {
        let c = Constraint::new(Polynomial::var(0), Sense::Eq, 0.3);
        let prob = Problem::new(2, xy(), vec![c], Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let jsets = compute_jsets(&prob);
        let r = obbt_root(&prob, &jsets, None, &ObbtOptions::default(), &mut Clock::new(ClockKind::Work));
        assert!((r.bounds.lower[0] - 0.3).abs() < 1e-8 && (r.bounds.upper[0] - 0.3).abs() < 1e-8);
        assert!(r.btbound > 0.49 && r.btbound <= 0.5);
    }

    #[test]
    fn socp_cone_on_pair() {
        let jsets: BTreeSet<Monomial> = [Monomial::from_factors(&[0, 1])].into();
        let mut map = RltVarMap::new(2);
        register_conic_columns(&jsets, &mut map, ObbtMode::Socp);
        let mut p = ConicProblem::new(map.len());
        assert_eq!(add_socp_rows(&mut p, &jsets, &map), 1);
        // rank-one lift of (0.5, 0.5) sits on the cone boundary
        let z = map.lift(&[0.5, 0.5]);
        let s = p.slack(&z);
        assert!((s[0] - 0.25).abs() < 1e-15 && (s[1] - 0.25).abs() < 1e-15 && s[2].abs() < 1e-15);
        assert!(p.max_violation(&z) < 1e-15);
    }

    #[test]
    fn pure_power_has_no_pair() {
        let jsets: BTreeSet<Monomial> = [Monomial::from_factors(&[0, 0])].into();
        let mut map = RltVarMap::new(1);
        register_conic_columns(&jsets, &mut map, ObbtMode::Socp);
        let mut p = ConicProblem::new(map.len());
        assert_eq!(add_socp_rows(&mut p, &jsets, &map), 0);
    }

    #[test]
    fn bordered_block_layout() {
        let jsets: BTreeSet<Monomial> = [Monomial::from_factors(&[0, 1])].into();
        let mut map = RltVarMap::new(2);
        register_conic_columns(&jsets, &mut map, ObbtMode::Sdp2);
        let mut p = ConicProblem::new(map.len());
        assert_eq!(add_sdp_rows(&mut p, &jsets, &map, true), 1);
        assert_eq!(p.cones, vec![Cone::Psd(3)]);
        let z = map.lift(&[0.3, 0.6]);
        let m = crate::conic::smat(3, &p.slack(&z));
        let w = [1.0, 0.3, 0.6];
        for r in 0..3 {
            for c in 0..3 {
                assert!((m[r * 3 + c] - w[r] * w[c]).abs() < 1e-12);
            }
        }
    }
}
