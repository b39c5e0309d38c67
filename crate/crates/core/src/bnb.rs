//! Spatial branch-and-bound over RLT relaxations.
//!
//! Root: FBBT, OBBT within a share of the time limit, then the tree. Each
//! node runs FBBT with whatever cuts are in scope, solves its LP relaxation,
//! tries the LP point as an incumbent and branches on the variable with the
//! largest RLT identity violation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::clock::{fbbt_ticks, lp_ticks, Clock, ClockKind};
use crate::cuts::{
    certified_node_bound, derive_constraint_cuts, derive_nb_cuts, ConstraintCut, NbCut, ObCut,
};
use crate::fbbt::{fbbt_fixpoint, CutPool};
use crate::heuristic::{try_point, Candidate};
use crate::lp::{solve_lp, LpProblem, LpResult, LpStatus};
use crate::obbt::{run_obbt, ObbtMode, ObbtOptions};
use crate::poly::{compute_jsets, Bounds, Monomial, Problem};
use crate::rlt::{build_relaxation, product_violations, rlt_violations, ViolationScores};

/// θ at or below which a node's point is treated as feasible.
pub const THETA_TOL: f64 = 1e-6;
/// Branching points stay this fraction of the range away from either end.
pub const INTERIOR_MARGIN: f64 = 0.01;
/// Variables narrower than this are never branched on.
pub const MIN_BRANCH_WIDTH: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchPoint {
    /// The variable's value in the node's LP optimum.
    Ov,
    /// Midpoint of the variable's range.
    Mp,
    /// `α·OV + (1−α)·MP`.
    Mix(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub obbt_mode: ObbtMode,
    pub obbt_budget_fraction: f64,
    /// Use OBBT-derived cuts in FBBT at depths divisible by this.
    pub ob_cut_period: Option<u32>,
    /// Derive marginal cuts at depths divisible by this.
    pub nb_cut_period: Option<u32>,
    pub branch_point: BranchPoint,
    pub use_incumbent_branch_value: bool,
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub time_limit: f64,
    pub node_limit: Option<usize>,
    pub clock: ClockKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            obbt_mode: ObbtMode::Lp,
            obbt_budget_fraction: 0.2,
            ob_cut_period: None,
            nb_cut_period: None,
            branch_point: BranchPoint::Ov,
            use_incumbent_branch_value: true,
            rel_gap: 1e-3,
            abs_gap: 1e-3,
            time_limit: 60.0,
            node_limit: None,
            clock: ClockKind::Work,
        }
    }
}

pub const OB_CUT_PERIOD: u32 = 50;
pub const NB_CUT_PERIOD: u32 = 10;

/// The eight combined configurations, best single enhancements and their
/// pairings.
pub const COMBINED_CONFIGS: [&str; 8] = [
    "baseline",
    "socp",
    "fbbt-ob-nb",
    "bp-mix-0.5",
    "socp+fbbt-nb",
    "socp+bp-mix-0.5",
    "fbbt-ob-nb+bp-mix-0.5",
    "socp+fbbt-nb+bp-mix-0.5",
];

/// The five branching-point strategies.
pub const BRANCHING_CONFIGS: [&str; 5] =
    ["bp-ov", "bp-mix-0.75", "bp-mix-0.5", "bp-mix-0.25", "bp-mp"];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration component `{0}`")]
    Unknown(String),
    #[error("mix weight must lie in (0, 1), got `{0}`")]
    BadWeight(String),
    #[error("empty configuration name")]
    Empty,
}

impl FromStr for SolverConfig {
    type Err = ConfigError;

    /// `+`-joined components: `baseline`, `lp`, `socp`, `sdp1`, `sdp2`,
    /// `fbbt-ob`, `fbbt-nb`, `fbbt-ob-nb`, `bp-ov`, `bp-mp`, `bp-mix-<α>`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let mut cfg = SolverConfig::default();
        if s.trim().is_empty() {
            return Err(ConfigError::Empty);
        }
        for part in s.split('+').map(str::trim) {
            match part {
                "baseline" | "lp" => {}
                "socp" => cfg.obbt_mode = ObbtMode::Socp,
                "sdp1" => cfg.obbt_mode = ObbtMode::Sdp1,
                "sdp2" => cfg.obbt_mode = ObbtMode::Sdp2,
                "fbbt-ob" => cfg.ob_cut_period = Some(OB_CUT_PERIOD),
                "fbbt-nb" => cfg.nb_cut_period = Some(NB_CUT_PERIOD),
                "fbbt-ob-nb" => {
                    cfg.ob_cut_period = Some(OB_CUT_PERIOD);
                    cfg.nb_cut_period = Some(NB_CUT_PERIOD);
                }
                "bp-ov" => cfg.branch_point = BranchPoint::Ov,
                "bp-mp" => cfg.branch_point = BranchPoint::Mp,
                p if p.starts_with("bp-mix-") => {
                    let w = &p["bp-mix-".len()..];
                    let a: f64 = w.parse().map_err(|_| ConfigError::BadWeight(w.into()))?;
                    if !(a > 0.0 && a < 1.0) {
                        return Err(ConfigError::BadWeight(w.into()));
                    }
                    cfg.branch_point = BranchPoint::Mix(a);
                }
                other => return Err(ConfigError::Unknown(other.into())),
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::TimeLimit => "timelimit",
            SolveStatus::NodeLimit => "nodelimit",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Incumbent value, `+∞` without one.
    pub upper: f64,
    /// Proven lower bound, `+∞` when infeasibility was proven.
    pub lower: f64,
    /// Root relaxation bound after OBBT.
    pub root_lower: f64,
    /// Nodes explored; the root always counts, even when the root
    /// pipeline alone settles the problem.
    pub nodes: usize,
    /// `(elapsed seconds, LB)` at every improvement.
    pub lb_trajectory: Vec<(f64, f64)>,
    pub btbound: f64,
    pub bttime: f64,
    pub elapsed: f64,
}

impl SolveResult {
    /// `min(U − LB, (U − LB)/|U|)`; `None` unless both bounds are finite.
    pub fn gap(&self) -> Option<f64> {
        gap_of(self.upper, self.lower)
    }
}

fn gap_of(upper: f64, lower: f64) -> Option<f64> {
    if !(upper.is_finite() && lower.is_finite()) {
        return None;
    }
    let abs = (upper - lower).max(0.0);
    Some(if upper != 0.0 { abs.min(abs / upper.abs()) } else { abs })
}

fn gap_closed(cfg: &SolverConfig, upper: f64, lower: f64) -> bool {
    upper.is_finite()
        && (upper - lower <= cfg.abs_gap || (upper - lower) / upper.abs() <= cfg.rel_gap)
}

/// Argmax of θ, ties to the smallest index.
pub fn select_branch_var(theta: &ViolationScores) -> usize {
    let mut best = 0;
    for (j, &t) in theta.theta.iter().enumerate() {
        if t > theta.theta[best] {
            best = j;
        }
    }
    best
}

/// Branching value for `x_j` on `bounds`, kept in the ε-interior.
pub fn select_branch_point(
    cfg: &SolverConfig,
    j: usize,
    bounds: &Bounds,
    ov: f64,
    incumbent: Option<&[f64]>,
) -> f64 {
    let (l, u) = (bounds.lower[j], bounds.upper[j]);
    let margin = INTERIOR_MARGIN * (u - l);
    let (lo, hi) = (l + margin, u - margin);
    if cfg.use_incumbent_branch_value {
        if let Some(v) = incumbent.map(|x| x[j]) {
            if lo <= v && v <= hi {
                return v;
            }
        }
    }
    let mp = 0.5 * (l + u);
    let p = match cfg.branch_point {
        BranchPoint::Ov => ov,
        BranchPoint::Mp => mp,
        BranchPoint::Mix(a) => a * ov + (1.0 - a) * mp,
    };
    p.clamp(lo, hi)
}

/// Cuts visible in a subtree: each node adds its own on top of its parent's.
#[derive(Debug, Default)]
struct Scope {
    parent: Option<Rc<Scope>>,
    nb: Vec<NbCut>,
    constraint: Vec<ConstraintCut>,
}

impl Scope {
    fn collect(self: &Rc<Self>, pool: &mut CutPool) {
        let mut s = Some(self);
        while let Some(scope) = s {
            pool.nb_cuts.extend(scope.nb.iter().cloned());
            pool.constraint_cuts.extend(scope.constraint.iter().cloned());
            s = scope.parent.as_ref();
        }
    }
}

#[derive(Debug)]
pub struct Node {
    pub bounds: Bounds,
    pub depth: u32,
    pub parent_lb: f64,
    seq: u64,
    scope: Rc<Scope>,
}

// Best bound first, FIFO among equal bounds.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.parent_lb.total_cmp(&self.parent_lb).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

struct NodeLp {
    lp: LpProblem,
    res: LpResult,
    lower: f64,
}

struct Solver<'a> {
    prob: &'a Problem,
    cfg: &'a SolverConfig,
    jsets: BTreeSet<Monomial>,
    clock: Clock,
    best: Option<Candidate>,
    ob_cuts: Vec<ObCut>,
    trajectory: Vec<(f64, f64)>,
}

impl Solver<'_> {
    fn upper(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |c| c.value)
    }

    fn offer(&mut self, bounds: &Bounds, x: &[f64]) {
        if let Some(c) = try_point(self.prob, bounds, x) {
            if c.value < self.upper() {
                self.best = Some(c);
            }
        }
    }

    fn record_lb(&mut self, lb: f64) {
        let lb = lb.min(self.upper());
        if self.trajectory.last().map_or(true, |&(_, prev)| lb > prev) {
            self.trajectory.push((self.clock.elapsed(), lb));
        }
    }

    fn fbbt(&mut self, bounds: &Bounds, pool: &CutPool) -> Option<Bounds> {
        let upper = self.best.as_ref().map(|c| c.value);
        let r = fbbt_fixpoint(self.prob, bounds, pool, upper);
        self.clock.charge(fbbt_ticks(r.work));
        r.bounds
    }

    fn solve_node_lp(&mut self, bounds: &Bounds) -> (NodeLp, crate::rlt::RltVarMap, f64) {
        let (relax, map) = build_relaxation(self.prob, bounds, &self.jsets);
        let lp = LpProblem::from_relaxation(&relax);
        let res = solve_lp(&lp, None);
        let nnz: usize = lp.rows.iter().map(|r| r.coefs.len()).sum();
        self.clock.charge(lp_ticks(lp.num_rows(), lp.num_cols(), nnz, res.iterations));
        let lower = match res.status {
            LpStatus::Optimal => certified_node_bound(&lp, &res, relax.objective_constant),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::IterLimit => f64::NEG_INFINITY,
        };
        let c0 = relax.objective_constant;
        (NodeLp { lp, res, lower }, map, c0)
    }

    fn out_of_time(&self) -> bool {
        self.clock.elapsed() >= self.cfg.time_limit
    }
}

/// Per-variable θ: the larger of the one-step and full-product identity
/// violations, zeroed for variables too narrow to branch on.
fn branching_scores(sol: &[f64], map: &crate::rlt::RltVarMap, prob: &Problem, bounds: &Bounds) -> ViolationScores {
    let a = rlt_violations(sol, map, prob);
    let b = product_violations(sol, map, prob);
    let theta = (0..prob.num_vars())
        .map(|j| {
            if bounds.width(j) > MIN_BRANCH_WIDTH {
                a.theta[j].max(b.theta[j])
            } else {
                0.0
            }
        })
        .collect();
    ViolationScores { theta }
}

fn widest(bounds: &Bounds) -> usize {
    let mut best = 0;
    for j in 1..bounds.len() {
        if bounds.width(j) > bounds.width(best) {
            best = j;
        }
    }
    best
}

pub fn solve(prob: &Problem, cfg: &SolverConfig) -> SolveResult {
    let mut s = Solver {
        prob,
        cfg,
        jsets: compute_jsets(prob),
        clock: Clock::new(cfg.clock),
        best: None,
        ob_cuts: Vec::new(),
        trajectory: Vec::new(),
    };
    let finish = |s: Solver, status, lower: f64, root_lower, nodes: usize, bt: (f64, f64)| {
        let upper = s.upper();
        let lower = lower.min(upper);
        let mut trajectory = s.trajectory;
        if lower.is_finite() && trajectory.last().map_or(true, |&(_, l)| lower > l) {
            trajectory.push((s.clock.elapsed(), lower));
        }
        SolveResult {
            status,
            incumbent: s.best.map(|c| c.x),
            upper,
            lower,
            root_lower,
            nodes: nodes.max(1),
            lb_trajectory: trajectory,
            btbound: bt.0,
            bttime: bt.1,
            elapsed: s.clock.elapsed(),
        }
    };
    let infeasible = |s: Solver, bt| {
        // with an incumbent, "no better point" means the incumbent is optimal
        let status = if s.best.is_some() { SolveStatus::Optimal } else { SolveStatus::Infeasible };
        let lb = s.upper();
        finish(s, status, lb, lb, 0, bt)
    };

    // Root pipeline.
    let Some(root_box) = s.fbbt(&prob.bounds, &CutPool::default()) else {
        return infeasible(s, (0.0, 0.0));
    };
    let (pre, _, _) = s.solve_node_lp(&root_box);
    if pre.res.is_optimal() {
        s.offer(&root_box, &pre.res.x);
    }
    let (relax, map) = build_relaxation(prob, &root_box, &s.jsets);
    let opts = ObbtOptions {
        mode: cfg.obbt_mode,
        budget: cfg.obbt_budget_fraction * cfg.time_limit,
        ..Default::default()
    };
    let upper = s.best.as_ref().map(|c| c.value);
    let rep = run_obbt(prob, &relax, &map, &s.jsets, &root_box, upper, &opts, &mut s.clock);
    // btbound is measured against the original box
    let n = prob.num_vars();
    let before: Vec<f64> = (0..n).map(|j| prob.bounds.width(j)).collect();
    let after: Vec<f64> = (0..n).map(|j| rep.bounds.width(j)).collect();
    let bt = (crate::obbt::btbound(&before, &after), rep.bttime);
    if rep.infeasible {
        return infeasible(s, bt);
    }
    s.ob_cuts = rep.ob_cuts;
    let root_box = rep.bounds;
    let (root, _, _) = s.solve_node_lp(&root_box);
    let root_lower = match root.res.status {
        LpStatus::Infeasible => return infeasible(s, bt),
        _ => root.lower.min(s.upper()),
    };
    s.record_lb(root_lower);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bounds: root_box,
        depth: 0,
        parent_lb: root_lower,
        seq,
        scope: Rc::new(Scope::default()),
    });
    // lower bounds of nodes dropped without proof (no branchable variable)
    let mut stuck_lb = f64::INFINITY;
    // bounds of nodes fathomed by the gap tolerance, which sit up to
    // abs_gap below U
    let mut pruned_lb = f64::INFINITY;
    let mut nodes = 0usize;

    let status = loop {
        let Some(node) = heap.pop() else {
            break if stuck_lb < f64::INFINITY && !gap_closed(cfg, s.upper(), stuck_lb) {
                SolveStatus::NodeLimit
            } else if s.best.is_some() {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            };
        };
        let upper = s.upper();
        if node.parent_lb >= upper - cfg.abs_gap {
            pruned_lb = pruned_lb.min(node.parent_lb);
            continue;
        }
        let global_lb = node.parent_lb.min(stuck_lb).min(pruned_lb);
        s.record_lb(global_lb);
        if gap_closed(cfg, upper, global_lb) {
            heap.push(node);
            break SolveStatus::Optimal;
        }
        if cfg.node_limit.is_some_and(|k| nodes >= k) {
            heap.push(node);
            break SolveStatus::NodeLimit;
        }
        if s.out_of_time() {
            heap.push(node);
            break SolveStatus::TimeLimit;
        }
        nodes += 1;

        let mut pool = CutPool::default();
        if cfg.ob_cut_period.is_some_and(|p| node.depth % p == 0) {
            pool.ob_cuts = s.ob_cuts.clone();
        }
        node.scope.collect(&mut pool);
        let Some(bounds) = s.fbbt(&node.bounds, &pool) else { continue };

        let (nl, map, c0) = s.solve_node_lp(&bounds);
        if nl.res.status == LpStatus::Infeasible {
            continue;
        }
        let optimal = nl.res.is_optimal();
        let lb = nl.lower.max(node.parent_lb);
        if optimal {
            s.offer(&bounds, &nl.res.x);
        }
        if lb >= s.upper() - cfg.abs_gap {
            pruned_lb = pruned_lb.min(lb);
            continue;
        }

        let mut scope = node.scope.clone();
        if optimal && cfg.nb_cut_period.is_some_and(|p| node.depth % p == 0) {
            let relax_lower = certified_node_bound(&nl.lp, &nl.res, c0);
            let nb = derive_nb_cuts(&nl.res, &bounds, relax_lower);
            let (relax, _) = build_relaxation(prob, &bounds, &s.jsets);
            let constraint = derive_constraint_cuts(prob, &relax, &nl.res, relax_lower);
            if !nb.is_empty() || !constraint.is_empty() {
                scope = Rc::new(Scope { parent: Some(scope), nb, constraint });
            }
        }

        let (j, ov) = if optimal {
            let theta = branching_scores(&nl.res.x, &map, prob, &bounds);
            if theta.max() <= THETA_TOL {
                // The relaxation point satisfies the RLT identities; offer()
                // has already taken it (or its repair) if it is feasible.
                let x = &nl.res.x[..n];
                if prob.is_feasible(x, 1e-6) {
                    pruned_lb = pruned_lb.min(lb);
                    continue;
                }
            }
            let j = if theta.max() > 0.0 { select_branch_var(&theta) } else { widest(&bounds) };
            (j, nl.res.x[j].clamp(bounds.lower[j], bounds.upper[j]))
        } else {
            let j = widest(&bounds);
            (j, 0.5 * (bounds.lower[j] + bounds.upper[j]))
        };
        if bounds.width(j) <= MIN_BRANCH_WIDTH {
            stuck_lb = stuck_lb.min(lb);
            continue;
        }
        let incumbent = s.best.as_ref().map(|c| c.x.as_slice());
        let p = select_branch_point(cfg, j, &bounds, ov, incumbent);
        let mut left = bounds.clone();
        left.upper[j] = p;
        let mut right = bounds;
        right.lower[j] = p;
        for b in [left, right] {
            seq += 1;
            heap.push(Node { bounds: b, depth: node.depth + 1, parent_lb: lb, seq, scope: scope.clone() });
        }
    };

    let open_lb = heap.iter().map(|nd| nd.parent_lb).fold(f64::INFINITY, f64::min);
    let lower = open_lb.min(stuck_lb).min(pruned_lb);
    let lower = match status {
        SolveStatus::Infeasible => f64::INFINITY,
        _ => lower,
    };
    finish(s, status, lower, root_lower, nodes, bt)
}
