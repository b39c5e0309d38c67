//! Revised simplex over `[A −I] (x, r) = 0` with bounded structurals `x` and
//! logicals `r` carrying the row senses. Phase 1 adds one artificial per row
//! whose starting logical would be out of bounds.

use super::dense::invert;
use super::{Basis, ColStatus, LpProblem, LpResult, LpStatus};
use crate::rlt::RowSense;

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    /// Defaults to `50·(rows + cols) + 10000`.
    pub max_iter: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-9,
            pivot_tol: 1e-8,
            refactor_every: 100,
            max_iter: None,
        }
    }
}

enum Halt {
    IterLimit,
}

pub(crate) struct Simplex<'a> {
    p: &'a LpProblem,
    opts: SimplexOptions,
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basic: Vec<usize>,
    pos: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iter: usize,
    bland: bool,
    degenerate: usize,
}

impl<'a> Simplex<'a> {
    pub(crate) fn new(p: &'a LpProblem, opts: SimplexOptions) -> Self {
        let m = p.num_rows();
        let n = p.num_cols();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in p.rows.iter().enumerate() {
            for &(c, a) in &row.coefs {
                if a != 0.0 {
                    cols[c].push((i, a));
                }
            }
        }
        let total = n + 2 * m;
        let mut lo = vec![0.0; total];
        let mut hi = vec![0.0; total];
        lo[..n].copy_from_slice(&p.col_lower);
        hi[..n].copy_from_slice(&p.col_upper);
        for (i, row) in p.rows.iter().enumerate() {
            let (l, h) = match row.sense {
                RowSense::Ge => (row.rhs, f64::INFINITY),
                RowSense::Le => (f64::NEG_INFINITY, row.rhs),
                RowSense::Eq => (row.rhs, row.rhs),
            };
            lo[n + i] = l;
            hi[n + i] = h;
        }
        let max_iter = opts.max_iter.unwrap_or(50 * (m + n) + 10_000);
        Self {
            p,
            opts,
            m,
            n,
            cols,
            art_sign: vec![1.0; m],
            lo,
            hi,
            cost: vec![0.0; total],
            x: vec![0.0; total],
            basic: Vec::with_capacity(m),
            pos: vec![None; total],
            at_upper: vec![false; total],
            binv: vec![0.0; m * m],
            since_refactor: 0,
            iterations: 0,
            max_iter,
            bland: false,
            degenerate: 0,
        }
    }

    fn column(&self, k: usize) -> ColumnIter<'_> {
        if k < self.n {
            ColumnIter::Sparse(self.cols[k].iter())
        } else if k < self.n + self.m {
            ColumnIter::Single(Some((k - self.n, -1.0)))
        } else {
            let i = k - self.n - self.m;
            ColumnIter::Single(Some((i, self.art_sign[i])))
        }
    }

    fn total(&self) -> usize {
        self.n + 2 * self.m
    }

    fn is_artificial(&self, k: usize) -> bool {
        k >= self.n + self.m
    }

    /// `B⁻¹ a_k`, indexed by basis position.
    fn ftran(&self, k: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (i, v) in self.column(k) {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[r * m + i] * v;
            }
        }
        out
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &b) in self.basic.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yj, bij) in y.iter_mut().zip(row) {
                    *yj += c * bij;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, k: usize, y: &[f64]) -> f64 {
        self.cost[k] - self.column(k).map(|(i, v)| y[i] * v).sum::<f64>()
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (r, &k) in self.basic.iter().enumerate() {
            for (i, v) in self.column(k) {
                b[i * m + r] = v;
            }
        }
        match invert(m, &b, 1e-11) {
            Some(inv) => {
                self.binv = inv;
                self.since_refactor = 0;
                self.recompute_basic_values();
                true
            }
            None => false,
        }
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for k in 0..self.total() {
            if self.pos[k].is_none() && self.x[k] != 0.0 {
                for (i, v) in self.column(k) {
                    rhs[i] -= v * self.x[k];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.basic[r]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
    }

    fn nonbasic_value(&self, k: usize, upper: bool) -> f64 {
        match (upper, self.lo[k].is_finite(), self.hi[k].is_finite()) {
            (true, _, true) | (false, false, true) => self.hi[k],
            (_, true, _) => self.lo[k],
            _ => 0.0,
        }
    }

    fn basics_feasible(&self) -> bool {
        self.basic.iter().all(|&k| {
            let tol = self.opts.feas_tol * (1.0 + self.x[k].abs());
            self.x[k] >= self.lo[k] - tol && self.x[k] <= self.hi[k] + tol
        })
    }

    fn try_warm_start(&mut self, basis: &Basis) -> bool {
        let (n, m) = (self.n, self.m);
        if basis.basic.len() != m || basis.at_upper.len() != n + m {
            return false;
        }
        let mut seen = vec![false; n + m];
        for &k in &basis.basic {
            if k >= n + m || seen[k] {
                return false;
            }
            seen[k] = true;
        }
        self.basic = basis.basic.clone();
        self.pos = vec![None; self.total()];
        for (r, &k) in self.basic.iter().enumerate() {
            self.pos[k] = Some(r);
        }
        for k in 0..n + m {
            if self.pos[k].is_none() {
                let up = basis.at_upper[k] && self.hi[k].is_finite() || !self.lo[k].is_finite();
                self.at_upper[k] = up;
                self.x[k] = self.nonbasic_value(k, up);
            }
        }
        for i in 0..m {
            let a = n + m + i;
            self.lo[a] = 0.0;
            self.hi[a] = 0.0;
            self.x[a] = 0.0;
            self.at_upper[a] = false;
        }
        self.refactor() && self.basics_feasible()
    }

    /// Slack basis, with artificials on rows whose logical starts infeasible.
    /// Returns whether any artificial was needed.
    fn cold_start(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        self.basic.clear();
        self.pos = vec![None; self.total()];
        for k in 0..n {
            self.at_upper[k] = !self.lo[k].is_finite();
            self.x[k] = self.nonbasic_value(k, self.at_upper[k]);
        }
        self.binv = vec![0.0; m * m];
        let mut any = false;
        for i in 0..m {
            let act: f64 = self.p.rows[i]
                .coefs
                .iter()
                .map(|&(c, a)| a * self.x[c])
                .sum();
            let (l, a) = (n + i, n + m + i);
            self.lo[a] = 0.0;
            if act < self.lo[l] || act > self.hi[l] {
                any = true;
                let upper = act > self.hi[l];
                self.at_upper[l] = upper;
                self.x[l] = if upper { self.hi[l] } else { self.lo[l] };
                let sign = if upper { -1.0 } else { 1.0 };
                self.art_sign[i] = sign;
                self.hi[a] = f64::INFINITY;
                self.x[a] = (self.x[l] - act) / sign;
                self.basic.push(a);
                self.pos[a] = Some(i);
                self.binv[i * m + i] = sign;
            } else {
                self.hi[a] = 0.0;
                self.x[a] = 0.0;
                self.at_upper[a] = false;
                self.x[l] = act;
                self.basic.push(l);
                self.pos[l] = Some(i);
                self.binv[i * m + i] = -1.0;
            }
        }
        any
    }

    fn iterate(&mut self) -> Result<(), Halt> {
        let m = self.m;
        let tie = 1e-12;
        loop {
            if self.iterations >= self.max_iter {
                return Err(Halt::IterLimit);
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return Err(Halt::IterLimit);
            }
            let y = self.duals();

            let mut entering: Option<(usize, f64)> = None;
            for k in 0..self.total() {
                if self.pos[k].is_some() || self.hi[k] - self.lo[k] <= 0.0 {
                    continue;
                }
                let d = self.reduced_cost(k, &y);
                let eligible = if self.at_upper[k] {
                    d > self.opts.opt_tol
                } else {
                    d < -self.opts.opt_tol
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    entering = Some((k, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((k, d));
                }
            }
            let Some((q, _)) = entering else {
                return Ok(());
            };

            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let alpha = self.ftran(q);
            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, bool)> = None;
            for r in 0..m {
                let rate = -dir * alpha[r];
                let b = self.basic[r];
                let (t, to_upper) = if rate < -self.opts.pivot_tol && self.lo[b].is_finite() {
                    ((self.x[b] - self.lo[b]) / -rate, false)
                } else if rate > self.opts.pivot_tol && self.hi[b].is_finite() {
                    ((self.hi[b] - self.x[b]) / rate, true)
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let better = match leave {
                    _ if t < step - tie => true,
                    Some((cur, _)) if t <= step + tie => {
                        if self.bland {
                            b < self.basic[cur]
                        } else {
                            alpha[r].abs() > alpha[cur].abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    step = t;
                    leave = Some((r, to_upper));
                }
            }
            if !step.is_finite() {
                // Unbounded ray; cannot occur with finite column bounds.
                return Err(Halt::IterLimit);
            }

            for r in 0..m {
                let b = self.basic[r];
                self.x[b] -= dir * alpha[r] * step;
            }
            self.x[q] += dir * step;

            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                    self.x[q] = if self.at_upper[q] { self.hi[q] } else { self.lo[q] };
                }
                Some((r, to_upper)) => {
                    let b = self.basic[r];
                    self.x[b] = if to_upper { self.hi[b] } else { self.lo[b] };
                    self.at_upper[b] = to_upper;
                    self.pos[b] = None;
                    self.basic[r] = q;
                    self.pos[q] = Some(r);
                    let piv = alpha[r];
                    for k in 0..m {
                        self.binv[r * m + k] /= piv;
                    }
                    for i in 0..m {
                        if i == r || alpha[i] == 0.0 {
                            continue;
                        }
                        let f = alpha[i];
                        for k in 0..m {
                            self.binv[i * m + k] -= f * self.binv[r * m + k];
                        }
                    }
                    self.since_refactor += 1;
                }
            }

            if step <= tie {
                self.degenerate += 1;
                if self.degenerate > 3 * (self.m + self.n) {
                    self.bland = true;
                }
            }
            self.iterations += 1;
        }
    }

    pub(crate) fn solve(mut self, warm: Option<&Basis>) -> LpResult {
        let warmed = warm.is_some_and(|b| self.try_warm_start(b));
        if !warmed {
            let needs_phase1 = self.cold_start();
            if needs_phase1 {
                for a in self.n + self.m..self.total() {
                    self.cost[a] = 1.0;
                }
                if self.iterate().is_err() {
                    return self.finish(LpStatus::IterLimit);
                }
                let infeas: f64 = (self.n + self.m..self.total()).map(|a| self.x[a]).sum();
                let scale = 1.0
                    + self
                        .p
                        .rows
                        .iter()
                        .map(|r| r.rhs.abs())
                        .fold(0.0, f64::max);
                if infeas > self.opts.feas_tol * scale {
                    return self.finish(LpStatus::Infeasible);
                }
                for a in self.n + self.m..self.total() {
                    self.cost[a] = 0.0;
                    self.hi[a] = 0.0;
                    if self.pos[a].is_none() {
                        self.x[a] = 0.0;
                        self.at_upper[a] = false;
                    }
                }
            }
        }
        self.cost[..self.n].copy_from_slice(&self.p.objective);
        self.degenerate = 0;
        self.bland = false;
        if self.iterate().is_err() {
            return self.finish(LpStatus::IterLimit);
        }
        if self.m > 0 && !self.refactor() {
            return self.finish(LpStatus::IterLimit);
        }
        self.finish(LpStatus::Optimal)
    }

    fn finish(self, status: LpStatus) -> LpResult {
        let n = self.n;
        let x = self.x[..n].to_vec();
        let objective = self.p.objective_value(&x);
        if status != LpStatus::Optimal {
            return LpResult {
                status,
                x,
                objective,
                duals: vec![0.0; self.m],
                reduced_costs: vec![0.0; n],
                col_status: vec![ColStatus::Basic; n],
                iterations: self.iterations,
                basis: None,
            };
        }
        let y = self.duals();
        let mut reduced_costs = vec![0.0; n];
        let mut col_status = vec![ColStatus::Basic; n];
        for k in 0..n {
            if self.pos[k].is_some() {
                continue;
            }
            let d = self.reduced_cost(k, &y);
            reduced_costs[k] = d;
            col_status[k] = if self.hi[k] == self.lo[k] {
                if d >= 0.0 {
                    ColStatus::AtLower
                } else {
                    ColStatus::AtUpper
                }
            } else if self.at_upper[k] {
                ColStatus::AtUpper
            } else {
                ColStatus::AtLower
            };
        }
        let basis = self
            .basic
            .iter()
            .all(|&k| !self.is_artificial(k))
            .then(|| Basis {
                basic: self.basic.clone(),
                at_upper: self.at_upper[..n + self.m].to_vec(),
            });
        LpResult {
            status,
            x,
            objective,
            duals: y,
            reduced_costs,
            col_status,
            iterations: self.iterations,
            basis,
        }
    }
}

enum ColumnIter<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>),
    Single(Option<(usize, f64)>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Sparse(it) => it.next().copied(),
            ColumnIter::Single(v) => v.take(),
        }
    }
}
