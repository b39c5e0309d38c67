//! Time accounting for budgets and limits.
//!
//! `Wall` measures real elapsed time. `Work` charges a deterministic tick
//! count for each solver operation and converts it to pseudo-seconds, so runs
//! (and anything derived from their timings) are reproducible bit for bit.

use std::time::Instant;

/// Pseudo-seconds per work tick; roughly one floating-point operation.
pub const SECONDS_PER_TICK: f64 = 2e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ClockKind {
    Wall,
    #[default]
    Work,
}

#[derive(Clone, Debug)]
pub struct Clock {
    kind: ClockKind,
    start: Instant,
    ticks: u64,
}

impl Clock {
    pub fn new(kind: ClockKind) -> Self {
        Clock {
            kind,
            start: Instant::now(),
            ticks: 0,
        }
    }

    pub fn kind(&self) -> ClockKind {
        self.kind
    }

    /// Records work done; ignored by wall clocks except for the tally.
    pub fn charge(&mut self, ticks: u64) {
        self.ticks = self.ticks.saturating_add(ticks);
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Seconds since creation, real or pseudo.
    pub fn elapsed(&self) -> f64 {
        match self.kind {
            ClockKind::Wall => self.start.elapsed().as_secs_f64(),
            ClockKind::Work => self.ticks as f64 * SECONDS_PER_TICK,
        }
    }
}

/// Ticks for a simplex solve: each pivot touches the dense basis inverse
/// and prices every column.
pub fn lp_ticks(rows: usize, cols: usize, nnz: usize, iterations: usize) -> u64 {
    let per = (rows * rows + nnz + cols) as u64;
    per * (iterations as u64 + 1)
}

/// Ticks for an ADMM solve: one factorization plus triangular solves and
/// sparse products per iteration.
pub fn admm_ticks(cols: usize, nnz: usize, iterations: usize) -> u64 {
    let n = cols as u64;
    n * n * n / 3 + (2 * n * n + 2 * nnz as u64) * iterations as u64
}

/// Ticks for bound propagation, per term visit.
pub fn fbbt_ticks(work: u64) -> u64 {
    work * 50
}
