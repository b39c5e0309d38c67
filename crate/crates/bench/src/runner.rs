//! Runs every (instance, config) cell as an independent task.

use std::panic::{catch_unwind, AssertUnwindSafe};

use polyrlt_core::bnb::{solve, SolverConfig};
use polyrlt_core::Problem;
use rayon::prelude::*;

use crate::record::RunRecord;

pub struct NamedInstance {
    pub name: String,
    pub problem: Problem,
}

pub struct NamedConfig {
    pub name: String,
    pub config: SolverConfig,
}

/// Solves the full grid on `workers` threads. Output is instance-major in
/// input order regardless of scheduling; a panicking cell yields an
/// `error` record charged the config's time limit instead of aborting the
/// batch.
pub fn run_grid(instances: &[NamedInstance], configs: &[NamedConfig], workers: usize) -> Vec<RunRecord> {
    let cells: Vec<(usize, usize)> =
        (0..instances.len()).flat_map(|i| (0..configs.len()).map(move |c| (i, c))).collect();
    let run = |&(i, c): &(usize, usize)| {
        let (inst, conf) = (&instances[i], &configs[c]);
        catch_unwind(AssertUnwindSafe(|| solve(&inst.problem, &conf.config)))
            .map(|r| RunRecord::from_result(&inst.name, &conf.name, &r))
            .unwrap_or_else(|_| RunRecord::error(&inst.name, &conf.name, conf.config.time_limit))
    };
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(run).collect()),
        Err(_) => cells.iter().map(run).collect(),
    }
}
