//! Benchmark harness: instance generation, a brute-force reference solver,
//! batch runs and metric aggregation.

pub mod gen;
pub mod metrics;
pub mod record;
pub mod reference;
pub mod runner;
