//! Instance features, interaction graphs, quantile regression forests and
//! per-instance configuration selection.

pub mod features;
pub mod graph;
pub mod qrf;
pub mod select;
