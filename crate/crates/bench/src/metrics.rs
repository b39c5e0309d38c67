//! Aggregation of a rectangular (instance × config) run grid into the
//! comparison tables: per-config metrics, within-5% counts and rankings.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::record::{RunRecord, SOLVED_GAP};

/// Runs faster than this on every config make an instance uninformative for
/// Time and Pace.
pub const FAST_SOLVE_S: f64 = 5.0;
/// Floor for the LB improvement in the Pace denominator.
pub const PACE_MIN_IMPROVEMENT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Gap,
    Time,
    Pace,
    Nodes,
    BtBound,
    BtTime,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::Gap, Metric::Time, Metric::Pace, Metric::Nodes, Metric::BtBound, Metric::BtTime];

    /// BTbound is the only quantity where larger is better.
    pub fn maximized(self) -> bool {
        self == Metric::BtBound
    }

    fn geometric(self) -> bool {
        !matches!(self, Metric::BtBound | Metric::BtTime)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Gap => "gap",
            Metric::Time => "time",
            Metric::Pace => "pace",
            Metric::Nodes => "nodes",
            Metric::BtBound => "btbound",
            Metric::BtTime => "bttime",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("no run for instance `{instance}` with config `{config}`")]
    Missing { instance: String, config: String },
    #[error("duplicate run for instance `{instance}` with config `{config}`")]
    Duplicate { instance: String, config: String },
    #[error("no runs")]
    Empty,
}

/// Records indexed by (instance, config), both in first-appearance order.
pub struct Grid<'a> {
    pub instances: Vec<&'a str>,
    pub configs: Vec<&'a str>,
    cells: Vec<Vec<&'a RunRecord>>,
}

impl<'a> Grid<'a> {
    pub fn new(records: &'a [RunRecord]) -> Result<Self, GridError> {
        if records.is_empty() {
            return Err(GridError::Empty);
        }
        let mut instances: Vec<&str> = Vec::new();
        let mut configs: Vec<&str> = Vec::new();
        let mut inst_idx = HashMap::new();
        let mut conf_idx = HashMap::new();
        for r in records {
            inst_idx.entry(r.instance.as_str()).or_insert_with(|| {
                instances.push(&r.instance);
                instances.len() - 1
            });
            conf_idx.entry(r.config.as_str()).or_insert_with(|| {
                configs.push(&r.config);
                configs.len() - 1
            });
        }
        let mut slots: Vec<Vec<Option<&RunRecord>>> = vec![vec![None; configs.len()]; instances.len()];
        for r in records {
            let slot = &mut slots[inst_idx[r.instance.as_str()]][conf_idx[r.config.as_str()]];
            if slot.is_some() {
                return Err(GridError::Duplicate { instance: r.instance.clone(), config: r.config.clone() });
            }
            *slot = Some(r);
        }
        let mut cells = Vec::with_capacity(instances.len());
        for (i, row) in slots.into_iter().enumerate() {
            let mut out = Vec::with_capacity(configs.len());
            for (c, cell) in row.into_iter().enumerate() {
                out.push(cell.ok_or_else(|| GridError::Missing {
                    instance: instances[i].to_string(),
                    config: configs[c].to_string(),
                })?);
            }
            cells.push(out);
        }
        Ok(Grid { instances, configs, cells })
    }

    pub fn row(&self, instance: usize) -> &[&'a RunRecord] {
        &self.cells[instance]
    }

    /// Whether an instance is informative for `metric`. Depends only on the
    /// multiset of runs, never on which config produced which.
    pub fn included(&self, instance: usize, metric: Metric) -> bool {
        let row = self.row(instance);
        let all_solved = row.iter().all(|r| r.solved());
        let none_solved = !row.iter().any(|r| r.solved());
        let all_fast = all_solved && row.iter().all(|r| r.time_s < FAST_SOLVE_S);
        match metric {
            Metric::Gap => row.iter().all(|r| r.gap.is_some()) && !all_solved,
            Metric::Time => !all_fast && !none_solved,
            Metric::Pace => !all_fast,
            Metric::Nodes => all_solved,
            Metric::BtBound | Metric::BtTime => true,
        }
    }

    pub fn included_instances(&self, metric: Metric) -> Vec<usize> {
        (0..self.instances.len()).filter(|&i| self.included(i, metric)).collect()
    }
}

/// Per-run value of `metric`, before aggregation.
pub fn metric_value(r: &RunRecord, metric: Metric) -> f64 {
    match metric {
        // solved runs count as exactly the threshold so zero gaps cannot
        // collapse the geometric mean
        Metric::Gap => {
            if r.solved() {
                SOLVED_GAP
            } else {
                r.gap.unwrap_or(f64::INFINITY)
            }
        }
        Metric::Time => r.time_s,
        Metric::Pace => pace(r),
        Metric::Nodes => r.nodes as f64,
        Metric::BtBound => r.btbound,
        Metric::BtTime => r.bttime_s,
    }
}

/// Seconds per unit of lower-bound improvement.
pub fn pace(r: &RunRecord) -> f64 {
    let d = r.lb_final - r.lb_first;
    let d = if d.is_finite() { d.max(PACE_MIN_IMPROVEMENT) } else { PACE_MIN_IMPROVEMENT };
    r.time_s / d
}

pub fn geometric_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

pub fn arithmetic_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigMetrics {
    pub config: String,
    pub solved: usize,
    /// Indexed like [`Metric::ALL`]; `None` when no instance qualifies.
    pub values: [Option<f64>; 6],
}

impl ConfigMetrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values[Metric::ALL.iter().position(|&x| x == m).unwrap()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<ConfigMetrics>,
    pub instances: usize,
    /// Number of instances aggregated per metric, indexed like [`Metric::ALL`].
    pub counts: [usize; 6],
}

impl MetricsTable {
    pub fn row(&self, config: &str) -> Option<&ConfigMetrics> {
        self.rows.iter().find(|r| r.config == config)
    }

    pub fn count(&self, m: Metric) -> usize {
        self.counts[Metric::ALL.iter().position(|&x| x == m).unwrap()]
    }
}

pub fn compute_metrics(records: &[RunRecord]) -> Result<MetricsTable, GridError> {
    let grid = Grid::new(records)?;
    let included: Vec<Vec<usize>> = Metric::ALL.iter().map(|&m| grid.included_instances(m)).collect();
    let rows = (0..grid.configs.len())
        .map(|c| {
            let solved = (0..grid.instances.len()).filter(|&i| grid.row(i)[c].solved()).count();
            let mut values = [None; 6];
            for (k, &m) in Metric::ALL.iter().enumerate() {
                let vals: Vec<f64> = included[k].iter().map(|&i| metric_value(grid.row(i)[c], m)).collect();
                values[k] = if m.geometric() { geometric_mean(&vals) } else { arithmetic_mean(&vals) };
            }
            ConfigMetrics { config: grid.configs[c].to_string(), solved, values }
        })
        .collect();
    let mut counts = [0; 6];
    for (k, inc) in included.iter().enumerate() {
        counts[k] = inc.len();
    }
    Ok(MetricsTable { rows, instances: grid.instances.len(), counts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Within5 {
    pub metric: Metric,
    /// Instances passing the metric's filter.
    pub instances: usize,
    /// (config, number of instances within 5% of the best config).
    pub counts: Vec<(String, usize)>,
}

fn close_to_best(v: f64, best: f64, maximized: bool) -> bool {
    if maximized {
        v >= 0.95 * best
    } else {
        v <= 1.05 * best
    }
}

fn best_of(vals: &[f64], maximized: bool) -> f64 {
    let it = vals.iter().copied();
    if maximized {
        it.fold(f64::NEG_INFINITY, f64::max)
    } else {
        it.fold(f64::INFINITY, f64::min)
    }
}

pub fn within_5pct(records: &[RunRecord], metric: Metric) -> Result<Within5, GridError> {
    let grid = Grid::new(records)?;
    let inc = grid.included_instances(metric);
    let mut counts = vec![0usize; grid.configs.len()];
    for &i in &inc {
        let vals: Vec<f64> = grid.row(i).iter().map(|r| metric_value(r, metric)).collect();
        let best = best_of(&vals, metric.maximized());
        for (c, &v) in vals.iter().enumerate() {
            if close_to_best(v, best, metric.maximized()) {
                counts[c] += 1;
            }
        }
    }
    Ok(Within5 {
        metric,
        instances: inc.len(),
        counts: grid.configs.iter().map(|s| s.to_string()).zip(counts).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankRow {
    pub config: String,
    /// `share[r]`: fraction of ranked instances where this config placed r+1.
    pub share: Vec<f64>,
    /// Mean of best/own over the instances in each rank bucket.
    pub mean_ratio: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingReport {
    pub metric: Metric,
    pub instances: usize,
    pub rows: Vec<RankRow>,
}

/// Ranks configs per instance on `metric` (1 = best; ties share the better
/// rank) over the instances passing that metric's filter.
pub fn ranking_report(records: &[RunRecord], metric: Metric) -> Result<RankingReport, GridError> {
    let grid = Grid::new(records)?;
    let k = grid.configs.len();
    let inc = grid.included_instances(metric);
    let mut hits = vec![vec![0usize; k]; k];
    let mut ratio_sum = vec![vec![0.0f64; k]; k];
    let max = metric.maximized();
    for &i in &inc {
        let vals: Vec<f64> = grid.row(i).iter().map(|r| metric_value(r, metric)).collect();
        let best = best_of(&vals, max);
        for (c, &v) in vals.iter().enumerate() {
            let better = vals.iter().filter(|&&w| if max { w > v } else { w < v }).count();
            hits[c][better] += 1;
            ratio_sum[c][better] += closeness(best, v, max);
        }
    }
    let n = inc.len();
    let rows = (0..k)
        .map(|c| RankRow {
            config: grid.configs[c].to_string(),
            share: hits[c].iter().map(|&h| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect(),
            mean_ratio: (0..k).map(|r| (hits[c][r] > 0).then(|| ratio_sum[c][r] / hits[c][r] as f64)).collect(),
        })
        .collect();
    Ok(RankingReport { metric, instances: n, rows })
}

/// In (0, 1], 1 for the best value.
fn closeness(best: f64, v: f64, maximized: bool) -> f64 {
    let (num, den) = if maximized { (v, best) } else { (best, v) };
    if num == den {
        1.0
    } else if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per config, then an `instances` row with the per-metric counts.
pub fn write_metrics<W: Write>(w: W, t: &MetricsTable) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["config".to_string(), "solved".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.to_string()));
    wr.write_record(&header)?;
    for r in &t.rows {
        let mut row = vec![r.config.clone(), r.solved.to_string()];
        row.extend(r.values.iter().map(|&v| opt(v)));
        wr.write_record(&row)?;
    }
    let mut row = vec!["instances".to_string(), t.instances.to_string()];
    row.extend(t.counts.iter().map(|c| c.to_string()));
    wr.write_record(&row)?;
    wr.flush()?;
    Ok(())
}

pub fn write_within5<W: Write>(w: W, tables: &[Within5]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["metric", "config", "count", "instances"])?;
    for t in tables {
        for (c, n) in &t.counts {
            wr.write_record([t.metric.to_string(), c.clone(), n.to_string(), t.instances.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_ranking<W: Write>(w: W, rep: &RankingReport) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["config", "rank", "share", "mean_ratio"])?;
    for row in &rep.rows {
        for (r, (s, m)) in row.share.iter().zip(&row.mean_ratio).enumerate() {
            wr.write_record([row.config.clone(), (r + 1).to_string(), s.to_string(), opt(*m)])?;
        }
    }
    wr.flush()?;
    Ok(())
}
