//! Per-instance configuration choice: learned (quantile forest on Pace) and
//! the hindsight Oracle.

use std::collections::HashMap;
use std::io::Write;

use polyrlt_bench::metrics::{pace, Grid, GridError};
use polyrlt_bench::record::RunRecord;
use thiserror::Error;

use crate::features::FeatureVector;
use crate::qrf::{Forest, ForestParams, Model, TrainError};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("no feature row for instance `{0}`")]
    MissingFeatures(String),
}

/// Feature rows aligned with per-config Pace targets.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub instances: Vec<String>,
    pub configs: Vec<String>,
    pub x: Vec<Vec<f64>>,
    /// `pace[c][i]`.
    pub pace: Vec<Vec<f64>>,
}

impl Dataset {
    /// Every instance with runs needs a feature row; extra feature rows are
    /// ignored.
    pub fn assemble(records: &[RunRecord], features: &[(String, FeatureVector)]) -> Result<Dataset, SelectError> {
        let grid = Grid::new(records)?;
        let by_name: HashMap<&str, &FeatureVector> = features.iter().map(|(n, f)| (n.as_str(), f)).collect();
        let mut x = Vec::new();
        for inst in &grid.instances {
            let f = by_name.get(inst).ok_or_else(|| SelectError::MissingFeatures(inst.to_string()))?;
            x.push(f.to_vec());
        }
        let pace = (0..grid.configs.len())
            .map(|c| (0..grid.instances.len()).map(|i| pace(grid.row(i)[c])).collect())
            .collect();
        Ok(Dataset {
            instances: grid.instances.iter().map(|s| s.to_string()).collect(),
            configs: grid.configs.iter().map(|s| s.to_string()).collect(),
            x,
            pace,
        })
    }
}

pub fn train_model(data: &Dataset, params: &ForestParams) -> Result<Model, SelectError> {
    let forests = data
        .pace
        .iter()
        .enumerate()
        .map(|(c, y)| {
            // distinct streams per config so forests are not clones of each other
            let p = ForestParams { seed: params.seed.wrapping_add(c as u64 * 0x9e37_79b9), ..*params };
            Forest::train(&data.x, y, &p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Model { configs: data.configs.clone(), forests })
}

fn argmin(v: &[f64]) -> usize {
    // NaN sorts last; ties keep the earlier config
    let mut best = 0;
    for (k, &p) in v.iter().enumerate() {
        if p < v[best] || (v[best].is_nan() && !p.is_nan()) {
            best = k;
        }
    }
    best
}

/// Index of the config with the smallest predicted Pace quantile, plus all
/// predictions.
pub fn select_config(model: &Model, x: &[f64]) -> (usize, Vec<f64>) {
    let preds: Vec<f64> = model.forests.iter().map(|f| f.predict(x)).collect();
    (argmin(&preds), preds)
}

/// Selection for training instance `i` using only out-of-bag trees.
pub fn select_config_oob(model: &Model, i: usize, x: &[f64]) -> (usize, Vec<f64>) {
    let preds: Vec<f64> = model.forests.iter().map(|f| f.predict_oob(i, x)).collect();
    (argmin(&preds), preds)
}

/// Per instance: smallest Pace, then smallest gap (missing gap worst), then
/// earliest config.
pub fn oracle(records: &[RunRecord]) -> Result<Vec<(String, String)>, GridError> {
    let grid = Grid::new(records)?;
    Ok((0..grid.instances.len())
        .map(|i| {
            let row = grid.row(i);
            let mut best = 0;
            for c in 1..row.len() {
                let key = |r: &RunRecord| (pace(r), r.gap.unwrap_or(f64::INFINITY));
                let (pc, gc) = key(row[c]);
                let (pb, gb) = key(row[best]);
                if pc < pb || (pc == pb && gc < gb) {
                    best = c;
                }
            }
            (grid.instances[i].to_string(), grid.configs[best].to_string())
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub instance: String,
    pub config: String,
    pub predictions: Vec<f64>,
}

/// Out-of-bag selections for every instance the model was trained on.
pub fn oob_selections(model: &Model, data: &Dataset) -> Vec<Selection> {
    data.instances
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (c, predictions) = select_config_oob(model, i, &data.x[i]);
            Selection { instance: name.clone(), config: model.configs[c].clone(), predictions }
        })
        .collect()
}

pub fn select_all(model: &Model, features: &[(String, FeatureVector)]) -> Vec<Selection> {
    features
        .iter()
        .map(|(name, f)| {
            let (c, predictions) = select_config(model, f);
            Selection { instance: name.clone(), config: model.configs[c].clone(), predictions }
        })
        .collect()
}

/// `instance,selected,pred_<config>...`
pub fn write_selections<W: Write>(w: W, configs: &[String], sel: &[Selection]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["instance".to_string(), "selected".to_string()];
    header.extend(configs.iter().map(|c| format!("pred_{c}")));
    wr.write_record(&header)?;
    for s in sel {
        let mut row = vec![s.instance.clone(), s.config.clone()];
        row.extend(s.predictions.iter().map(|p| format!("{p:?}")));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Records of the chosen config per instance, relabeled `label`, so a
/// selector can be scored like any other configuration.
pub fn selected_records(records: &[RunRecord], choice: &[(String, String)], label: &str) -> Vec<RunRecord> {
    let pick: HashMap<&str, &str> = choice.iter().map(|(i, c)| (i.as_str(), c.as_str())).collect();
    records
        .iter()
        .filter(|r| pick.get(r.instance.as_str()) == Some(&r.config.as_str()))
        .map(|r| RunRecord { config: label.to_string(), ..r.clone() })
        .collect()
}
