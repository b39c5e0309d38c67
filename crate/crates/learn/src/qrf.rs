//! Quantile regression forests.
//!
//! Trees split on log-targets by variance reduction; leaves keep the raw
//! targets of their bootstrap sample, and a prediction is the τ-quantile of
//! the leaf-weighted target distribution across trees.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_TREES: usize = 500;
pub const MIN_LEAF: usize = 5;
pub const DEFAULT_TAU: f64 = 0.3;
/// Floor before taking logs of nonnegative targets.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub num_trees: usize,
    /// `None`: ⌈p/3⌉.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { num_trees: DEFAULT_TREES, mtry: None, min_leaf: MIN_LEAF, tau: DEFAULT_TAU, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { targets: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    /// Times each training sample was drawn into this tree's bootstrap.
    inbag: Vec<u32>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Split { feature, threshold, left, right } => {
                    k = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { targets } => return targets,
            }
        }
    }

    pub fn is_out_of_bag(&self, sample: usize) -> bool {
        self.inbag[sample] == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub tau: f64,
    pub num_features: usize,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("no training samples")]
    Empty,
    #[error("feature rows and targets differ in length ({rows} vs {targets})")]
    Length { rows: usize, targets: usize },
    #[error("feature row {0} has the wrong width")]
    Ragged(usize),
    #[error("target {0} is negative or not finite")]
    BadTarget(usize),
    #[error("tau must lie in (0, 1)")]
    Tau,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    logy: Vec<f64>,
    mtry: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    /// Grows the subtree over `idx` (bootstrap indices, repeats allowed).
    fn grow(&self, idx: Vec<usize>, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
        let me = nodes.len();
        nodes.push(Node::Leaf { targets: Vec::new() });
        match self.best_split(&idx, rng) {
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
                let left = self.grow(l, rng, nodes);
                let right = self.grow(r, rng, nodes);
                nodes[me] = Node::Split { feature, threshold, left, right };
            }
            None => {
                let mut targets: Vec<f64> = idx.iter().map(|&i| self.y[i]).collect();
                targets.sort_by(f64::total_cmp);
                nodes[me] = Node::Leaf { targets };
            }
        }
        me
    }

    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        if idx.len() < 2 * self.min_leaf {
            return None;
        }
        let p = self.x[0].len();
        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.logy[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.logy[i] * self.logy[i]).sum();
        let sse = total_sq - total * total / n;
        if sse <= 1e-12 * n {
            return None;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in sample(rng, p, self.mtry.min(p)).into_iter() {
            let mut order: Vec<(f64, f64)> = idx.iter().map(|&i| (self.x[i][feature], self.logy[i])).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                s += order[k].1;
                sq += order[k].1 * order[k].1;
                let nl = (k + 1) as f64;
                if k + 1 < self.min_leaf || order.len() - k - 1 < self.min_leaf || order[k].0 == order[k + 1].0 {
                    continue;
                }
                let nr = n - nl;
                let child = (sq - s * s / nl) + ((total_sq - sq) - (total - s) * (total - s) / nr);
                let gain = sse - child;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, feature, 0.5 * (order[k].0 + order[k + 1].0)));
                }
            }
        }
        best.map(|b| (b.1, b.2))
    }
}

/// Weighted τ-quantile: smallest value whose cumulative weight reaches τ.
fn weighted_quantile(mut pts: Vec<(f64, f64)>, tau: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &pts {
        acc += w;
        if acc >= tau * total * (1.0 - 1e-12) {
            return v;
        }
    }
    pts.last().map_or(f64::NAN, |p| p.0)
}

impl Forest {
    pub fn train(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest, TrainError> {
        if x.is_empty() {
            return Err(TrainError::Empty);
        }
        if x.len() != y.len() {
            return Err(TrainError::Length { rows: x.len(), targets: y.len() });
        }
        let p = x[0].len();
        if let Some(i) = x.iter().position(|r| r.len() != p) {
            return Err(TrainError::Ragged(i));
        }
        if let Some(i) = y.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(TrainError::BadTarget(i));
        }
        if !(params.tau > 0.0 && params.tau < 1.0) {
            return Err(TrainError::Tau);
        }
        let b = Builder {
            x,
            y,
            logy: y.iter().map(|v| v.max(LOG_FLOOR).ln()).collect(),
            mtry: params.mtry.unwrap_or(p.div_ceil(3)).max(1),
            min_leaf: params.min_leaf.max(1),
        };
        let n = x.len();
        let trees = (0..params.num_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut inbag = vec![0u32; n];
                for &i in &idx {
                    inbag[i] += 1;
                }
                let mut nodes = Vec::new();
                b.grow(idx, &mut rng, &mut nodes);
                Tree { nodes, inbag }
            })
            .collect();
        Ok(Forest { tau: params.tau, num_features: p, trees })
    }

    fn quantile_over<'a>(&'a self, x: &[f64], trees: impl Iterator<Item = &'a Tree>) -> Option<f64> {
        let mut pts = Vec::new();
        for t in trees {
            let leaf = t.leaf(x);
            let w = 1.0 / leaf.len() as f64;
            pts.extend(leaf.iter().map(|&v| (v, w)));
        }
        (!pts.is_empty()).then(|| weighted_quantile(pts, self.tau))
    }

    /// τ-quantile prediction from all trees.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.quantile_over(x, self.trees.iter()).unwrap_or(f64::NAN)
    }

    /// Prediction for training sample `i` from the trees that never saw it;
    /// falls back to the full forest if every tree drew it.
    pub fn predict_oob(&self, i: usize, x: &[f64]) -> f64 {
        self.quantile_over(x, self.trees.iter().filter(|t| t.is_out_of_bag(i)))
            .unwrap_or_else(|| self.predict(x))
    }

    fn render(&self, out: &mut String) {
        let _ = writeln!(out, "forest {:?} {} {}", self.tau, self.num_features, self.trees.len());
        for t in &self.trees {
            let _ = write!(out, "tree {}", t.nodes.len());
            for c in &t.inbag {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
            for n in &t.nodes {
                match n {
                    Node::Split { feature, threshold, left, right } => {
                        let _ = writeln!(out, "s {feature} {threshold:?} {left} {right}");
                    }
                    Node::Leaf { targets } => {
                        out.push('l');
                        for v in targets {
                            let _ = write!(out, " {v:?}");
                        }
                        out.push('\n');
                    }
                }
            }
        }
    }
}

/// One forest per configuration, trained on a shared feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub configs: Vec<String>,
    pub forests: Vec<Forest>,
}

pub const MAGIC: &str = "QRF1";

#[derive(Debug, Error, PartialEq)]
#[error("model file line {line}: {msg}")]
pub struct ModelParseError {
    pub line: usize,
    pub msg: String,
}

impl Model {
    /// Text serialization headed by `QRF1`; floats round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nconfigs {}\n", self.configs.len());
        for c in &self.configs {
            let _ = writeln!(out, "{c}");
        }
        for f in &self.forests {
            f.render(&mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Model, ModelParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut last = 0;
        let mut next = |what: &str| {
            let r = lines.next();
            if let Some((no, _)) = r {
                last = no;
            }
            r.ok_or_else(|| ModelParseError { line: last + 1, msg: format!("expected {what}, found end of file") })
        };
        let err = |line: usize, msg: String| ModelParseError { line, msg };
        fn num<T: std::str::FromStr>(line: usize, s: Option<&str>, what: &str) -> Result<T, ModelParseError> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| ModelParseError { line, msg: format!("bad or missing {what}") })
        }

        let (no, l) = next("magic")?;
        if l != MAGIC {
            return Err(err(no, format!("not a {MAGIC} model file")));
        }
        let (no, l) = next("config count")?;
        let k: usize = num(no, l.strip_prefix("configs "), "config count")?;
        let mut configs = Vec::with_capacity(k);
        for _ in 0..k {
            configs.push(next("config name")?.1.to_string());
        }
        let mut forests = Vec::with_capacity(k);
        for _ in 0..k {
            let (no, l) = next("forest header")?;
            let mut it = l.split(' ');
            if it.next() != Some("forest") {
                return Err(err(no, "expected `forest`".into()));
            }
            let tau: f64 = num(no, it.next(), "tau")?;
            let num_features: usize = num(no, it.next(), "feature count")?;
            let ntrees: usize = num(no, it.next(), "tree count")?;
            let mut trees = Vec::with_capacity(ntrees);
            for _ in 0..ntrees {
                let (no, l) = next("tree header")?;
                let mut it = l.split(' ');
                if it.next() != Some("tree") {
                    return Err(err(no, "expected `tree`".into()));
                }
                let nn: usize = num(no, it.next(), "node count")?;
                let inbag = it.map(|s| num(no, Some(s), "in-bag count")).collect::<Result<Vec<u32>, _>>()?;
                let mut nodes = Vec::with_capacity(nn);
                for _ in 0..nn {
                    let (no, l) = next("node")?;
                    let mut it = l.split(' ');
                    match it.next() {
                        Some("s") => {
                            let feature: usize = num(no, it.next(), "feature")?;
                            let threshold: f64 = num(no, it.next(), "threshold")?;
                            let left: usize = num(no, it.next(), "left child")?;
                            let right: usize = num(no, it.next(), "right child")?;
                            if feature >= num_features || left >= nn || right >= nn {
                                return Err(err(no, "split refers outside the tree".into()));
                            }
                            nodes.push(Node::Split { feature, threshold, left, right });
                        }
                        Some("l") => {
                            let targets = it.map(|s| num(no, Some(s), "leaf target")).collect::<Result<Vec<f64>, _>>()?;
                            if targets.is_empty() {
                                return Err(err(no, "empty leaf".into()));
                            }
                            nodes.push(Node::Leaf { targets });
                        }
                        _ => return Err(err(no, "expected `s` or `l` node".into())),
                    }
                }
                trees.push(Tree { nodes, inbag });
            }
            forests.push(Forest { tau, num_features, trees });
        }
        Ok(Model { configs, forests })
    }
}
