//! Fixed-length numeric description of an instance.
//!
//! Conventions where the names leave room:
//! - "density of a variable": share of the problem's distinct nonconstant
//!   monomials that contain it;
//! - "appearances": number of terms (over objective and constraints) whose
//!   monomial contains the variable;
//! - RLT variables are all columns of the root relaxation (original
//!   variables included); "linear"/"quadratic" refer to their degree;
//! - problem density: distinct nonconstant monomials over `C(n+δ−1, δ)`;
//! - ratios with zero constraints are 0 and `no_constraints` is set to 1;
//! - modularity and treewidth are greedy estimates; CMIG is bipartite, so its
//!   transitivity is always 0 and is kept only for a fixed schema.

use std::io::{Read, Write};

use polyrlt_core::rlt::build_relaxation;
use polyrlt_core::{compute_jsets, Polynomial, Problem};

use crate::graph::{build_cmig, build_vig, graph_stats};

pub const FEATURE_NAMES: [&str; 37] = [
    "n_vars",
    "var_density_var",
    "range_mean",
    "range_median",
    "range_var",
    "appearances_mean",
    "appearances_var",
    "pct_vars_not_deg_gt1",
    "pct_vars_not_deg_gt2",
    "n_constraints",
    "pct_eq_constraints",
    "pct_linear_constraints",
    "pct_quadratic_constraints",
    "n_monomials",
    "pct_linear_monomials",
    "pct_quadratic_monomials",
    "pct_linear_rlt_vars",
    "pct_quadratic_rlt_vars",
    "mean_pct_monomials_per_constraint",
    "pct_monomials_objective",
    "coef_mean",
    "coef_var",
    "degree",
    "density",
    "vars_per_constraint",
    "vars_per_degree",
    "rlt_vars_per_constraint",
    "monomials_per_constraint",
    "no_constraints",
    "vig_density",
    "vig_modularity",
    "vig_treewidth",
    "vig_transitivity",
    "cmig_density",
    "cmig_modularity",
    "cmig_treewidth",
    "cmig_transitivity",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

pub type FeatureVector = [f64; NUM_FEATURES];

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Population variance.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    mean(&v.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>())
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn extract_features(prob: &Problem) -> FeatureVector {
    let n = prob.num_vars();
    let monos = prob.monomials();
    let n_mono = monos.len() as f64;
    let m = prob.constraints.len();
    let deg = prob.degree();

    let density: Vec<f64> = (0..n).map(|j| ratio(monos.iter().filter(|mo| mo.power_of(j) > 0).count() as f64, n_mono)).collect();
    let ranges: Vec<f64> = (0..n).map(|j| prob.bounds.width(j)).collect();
    let mut appearances = vec![0.0; n];
    for p in prob.polynomials() {
        for mo in p.monomials() {
            for j in mo.support() {
                appearances[j] += 1.0;
            }
        }
    }
    let not_above = |d: u32| (0..n).filter(|&j| !monos.iter().any(|mo| mo.degree() > d && mo.power_of(j) > 0)).count() as f64;

    let share = |pred: &dyn Fn(&Polynomial) -> bool| {
        ratio(prob.constraints.iter().filter(|c| pred(&c.body)).count() as f64, m as f64)
    };
    let pct_eq = ratio(
        prob.constraints.iter().filter(|c| c.sense == polyrlt_core::Sense::Eq).count() as f64,
        m as f64,
    );

    let (_, map) = build_relaxation(prob, &prob.bounds, &compute_jsets(prob));
    let cols = map.columns();
    let n_rlt = cols.len() as f64;
    let rlt_deg = |d: u32| ratio(cols.iter().filter(|c| c.degree() == d).count() as f64, n_rlt);

    let nonconst = |p: &Polynomial| p.monomials().filter(|mo| !mo.is_constant()).count() as f64;
    let per_constraint: Vec<f64> = prob.constraints.iter().map(|c| ratio(nonconst(&c.body), n_mono)).collect();
    let coefs: Vec<f64> = prob
        .polynomials()
        .flat_map(|p| p.terms().filter(|(mo, _)| !mo.is_constant()).map(|(_, c)| c))
        .collect();

    let full = if deg == 0 { 0.0 } else { binomial(n + deg as usize - 1, deg as usize) };
    let vig = graph_stats(&build_vig(prob));
    let cmig = graph_stats(&build_cmig(prob));

    [
        n as f64,
        variance(&density),
        mean(&ranges),
        median(&ranges),
        variance(&ranges),
        mean(&appearances),
        variance(&appearances),
        ratio(not_above(1), n as f64),
        ratio(not_above(2), n as f64),
        m as f64,
        pct_eq,
        share(&|p| p.degree() <= 1),
        share(&|p| p.degree() == 2),
        n_mono,
        ratio(monos.iter().filter(|mo| mo.degree() == 1).count() as f64, n_mono),
        ratio(monos.iter().filter(|mo| mo.degree() == 2).count() as f64, n_mono),
        rlt_deg(1),
        rlt_deg(2),
        mean(&per_constraint),
        ratio(nonconst(&prob.objective), n_mono),
        mean(&coefs),
        variance(&coefs),
        deg as f64,
        ratio(n_mono, full),
        ratio(n as f64, m as f64),
        ratio(n as f64, deg as f64),
        ratio(n_rlt, m as f64),
        ratio(n_mono, m as f64),
        if m == 0 { 1.0 } else { 0.0 },
        vig.density,
        vig.modularity,
        vig.treewidth_ub as f64,
        vig.transitivity,
        cmig.density,
        cmig.modularity,
        cmig.treewidth_ub as f64,
        cmig.transitivity,
    ]
}

/// `instance` followed by one column per feature.
pub fn write_features<W: Write>(w: W, rows: &[(String, FeatureVector)]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["instance"];
    header.extend(FEATURE_NAMES);
    wr.write_record(&header)?;
    for (name, f) in rows {
        let mut rec = vec![name.clone()];
        rec.extend(f.iter().map(|v| format!("{v:?}")));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum FeaturesCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("features header does not match this build's feature schema")]
    Schema,
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

pub fn read_features<R: Read>(r: R) -> Result<Vec<(String, FeatureVector)>, FeaturesCsvError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.len() != NUM_FEATURES + 1 || header.iter().skip(1).zip(FEATURE_NAMES).any(|(a, b)| a != b) {
        return Err(FeaturesCsvError::Schema);
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut f = [0.0; NUM_FEATURES];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = rec[k + 1].parse().map_err(|_| FeaturesCsvError::Row { row: i + 1, msg: format!("bad value `{}` for {}", &rec[k + 1], FEATURE_NAMES[k]) })?;
        }
        out.push((rec[0].to_string(), f));
    }
    Ok(out)
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}
