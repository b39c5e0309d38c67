//! One row of `runs.csv` per (instance, configuration) run.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use polyrlt_core::bnb::{SolveResult, SolveStatus};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Optimal,
    Timelimit,
    Nodelimit,
    Infeasible,
    Error,
}

impl From<SolveStatus> for RunStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RunStatus::Optimal,
            SolveStatus::TimeLimit => RunStatus::Timelimit,
            SolveStatus::NodeLimit => RunStatus::Nodelimit,
            SolveStatus::Infeasible => RunStatus::Infeasible,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Optimal => "optimal",
            RunStatus::Timelimit => "timelimit",
            RunStatus::Nodelimit => "nodelimit",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Error => "error",
        })
    }
}

impl FromStr for RunStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "optimal" => RunStatus::Optimal,
            "timelimit" => RunStatus::Timelimit,
            "nodelimit" => RunStatus::Nodelimit,
            "infeasible" => RunStatus::Infeasible,
            "error" => RunStatus::Error,
            other => return Err(format!("unknown status `{other}`")),
        })
    }
}

/// Column order is the CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub config: String,
    pub status: RunStatus,
    pub time_s: f64,
    /// Present iff both bounds are finite.
    pub gap: Option<f64>,
    pub nodes: usize,
    pub lb_first: f64,
    pub lb_final: f64,
    pub ub_final: f64,
    pub btbound: f64,
    pub bttime_s: f64,
    #[serde(skip)]
    pub lb_trajectory: Vec<(f64, f64)>,
}

/// Gap at or below which a run counts as solved.
pub const SOLVED_GAP: f64 = 1e-3;

impl RunRecord {
    pub fn from_result(instance: &str, config: &str, r: &SolveResult) -> Self {
        RunRecord {
            instance: instance.to_string(),
            config: config.to_string(),
            status: r.status.into(),
            time_s: r.elapsed,
            gap: r.gap(),
            nodes: r.nodes,
            lb_first: r.root_lower,
            lb_final: r.lower,
            ub_final: r.upper,
            btbound: r.btbound,
            bttime_s: r.bttime,
            lb_trajectory: r.lb_trajectory.clone(),
        }
    }

    /// A run that panicked or could not start, charged `time_s` (normally
    /// the full time limit, as for a timeout).
    pub fn error(instance: &str, config: &str, time_s: f64) -> Self {
        RunRecord {
            instance: instance.to_string(),
            config: config.to_string(),
            status: RunStatus::Error,
            time_s,
            gap: None,
            nodes: 0,
            lb_first: f64::NEG_INFINITY,
            lb_final: f64::NEG_INFINITY,
            ub_final: f64::INFINITY,
            btbound: 0.0,
            bttime_s: 0.0,
            lb_trajectory: Vec::new(),
        }
    }

    pub fn solved(&self) -> bool {
        self.gap.is_some_and(|g| g <= SOLVED_GAP)
    }
}

pub fn write_runs<W: Write>(w: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_runs<R: Read>(r: R) -> csv::Result<Vec<RunRecord>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// `elapsed_s,lb` rows for one run.
pub fn write_trajectory<W: Write>(w: W, traj: &[(f64, f64)]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["elapsed_s", "lb"])?;
    for (t, lb) in traj {
        wr.write_record([t.to_string(), lb.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunRecord {
        RunRecord {
            instance: "a".into(),
            config: "baseline".into(),
            status: RunStatus::Timelimit,
            time_s: 1.5,
            gap: Some(0.25),
            nodes: 7,
            lb_first: -2.0,
            lb_final: -1.0,
            ub_final: -0.75,
            btbound: 0.1,
            bttime_s: 0.01,
            lb_trajectory: Vec::new(),
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let mut rows = vec![sample(), RunRecord::error("b", "socp", 0.0)];
        rows[1].gap = None;
        let mut buf = Vec::new();
        write_runs(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "instance,config,status,time_s,gap,nodes,lb_first,lb_final,ub_final,btbound,bttime_s\n"
        ));
        assert!(text.contains(",timelimit,"));
        assert!(text.contains("b,socp,error,0.0,,0,-inf,-inf,inf,"), "{text}");
        assert_eq!(read_runs(&buf[..]).unwrap(), rows);
    }
}
