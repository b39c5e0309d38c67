//! Subcommand implementations. Exit codes: 0 success, 1 runtime or data
//! failure (solver panic, unreadable or malformed files), 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use polyrlt_bench::gen::{generate_instance, GenSpec};
use polyrlt_bench::metrics::{compute_metrics, ranking_report, within_5pct, write_metrics, write_ranking, write_within5, Metric};
use polyrlt_bench::record::{read_runs, write_runs, write_trajectory, RunRecord};
use polyrlt_bench::runner::{run_grid, NamedConfig, NamedInstance};
use polyrlt_core::bnb::{solve, SolverConfig};
use polyrlt_core::clock::ClockKind;
use polyrlt_learn::features::{extract_features, read_features, write_features, NUM_FEATURES};
use polyrlt_learn::qrf::{ForestParams, Model, DEFAULT_TAU, DEFAULT_TREES};
use polyrlt_learn::select::{oob_selections, select_all, train_model, write_selections, Dataset};

use crate::format::{parse_instance, render_instance, Instance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(name = "polyrlt", version, about = "RLT branch-and-bound for box-constrained polynomial programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one POLY1 instance.
    Solve {
        file: PathBuf,
        /// `+`-joined configuration, e.g. `socp+fbbt-nb+bp-mix-0.5`.
        #[arg(long, default_value = "baseline")]
        config: String,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        node_limit: Option<usize>,
        /// Measure time on the wall clock instead of the deterministic work clock.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Run every configuration on every `*.poly` file in a directory.
    Bench {
        dir: PathBuf,
        /// Comma-separated configuration names.
        #[arg(long, value_delimiter = ',', default_value = "baseline")]
        configs: Vec<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        /// Accepted for reproducible scripts; the solver is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; defaults to `<dir>/runs.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-run `elapsed_s,lb` trajectory files.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        wall_clock: bool,
    },
    /// Write random instances.
    Gen {
        #[arg(long)]
        nvars: usize,
        #[arg(long)]
        degree: u32,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract instance features from every `*.poly` file in a directory.
    Features {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one quantile forest per configuration on Pace.
    Train {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_TREES)]
        trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write out-of-bag selections for the training instances.
        #[arg(long)]
        oob: Option<PathBuf>,
    },
    /// Pick a configuration per instance with a trained model.
    Select {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate runs; also writes `within5.csv` and `ranking.csv` next to `--out`.
    Metrics {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure with its exit code.
struct Fail(i32, String);

type Res = Result<(), Fail>;

fn data<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> Fail {
    move |e| Fail(EXIT_FAILURE, format!("{ctx}: {e}"))
}

fn usage<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> Fail {
    move |e| Fail(EXIT_USAGE, format!("{ctx}: {e}"))
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let r = match cli.cmd {
        Cmd::Solve { file, config, time_limit, node_limit, wall_clock } => {
            cmd_solve(&file, &config, time_limit, node_limit, wall_clock)
        }
        Cmd::Bench { dir, configs, workers, time_limit, seed: _, out, trajectories, wall_clock } => {
            cmd_bench(&dir, &configs, workers, time_limit, out, trajectories, wall_clock)
        }
        Cmd::Gen { nvars, degree, density, count, seed, out } => cmd_gen(nvars, degree, density, count, seed, &out),
        Cmd::Features { dir, out } => cmd_features(&dir, &out),
        Cmd::Train { runs, features, tau, trees, seed, out, oob } => {
            cmd_train(&runs, &features, tau, trees, seed, &out, oob)
        }
        Cmd::Select { model, features, out } => cmd_select(&model, &features, &out),
        Cmd::Metrics { runs, out } => cmd_metrics(&runs, &out),
    };
    match r {
        Ok(()) => EXIT_OK,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn config(name: &str, time_limit: f64, wall_clock: bool) -> Result<SolverConfig, Fail> {
    let mut c: SolverConfig = name.parse().map_err(usage(format!("configuration `{name}`")))?;
    if !(time_limit > 0.0) {
        return Err(Fail(EXIT_USAGE, "time limit must be positive".into()));
    }
    c.time_limit = time_limit;
    if wall_clock {
        c.clock = ClockKind::Wall;
    }
    Ok(c)
}

fn load_instance(path: &Path) -> Result<Instance, Fail> {
    let text = fs::read_to_string(path).map_err(data(path.display()))?;
    parse_instance(&text).map_err(data(path.display()))
}

/// `*.poly` files sorted by name, with their stems as instance ids.
fn list_instances(dir: &Path) -> Result<Vec<(String, PathBuf)>, Fail> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(data(dir.display()))? {
        let p = entry.map_err(data(dir.display()))?.path();
        if p.extension().is_some_and(|e| e == "poly") {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            out.push((stem, p));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Fail(EXIT_FAILURE, format!("no .poly files in {}", dir.display())));
    }
    Ok(out)
}

fn create(path: &Path) -> Result<fs::File, Fail> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(data(parent.display()))?;
    }
    fs::File::create(path).map_err(data(path.display()))
}

fn cmd_solve(file: &Path, name: &str, time_limit: f64, node_limit: Option<usize>, wall_clock: bool) -> Res {
    let mut cfg = config(name, time_limit, wall_clock)?;
    cfg.node_limit = node_limit;
    let inst = load_instance(file)?;
    let r = std::panic::catch_unwind(|| solve(&inst.problem, &cfg))
        .map_err(|_| Fail(EXIT_FAILURE, "solver failed".into()))?;
    println!("status {}", r.status);
    println!("objective {}", r.upper);
    println!("lower_bound {}", r.lower);
    match r.gap() {
        Some(g) => println!("gap {g:.3e}"),
        None => println!("gap none"),
    }
    println!("nodes {}", r.nodes);
    println!("time_s {}", r.elapsed);
    if let Some(y) = &r.incumbent {
        for (j, v) in inst.to_original(y).iter().enumerate() {
            println!("x{j} {v}");
        }
    }
    Ok(())
}

fn cmd_bench(
    dir: &Path,
    names: &[String],
    workers: usize,
    time_limit: f64,
    out: Option<PathBuf>,
    trajectories: Option<PathBuf>,
    wall_clock: bool,
) -> Res {
    let configs = names
        .iter()
        .map(|n| Ok(NamedConfig { name: n.clone(), config: config(n, time_limit, wall_clock)? }))
        .collect::<Result<Vec<_>, Fail>>()?;
    let instances = list_instances(dir)?
        .into_iter()
        .map(|(name, p)| Ok(NamedInstance { name, problem: load_instance(&p)?.problem }))
        .collect::<Result<Vec<_>, Fail>>()?;
    eprintln!("running {} instances x {} configs on {} workers", instances.len(), configs.len(), workers.max(1));
    let records = run_grid(&instances, &configs, workers);
    let out = out.unwrap_or_else(|| dir.join("runs.csv"));
    write_runs(create(&out)?, &records).map_err(data(out.display()))?;
    if let Some(tdir) = trajectories {
        for r in &records {
            let p = tdir.join(format!("{}__{}.csv", r.instance, r.config));
            write_trajectory(create(&p)?, &r.lb_trajectory).map_err(data(p.display()))?;
        }
    }
    let errors = records.iter().filter(|r| r.status == polyrlt_bench::record::RunStatus::Error).count();
    if errors > 0 {
        return Err(Fail(EXIT_FAILURE, format!("{errors} run(s) failed; see {}", out.display())));
    }
    Ok(())
}

fn cmd_gen(nvars: usize, degree: u32, density: f64, count: u64, seed: u64, out: &Path) -> Res {
    if nvars == 0 || degree < 2 || !(density > 0.0 && density <= 1.0) {
        return Err(Fail(EXIT_USAGE, "need --nvars ≥ 1, --degree ≥ 2 and --density in (0, 1]".into()));
    }
    fs::create_dir_all(out).map_err(data(out.display()))?;
    for s in seed..seed + count {
        let spec = GenSpec { num_vars: nvars, degree, density, seed: s };
        let p = out.join(format!("{}.poly", spec.name()));
        fs::write(&p, render_instance(&generate_instance(&spec))).map_err(data(p.display()))?;
    }
    Ok(())
}

fn cmd_features(dir: &Path, out: &Path) -> Res {
    let rows = list_instances(dir)?
        .into_iter()
        .map(|(name, p)| Ok((name, extract_features(&load_instance(&p)?.problem))))
        .collect::<Result<Vec<_>, Fail>>()?;
    write_features(create(out)?, &rows).map_err(data(out.display()))
}

fn read_runs_file(path: &Path) -> Result<Vec<RunRecord>, Fail> {
    read_runs(fs::File::open(path).map_err(data(path.display()))?).map_err(data(path.display()))
}

fn cmd_train(runs: &Path, features: &Path, tau: f64, trees: usize, seed: u64, out: &Path, oob: Option<PathBuf>) -> Res {
    if !(tau > 0.0 && tau < 1.0) || trees == 0 {
        return Err(Fail(EXIT_USAGE, "need --tau in (0, 1) and --trees ≥ 1".into()));
    }
    let records = read_runs_file(runs)?;
    let feats = read_features(fs::File::open(features).map_err(data(features.display()))?).map_err(data(features.display()))?;
    let data_set = Dataset::assemble(&records, &feats).map_err(data("training data"))?;
    let params = ForestParams { num_trees: trees, tau, seed, ..ForestParams::default() };
    let model = train_model(&data_set, &params).map_err(data("training"))?;
    fs::write(out, model.to_text()).map_err(data(out.display()))?;
    if let Some(p) = oob {
        let sel = oob_selections(&model, &data_set);
        write_selections(create(&p)?, &model.configs, &sel).map_err(data(p.display()))?;
    }
    Ok(())
}

fn cmd_select(model: &Path, features: &Path, out: &Path) -> Res {
    let text = fs::read_to_string(model).map_err(data(model.display()))?;
    let model = Model::from_text(&text).map_err(data("model"))?;
    if model.forests.iter().any(|f| f.num_features != NUM_FEATURES) {
        return Err(Fail(EXIT_FAILURE, "model was trained on a different feature schema".into()));
    }
    let feats = read_features(fs::File::open(features).map_err(data(features.display()))?).map_err(data(features.display()))?;
    let sel = select_all(&model, &feats);
    write_selections(create(out)?, &model.configs, &sel).map_err(data(out.display()))
}

fn cmd_metrics(runs: &Path, out: &Path) -> Res {
    let records = read_runs_file(runs)?;
    let table = compute_metrics(&records).map_err(data("runs"))?;
    write_metrics(create(out)?, &table).map_err(data(out.display()))?;
    let dir = out.parent().unwrap_or(Path::new(""));
    let w5 = Metric::ALL
        .iter()
        .map(|&m| within_5pct(&records, m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data("runs"))?;
    let p = dir.join("within5.csv");
    write_within5(create(&p)?, &w5).map_err(data(p.display()))?;
    let rank = ranking_report(&records, Metric::Pace).map_err(data("runs"))?;
    let p = dir.join("ranking.csv");
    write_ranking(create(&p)?, &rank).map_err(data(p.display()))?;

    println!("{:<28} {:>6} {:>12} {:>10} {:>12} {:>10} {:>8} {:>8}", "config", "solved", "gap", "time", "pace", "nodes", "btbound", "bttime");
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for r in &table.rows {
        println!(
            "{:<28} {:>6} {:>12} {:>10} {:>12} {:>10} {:>8} {:>8}",
            r.config,
            r.solved,
            cell(r.get(Metric::Gap)),
            cell(r.get(Metric::Time)),
            cell(r.get(Metric::Pace)),
            cell(r.get(Metric::Nodes)),
            cell(r.get(Metric::BtBound)),
            cell(r.get(Metric::BtTime)),
        );
    }
    let c = table.counts;
    println!("{:<28} {:>6} {:>12} {:>10} {:>12} {:>10} {:>8} {:>8}", "(instances)", table.instances, c[0], c[1], c[2], c[3], c[4], c[5]);
    Ok(())
}
