use polyrlt_bench::metrics::{compute_metrics, Grid, Metric};
use polyrlt_bench::record::{RunRecord, RunStatus};
use proptest::prelude::*;

fn grid(cells: &[(f64, Option<f64>, f64)], configs: usize) -> Vec<RunRecord> {
    cells
        .iter()
        .enumerate()
        .map(|(k, &(time, gap, improvement))| RunRecord {
            instance: format!("i{}", k / configs),
            config: format!("c{}", k % configs),
            status: if gap.is_some_and(|g| g <= 1e-3) { RunStatus::Optimal } else { RunStatus::Timelimit },
            time_s: time,
            gap,
            nodes: 1 + (time * 3.0) as usize,
            lb_first: 0.0,
            lb_final: improvement,
            ub_final: 10.0,
            btbound: 0.5,
            bttime_s: 0.1,
            lb_trajectory: Vec::new(),
        })
        .collect()
}

fn cell() -> impl Strategy<Value = (f64, Option<f64>, f64)> {
    (
        0.1f64..20.0,
        prop_oneof![Just(None), Just(Some(0.0)), (0.0f64..1.0).prop_map(Some)],
        0.0f64..3.0,
    )
}

fn cells() -> impl Strategy<Value = (usize, Vec<(f64, Option<f64>, f64)>)> {
    (2usize..5, 1usize..6).prop_flat_map(|(k, n)| (Just(k), prop::collection::vec(cell(), k * n)))
}

proptest! {
    #[test]
    fn scaling_one_configs_times_scales_its_time((k, cs) in cells(), s in 0.5f64..4.0) {
        let base = grid(&cs, k);
        // rescaling can move an instance across the 5 s fast-solve line
        let mut scaled = base.clone();
        for r in scaled.iter_mut().filter(|r| r.config == "c0") {
            r.time_s *= s;
        }
        let same_filter = Grid::new(&base).unwrap().included_instances(Metric::Time)
            == Grid::new(&scaled).unwrap().included_instances(Metric::Time);
        prop_assume!(same_filter);
        let a = compute_metrics(&base).unwrap();
        let b = compute_metrics(&scaled).unwrap();
        if let (Some(t0), Some(t1)) = (a.rows[0].get(Metric::Time), b.rows[0].get(Metric::Time)) {
            prop_assert!((t1 / t0 - s).abs() < 1e-9 * s);
        }
        prop_assert_eq!(a.rows[1].get(Metric::Time), b.rows[1].get(Metric::Time));
    }

    #[test]
    fn filters_ignore_config_labels((k, cs) in cells(), rot in 1usize..4) {
        let base = grid(&cs, k);
        let mut relabeled = base.clone();
        for r in relabeled.iter_mut() {
            let c: usize = r.config[1..].parse().unwrap();
            r.config = format!("c{}", (c + rot) % k);
        }
        let g0 = Grid::new(&base).unwrap();
        let g1 = Grid::new(&relabeled).unwrap();
        for m in Metric::ALL {
            prop_assert_eq!(g0.included_instances(m), g1.included_instances(m));
        }
        let a = compute_metrics(&base).unwrap();
        let b = compute_metrics(&relabeled).unwrap();
        prop_assert_eq!(a.counts, b.counts);
        for row in &a.rows {
            let c: usize = row.config[1..].parse().unwrap();
            let other = b.row(&format!("c{}", (c + rot) % k)).unwrap();
            prop_assert_eq!(row.solved, other.solved);
            prop_assert_eq!(row.values, other.values);
        }
    }

    #[test]
    fn solved_counts_match_optimal_status((k, cs) in cells()) {
        let rs = grid(&cs, k);
        let t = compute_metrics(&rs).unwrap();
        for row in &t.rows {
            let optimal = rs.iter().filter(|r| r.config == row.config && r.status == RunStatus::Optimal).count();
            prop_assert_eq!(row.solved, optimal);
        }
    }
}
