//! Forest and selector behavior on synthetic data with known structure.

use polyrlt_bench::metrics::{compute_metrics, Metric};
use polyrlt_bench::record::{RunRecord, RunStatus};
use polyrlt_learn::features::{FeatureVector, NUM_FEATURES};
use polyrlt_learn::qrf::{Forest, ForestParams};
use polyrlt_learn::select::{oob_selections, oracle, select_all, selected_records, train_model, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| rng.gen::<f64>()).collect()).collect()
}

#[test]
fn oob_recovers_a_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = uniform_rows(&mut rng, 300, 4);
    let y: Vec<f64> = x.iter().map(|r| if r[0] < 0.5 { 1.0 } else { 10.0 }).collect();
    let f = Forest::train(&x, &y, &ForestParams { num_trees: 200, tau: 0.5, seed: 1, ..Default::default() }).unwrap();
    let mut checked = 0;
    for (i, r) in x.iter().enumerate() {
        if (r[0] - 0.5).abs() > 0.1 {
            assert_eq!(f.predict_oob(i, r), y[i], "x0 = {}", r[0]);
            checked += 1;
        }
    }
    assert!(checked > 200);
}

#[test]
fn median_of_symmetric_noise() {
    // y = 5 + U(−1, 1), unrelated to x: the τ = 0.5 prediction estimates 5
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = uniform_rows(&mut rng, 400, 3);
    let y: Vec<f64> = (0..400).map(|_| 5.0 + rng.gen_range(-1.0..1.0)).collect();
    let f = Forest::train(&x, &y, &ForestParams { num_trees: 200, tau: 0.5, seed: 2, ..Default::default() }).unwrap();
    // each prediction is the median of a few dozen nearby samples, so
    // individual values scatter; their average must not
    let preds: Vec<f64> = uniform_rows(&mut rng, 100, 3).iter().map(|q| f.predict(q)).collect();
    let mean = preds.iter().sum::<f64>() / preds.len() as f64;
    assert!((mean - 5.0).abs() < 0.1, "{mean}");
    assert!(preds.iter().all(|p| (p - 5.0).abs() < 0.8));
    let lo = Forest::train(&x, &y, &ForestParams { num_trees: 200, tau: 0.1, seed: 2, ..Default::default() }).unwrap();
    assert!(lo.predict(&[0.5; 3]) < f.predict(&[0.5; 3]));
}

/// Config `⌊3·f0⌋` is ten times faster than the others, up to noise.
fn planted(seed: u64, n: usize) -> (Vec<RunRecord>, Vec<(String, FeatureVector)>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut features = Vec::new();
    let mut truth = Vec::new();
    for i in 0..n {
        let mut f = [0.0; NUM_FEATURES];
        for v in f.iter_mut() {
            *v = rng.gen();
        }
        let best = ((f[0] * 3.0) as usize).min(2);
        truth.push(best);
        let name = format!("inst{i:03}");
        for c in 0..3 {
            let base = if c == best { 1.0 } else { 10.0 };
            let time = base * rng.gen_range(0.7..1.4);
            records.push(RunRecord {
                instance: name.clone(),
                config: format!("cfg{c}"),
                status: RunStatus::Timelimit,
                time_s: time,
                gap: Some(0.5),
                nodes: 10,
                lb_first: 0.0,
                lb_final: 1.0,
                ub_final: 2.0,
                btbound: 0.0,
                bttime_s: 0.0,
                lb_trajectory: Vec::new(),
            });
        }
        features.push((name, f));
    }
    (records, features, truth)
}

#[test]
fn planted_selection() {
    let (records, features, truth) = planted(5, 150);
    let data = Dataset::assemble(&records, &features).unwrap();
    let model = train_model(&data, &ForestParams { seed: 9, ..Default::default() }).unwrap();
    assert_eq!(model.forests[0].trees.len(), 500);

    let sel = oob_selections(&model, &data);
    let hits = sel.iter().zip(&truth).filter(|(s, &t)| s.config == format!("cfg{t}")).count();
    assert!(hits as f64 >= 0.7 * truth.len() as f64, "accuracy {hits}/{}", truth.len());
    assert!(sel.iter().all(|s| model.configs.contains(&s.config)));
    assert!(select_all(&model, &features).iter().all(|s| model.configs.contains(&s.config)));

    // aggregate Pace: oracle ≤ learned ≤ best single config
    let choice: Vec<(String, String)> = sel.iter().map(|s| (s.instance.clone(), s.config.clone())).collect();
    let mut all = records.clone();
    all.extend(selected_records(&records, &choice, "learned"));
    all.extend(selected_records(&records, &oracle(&records).unwrap(), "oracle"));
    let t = compute_metrics(&all).unwrap();
    let pace = |c: &str| t.row(c).unwrap().get(Metric::Pace).unwrap();
    let best_single = ["cfg0", "cfg1", "cfg2"].iter().map(|c| pace(c)).fold(f64::INFINITY, f64::min);
    assert!(pace("oracle") <= pace("learned"));
    assert!(pace("learned") <= best_single, "{} vs {}", pace("learned"), best_single);
}

#[test]
fn oracle_is_pointwise_best() {
    let (records, _, _) = planted(6, 40);
    for (inst, c) in oracle(&records).unwrap() {
        let chosen = records.iter().find(|r| r.instance == inst && r.config == c).unwrap();
        assert!(records.iter().filter(|r| r.instance == inst).all(|r| chosen.time_s <= r.time_s));
    }
}

#[test]
fn dominant_config_always_selected() {
    let (mut records, features, _) = planted(7, 60);
    for r in records.iter_mut().filter(|r| r.config == "cfg1") {
        r.time_s = 0.01;
    }
    let data = Dataset::assemble(&records, &features).unwrap();
    let model = train_model(&data, &ForestParams { num_trees: 50, seed: 1, ..Default::default() }).unwrap();
    assert!(oob_selections(&model, &data).iter().all(|s| s.config == "cfg1"));
}
