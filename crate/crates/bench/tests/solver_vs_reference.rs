//! End-to-end solver checks against the brute-force reference.

use polyrlt_bench::gen::{analytic_suite, anchor_point, frozen_suite, generate_instance};
use polyrlt_bench::reference::{reference_optimum, reference_optimum_from};
use polyrlt_core::bnb::{solve, SolveResult, SolveStatus, SolverConfig, BRANCHING_CONFIGS};
use polyrlt_core::Problem;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol || (a - b).abs() <= tol * b.abs()
}

/// Optimal status, a feasible incumbent worth `U`, a lower bound no
/// greater than any known feasible value, and `U` matching the reference.
fn check(name: &str, cfg: &str, prob: &Problem, r: &SolveResult, reference: f64) {
    assert_eq!(r.status, SolveStatus::Optimal, "{name} [{cfg}]");
    let x = r.incumbent.as_ref().unwrap();
    assert!(prob.is_feasible(x, 1e-6), "{name} [{cfg}]: infeasible incumbent");
    assert!((prob.objective.evaluate(x) - r.upper).abs() < 1e-12);
    assert!(r.lower <= reference + 1e-6, "{name} [{cfg}]: LB {} above feasible {reference}", r.lower);
    assert!(
        r.upper <= reference || close(r.upper, reference, 1e-3),
        "{name} [{cfg}]: U {} vs reference {reference}",
        r.upper
    );
    assert!(r.lb_trajectory.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 <= w[1].0));
}

#[test]
fn branching_strategies_match_reference_on_frozen_suite() {
    for spec in frozen_suite() {
        let prob = generate_instance(&spec);
        let reference = reference_optimum_from(&prob, 41, &[anchor_point(&spec)]).unwrap();
        for name in BRANCHING_CONFIGS {
            let cfg: SolverConfig = name.parse().unwrap();
            check(&spec.name(), name, &prob, &solve(&prob, &cfg), reference.value);
        }
    }
}

#[test]
fn analytic_optima() {
    for (name, prob, opt) in analytic_suite() {
        let r = solve(&prob, &SolverConfig::default());
        check(&name, "baseline", &prob, &r, opt + 1e-9);
        assert!(close(r.upper, opt, 1e-3), "{name}: {} vs {opt}", r.upper);
        // the reference agrees with the closed form
        let reference = reference_optimum(&prob, 41).unwrap();
        assert!(close(reference.value, opt, 1e-6), "{name}: reference {}", reference.value);
    }
}

#[test]
fn cuts_change_effort_not_answers() {
    for spec in frozen_suite() {
        let prob = generate_instance(&spec);
        let plain = solve(&prob, &SolverConfig::default());
        let cut = solve(&prob, &"fbbt-ob-nb".parse().unwrap());
        assert_eq!(cut.status, SolveStatus::Optimal);
        assert!(close(plain.upper, cut.upper, 2e-3), "{}: {} vs {}", spec.name(), plain.upper, cut.upper);
    }
}

/// Generated instances with every `≥` right-hand side lowered, so the
/// feasible sets have interior and the trees real depth.
fn loosened(seed: u64, n: usize, degree: u32) -> (Problem, Vec<f64>) {
    let spec = polyrlt_bench::gen::GenSpec { num_vars: n, degree, density: 0.5, seed };
    let mut prob = generate_instance(&spec);
    for c in prob.constraints.iter_mut().skip(1) {
        c.rhs -= 2.0;
    }
    (prob, anchor_point(&spec))
}

#[test]
fn loosened_instances_match_reference() {
    let mut total_nodes = 0;
    for seed in 100..120u64 {
        let n = 2 + (seed % 3) as usize;
        let degree = 2 + (seed % 2) as u32;
        let (prob, anchor) = loosened(seed, n, degree);
        let reference = reference_optimum_from(&prob, 41, &[anchor]).unwrap();
        for name in ["baseline", "bp-mix-0.5", "fbbt-ob-nb"] {
            let r = solve(&prob, &name.parse().unwrap());
            eprintln!("seed {seed} [{name}]: ref {:.6} U {:.6} L {:.6} nodes {}", reference.value, r.upper, r.lower, r.nodes);
            check(&format!("seed {seed}"), name, &prob, &r, reference.value);
            total_nodes += r.nodes;
        }
    }
    assert!(total_nodes > 100, "trees too shallow to exercise branching: {total_nodes}");
}
