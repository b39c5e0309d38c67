mod common;

use common::{random_problem, sample_feasible};
use polyrlt_core::clock::{Clock, ClockKind};
use polyrlt_core::cuts::{
    certified_node_bound, derive_constraint_cuts, derive_nb_cuts, NbSide,
};
use polyrlt_core::lp::{solve_lp, LpProblem};
use polyrlt_core::obbt::{run_obbt, ObbtOptions};
use polyrlt_core::rlt::{build_relaxation, RowSense};
use polyrlt_core::{compute_jsets, Bounds, Constraint, Monomial, Polynomial, Problem, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quantile_objective(prob: &Problem, pts: &[Vec<f64>], q: f64) -> f64 {
    let mut f: Vec<f64> = pts.iter().map(|x| prob.objective.evaluate(x)).collect();
    f.sort_by(f64::total_cmp);
    f[((f.len() - 1) as f64 * q) as usize]
}

#[test]
fn obbt_cuts_hold_on_feasible_and_relaxation_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut relax_points = 0;
    let mut cuts_seen = 0;
    for case in 0..25 {
        let n = rng.gen_range(2..=4);
        let prob = random_problem(&mut rng, n, 3, 2, case % 3 == 0);
        let pts = sample_feasible(&mut rng, &prob, &prob.bounds, 100, 10_000);
        if pts.len() < 5 {
            continue;
        }
        let upper = quantile_objective(&prob, &pts, 0.5);
        let jsets = compute_jsets(&prob);
        let (relax, map) = build_relaxation(&prob, &prob.bounds, &jsets);
        for sequential in [true, false] {
            let opts = ObbtOptions { sequential, ..Default::default() };
            let mut clock = Clock::new(ClockKind::Work);
            let r = run_obbt(&prob, &relax, &map, &jsets, &prob.bounds, Some(upper), &opts, &mut clock);
            let good: Vec<&Vec<f64>> =
                pts.iter().filter(|x| prob.objective.evaluate(x) <= upper).collect();
            let lifted: Vec<Vec<f64>> = good.iter().map(|x| map.lift(x)).collect();
            for cut in &r.ob_cuts {
                cuts_seen += 1;
                assert!(cut.mu >= 0.0);
                assert!(cut.rhs_at(upper - 1.0) >= cut.rhs_at(upper));
                let pc = cut.materialize(upper);
                for x in &good {
                    assert!(pc.holds(x, 1e-6), "case {case}: polynomial cut violated");
                }
                let row = cut.linear_row(&map, upper).unwrap();
                // convex combinations of lifted feasible points satisfy the
                // relaxation and the cutoff, so they must satisfy the cut
                for _ in 0..40 {
                    let k = rng.gen_range(1..=3usize.min(lifted.len()));
                    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    let mut z = vec![0.0; map.len()];
                    for wi in &w {
                        let p = &lifted[rng.gen_range(0..lifted.len())];
                        for (zc, pc) in z.iter_mut().zip(p) {
                            *zc += wi / total * pc;
                        }
                    }
                    assert!(row.expr.dot(&z) >= row.rhs - 1e-6, "case {case}: linear cut violated");
                    relax_points += 1;
                }
            }
        }
    }
    assert!(cuts_seen > 50, "only {cuts_seen} cuts derived");
    assert!(relax_points > 2000);
}

#[test]
fn cut_at_derivation_upper_reproduces_obbt_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let mut checked = 0;
    for case in 0..20 {
        let prob = random_problem(&mut rng, 3, 2, 2, false);
        let pts = sample_feasible(&mut rng, &prob, &prob.bounds, 50, 5_000);
        if pts.is_empty() {
            continue;
        }
        let upper = quantile_objective(&prob, &pts, 0.5);
        let jsets = compute_jsets(&prob);
        let (relax, map) = build_relaxation(&prob, &prob.bounds, &jsets);
        let opts = ObbtOptions { sequential: false, ..Default::default() };
        let mut clock = Clock::new(ClockKind::Work);
        let r = run_obbt(&prob, &relax, &map, &jsets, &prob.bounds, Some(upper), &opts, &mut clock);
        for cut in &r.ob_cuts {
            let row = cut.linear_row(&map, upper).unwrap();
            let mut lp = LpProblem::new(relax.num_cols);
            lp.col_lower = relax.col_lower.clone();
            lp.col_upper = relax.col_upper.clone();
            lp.add_row(row.expr.terms.clone(), RowSense::Ge, row.rhs);
            let k = cut.var;
            let col = map.column_of(&Monomial::var(k)).unwrap();
            if cut.sense == RowSense::Ge {
                lp.objective[col] = 1.0;
                let v = solve_lp(&lp, None).objective;
                assert!(v >= r.bounds.lower[k] - 1e-6, "case {case}: {v} < {}", r.bounds.lower[k]);
            } else {
                lp.objective[col] = -1.0;
                let v = -solve_lp(&lp, None).objective;
                assert!(v <= r.bounds.upper[k] + 1e-6, "case {case}: {v} > {}", r.bounds.upper[k]);
            }
            checked += 1;
        }
    }
    assert!(checked > 20);
}

fn random_subbox_around(rng: &mut ChaCha8Rng, x: &[f64]) -> Bounds {
    let lo = x.iter().map(|&v| (v - rng.gen_range(0.0..0.4)).max(0.0)).collect();
    let hi = x.iter().map(|&v| (v + rng.gen_range(0.0..0.4)).min(1.0)).collect();
    Bounds::new(lo, hi)
}

#[test]
fn node_cuts_hold_on_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let (mut nb_seen, mut con_seen, mut eq_seen) = (0, 0, 0);
    for case in 0..120 {
        let n = rng.gen_range(2..=3);
        let prob = random_problem(&mut rng, n, 3, 2, case % 2 == 0);
        let seed_pts = sample_feasible(&mut rng, &prob, &prob.bounds, 1, 5_000);
        let Some(seed) = seed_pts.first() else { continue };
        let sub = random_subbox_around(&mut rng, seed);
        let pts = sample_feasible(&mut rng, &prob, &sub, 200, 20_000);
        if pts.len() < 5 {
            continue;
        }
        let jsets = compute_jsets(&prob);
        let (relax, _) = build_relaxation(&prob, &sub, &jsets);
        let lp = LpProblem::from_relaxation(&relax);
        let res = solve_lp(&lp, None);
        assert!(res.is_optimal(), "case {case}");
        let node_lower = certified_node_bound(&lp, &res, relax.objective_constant);
        let upper = quantile_objective(&prob, &pts, 0.3).max(node_lower);
        let nb = derive_nb_cuts(&res, &sub, node_lower);
        let con = derive_constraint_cuts(&prob, &relax, &res, node_lower);
        nb_seen += nb.len();
        con_seen += con.len();
        eq_seen += con.iter().filter(|c| prob.constraints[c.constraint].sense == Sense::Eq).count();
        for x in pts.iter().filter(|x| prob.objective.evaluate(x) <= upper) {
            for c in &nb {
                let iv = c.materialize(upper);
                assert!(iv.lo - 1e-6 <= x[c.var] && x[c.var] <= iv.hi + 1e-6, "case {case}: {c:?}");
            }
            for c in &con {
                assert!(c.materialize(&prob, upper).holds(x, 1e-6), "case {case}: {c:?}");
            }
        }
        // the node's own LP optimum is never cut off
        for c in &nb {
            let iv = c.materialize(upper);
            assert!(iv.contains(res.x[c.var]) || (res.x[c.var] - iv.lo).abs() < 1e-9);
        }
    }
    assert!(nb_seen > 20, "nb cuts: {nb_seen}");
    assert!(con_seen > 10, "constraint cuts: {con_seen}");
    assert!(eq_seen > 0, "no equality-row cuts exercised");
}

#[test]
fn equality_cut_direction_matches_scan() {
    // min x0 + x1  s.t.  x0·x1 = 0.25 over [0,1]²: the equality is what
    // keeps the LP from reaching 0, so its dual is nonzero.
    let body = Polynomial::from_terms([(Monomial::from_factors(&[0, 1]), 1.0)]);
    let prob = Problem::new(
        2,
        &Polynomial::var(0) + &Polynomial::var(1),
        vec![Constraint::new(body, Sense::Eq, 0.25)],
        Bounds::uniform(2, 0.0, 1.0),
    )
    .unwrap();
    let jsets = compute_jsets(&prob);
    let (relax, _) = build_relaxation(&prob, &prob.bounds, &jsets);
    let lp = LpProblem::from_relaxation(&relax);
    let res = solve_lp(&lp, None);
    let node_lower = certified_node_bound(&lp, &res, relax.objective_constant);
    let cuts = derive_constraint_cuts(&prob, &relax, &res, node_lower);
    assert_eq!(cuts.len(), 1);
    // brute-force scan of the curve x1 = 0.25/x0 with objective ≤ U
    let upper = 1.2;
    let pc = cuts[0].materialize(&prob, upper);
    for k in 0..=10_000 {
        let x0 = 0.25 + 0.75 * k as f64 / 10_000.0;
        let x = [x0, 0.25 / x0];
        if x[0] + x[1] <= upper {
            assert!(pc.holds(&x, 1e-9));
        }
    }
}

#[test]
fn nb_cut_sides_follow_active_bounds() {
    // min −x0 + x1 over [0,1]² (no products): x0 at upper, x1 at lower.
    let prob = Problem::new(
        2,
        &Polynomial::var(1) - &Polynomial::var(0),
        vec![],
        Bounds::uniform(2, 0.0, 1.0),
    )
    .unwrap();
    let (relax, _) = build_relaxation(&prob, &prob.bounds, &compute_jsets(&prob));
    let lp = LpProblem::from_relaxation(&relax);
    let res = solve_lp(&lp, None);
    let cuts = derive_nb_cuts(&res, &prob.bounds, -1.0);
    assert_eq!(cuts.len(), 2);
    assert_eq!(cuts[0].side, NbSide::FromUpper);
    assert_eq!(cuts[1].side, NbSide::FromLower);
    // with U − L = 0.2: x0 ≥ 0.8, x1 ≤ 0.2
    assert!((cuts[0].materialize(-0.8).lo - 0.8).abs() < 1e-12);
    assert!((cuts[1].materialize(-0.8).hi - 0.2).abs() < 1e-12);
}
