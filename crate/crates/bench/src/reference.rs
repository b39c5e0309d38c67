//! Brute-force reference optimum: grid scan plus local refinement.
//!
//! Slow and heuristic, but independent of the relaxation machinery, so it
//! serves as a cross-check for the branch-and-bound solver on small
//! instances. The returned point is always feasible; its value is an upper
//! bound on the true optimum that is usually tight to ~1e-6.

use polyrlt_core::heuristic::repair_to;
use polyrlt_core::{Problem, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROOT_SCAN: usize = 64;
const KEEP: usize = 12;
/// Violation allowed at reference points; far below the solver's, so the
/// reference cannot profit from tolerance on thin feasible sets.
pub const REFERENCE_TOL: f64 = 1e-10;

/// Best feasible grid points, plus the least-violating infeasible ones as
/// repair starts for thin feasible sets.
#[derive(Default)]
struct Seeds {
    feasible: Vec<Reference>,
    near: Vec<(f64, Vec<f64>)>,
}

impl Seeds {
    fn offer(&mut self, prob: &Problem, x: &[f64]) {
        let viol = prob.max_violation(x);
        if viol <= REFERENCE_TOL {
            keep_smallest(&mut self.feasible, Reference { x: x.to_vec(), value: prob.objective.evaluate(x) }, |r| r.value);
        } else {
            keep_smallest(&mut self.near, (viol, x.to_vec()), |p| p.0);
        }
    }
}

fn keep_smallest<T>(v: &mut Vec<T>, item: T, key: impl Fn(&T) -> f64) {
    if v.len() < KEEP {
        v.push(item);
        return;
    }
    let worst = (0..v.len()).max_by(|&a, &b| key(&v[a]).total_cmp(&key(&v[b]))).unwrap();
    if key(&item) < key(&v[worst]) {
        v[worst] = item;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Best feasible point found over a `per_axis`-point grid, refined by
/// pattern search. `None` if neither the grid nor repairs of its
/// least-violating points yield a feasible point.
pub fn reference_optimum(prob: &Problem, per_axis: usize) -> Option<Reference> {
    reference_optimum_from(prob, per_axis, &[])
}

/// As [`reference_optimum`], with extra known points (e.g. a generator's
/// anchor) as additional starts. Feasible sets can degenerate to a point no
/// grid will hit.
pub fn reference_optimum_from(prob: &Problem, per_axis: usize, extra: &[Vec<f64>]) -> Option<Reference> {
    let mut seeds = Seeds::default();
    for x in extra {
        seeds.offer(prob, x);
    }
    let eq = prob.constraints.iter().find(|c| c.sense == Sense::Eq);
    match eq {
        None => scan(prob, per_axis, None, &mut seeds),
        Some(c) => {
            for v in 0..prob.num_vars() {
                if c.body.monomials().any(|m| m.power_of(v) > 0) {
                    scan(prob, per_axis, Some(v), &mut seeds);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let h0 = 1.0 / (per_axis.max(2) - 1) as f64;
    let mut starts = seeds.feasible;
    for (_, x) in seeds.near {
        if let Some(x) = repair_to(prob, &prob.bounds, &x, REFERENCE_TOL) {
            let value = prob.objective.evaluate(&x);
            starts.push(Reference { x, value });
        }
    }
    starts
        .into_iter()
        .map(|s| refine(prob, s, h0, &mut rng))
        .min_by(|a, b| a.value.total_cmp(&b.value))
}

/// Visits the grid; with a pivot, the pivot coordinate is instead solved
/// from the first equality (every root in range).
fn scan(prob: &Problem, per_axis: usize, pivot: Option<usize>, seeds: &mut Seeds) {
    let n = prob.num_vars();
    let b = &prob.bounds;
    let axes: Vec<usize> = (0..n).filter(|&j| Some(j) != pivot).collect();
    let steps = per_axis.max(2) - 1;
    let mut idx = vec![0usize; axes.len()];
    let mut x = b.lower.clone();
    loop {
        for (k, &j) in axes.iter().enumerate() {
            x[j] = b.lower[j] + b.width(j) * idx[k] as f64 / steps as f64;
        }
        match pivot {
            None => {
                seeds.offer(prob, &x);
            }
            Some(v) => {
                for t in equality_roots(prob, &mut x, v) {
                    x[v] = t;
                    seeds.offer(prob, &x);
                }
            }
        }
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return;
        }
    }
}

/// Roots in `[l_v, u_v]` of the first equality as a function of `x_v`.
fn equality_roots(prob: &Problem, x: &mut [f64], v: usize) -> Vec<f64> {
    let c = prob.constraints.iter().find(|c| c.sense == Sense::Eq).unwrap();
    let (lo, hi) = (prob.bounds.lower[v], prob.bounds.upper[v]);
    let mut g = |t: f64| {
        x[v] = t;
        c.body.evaluate(x) - c.rhs
    };
    let mut roots = Vec::new();
    let mut t0 = lo;
    let mut g0 = g(lo);
    if g0 == 0.0 {
        roots.push(lo);
    }
    for k in 1..=ROOT_SCAN {
        let t1 = lo + (hi - lo) * k as f64 / ROOT_SCAN as f64;
        let g1 = g(t1);
        if g1 == 0.0 {
            roots.push(t1);
        } else if g0 * g1 < 0.0 {
            let (mut a, mut b, mut ga) = (t0, t1, g0);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let gm = g(m);
                if gm * ga <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    ga = gm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        t0 = t1;
        g0 = g1;
    }
    roots
}

/// Pattern search over coordinate and random directions; each trial point
/// is pulled back onto the feasible set before comparison.
fn refine(prob: &Problem, start: Reference, h0: f64, rng: &mut ChaCha8Rng) -> Reference {
    let n = prob.num_vars();
    let b = &prob.bounds;
    let mut best = start;
    let mut h = h0;
    while h > 1e-9 {
        let mut improved = false;
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for j in 0..n {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[j] = s;
                dirs.push(d);
            }
        }
        for _ in 0..2 * n {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            dirs.push(d.into_iter().map(|a| a / norm).collect());
        }
        for d in dirs {
            let trial: Vec<f64> = (0..n).map(|j| best.x[j] + h * d[j]).collect();
            let trial = b.clamp(&trial);
            let Some(x) = (if prob.is_feasible(&trial, REFERENCE_TOL) {
                Some(trial)
            } else {
                repair_to(prob, b, &trial, REFERENCE_TOL)
            }) else {
                continue;
            };
            let value = prob.objective.evaluate(&x);
            if value < best.value - 1e-12 {
                best = Reference { x, value };
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}
