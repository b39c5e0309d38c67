//! Test-only oracles shared by the integration tests.
#![allow(dead_code)]

use polyrlt_core::lp::LpProblem;
use polyrlt_core::rlt::RowSense;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Outcome of the dense tableau oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleLp {
    Optimal(f64),
    Infeasible,
}

/// Textbook two-phase dense tableau simplex with Bland's rule. Shares no code
/// with the revised simplex under test.
pub fn tableau_oracle(p: &LpProblem) -> OracleLp {
    let n = p.num_cols();
    // x = lo + y, y ≥ 0, plus y_j ≤ hi_j − lo_j rows.
    let mut rows: Vec<(Vec<f64>, RowSense, f64)> = Vec::new();
    for r in &p.rows {
        let mut a = vec![0.0; n];
        let mut shift = 0.0;
        for &(c, v) in &r.coefs {
            a[c] += v;
            shift += v * p.col_lower[c];
        }
        rows.push((a, r.sense, r.rhs - shift));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, RowSense::Le, p.col_upper[j] - p.col_lower[j]));
    }
    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != RowSense::Eq).count();
    // columns: y (n), slacks (nslack), artificials (m), rhs
    let width = n + nslack + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let mut s = 0;
    for (i, (a, sense, b)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(a);
        match sense {
            RowSense::Ge => {
                row[n + s] = -1.0;
                s += 1;
            }
            RowSense::Le => {
                row[n + s] = 1.0;
                s += 1;
            }
            RowSense::Eq => {}
        }
        row[width - 1] = *b;
        if *b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        row[n + nslack + i] = 1.0;
        basis[i] = n + nslack + i;
        t[i] = row;
    }

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| {
        loop {
            // reduced costs d_k = c_k − c_Bᵀ column_k
            let mut enter = None;
            for k in 0..allowed {
                if basis.contains(&k) {
                    continue;
                }
                let d = cost[k] - (0..m).map(|i| cost[basis[i]] * t[i][k]).sum::<f64>();
                if d < -1e-10 {
                    enter = Some(k);
                    break;
                }
            }
            let Some(q) = enter else { return };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if t[i][q] > 1e-10 {
                    let ratio = t[i][width - 1] / t[i][q];
                    match leave {
                        Some((li, lr))
                            if ratio > lr + 1e-12
                                || (ratio > lr - 1e-12 && basis[i] > basis[li]) => {}
                        _ => leave = Some((i, ratio)),
                    }
                }
            }
            let (r, _) = leave.expect("bounded oracle LP");
            let piv = t[r][q];
            for v in t[r].iter_mut() {
                *v /= piv;
            }
            for i in 0..m {
                if i != r {
                    let f = t[i][q];
                    if f != 0.0 {
                        for k in 0..width {
                            t[i][k] -= f * t[r][k];
                        }
                    }
                }
            }
            basis[r] = q;
        }
    };

    let mut phase1 = vec![0.0; width - 1];
    for c in phase1.iter_mut().skip(n + nslack) {
        *c = 1.0;
    }
    run(&mut t, &mut basis, &phase1, width - 1);
    let infeas: f64 = (0..m)
        .filter(|&i| basis[i] >= n + nslack)
        .map(|i| t[i][width - 1])
        .sum();
    if infeas > 1e-7 {
        return OracleLp::Infeasible;
    }
    let mut phase2 = vec![0.0; width - 1];
    phase2[..n].copy_from_slice(&p.objective);
    run(&mut t, &mut basis, &phase2, n + nslack);
    let mut y = vec![0.0; n + nslack + m];
    for i in 0..m {
        y[basis[i]] = t[i][width - 1];
    }
    let obj: f64 = (0..n)
        .map(|j| p.objective[j] * (y[j] + p.col_lower[j]))
        .sum();
    OracleLp::Optimal(obj)
}

/// Random bounded LP with `rows × cols` density-0.5 constraints. When
/// `feasible_anchor` is set the rhs values are taken at a random box point
/// so the LP is feasible.
pub fn random_lp(rng: &mut ChaCha8Rng, rows: usize, cols: usize, feasible_anchor: bool) -> LpProblem {
    let mut p = LpProblem::new(cols);
    for j in 0..cols {
        p.objective[j] = rng.gen_range(-5.0..5.0);
        p.col_lower[j] = rng.gen_range(-1.0..0.5);
        p.col_upper[j] = p.col_lower[j] + rng.gen_range(0.0..2.0);
    }
    let anchor: Vec<f64> = (0..cols)
        .map(|j| rng.gen_range(p.col_lower[j]..=p.col_upper[j]))
        .collect();
    for _ in 0..rows {
        let mut coefs = Vec::new();
        for j in 0..cols {
            if rng.gen_bool(0.5) {
                coefs.push((j, rng.gen_range(-3.0..3.0)));
            }
        }
        let act: f64 = coefs.iter().map(|&(c, a)| a * anchor[c]).sum();
        let sense = match rng.gen_range(0..3) {
            0 => RowSense::Ge,
            1 => RowSense::Le,
            _ => RowSense::Eq,
        };
        let rhs = if feasible_anchor {
            match sense {
                RowSense::Ge => act - rng.gen_range(0.0..1.0),
                RowSense::Le => act + rng.gen_range(0.0..1.0),
                RowSense::Eq => act,
            }
        } else {
            rng.gen_range(-3.0..3.0)
        };
        p.add_row(coefs, sense, rhs);
    }
    p
}

use polyrlt_core::{Bounds, Constraint, Monomial, Polynomial, Problem, Sense};

/// Random polynomial with `terms` monomials of degree 1..=`degree`.
pub fn random_poly(rng: &mut ChaCha8Rng, n: usize, degree: u32, terms: usize) -> Polynomial {
    let mut p = Polynomial::zero();
    for _ in 0..terms {
        let d = rng.gen_range(1..=degree);
        let factors: Vec<usize> = (0..d).map(|_| rng.gen_range(0..n)).collect();
        p.add_term(Monomial::from_factors(&factors), rng.gen_range(-1.0..1.0));
    }
    p
}

/// Random instance over `[0,1]^n` feasible at a hidden anchor point; with
/// `with_eq` the first constraint is an equality through the anchor.
pub fn random_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    degree: u32,
    num_ge: usize,
    with_eq: bool,
) -> Problem {
    let anchor: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
    let objective = random_poly(rng, n, degree, 2 * n);
    let mut constraints = Vec::new();
    if with_eq {
        let body = random_poly(rng, n, degree, n + 1);
        let rhs = body.evaluate(&anchor);
        constraints.push(Constraint::new(body, Sense::Eq, rhs));
    }
    for _ in 0..num_ge {
        let body = random_poly(rng, n, degree, n + 1);
        let rhs = body.evaluate(&anchor) - rng.gen_range(0.0..0.3);
        constraints.push(Constraint::new(body, Sense::Ge, rhs));
    }
    Problem::new(n, objective, constraints, Bounds::uniform(n, 0.0, 1.0)).unwrap()
}

/// Up to `count` points of `bounds` feasible for `prob` (equalities solved
/// along one variable by scan + bisection), from at most `tries` draws.
pub fn sample_feasible(
    rng: &mut ChaCha8Rng,
    prob: &Problem,
    bounds: &Bounds,
    count: usize,
    tries: usize,
) -> Vec<Vec<f64>> {
    let eq = prob.constraints.iter().find(|c| c.sense == Sense::Eq);
    let mut out = Vec::new();
    for _ in 0..tries {
        if out.len() >= count {
            break;
        }
        let mut x: Vec<f64> = (0..prob.num_vars())
            .map(|j| rng.gen_range(bounds.lower[j]..=bounds.upper[j]))
            .collect();
        if let Some(c) = eq {
            let vars: Vec<usize> = c.body.monomials().flat_map(|m| m.support()).collect();
            if vars.is_empty() {
                continue;
            }
            let v = vars[rng.gen_range(0..vars.len())];
            let f = |t: f64, x: &mut Vec<f64>| {
                x[v] = t;
                c.body.evaluate(x) - c.rhs
            };
            let (lo, hi) = (bounds.lower[v], bounds.upper[v]);
            let steps = 64;
            let mut roots = Vec::new();
            let mut prev_t = lo;
            let mut prev = f(lo, &mut x);
            for k in 1..=steps {
                let t = lo + (hi - lo) * k as f64 / steps as f64;
                let cur = f(t, &mut x);
                if prev == 0.0 {
                    roots.push(prev_t);
                } else if prev * cur < 0.0 {
                    let (mut a, mut b, mut fa) = (prev_t, t, prev);
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        let fm = f(m, &mut x);
                        if fa * fm <= 0.0 {
                            b = m;
                        } else {
                            a = m;
                            fa = fm;
                        }
                    }
                    roots.push(0.5 * (a + b));
                }
                prev_t = t;
                prev = cur;
            }
            if roots.is_empty() {
                continue;
            }
            x[v] = roots[rng.gen_range(0..roots.len())];
        }
        if prob.is_feasible(&x, 1e-9) {
            out.push(x);
        }
    }
    out
}
