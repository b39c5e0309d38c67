//! Feasibility-based bound tightening: forward interval evaluation plus
//! backward inversion of each term, swept to a (tolerance) fixpoint.

use crate::cuts::{ConstraintCut, NbCut, ObCut, PolyCut};
use crate::interval::{monomial_range, Interval};
use crate::poly::{Bounds, Monomial, Polynomial, Problem, Sense};

pub const MAX_SWEEPS: usize = 10;
/// A sweep whose largest relative width reduction is below this ends the loop.
pub const SWEEP_TOL: f64 = 1e-4;
/// Intervals narrower than this are left alone.
pub const WIDTH_FLOOR: f64 = 1e-10;
const TARGET_PAD: f64 = 1e-9;
const RESULT_PAD: f64 = 1e-10;

/// Cuts available to propagation at a node.
#[derive(Clone, Debug, Default)]
pub struct CutPool {
    pub ob_cuts: Vec<ObCut>,
    pub nb_cuts: Vec<NbCut>,
    pub constraint_cuts: Vec<ConstraintCut>,
}

impl CutPool {
    pub fn is_empty(&self) -> bool {
        self.ob_cuts.is_empty() && self.nb_cuts.is_empty() && self.constraint_cuts.is_empty()
    }
}

/// Outcome of [`fbbt_fixpoint`]; `bounds` is `None` when the node is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct FbbtResult {
    pub bounds: Option<Bounds>,
    pub sweeps: usize,
    /// Term propagations performed (a machine-independent work measure).
    pub work: u64,
}

fn pad(v: f64, k: f64) -> f64 {
    k * (1.0 + v.abs())
}

fn widen(i: Interval, k: f64) -> Interval {
    let lo = if i.lo.is_finite() { i.lo - pad(i.lo, k) } else { i.lo };
    let hi = if i.hi.is_finite() { i.hi + pad(i.hi, k) } else { i.hi };
    Interval::new(lo, hi)
}

/// Running interval sum that subtracts single terms exactly even when some
/// endpoints are infinite.
struct IntervalSum {
    lo: f64,
    hi: f64,
    lo_inf: usize,
    hi_inf: usize,
}

impl IntervalSum {
    fn new(parts: &[Interval]) -> Self {
        let mut s = IntervalSum { lo: 0.0, hi: 0.0, lo_inf: 0, hi_inf: 0 };
        for p in parts {
            s.add(*p, 1.0);
        }
        s
    }

    fn add(&mut self, p: Interval, sign: f64) {
        if p.lo.is_finite() {
            self.lo += sign * p.lo;
        } else if sign > 0.0 {
            self.lo_inf += 1;
        } else {
            self.lo_inf -= 1;
        }
        if p.hi.is_finite() {
            self.hi += sign * p.hi;
        } else if sign > 0.0 {
            self.hi_inf += 1;
        } else {
            self.hi_inf -= 1;
        }
    }

    fn without(&self, p: Interval) -> Interval {
        let lo = if p.lo.is_finite() {
            if self.lo_inf > 0 { f64::NEG_INFINITY } else { self.lo - p.lo }
        } else if self.lo_inf > 1 {
            f64::NEG_INFINITY
        } else {
            self.lo
        };
        let hi = if p.hi.is_finite() {
            if self.hi_inf > 0 { f64::INFINITY } else { self.hi - p.hi }
        } else if self.hi_inf > 1 {
            f64::INFINITY
        } else {
            self.hi
        };
        Interval::new(lo, hi.max(lo))
    }

    fn total(&self) -> Interval {
        let lo = if self.lo_inf > 0 { f64::NEG_INFINITY } else { self.lo };
        let hi = if self.hi_inf > 0 { f64::INFINITY } else { self.hi };
        Interval::new(lo, hi.max(lo))
    }
}

/// Tightens `bounds` with `body ∈ target`. Returns `false` when the
/// constraint cannot hold anywhere in the box. `work` counts term visits.
pub fn propagate_constraint(
    body: &Polynomial,
    target: Interval,
    bounds: &mut Bounds,
    work: &mut u64,
) -> bool {
    let constant = body.constant_term();
    let target = widen(target - Interval::point(constant), TARGET_PAD);
    let terms: Vec<(&Monomial, f64)> = body.terms().filter(|(m, _)| !m.is_constant()).collect();
    let mut ranges: Vec<Interval> = terms
        .iter()
        .map(|(m, c)| monomial_range(m, bounds).scale(*c))
        .collect();
    let mut sum = IntervalSum::new(&ranges);
    if sum.total().intersect(&target).is_none() {
        return false;
    }

    for (i, &(m, c)) in terms.iter().enumerate() {
        *work += 1;
        // implied range of the monomial itself
        let term = target - sum.without(ranges[i]);
        let implied = term.scale(1.0 / c);
        for &(v, p) in m.exponents() {
            let current = Interval::of_var(bounds, v);
            if current.width() < WIDTH_FLOOR {
                continue;
            }
            let cofactor = Monomial::from_pairs(
                m.exponents().iter().copied().filter(|&(w, _)| w != v),
            );
            let power = if cofactor.is_constant() {
                Some(implied)
            } else {
                implied.solve_product(&monomial_range(&cofactor, bounds))
            };
            let Some(power) = power else { return false };
            let Some(cand) = widen(power, TARGET_PAD).root_within(p, &current) else {
                return false;
            };
            let cand = widen(cand, RESULT_PAD).intersect(&current).unwrap_or(current);
            bounds.lower[v] = cand.lo;
            bounds.upper[v] = cand.hi;
        }
        let fresh = monomial_range(m, bounds).scale(c);
        sum.add(ranges[i], -1.0);
        sum.add(fresh, 1.0);
        ranges[i] = fresh;
    }
    true
}

fn constraint_target(sense: Sense, rhs: f64) -> Interval {
    match sense {
        Sense::Ge => Interval::at_least(rhs),
        Sense::Eq => Interval::point(rhs),
    }
}

/// Sweeps all constraints of `prob`, the objective cutoff `f(x) ≤ upper`
/// and the pool's cuts (materialized at `upper`) until the box stops
/// shrinking.
pub fn fbbt_fixpoint(prob: &Problem, bounds: &Bounds, pool: &CutPool, upper: Option<f64>) -> FbbtResult {
    let mut cuts: Vec<PolyCut> = Vec::new();
    if let Some(u) = upper {
        cuts.push(PolyCut {
            body: prob.objective.clone(),
            range: Interval::new(f64::NEG_INFINITY, u),
        });
        cuts.extend(pool.ob_cuts.iter().map(|c| c.materialize(u)));
        cuts.extend(pool.constraint_cuts.iter().map(|c| c.materialize(prob, u)));
    }
    let nb: Vec<(usize, Interval)> = match upper {
        Some(u) => pool.nb_cuts.iter().map(|c| (c.var, c.materialize(u))).collect(),
        None => Vec::new(),
    };

    let mut b = bounds.clone();
    let mut work = 0;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let before = b.clone();
        for &(v, range) in &nb {
            let current = Interval::of_var(&b, v);
            let Some(cand) = widen(range, RESULT_PAD).intersect(&current) else {
                return FbbtResult { bounds: None, sweeps, work };
            };
            b.lower[v] = cand.lo;
            b.upper[v] = cand.hi;
        }
        for c in &prob.constraints {
            if !propagate_constraint(&c.body, constraint_target(c.sense, c.rhs), &mut b, &mut work) {
                return FbbtResult { bounds: None, sweeps, work };
            }
        }
        for c in &cuts {
            if !propagate_constraint(&c.body, c.range, &mut b, &mut work) {
                return FbbtResult { bounds: None, sweeps, work };
            }
        }
        let reduction = (0..b.len())
            .filter(|&j| before.width(j) > 0.0)
            .map(|j| (before.width(j) - b.width(j)) / before.width(j))
            .fold(0.0, f64::max);
        if reduction < SWEEP_TOL {
            break;
        }
    }
    FbbtResult { bounds: Some(b), sweeps, work }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Constraint;

    fn xy() -> Polynomial {
        Polynomial::from_terms([(Monomial::from_factors(&[0, 1]), 1.0)])
    }

    #[test]
    fn linear_ge_tightens_both() {
        let body = &Polynomial::var(0) + &Polynomial::var(1);
        let mut b = Bounds::uniform(2, 0.0, 1.0);
        assert!(propagate_constraint(&body, Interval::at_least(1.5), &mut b, &mut 0));
        assert!((b.lower[0] - 0.5).abs() < 1e-8 && (b.lower[1] - 0.5).abs() < 1e-8);
        assert_eq!(b.upper, vec![1.0, 1.0]);
    }

    #[test]
    fn bilinear_ge_tightens_through_zero_endpoint() {
        let mut b = Bounds::uniform(2, 0.0, 1.0);
        assert!(propagate_constraint(&xy(), Interval::at_least(0.5), &mut b, &mut 0));
        assert!((b.lower[0] - 0.5).abs() < 1e-8 && (b.lower[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn square_equality_pins_root() {
        let body = Polynomial::from_terms([(Monomial::from_factors(&[0, 0]), 1.0)]);
        let mut b = Bounds::new(vec![0.0], vec![3.0]);
        assert!(propagate_constraint(&body, Interval::point(4.0), &mut b, &mut 0));
        assert!((b.lower[0] - 2.0).abs() < 1e-8 && (b.upper[0] - 2.0).abs() < 1e-8);
        // grid scan: the only feasible grid point is 2
        for k in 0..=3000 {
            let x = 3.0 * k as f64 / 3000.0;
            if (x * x - 4.0).abs() < 1e-12 {
                assert!(b.contains(&[x], 0.0));
            }
        }
    }

    #[test]
    fn infeasible_constraint_is_empty() {
        let body = &Polynomial::var(0) + &Polynomial::var(1);
        let mut b = Bounds::uniform(2, 0.0, 1.0);
        assert!(!propagate_constraint(&body, Interval::at_least(2.5), &mut b, &mut 0));
    }

    #[test]
    fn no_constraints_one_sweep() {
        let prob = Problem::new(2, Polynomial::var(0), vec![], Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let r = fbbt_fixpoint(&prob, &prob.bounds, &CutPool::default(), None);
        assert_eq!(r.sweeps, 1);
        assert_eq!(r.bounds.unwrap(), prob.bounds);
    }

    #[test]
    fn chain_needs_two_sweeps() {
        // x0 − x1 ≥ 0 listed before x1 ≥ 0.8
        let c0 = Constraint::new(&Polynomial::var(0) - &Polynomial::var(1), Sense::Ge, 0.0);
        let c1 = Constraint::new(Polynomial::var(1), Sense::Ge, 0.8);
        let prob = Problem::new(2, Polynomial::var(0), vec![c0, c1], Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let r = fbbt_fixpoint(&prob, &prob.bounds, &CutPool::default(), None);
        let b = r.bounds.unwrap();
        assert!(r.sweeps >= 2);
        assert!((b.lower[0] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn objective_cutoff_is_used() {
        let prob = Problem::new(
            2,
            &Polynomial::var(0) + &Polynomial::var(1),
            vec![],
            Bounds::uniform(2, 0.0, 1.0),
        )
        .unwrap();
        let b = fbbt_fixpoint(&prob, &prob.bounds, &CutPool::default(), Some(0.5)).bounds.unwrap();
        assert!(b.upper[0] <= 0.5 + 1e-8 && b.upper[1] <= 0.5 + 1e-8);
    }
}
