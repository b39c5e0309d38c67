//! Closed real intervals. Endpoints may be infinite while propagating
//! one-sided constraints; boxes handed back to callers are always finite.

use std::ops::{Add, Mul, Neg, Sub};

use crate::poly::{Bounds, Monomial, Polynomial};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

// 0·∞ is taken as 0: a zero factor pins the product.
fn mul_end(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn entire() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn at_least(v: f64) -> Self {
        Self {
            lo: v,
            hi: f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn scale(&self, k: f64) -> Interval {
        let a = mul_end(self.lo, k);
        let b = mul_end(self.hi, k);
        Interval::new(a.min(b), a.max(b))
    }

    /// `self^p`; even powers of a sign-straddling interval start at 0.
    pub fn powi(&self, p: u32) -> Interval {
        if p == 0 {
            return Interval::point(1.0);
        }
        let a = self.lo.powi(p as i32);
        let b = self.hi.powi(p as i32);
        if p % 2 == 1 {
            Interval::new(a, b)
        } else if self.lo >= 0.0 {
            Interval::new(a, b)
        } else if self.hi <= 0.0 {
            Interval::new(b, a)
        } else {
            Interval::new(0.0, a.max(b))
        }
    }

    /// Interval quotient; `None` when the divisor contains zero.
    pub fn checked_div(&self, d: &Interval) -> Option<Interval> {
        if d.contains_zero() {
            return None;
        }
        let inv = Interval::new(1.0 / d.hi, 1.0 / d.lo);
        Some(*self * inv)
    }

    pub fn of_var(bounds: &Bounds, j: usize) -> Interval {
        Interval::new(bounds.lower[j], bounds.upper[j])
    }

    /// Hull of `{x : x·y ∈ self for some y ∈ d}`; `None` when no `x` exists.
    ///
    /// A divisor touching zero only at an endpoint still bounds `x` when
    /// `self` excludes zero; a divisor straddling zero gives no information.
    pub fn solve_product(&self, d: &Interval) -> Option<Interval> {
        let n = *self;
        if !d.contains_zero() {
            return n.checked_div(d);
        }
        if n.contains_zero() {
            return Some(Interval::entire());
        }
        let pos = n.lo > 0.0;
        match (d.lo == 0.0, d.hi == 0.0) {
            (true, true) => None,
            // y ∈ (0, d.hi]
            (true, false) => Some(if pos {
                Interval::at_least(n.lo / d.hi)
            } else {
                Interval::new(f64::NEG_INFINITY, n.hi / d.hi)
            }),
            // y ∈ [d.lo, 0)
            (false, true) => Some(if pos {
                Interval::new(f64::NEG_INFINITY, n.lo / d.lo)
            } else {
                Interval::at_least(n.hi / d.lo)
            }),
            (false, false) => Some(Interval::entire()),
        }
    }

    /// Hull of `{x ∈ current : x^p ∈ self}`; `None` when empty. Even roots
    /// only cut away the inner gap when `current` lies in one sign half.
    pub fn root_within(&self, p: u32, current: &Interval) -> Option<Interval> {
        debug_assert!(p >= 1);
        if p == 1 {
            return self.intersect(current);
        }
        let root = |v: f64| {
            if v.is_infinite() {
                v
            } else {
                v.signum() * v.abs().powf(1.0 / p as f64)
            }
        };
        if p % 2 == 1 {
            return Interval::new(root(self.lo), root(self.hi)).intersect(current);
        }
        if self.hi < 0.0 {
            return None;
        }
        let outer = root(self.hi);
        let inner = root(self.lo.max(0.0));
        let cand = if current.lo >= 0.0 {
            Interval::new(inner, outer)
        } else if current.hi <= 0.0 {
            Interval::new(-outer, -inner)
        } else {
            Interval::new(-outer, outer)
        };
        cand.intersect(current)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            mul_end(self.lo, rhs.lo),
            mul_end(self.lo, rhs.hi),
            mul_end(self.hi, rhs.lo),
            mul_end(self.hi, rhs.hi),
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

/// Enclosure of a monomial over a box, by per-variable power rules.
pub fn monomial_range(m: &Monomial, bounds: &Bounds) -> Interval {
    m.exponents()
        .iter()
        .fold(Interval::point(1.0), |acc, &(v, p)| {
            acc * Interval::of_var(bounds, v).powi(p)
        })
}

/// Term-wise interval enclosure of a polynomial over a box.
pub fn interval_eval(p: &Polynomial, bounds: &Bounds) -> Interval {
    p.terms().fold(Interval::point(0.0), |acc, (m, c)| {
        acc + monomial_range(m, bounds).scale(c)
    })
}
