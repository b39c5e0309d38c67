//! Sparse polynomial model: monomials as exponent multisets, polynomials as
//! monomial → coefficient maps, and the problem container.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Coefficients below this magnitude are dropped on construction.
pub const COEF_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable x{index} out of range for a problem with {num_vars} variables")]
    VarOutOfRange { index: usize, num_vars: usize },
    #[error("bounds for x{index} are invalid: [{lo}, {hi}]")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },
    #[error("bound vectors have length {got}, expected {expected}")]
    BoundsLength { got: usize, expected: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
}

/// A product of variables with multiplicities, stored as `(variable, power)`
/// pairs sorted by variable index. The empty monomial is the constant 1.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    exps: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self { exps: Vec::new() }
    }

    pub fn var(j: usize) -> Self {
        Self { exps: vec![(j, 1)] }
    }

    /// Builds a monomial from `(variable, power)` pairs in any order; repeated
    /// variables are merged and zero powers dropped.
    pub fn from_pairs<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<usize, u32> = BTreeMap::new();
        for (v, p) in pairs {
            if p > 0 {
                *map.entry(v).or_default() += p;
            }
        }
        Self {
            exps: map.into_iter().collect(),
        }
    }

    /// Builds a monomial from a list of factors, e.g. `[0, 0, 2]` is `x0^2 x2`.
    pub fn from_factors(factors: &[usize]) -> Self {
        Self::from_pairs(factors.iter().map(|&v| (v, 1)))
    }

    pub fn exponents(&self) -> &[(usize, u32)] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&(_, p)| p).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn power_of(&self, v: usize) -> u32 {
        self.exps
            .binary_search_by_key(&v, |&(var, _)| var)
            .map(|i| self.exps[i].1)
            .unwrap_or(0)
    }

    /// Distinct variables, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.exps.iter().map(|&(v, _)| v)
    }

    /// Expanded multiset, ascending: `x0^2 x2` → `[0, 0, 2]`.
    pub fn factors(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for &(v, p) in &self.exps {
            out.extend(std::iter::repeat(v).take(p as usize));
        }
        out
    }

    pub fn max_var(&self) -> Option<usize> {
        self.exps.last().map(|&(v, _)| v)
    }

    /// Multiset inclusion: true when `other` divides `self`.
    pub fn contains(&self, other: &Monomial) -> bool {
        other.exps.iter().all(|&(v, p)| self.power_of(v) >= p)
    }

    pub fn product(&self, other: &Monomial) -> Monomial {
        Self::from_pairs(self.exps.iter().chain(other.exps.iter()).copied())
    }

    /// Removes one copy of `v`; `None` if `v` is absent.
    pub fn without_one(&self, v: usize) -> Option<Monomial> {
        let i = self.exps.binary_search_by_key(&v, |&(var, _)| var).ok()?;
        let mut exps = self.exps.clone();
        if exps[i].1 == 1 {
            exps.remove(i);
        } else {
            exps[i].1 -= 1;
        }
        Some(Self { exps })
    }

    /// Every sub-multiset (including the constant and `self`).
    pub fn divisors(&self) -> Vec<Monomial> {
        let mut out = vec![Monomial::one()];
        for &(v, p) in &self.exps {
            let mut next = Vec::with_capacity(out.len() * (p as usize + 1));
            for m in &out {
                for k in 0..=p {
                    let mut exps = m.exps.clone();
                    if k > 0 {
                        exps.push((v, k));
                    }
                    next.push(Monomial { exps });
                }
            }
            out = next;
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .map(|&(v, p)| x[v].powi(p as i32))
            .product()
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: degree first, then the expanded factor lists.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.factors().cmp(&other.factors()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "1");
        }
        for (i, &(v, p)) in self.exps.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if p == 1 {
                write!(f, "x{v}")?;
            } else {
                write!(f, "x{v}^{p}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial. Terms iterate in graded-lex monomial order.
#[derive(Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(j: usize) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(j), 1.0);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Accumulates `c·m`, removing the term if the sum falls below
    /// [`COEF_ZERO_TOL`].
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v.abs() < COEF_ZERO_TOL {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                if c.abs() >= COEF_ZERO_TOL {
                    e.insert(c);
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> + '_ {
        self.terms.keys()
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&Monomial::one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.keys().filter_map(Monomial::max_var).max()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum()
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, &c)| (m.clone(), c * k)))
    }

    /// Gradient at `x`, dense over `n` variables.
    pub fn gradient(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (m, &c) in &self.terms {
            for &(v, p) in m.exponents() {
                let mut d = c * p as f64;
                for &(w, q) in m.exponents() {
                    let e = if w == v { q - 1 } else { q };
                    d *= x[w].powi(e as i32);
                }
                g[v] += d;
            }
        }
        g
    }

    /// `(x_j + shift_j)` substituted for every `x_j`.
    pub fn shifted(&self, shift: &[f64]) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            let mut acc = Polynomial::constant(c);
            for &(v, p) in m.exponents() {
                let s = shift.get(v).copied().unwrap_or(0.0);
                let mut factor = Polynomial::var(v);
                factor.add_term(Monomial::one(), s);
                for _ in 0..p {
                    acc = &acc * &factor;
                }
            }
            out = &out + &acc;
        }
        out
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}·{m}")?;
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &rhs.terms {
                out.add_term(a.product(b), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Eq,
}

/// `body ≥ rhs` or `body = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub body: Polynomial,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(body: Polynomial, sense: Sense, rhs: f64) -> Self {
        Self { body, sense, rhs }
    }

    /// `body ≤ rhs`, stored as `−body ≥ −rhs`.
    pub fn less_equal(body: Polynomial, rhs: f64) -> Self {
        Self {
            body: -&body,
            sense: Sense::Ge,
            rhs: -rhs,
        }
    }

    /// Signed violation: 0 when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.body.evaluate(x) - self.rhs;
        match self.sense {
            Sense::Ge => (-v).max(0.0),
            Sense::Eq => v.abs(),
        }
    }
}

/// Axis-aligned variable box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        Self { lower, upper }
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
    }

    /// Componentwise inclusion `self ⊆ other` up to `tol`.
    pub fn is_subset_of(&self, other: &Bounds, tol: f64) -> bool {
        (0..self.len()).all(|j| {
            self.lower[j] >= other.lower[j] - tol && self.upper[j] <= other.upper[j] + tol
        })
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| v.clamp(self.lower[j], self.upper[j]))
            .collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| 0.5 * (self.lower[j] + self.upper[j]))
            .collect()
    }
}

/// Polynomial program: minimize `objective` subject to `constraints` over
/// `bounds`, with `0 ≤ l_j ≤ u_j < ∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    num_vars: usize,
    pub objective: Polynomial,
    pub constraints: Vec<Constraint>,
    pub bounds: Bounds,
}

impl Problem {
    pub fn new(
        num_vars: usize,
        objective: Polynomial,
        constraints: Vec<Constraint>,
        bounds: Bounds,
    ) -> Result<Self, ModelError> {
        if bounds.len() != num_vars {
            return Err(ModelError::BoundsLength {
                got: bounds.len(),
                expected: num_vars,
            });
        }
        for j in 0..num_vars {
            let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(ModelError::InvalidBounds { index: j, lo, hi });
            }
        }
        let polys = std::iter::once(&objective).chain(constraints.iter().map(|c| &c.body));
        for p in polys {
            if let Some(v) = p.max_var() {
                if v >= num_vars {
                    return Err(ModelError::VarOutOfRange { index: v, num_vars });
                }
            }
            if p.terms().any(|(_, c)| !c.is_finite()) {
                return Err(ModelError::NonFinite("polynomial"));
            }
        }
        if constraints.iter().any(|c| !c.rhs.is_finite()) {
            return Err(ModelError::NonFinite("constraint right-hand side"));
        }
        Ok(Self {
            num_vars,
            objective,
            constraints,
            bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn degree(&self) -> u32 {
        self.polynomials().map(Polynomial::degree).max().unwrap_or(0)
    }

    /// Objective followed by constraint bodies.
    pub fn polynomials(&self) -> impl Iterator<Item = &Polynomial> + '_ {
        std::iter::once(&self.objective).chain(self.constraints.iter().map(|c| &c.body))
    }

    /// Every distinct non-constant monomial appearing in the problem.
    pub fn monomials(&self) -> BTreeSet<Monomial> {
        self.polynomials()
            .flat_map(|p| p.monomials().cloned())
            .filter(|m| !m.is_constant())
            .collect()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }
}

pub fn degree(p: &Polynomial) -> u32 {
    p.degree()
}

pub fn evaluate(p: &Polynomial, x: &[f64]) -> f64 {
    p.evaluate(x)
}

/// Monomials of degree > 1 present in the problem that are not strictly
/// contained (as multisets) in another present monomial.
pub fn compute_jsets(prob: &Problem) -> BTreeSet<Monomial> {
    let candidates: Vec<Monomial> = prob
        .monomials()
        .into_iter()
        .filter(|m| m.degree() > 1)
        .collect();
    candidates
        .iter()
        .filter(|m| {
            !candidates
                .iter()
                .any(|other| other != *m && other.contains(m))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(f: &[usize]) -> Monomial {
        Monomial::from_factors(f)
    }

    fn problem_with(monos: &[&[usize]]) -> Problem {
        let n = monos.iter().flat_map(|m| m.iter()).max().map_or(1, |&v| v + 1);
        let obj = Polynomial::from_terms(monos.iter().map(|m| (mono(m), 1.0)));
        Problem::new(n, obj, vec![], Bounds::uniform(n, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn degree_examples() {
        let p = Polynomial::from_terms([(mono(&[0, 0, 1]), 3.0), (mono(&[2]), 1.0)]);
        assert_eq!(degree(&p), 3);
        assert_eq!(degree(&Polynomial::constant(5.0)), 0);
        assert_eq!(degree(&Polynomial::zero()), 0);
        assert_eq!(degree(&Polynomial::from_terms([(mono(&[0, 1, 2, 3]), 1.0)])), 4);
    }

    #[test]
    fn evaluate_examples() {
        let p = Polynomial::from_terms([(mono(&[0, 1]), 1.0), (Monomial::one(), 2.0)]);
        assert_eq!(evaluate(&p, &[3.0, 4.0]), 14.0);
        let q = Polynomial::from_terms([(mono(&[0, 0]), 1.0)]);
        assert_eq!(evaluate(&q, &[0.5]), 0.25);
        let r = Polynomial::from_terms([(mono(&[0, 0, 1]), 1.0), (mono(&[1]), -1.0)]);
        assert_eq!(evaluate(&r, &[2.0, 3.0]), 9.0);
    }

    #[test]
    fn jsets_drop_contained_and_linear() {
        let j = compute_jsets(&problem_with(&[&[1, 2, 3], &[1, 2], &[3]]));
        assert_eq!(j.into_iter().collect::<Vec<_>>(), vec![mono(&[1, 2, 3])]);
    }

    #[test]
    fn jsets_keep_incomparable() {
        let j = compute_jsets(&problem_with(&[&[1, 1], &[1, 2]]));
        assert_eq!(j.len(), 2);
        assert!(j.contains(&mono(&[1, 1])) && j.contains(&mono(&[1, 2])));
    }

    #[test]
    fn jsets_match_pairwise_inclusion_scan() {
        // x1^2 x2, x1 x2^2, x1 x2: only the cubic ones survive.
        let present = [mono(&[1, 1, 2]), mono(&[1, 2, 2]), mono(&[1, 2])];
        let brute: BTreeSet<Monomial> = present
            .iter()
            .filter(|m| {
                m.degree() > 1
                    && !present.iter().any(|o| {
                        o != *m && m.factors().iter().all(|&v| {
                            m.power_of(v) <= o.power_of(v)
                        })
                    })
            })
            .cloned()
            .collect();
        let j = compute_jsets(&problem_with(&[&[1, 1, 2], &[1, 2, 2], &[1, 2]]));
        assert_eq!(j, brute);
        assert_eq!(j.len(), 2);
    }

    #[test]
    fn small_coefficients_are_dropped() {
        let p = Polynomial::from_terms([(mono(&[0, 1]), 1e-13), (mono(&[0]), 1.0)]);
        assert_eq!(p.len(), 1);
        let mut q = Polynomial::var(0);
        q.add_term(Monomial::var(0), -1.0);
        assert!(q.is_empty());
    }

    #[test]
    fn graded_lex_order() {
        let mut v = vec![mono(&[0, 1]), mono(&[2]), Monomial::one(), mono(&[0, 0]), mono(&[0])];
        v.sort();
        assert_eq!(
            v,
            vec![Monomial::one(), mono(&[0]), mono(&[2]), mono(&[0, 0]), mono(&[0, 1])]
        );
    }

    #[test]
    fn divisors_enumerate_sub_multisets() {
        let d = mono(&[0, 0, 1]).divisors();
        assert_eq!(d.len(), 6);
        assert!(d.contains(&Monomial::one()) && d.contains(&mono(&[0, 0, 1])));
    }

    #[test]
    fn shift_substitutes_affinely() {
        // x0^2 with x0 = y0 - 1  →  y0^2 - 2 y0 + 1
        let p = Polynomial::from_terms([(mono(&[0, 0]), 1.0)]);
        let s = p.shifted(&[-1.0]);
        assert_eq!(s.coefficient(&mono(&[0, 0])), 1.0);
        assert_eq!(s.coefficient(&mono(&[0])), -2.0);
        assert_eq!(s.constant_term(), 1.0);
    }

    #[test]
    fn problem_rejects_bad_input() {
        let obj = Polynomial::var(3);
        assert!(matches!(
            Problem::new(2, obj, vec![], Bounds::uniform(2, 0.0, 1.0)),
            Err(ModelError::VarOutOfRange { .. })
        ));
        assert!(matches!(
            Problem::new(1, Polynomial::var(0), vec![], Bounds::uniform(1, -1.0, 1.0)),
            Err(ModelError::InvalidBounds { .. })
        ));
        assert!(matches!(
            Problem::new(1, Polynomial::var(0), vec![], Bounds::uniform(1, 0.0, f64::INFINITY)),
            Err(ModelError::InvalidBounds { .. })
        ));
    }
}
