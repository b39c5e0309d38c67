//! RLT linear relaxation: each monomial of degree ≥ 2 becomes its own column,
//! and bound-factor products over the J-sets tie those columns to the box.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::interval::monomial_range;
use crate::poly::{Bounds, Monomial, Polynomial, Problem, Sense};

/// Column layout: columns `0..n` are the original variables, later columns
/// are RLT variables, each tagged with the monomial it linearizes.
#[derive(Clone, Debug)]
pub struct RltVarMap {
    num_vars: usize,
    columns: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl RltVarMap {
    pub fn new(num_vars: usize) -> Self {
        let columns: Vec<Monomial> = (0..num_vars).map(Monomial::var).collect();
        let index = columns.iter().cloned().zip(0..).collect();
        Self {
            num_vars,
            columns,
            index,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn monomial(&self, col: usize) -> &Monomial {
        &self.columns[col]
    }

    pub fn columns(&self) -> &[Monomial] {
        &self.columns
    }

    /// Column for `m`, creating it if needed. Panics on the constant monomial.
    pub fn register(&mut self, m: &Monomial) -> usize {
        assert!(!m.is_constant(), "the constant monomial has no column");
        if let Some(&c) = self.index.get(m) {
            return c;
        }
        let c = self.columns.len();
        self.columns.push(m.clone());
        self.index.insert(m.clone(), c);
        c
    }

    /// Lifted point: `X_J = Π x_j` for every column.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|m| m.eval(x)).collect()
    }

    /// Polynomial obtained by replacing every column with its monomial.
    pub fn delinearize(&self, coefs: &[(usize, f64)], constant: f64) -> Polynomial {
        let mut p = Polynomial::constant(constant);
        for &(c, a) in coefs {
            p.add_term(self.columns[c].clone(), a);
        }
        p
    }
}

/// Sparse linear form with sorted, merged column indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn from_unsorted(mut terms: Vec<(usize, f64)>) -> Self {
        terms.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (c, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += a,
                _ => merged.push((c, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        Self { terms: merged }
    }

    pub fn dot(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|&(c, a)| a * z[c]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Replaces each monomial by its column. Returns the linear part and the
/// constant term.
pub fn linearize(p: &Polynomial, map: &mut RltVarMap) -> (LinExpr, f64) {
    let mut constant = 0.0;
    let mut terms = Vec::with_capacity(p.len());
    for (m, c) in p.terms() {
        if m.is_constant() {
            constant += c;
        } else {
            terms.push((map.register(m), c));
        }
    }
    (LinExpr::from_unsorted(terms), constant)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowSense {
    Ge,
    Eq,
    Le,
}

impl From<Sense> for RowSense {
    fn from(s: Sense) -> Self {
        match s {
            Sense::Ge => RowSense::Ge,
            Sense::Eq => RowSense::Eq,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowTag {
    /// Linearization of original constraint `r`.
    Original(usize),
    BoundFactor,
    Cut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub expr: LinExpr,
    pub sense: RowSense,
    pub rhs: f64,
    pub tag: RowTag,
}

impl Row {
    /// Amount by which `z` violates the row (0 if satisfied).
    pub fn violation(&self, z: &[f64]) -> f64 {
        let v = self.expr.dot(z) - self.rhs;
        match self.sense {
            RowSense::Ge => (-v).max(0.0),
            RowSense::Le => v.max(0.0),
            RowSense::Eq => v.abs(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearRelaxation {
    pub num_cols: usize,
    pub rows: Vec<Row>,
    pub objective: LinExpr,
    pub objective_constant: f64,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
}

impl LinearRelaxation {
    /// Row right-hand sides in row order.
    pub fn rhs_vector(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rhs).collect()
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.dot(z) + self.objective_constant
    }

    /// Adds any columns registered in `map` after this relaxation was built,
    /// bounding them by interval products over `bounds`.
    pub fn sync_columns(&mut self, map: &RltVarMap, bounds: &Bounds) {
        for c in self.num_cols..map.len() {
            let r = monomial_range(map.monomial(c), bounds);
            self.col_lower.push(r.lo);
            self.col_upper.push(r.hi);
        }
        self.num_cols = map.len();
    }

    /// Recomputes all column bounds from `bounds`.
    pub fn set_column_bounds(&mut self, map: &RltVarMap, bounds: &Bounds) {
        for c in 0..self.num_cols {
            let r = monomial_range(map.monomial(c), bounds);
            self.col_lower[c] = r.lo;
            self.col_upper[c] = r.hi;
        }
    }
}

/// Linearized bound-factor rows `Π_{J1}(x−l) Π_{J2}(u−x) ≥ 0` for every
/// distinct split of `jset`.
pub fn bound_factor_rows(jset: &Monomial, bounds: &Bounds, map: &mut RltVarMap) -> Vec<Row> {
    // A split is fixed by how many copies of each variable go to J1.
    let exps = jset.exponents();
    let mut splits: Vec<Vec<u32>> = vec![vec![]];
    for &(_, p) in exps {
        splits = splits
            .into_iter()
            .flat_map(|s| {
                (0..=p).map(move |k| {
                    let mut s = s.clone();
                    s.push(k);
                    s
                })
            })
            .collect();
    }

    let mut rows = Vec::with_capacity(splits.len());
    let mut seen = HashSet::new();
    for split in splits {
        let mut product = Polynomial::constant(1.0);
        for (&(v, p), &k) in exps.iter().zip(&split) {
            let (l, u) = (bounds.lower[v], bounds.upper[v]);
            let mut lower_factor = Polynomial::var(v);
            lower_factor.add_term(Monomial::one(), -l);
            let mut upper_factor = Polynomial::constant(u);
            upper_factor.add_term(Monomial::var(v), -1.0);
            for _ in 0..k {
                product = &product * &lower_factor;
            }
            for _ in k..p {
                product = &product * &upper_factor;
            }
        }
        let (expr, constant) = linearize(&product, map);
        if expr.is_empty() {
            continue;
        }
        let row = Row {
            expr,
            sense: RowSense::Ge,
            rhs: -constant,
            tag: RowTag::BoundFactor,
        };
        if seen.insert(row_key(&row)) {
            rows.push(row);
        }
    }
    rows
}

fn row_key(row: &Row) -> (Vec<(usize, u64)>, u64) {
    (
        row.expr.terms.iter().map(|&(c, a)| (c, a.to_bits())).collect(),
        row.rhs.to_bits(),
    )
}

/// Registers every degree ≥ 2 sub-monomial of every J-set, in graded-lex
/// order, so the column layout depends only on the J-sets.
pub fn register_jset_columns(jsets: &BTreeSet<Monomial>, map: &mut RltVarMap) {
    let subs: BTreeSet<Monomial> = jsets
        .iter()
        .flat_map(|j| j.divisors())
        .filter(|m| m.degree() >= 2)
        .collect();
    for m in &subs {
        map.register(m);
    }
}

/// Full RLT relaxation of `prob` over `bounds`.
pub fn build_relaxation(
    prob: &Problem,
    bounds: &Bounds,
    jsets: &BTreeSet<Monomial>,
) -> (LinearRelaxation, RltVarMap) {
    let mut map = RltVarMap::new(prob.num_vars());
    register_jset_columns(jsets, &mut map);

    let (objective, objective_constant) = linearize(&prob.objective, &mut map);
    let mut rows = Vec::new();
    for (r, c) in prob.constraints.iter().enumerate() {
        let (expr, constant) = linearize(&c.body, &mut map);
        rows.push(Row {
            expr,
            sense: c.sense.into(),
            rhs: c.rhs - constant,
            tag: RowTag::Original(r),
        });
    }
    let mut seen = HashSet::new();
    for j in jsets {
        for row in bound_factor_rows(j, bounds, &mut map) {
            if seen.insert(row_key(&row)) {
                rows.push(row);
            }
        }
    }

    let mut relax = LinearRelaxation {
        num_cols: 0,
        rows,
        objective,
        objective_constant,
        col_lower: Vec::new(),
        col_upper: Vec::new(),
    };
    relax.sync_columns(&map, bounds);
    (relax, map)
}

/// Per-variable RLT identity violation scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ViolationScores {
    pub theta: Vec<f64>,
}

impl ViolationScores {
    pub fn max(&self) -> f64 {
        self.theta.iter().copied().fold(0.0, f64::max)
    }
}

fn column_value(m: &Monomial, sol: &[f64], map: &RltVarMap) -> f64 {
    match m.degree() {
        0 => 1.0,
        _ => match map.column_of(m) {
            Some(c) => sol[c],
            None => m.eval(&sol[..map.num_vars()]),
        },
    }
}

/// `θ_j = max |X̄_{J∪{j}} − x̄_j X̄_J|` over problem monomials `J∪{j}`.
pub fn rlt_violations(sol: &[f64], map: &RltVarMap, prob: &Problem) -> ViolationScores {
    let mut theta = vec![0.0; prob.num_vars()];
    for m in prob.monomials().iter().filter(|m| m.degree() >= 2) {
        let full = column_value(m, sol, map);
        for j in m.support() {
            let rest = m.without_one(j).expect("j is in the support");
            let v = (full - sol[j] * column_value(&rest, sol, map)).abs();
            if v > theta[j] {
                theta[j] = v;
            }
        }
    }
    ViolationScores { theta }
}

/// `max |X̄_M − Π x̄|` over problem monomials containing `j`, per variable.
/// Catches points whose one-step identities hold while the full products
/// still disagree.
pub fn product_violations(sol: &[f64], map: &RltVarMap, prob: &Problem) -> ViolationScores {
    let x = &sol[..map.num_vars()];
    let mut theta = vec![0.0; prob.num_vars()];
    for m in prob.monomials().iter().filter(|m| m.degree() >= 2) {
        let v = (column_value(m, sol, map) - m.eval(x)).abs();
        for j in m.support() {
            if v > theta[j] {
                theta[j] = v;
            }
        }
    }
    ViolationScores { theta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{compute_jsets, Constraint};

    fn mono(f: &[usize]) -> Monomial {
        Monomial::from_factors(f)
    }

    fn row_as_pairs(row: &Row, map: &RltVarMap) -> Vec<(String, f64)> {
        row.expr
            .terms
            .iter()
            .map(|&(c, a)| (map.monomial(c).to_string(), a))
            .collect()
    }

    #[test]
    fn linearize_examples() {
        let mut map = RltVarMap::new(2);
        let p = Polynomial::from_terms([(mono(&[0, 1]), 1.0), (mono(&[0]), 2.0)]);
        let (e, k) = linearize(&p, &mut map);
        let x01 = map.column_of(&mono(&[0, 1])).unwrap();
        assert_eq!(e, LinExpr::from_unsorted(vec![(x01, 1.0), (0, 2.0)]));
        assert_eq!(k, 0.0);

        let q = Polynomial::from_terms([(mono(&[0, 0]), 1.0), (Monomial::one(), -3.0)]);
        let (e, k) = linearize(&q, &mut map);
        assert_eq!(e.terms, vec![(map.column_of(&mono(&[0, 0])).unwrap(), 1.0)]);
        assert_eq!(k, -3.0);

        let (e, k) = linearize(&Polynomial::constant(4.0), &mut map);
        assert!(e.is_empty());
        assert_eq!(k, 4.0);
    }

    #[test]
    fn bilinear_bound_factors() {
        let mut map = RltVarMap::new(2);
        let rows = bound_factor_rows(&mono(&[0, 1]), &Bounds::uniform(2, 0.0, 1.0), &mut map);
        assert_eq!(rows.len(), 4);
        // (x0)(1 − x1) = x0 − X01 ≥ 0
        assert!(rows.iter().any(|r| {
            let mut t = row_as_pairs(r, &map);
            t.sort_by(|a, b| a.0.cmp(&b.0));
            t == vec![("x0".to_string(), 1.0), ("x0 x1".to_string(), -1.0)] && r.rhs == 0.0
        }));
        // x0 x1 ≥ 0
        assert!(rows
            .iter()
            .any(|r| row_as_pairs(r, &map) == vec![("x0 x1".to_string(), 1.0)] && r.rhs == 0.0));
    }

    #[test]
    fn square_bound_factor_mixed_split() {
        let mut map = RltVarMap::new(1);
        let b = Bounds::new(vec![1.0], vec![3.0]);
        let rows = bound_factor_rows(&mono(&[0, 0]), &b, &mut map);
        // splits k = 0, 1, 2 copies in J1
        assert_eq!(rows.len(), 3);
        let x00 = map.column_of(&mono(&[0, 0])).unwrap();
        let mixed = rows
            .iter()
            .find(|r| r.expr.terms.contains(&(x00, -1.0)))
            .expect("(x0 − 1)(3 − x0) row");
        assert_eq!(mixed.expr.terms, LinExpr::from_unsorted(vec![(0, 4.0), (x00, -1.0)]).terms);
        assert_eq!(mixed.rhs, 3.0);
        // −x² + 4x − 3 ≥ 0 holds across [1, 3].
        for i in 0..=200 {
            let x = 1.0 + 2.0 * i as f64 / 200.0;
            assert!(-x * x + 4.0 * x - 3.0 >= -1e-12);
        }
    }

    #[test]
    fn cubic_split_count_is_product_of_multiplicities() {
        let mut map = RltVarMap::new(2);
        let rows = bound_factor_rows(&mono(&[0, 0, 1]), &Bounds::uniform(2, 0.5, 2.0), &mut map);
        assert_eq!(rows.len(), 6);
        assert!(rows.len() <= 8);
    }

    #[test]
    fn bilinear_relaxation_layout() {
        let obj = Polynomial::from_terms([(mono(&[0, 1]), 1.0)]);
        let prob = Problem::new(2, obj, vec![], Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let jsets = compute_jsets(&prob);
        let (relax, map) = build_relaxation(&prob, &prob.bounds, &jsets);
        assert_eq!(relax.num_cols, 3);
        assert_eq!(relax.rows.iter().filter(|r| r.tag == RowTag::BoundFactor).count(), 4);
        let x01 = map.column_of(&mono(&[0, 1])).unwrap();
        assert_eq!((relax.col_lower[x01], relax.col_upper[x01]), (0.0, 1.0));
    }

    #[test]
    fn violations_vanish_on_lifted_point() {
        let obj = Polynomial::from_terms([(mono(&[0, 1, 2]), 1.0), (mono(&[0, 0]), 1.0)]);
        let prob = Problem::new(3, obj, vec![], Bounds::uniform(3, 0.0, 1.0)).unwrap();
        let (_, map) = build_relaxation(&prob, &prob.bounds, &compute_jsets(&prob));
        let z = map.lift(&[0.3, 0.7, 0.9]);
        assert!(rlt_violations(&z, &map, &prob).max() <= 1e-12);
    }

    #[test]
    fn violation_of_half_point() {
        let obj = Polynomial::from_terms([(mono(&[0, 1]), 1.0)]);
        let prob = Problem::new(2, obj, vec![], Bounds::uniform(2, 0.0, 1.0)).unwrap();
        let (_, map) = build_relaxation(&prob, &prob.bounds, &compute_jsets(&prob));
        let mut z = vec![0.5, 0.5, 0.0];
        z[map.column_of(&mono(&[0, 1])).unwrap()] = 0.5;
        assert_eq!(rlt_violations(&z, &map, &prob).theta, vec![0.25, 0.25]);
    }

    #[test]
    fn violations_match_exhaustive_decomposition_scan() {
        // x0 x1 x2, x0^2, x1 x2 over arbitrary column values.
        let obj = Polynomial::from_terms([
            (mono(&[0, 1, 2]), 1.0),
            (mono(&[0, 0]), 1.0),
            (mono(&[1, 2]), 1.0),
        ]);
        let prob = Problem::new(3, obj, vec![], Bounds::uniform(3, 0.0, 1.0)).unwrap();
        let (_, map) = build_relaxation(&prob, &prob.bounds, &compute_jsets(&prob));
        let z: Vec<f64> = (0..map.len()).map(|c| ((c * 37 % 11) as f64) / 11.0).collect();

        let value = |m: &Monomial| -> f64 {
            match m.degree() {
                0 => 1.0,
                1 => z[m.max_var().unwrap()],
                _ => z[map.column_of(m).unwrap()],
            }
        };
        let mut expected = [0.0f64; 3];
        for m in prob.monomials() {
            if m.degree() < 2 {
                continue;
            }
            // every (J, j) with J ∪ {j} = m
            for j in 0..3 {
                for d in m.divisors() {
                    if d.product(&Monomial::var(j)) == m {
                        let v = (value(&m) - z[j] * value(&d)).abs();
                        expected[j] = expected[j].max(v);
                    }
                }
            }
        }
        assert_eq!(rlt_violations(&z, &map, &prob).theta, expected.to_vec());
    }

    #[test]
    fn constant_only_constraint_becomes_empty_row() {
        let c = Constraint::new(Polynomial::constant(2.0), Sense::Ge, 3.0);
        let prob =
            Problem::new(1, Polynomial::var(0), vec![c], Bounds::uniform(1, 0.0, 1.0)).unwrap();
        let (relax, _) = build_relaxation(&prob, &prob.bounds, &compute_jsets(&prob));
        assert!(relax.rows[0].expr.is_empty());
        assert_eq!(relax.rows[0].rhs, 1.0);
    }
}
