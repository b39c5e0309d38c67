//! Seeded random instances on the unit box.

use polyrlt_core::{Bounds, Constraint, Monomial, Polynomial, Problem, Sense};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameters of one generated instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenSpec {
    pub num_vars: usize,
    pub degree: u32,
    pub density: f64,
    pub seed: u64,
}

impl GenSpec {
    /// Stable instance name, e.g. `n3_d2_p0.50_s7`.
    pub fn name(&self) -> String {
        format!("n{}_d{}_p{:.2}_s{}", self.num_vars, self.degree, self.density, self.seed)
    }
}

/// All monomials in `n` variables of degree ≤ `degree`, constant first.
pub fn monomial_pool(n: usize, degree: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    let mut layer = vec![(Monomial::one(), 0usize)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (m, start) in &layer {
            // nondecreasing factor sequences enumerate each multiset once
            for v in *start..n {
                next.push((m.product(&Monomial::var(v)), v));
            }
        }
        out.extend(next.iter().map(|(m, _)| m.clone()));
        layer = next;
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials an instance draws: `⌈density · C(n+δ−1, δ)⌉`.
pub fn monomial_count(n: usize, degree: u32, density: f64) -> usize {
    let c = binomial(n + degree as usize - 1, degree as usize);
    ((density * c as f64).ceil() as usize).max(1)
}

fn random_body(rng: &mut ChaCha8Rng, set: &[Monomial]) -> Polynomial {
    let mut p = Polynomial::zero();
    for m in set {
        if rng.gen_bool(0.5) {
            p.add_term(m.clone(), rng.gen_range(-10.0..10.0));
        }
    }
    // at least one nonconstant term
    if p.terms().all(|(m, _)| m.is_constant()) {
        let nonconst: Vec<&Monomial> = set.iter().filter(|m| !m.is_constant()).collect();
        p.add_term((*nonconst.choose(rng).unwrap()).clone(), rng.gen_range(-10.0..10.0));
    }
    p
}

/// Monomial set and anchor of `spec`, plus the RNG positioned after them.
fn draw_support(spec: &GenSpec) -> (Vec<Monomial>, Vec<f64>, ChaCha8Rng) {
    assert!(spec.density > 0.0 && spec.density <= 1.0, "density must lie in (0, 1]");
    assert!(spec.degree >= 2, "degree must be at least 2");
    let n = spec.num_vars;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pool = monomial_pool(n, spec.degree);
    let count = monomial_count(n, spec.degree, spec.density).min(pool.len() - 1);

    let top: Vec<&Monomial> = pool.iter().filter(|m| m.degree() == spec.degree).collect();
    let first = (*top.choose(&mut rng).unwrap()).clone();
    let mut rest: Vec<Monomial> = pool.iter().filter(|m| **m != first).cloned().collect();
    rest.shuffle(&mut rng);
    let mut set = vec![first];
    set.extend(rest.into_iter().take(count - 1));
    set.sort();

    let anchor: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..0.9)).collect();
    (set, anchor, rng)
}

/// Deterministic instance for `spec` on `[0,1]^n`.
///
/// The sampled monomial set always includes one monomial of full degree.
/// Constraints (2–5, the first an equality, the rest `≥`) take their
/// right-hand sides from an interior anchor point, which is therefore
/// feasible.
pub fn generate_instance(spec: &GenSpec) -> Problem {
    let n = spec.num_vars;
    let (set, anchor, mut rng) = draw_support(spec);
    let objective = random_body(&mut rng, &set);
    let num_cons = rng.gen_range(2..=5);
    let constraints = (0..num_cons)
        .map(|i| {
            let body = random_body(&mut rng, &set);
            let rhs = body.evaluate(&anchor);
            let sense = if i == 0 { Sense::Eq } else { Sense::Ge };
            Constraint::new(body, sense, rhs)
        })
        .collect();
    Problem::new(n, objective, constraints, Bounds::uniform(n, 0.0, 1.0))
        .expect("generated instances are well formed")
}

/// The anchor point behind the right-hand sides of `spec`'s instance.
pub fn anchor_point(spec: &GenSpec) -> Vec<f64> {
    draw_support(spec).1
}

/// The fixed 20-instance suite: seeds 1–20, density 0.5, cycling through
/// n ∈ {2,3,4} and δ ∈ {2,3} so every pairing occurs.
pub fn frozen_suite() -> Vec<GenSpec> {
    (1..=20u64)
        .map(|seed| GenSpec {
            num_vars: 2 + (seed % 3) as usize,
            degree: 2 + (seed % 2) as u32,
            density: 0.5,
            seed,
        })
        .collect()
}

/// Small instances with closed-form optima: `(name, problem, optimum)`.
pub fn analytic_suite() -> Vec<(String, Problem, f64)> {
    let x = Polynomial::var;
    let mono = |f: &[usize], c: f64| Polynomial::from_terms([(Monomial::from_factors(f), c)]);
    let unit = |n| Bounds::uniform(n, 0.0, 1.0);
    let build = |n, obj, cons| Problem::new(n, obj, cons, unit(n)).expect("well formed");
    vec![
        (
            // −x0x1 on the simplex: (½, ½)
            "bilinear_simplex".into(),
            build(2, mono(&[0, 1], -1.0), vec![Constraint::less_equal(&x(0) + &x(1), 1.0)]),
            -0.25,
        ),
        (
            // x0x1 above the simplex: a vertex
            "bilinear_corner".into(),
            build(2, mono(&[0, 1], 1.0), vec![Constraint::new(&x(0) + &x(1), Sense::Ge, 1.0)]),
            0.0,
        ),
        (
            // x0 + x1 on the hyperbola x0x1 = 0.2: x0 = x1 = √0.2
            "hyperbola".into(),
            build(2, &x(0) + &x(1), vec![Constraint::new(mono(&[0, 1], 1.0), Sense::Eq, 0.2)]),
            2.0 * 0.2f64.sqrt(),
        ),
        (
            // x0³ − x0: stationary at 1/√3
            "cubic".into(),
            build(1, &mono(&[0, 0, 0], 1.0) - &x(0), vec![]),
            -2.0 / (3.0 * 3.0f64.sqrt()),
        ),
        (
            // −x0 − x1 in the unit disc: (1/√2, 1/√2)
            "disc".into(),
            build(
                2,
                -&(&x(0) + &x(1)),
                vec![Constraint::less_equal(&mono(&[0, 0], 1.0) + &mono(&[1, 1], 1.0), 1.0)],
            ),
            -(2.0f64.sqrt()),
        ),
    ]
}
