use polyrlt_bench::gen::{generate_instance, GenSpec};
use polyrlt_cli::format::{parse_instance, render_instance};
use polyrlt_core::{Bounds, Constraint, Monomial, Polynomial, Problem, Sense};
use proptest::prelude::*;

#[test]
fn generated_instances_round_trip() {
    for seed in 0..50 {
        let spec = GenSpec { num_vars: 2 + (seed % 4) as usize, degree: 2 + (seed % 3) as u32, density: 0.6, seed };
        let p = generate_instance(&spec);
        let back = parse_instance(&render_instance(&p)).unwrap();
        assert_eq!(back.problem, p, "seed {seed}");
        assert!(back.offset.iter().all(|&o| o == 0.0));
    }
}

fn monomial(n: usize) -> impl Strategy<Value = Monomial> {
    prop::collection::vec((0..n, 1u32..4), 0..3).prop_map(Monomial::from_pairs)
}

fn polynomial(n: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((monomial(n), -1e3f64..1e3), 0..6).prop_map(Polynomial::from_terms)
}

fn problem() -> impl Strategy<Value = Problem> {
    (1usize..5).prop_flat_map(|n| {
        let cons = prop::collection::vec(
            (polynomial(n), prop::bool::ANY, -50.0f64..50.0)
                .prop_map(|(b, eq, r)| Constraint::new(b, if eq { Sense::Eq } else { Sense::Ge }, r)),
            0..4,
        );
        let bounds = prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), n)
            .prop_map(|v| Bounds::new(v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.0 + p.1).collect()));
        (polynomial(n), cons, bounds).prop_map(move |(o, c, b)| Problem::new(n, o, c, b).unwrap())
    })
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(p in problem()) {
        prop_assert_eq!(parse_instance(&render_instance(&p)).unwrap().problem, p);
    }

    #[test]
    fn shifted_instance_agrees_pointwise(lo in -3.0f64..0.0, w in 0.5f64..3.0, t in 0.0f64..1.0) {
        let text = format!(
            "poly1\nvars 2\nbound 0 {lo} {}\nbound 1 0 1\nobjective min\n  2 x0^3 x1\n  -1 x0\nconstraint ge 0.5\n  1 x0^2\n  1 x1\nend\n",
            lo + w
        );
        let inst = parse_instance(&text).unwrap();
        let y = [t * w, t];
        let x = inst.to_original(&y);
        let f = 2.0 * x[0].powi(3) * x[1] - x[0];
        prop_assert!((inst.problem.objective.evaluate(&y) - f).abs() < 1e-9 * (1.0 + f.abs()));
        let g = x[0] * x[0] + x[1];
        prop_assert!((inst.problem.constraints[0].body.evaluate(&y) - g).abs() < 1e-9 * (1.0 + g.abs()));
    }
}
