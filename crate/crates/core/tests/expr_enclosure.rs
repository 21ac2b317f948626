use hyra_core::expr::{BinaryOp, Interval, Term, UnaryOp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 3] = ["x", "y", "z"];

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (-4.0f64..4.0).prop_map(Term::Const),
        (0usize..3).prop_map(|i| Term::var(VARS[i])),
    ];
    leaf.prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), 0usize..5).prop_map(|(t, k)| {
                let op = [UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Sqrt][k];
                Term::unary(op, t)
            }),
            (inner.clone(), inner.clone(), 0usize..6).prop_map(|(a, b, k)| {
                let op = [
                    BinaryOp::Add,
                    BinaryOp::Sub,
                    BinaryOp::Mul,
                    BinaryOp::Div,
                    BinaryOp::Min,
                    BinaryOp::Max,
                ][k];
                Term::binary(op, a, b)
            }),
            (inner, 0u32..4).prop_map(|(t, n)| t.pow(n)),
        ]
    })
}

fn arb_box() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 3).prop_map(|v| {
        v.into_iter().map(|(lo, w)| (lo, lo + w)).collect()
    })
}

fn as_box(b: &[(f64, f64)]) -> [(&'static str, Interval); 3] {
    [0, 1, 2].map(|i| (VARS[i], Interval::new(b[i].0, b[i].1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sampled_points_lie_in_the_enclosure(t in arb_term(), b in arb_box(), seed in any::<u64>()) {
        let ibox = as_box(&b);
        let enclosure = t.eval_interval(&ibox);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = [0, 1, 2].map(|i| (VARS[i], rng.gen_range(b[i].0..=b[i].1)));
            let Ok(v) = t.eval_point(&p) else { continue };
            match &enclosure {
                Ok(iv) => prop_assert!(iv.contains(v), "{t}: {v} not in {iv}"),
                Err(e) => prop_assert!(false, "{t}: point value {v} but interval error {e}"),
            }
        }
    }

    #[test]
    fn degenerate_box_contains_point_value(t in arb_term(), p in prop::collection::vec(-3.0f64..3.0, 3)) {
        let pt = [0, 1, 2].map(|i| (VARS[i], p[i]));
        let ibox = [0, 1, 2].map(|i| (VARS[i], Interval::point(p[i])));
        if let Ok(v) = t.eval_point(&pt) {
            let iv = t.eval_interval(&ibox).expect("defined at the point");
            prop_assert!(iv.contains(v));
        }
    }

    #[test]
    fn evaluation_is_deterministic(t in arb_term(), b in arb_box()) {
        let ibox = as_box(&b);
        prop_assert_eq!(t.eval_interval(&ibox), t.clone().eval_interval(&ibox));
    }
}

#[test]
fn exp_on_unit_interval_contains_a_million_samples() {
    let t = Term::var("x").exp();
    let iv = t.eval_interval(&[("x", Interval::new(0.0, 1.0))]).unwrap();
    assert!(iv.contains(std::f64::consts::E));
    assert!(iv.lo() <= 1.0 && iv.lo() > 1.0 - 1e-12);
    assert!(iv.hi() >= std::f64::consts::E && iv.hi() < 2.71829);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1_000_000u32 {
        let x = if i == 0 { 1.0 } else { rng.gen_range(0.0..=1.0) };
        let v = t.eval_point(&[("x", x)]).unwrap();
        assert!(iv.contains(v), "exp({x}) = {v} escapes {iv}");
    }
}
