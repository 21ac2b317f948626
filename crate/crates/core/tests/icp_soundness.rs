use std::collections::BTreeMap;

use hyra_core::expr::{BinaryOp, Constraint, Interval, Rel, Term, UnaryOp};
use hyra_core::icp::{
    delta_check, flow_enclosure, prune, Contractor, DeltaOutcome, IcpConfig, IcpError, IcpStats, IntervalBox,
    PruneOutcome, Space,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VARS: [&str; 3] = ["x", "y", "z"];

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Term::Const),
        (0usize..3).prop_map(|i| Term::var(VARS[i])),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), 0usize..5).prop_map(|(t, k)| {
                let op = [UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Sqrt][k];
                Term::unary(op, t)
            }),
            (inner.clone(), inner.clone(), 0usize..6).prop_map(|(a, b, k)| {
                let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Min, BinaryOp::Max][k];
                Term::binary(op, a, b)
            }),
            (inner, 0u32..4).prop_map(|(t, n)| t.pow(n)),
        ]
    })
}

fn arb_constraint() -> impl Strategy<Value = Constraint> {
    (arb_term(), -2.0f64..2.0, 0usize..3).prop_map(|(t, c, r)| {
        let rel = [Rel::Ge, Rel::Le, Rel::Eq][r];
        Constraint::new(t, rel, Term::Const(c))
    })
}

fn arb_box() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.0f64..3.0, 0.0f64..3.0), 3)
        .prop_map(|v| v.into_iter().map(|(lo, w)| (lo, lo + w)).collect())
}

fn space_of(b: &[(f64, f64)]) -> Space {
    Space::new((0..3).map(|i| (VARS[i].to_string(), Interval::new(b[i].0, b[i].1))))
}

fn sample(b: &[(f64, f64)], rng: &mut ChaCha8Rng) -> [(&'static str, f64); 3] {
    [0, 1, 2].map(|i| (VARS[i], rng.gen_range(b[i].0..=b[i].1)))
}

fn feasible(cs: &[Constraint], p: &[(&str, f64); 3]) -> bool {
    cs.iter().all(|c| c.holds_at(p).unwrap_or(false))
}

fn compile(cs: &[Constraint], sp: &Space) -> Vec<Contractor> {
    cs.iter().map(|c| Contractor::atom(c, sp).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prune_never_loses_a_feasible_point(
        cs in prop::collection::vec(arb_constraint(), 1..4),
        b in arb_box(),
        seed in any::<u64>(),
    ) {
        let sp = space_of(&b);
        let items = compile(&cs, &sp);
        let refs: Vec<&Contractor> = items.iter().collect();
        let out = prune(&refs, &sp.root_box());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p = sample(&b, &mut rng);
            if !feasible(&cs, &p) {
                continue;
            }
            match &out {
                PruneOutcome::Empty(e) => prop_assert!(false, "feasible {p:?} but empty ({e:?})"),
                PruneOutcome::Box(pb) => {
                    for (i, (_, v)) in p.iter().enumerate() {
                        prop_assert!(pb.0[i].contains(*v), "{p:?} escapes {:?}", pb.0);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unsat_is_never_reported_with_a_feasible_sample(
        cs in prop::collection::vec(arb_constraint(), 1..3),
        b in arb_box(),
        seed in any::<u64>(),
    ) {
        let sp = space_of(&b);
        let items = compile(&cs, &sp);
        let refs: Vec<&Contractor> = items.iter().collect();
        let cfg = IcpConfig { max_boxes: 2000, ..IcpConfig::default() };
        let r = delta_check(&sp, &refs, &sp.root_box(), 0.01, &cfg, &mut IcpStats::default());
        if let Ok(DeltaOutcome::Unsat(_)) = r {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..300 {
                let p = sample(&b, &mut rng);
                prop_assert!(!feasible(&cs, &p), "unsat yet {p:?} satisfies {cs:?}");
            }
        }
    }

    #[test]
    fn shrinking_delta_keeps_unsat(
        cs in prop::collection::vec(arb_constraint(), 1..3),
        b in arb_box(),
    ) {
        let sp = space_of(&b);
        let items = compile(&cs, &sp);
        let refs: Vec<&Contractor> = items.iter().collect();
        let cfg = IcpConfig { max_boxes: 2000, ..IcpConfig::default() };
        let coarse = delta_check(&sp, &refs, &sp.root_box(), 0.1, &cfg, &mut IcpStats::default());
        if let Ok(DeltaOutcome::Unsat(_)) = coarse {
            let fine = delta_check(&sp, &refs, &sp.root_box(), 0.01, &cfg, &mut IcpStats::default());
            prop_assert!(!matches!(fine, Ok(DeltaOutcome::Sat(_))), "{cs:?}: unsat at 0.1 but {fine:?} at 0.01");
        }
    }

    #[test]
    fn sat_boxes_satisfy_every_constraint_within_delta(
        cs in prop::collection::vec(arb_constraint(), 1..3),
        b in arb_box(),
    ) {
        let sp = space_of(&b);
        let items = compile(&cs, &sp);
        let refs: Vec<&Contractor> = items.iter().collect();
        let cfg = IcpConfig { max_boxes: 2000, ..IcpConfig::default() };
        if let Ok(DeltaOutcome::Sat(w)) = delta_check(&sp, &refs, &sp.root_box(), 0.05, &cfg, &mut IcpStats::default()) {
            prop_assert!(sp.root_box().contains(&w));
            let env: BTreeMap<String, Interval> = w.to_map(&sp);
            for c in &cs {
                for n in c.normalize() {
                    let g = n.term.eval_interval(&env).unwrap();
                    prop_assert!(g.lo() >= -0.05, "{c}: {g:?}");
                }
            }
        }
    }
}

#[test]
#[allow(clippy::approx_constant)]
fn sqrt_two_witness_is_close() {
    let sp = Space::new([("x".to_string(), Interval::new(0.0, 2.0))]);
    let x = Term::var("x");
    let c = Contractor::atom(&(x.clone() * x).eq(Term::constant(2.0)), &sp).unwrap();
    // Bisection oracle for the positive root.
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if m * m < 2.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let r = delta_check(&sp, &[&c], &sp.root_box(), 0.01, &IcpConfig::default(), &mut IcpStats::default());
    let Ok(DeltaOutcome::Sat(IntervalBox(b))) = r else { panic!("{r:?}") };
    assert!(b[0].width() <= 0.01);
    assert!((b[0].mid() - lo).abs() <= 0.01 && (b[0].mid() - 1.41421356).abs() <= 0.01);
}

#[test]
fn contradictory_pair_is_refuted_with_both() {
    let sp = Space::new([("x".to_string(), Interval::new(-5.0, 5.0))]);
    let a = Contractor::atom(&Term::var("x").ge(Term::constant(1.0)), &sp).unwrap();
    let b = Contractor::atom(&Term::var("x").le(Term::constant(0.0)), &sp).unwrap();
    let r = delta_check(&sp, &[&a, &b], &sp.root_box(), 0.001, &IcpConfig::default(), &mut IcpStats::default());
    let Ok(DeltaOutcome::Unsat(e)) = r else { panic!("{r:?}") };
    assert_eq!(e.0, vec![0, 1]);
}

/// Classical RK4 with a fixed step.
fn rk4(f: &dyn Fn(&[f64]) -> Vec<f64>, x0: &[f64], t: f64, h: f64) -> Vec<f64> {
    let n = (t / h).round() as usize;
    let h = t / n as f64;
    let mut x = x0.to_vec();
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

fn drag_fall() -> Term {
    Term::constant(-9.8) - Term::constant(0.1) * Term::var("v").pow(2)
}

#[test]
fn falling_ball_velocity_matches_fine_integration() {
    let oracle = rk4(&|x| vec![-9.8 - 0.1 * x[0] * x[0]], &[0.0], 0.1, 1e-6)[0];
    let start = BTreeMap::from([("v".to_string(), Interval::point(0.0))]);
    let (end, windows) = flow_enclosure(&[("v".into(), drag_fall())], &start, Interval::point(0.1), 32).unwrap();
    let v = end["v"];
    assert!(v.contains(oracle), "{oracle} not in {v:?}");
    assert!(v.width() <= 0.05, "{v:?}");
    assert!(!windows.is_empty());
}

#[test]
fn unit_rate_and_constant_flows() {
    let start = BTreeMap::from([("x".to_string(), Interval::point(0.0))]);
    let (end, _) = flow_enclosure(&[("x".into(), Term::constant(1.0))], &start, Interval::point(2.0), 10).unwrap();
    assert!(end["x"].contains(2.0) && end["x"].width() <= 0.05);
    let start = BTreeMap::from([("x".to_string(), Interval::new(1.0, 1.5))]);
    let (end, _) = flow_enclosure(&[("x".into(), Term::constant(0.0))], &start, Interval::new(0.0, 3.0), 10).unwrap();
    assert!(Interval::new(1.0, 1.5).is_subset_of(&end["x"]) && end["x"].width() < 0.5 + 1e-9);
}

#[test]
fn benchmark_flows_contain_sampled_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Ball: dx = v, dv = -9.8 - 0.1 v².
    let ball = [("x".to_string(), Term::var("v")), ("v".to_string(), drag_fall())];
    // Car: dd = v, dv = a - 0.1 v², da = 0.
    let car = [
        ("d".to_string(), Term::var("v")),
        ("v".to_string(), Term::var("a") - Term::constant(0.1) * Term::var("v").pow(2)),
        ("a".to_string(), Term::constant(0.0)),
    ];
    for _ in 0..20 {
        // From v0 ≥ -5 the exact solution stays finite for t < 1.1.
        let (x0, v0, t) = (rng.gen_range(0.0..10.0), rng.gen_range(-5.0..10.0), rng.gen_range(0.05..0.8));
        let start = BTreeMap::from([("x".to_string(), Interval::point(x0)), ("v".to_string(), Interval::point(v0))]);
        let (end, _) = flow_enclosure(&ball, &start, Interval::point(t), 32).unwrap();
        let o = rk4(&|s| vec![s[1], -9.8 - 0.1 * s[1] * s[1]], &[x0, v0], t, 1e-5);
        assert!(end["x"].contains(o[0]) && end["v"].contains(o[1]), "ball {x0} {v0} {t}: {o:?} vs {end:?}");

        let (v0, a0, t) = (rng.gen_range(0.0..10.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.1..3.0));
        let start = BTreeMap::from([
            ("d".to_string(), Interval::point(0.0)),
            ("v".to_string(), Interval::point(v0)),
            ("a".to_string(), Interval::point(a0)),
        ]);
        let (end, _) = flow_enclosure(&car, &start, Interval::point(t), 32).unwrap_or_else(|e| panic!("car {v0} {a0} {t}: {e}"));
        let o = rk4(&|s| vec![s[1], s[2] - 0.1 * s[1] * s[1], 0.0], &[0.0, v0, a0], t, 1e-5);
        assert!(end["d"].contains(o[0]) && end["v"].contains(o[1]), "car {v0} {a0} {t}: {o:?} vs {end:?}");
    }
}

#[test]
fn unbounded_growth_is_reported() {
    let start = BTreeMap::from([("x".to_string(), Interval::point(1.0))]);
    let r = flow_enclosure(&[("x".into(), Term::var("x").pow(2))], &start, Interval::point(5.0), 4);
    assert_eq!(r.unwrap_err(), IcpError::EnclosureBlowup);
}
