use hyra_core::expr::{Constraint, Interval, Rel, Term};
use hyra_core::model::{validate, CompositeRun, Flow, RunState};
use hyra_core::modelio::{bundled, parse_model, parse_witness, serialize_model, serialize_witness, ModelIoError};
use std::collections::{BTreeMap, BTreeSet};

#[test]
fn every_bundled_model_validates() {
    for (name, text) in bundled::ALL {
        let doc = parse_model(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(validate(&doc.network, &doc.goal).is_empty(), "{name}");
        assert!(doc.delta > 0.0 && doc.max_delay > 0.0, "{name}");
    }
}

#[test]
fn parse_serialize_parse_is_stable() {
    for (name, text) in bundled::ALL {
        let first = parse_model(text).unwrap();
        let again = parse_model(&serialize_model(&first)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(first, again, "{name}");
    }
}

#[test]
fn generator_one_has_a_refuel_at_rate_two() {
    let doc = parse_model(bundled::get("generator_linear_1").unwrap()).unwrap();
    let names: Vec<_> = doc.network.automata.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["generator", "refuel1", "lock"]);
    let active = doc.network.automata[1].mode("active").unwrap();
    let Flow::ClosedForm(f) = &active.flow else { panic!("refuel flow should be closed-form") };
    // xfer1.t = xfer1.0 + 2 * duration: evaluate the right-hand side at duration 1.
    let rate = f
        .atoms()
        .into_iter()
        .find(|c| c.lhs == Term::var("xfer1.t"))
        .map(|c| c.rhs.eval_point(&[("xfer1.0", 0.0), ("duration", 1.0)]).unwrap());
    assert_eq!(rate, Some(2.0));
}

#[test]
fn dribble_init_goal_and_bounce() {
    let doc = parse_model(bundled::DRIBBLE).unwrap();
    let ball = &doc.network.automata[0];
    let init = ball.init[0].formula.atoms();
    let at = |v: &str| init.iter().find(|c| c.lhs == Term::var(v)).map(|c| c.rhs.clone());
    assert_eq!(at("x"), Some(Term::Const(1.0)));
    assert_eq!(at("v"), Some(Term::Const(0.0)));

    let goal = doc.goal.predicate.as_conjunction().unwrap();
    assert!(goal.contains(&&Constraint::new(Term::var("x"), Rel::Ge, Term::Const(1.5))));
    assert!(goal.contains(&&Constraint::new(Term::var("x"), Rel::Le, Term::Const(3.0))));

    let bounce = ball.jumps.iter().find(|j| j.labels.contains("bounce_acq")).unwrap();
    let upd = bounce.update.atoms()[0];
    assert_eq!(upd.lhs, Term::var("v'"));
    assert_eq!(upd.rhs.eval_point(&[("v", 10.0)]).unwrap(), -9.0);
}

#[test]
fn car_instances_have_every_acceleration_magnitude() {
    for i in 1..=3 {
        let doc = parse_model(bundled::get(&format!("car_linear_{i}")).unwrap()).unwrap();
        let car = &doc.network.automata[0];
        for j in 1..=i {
            for kind in ["accel", "decel"] {
                let label = format!("{kind}{j}");
                let jump = car.jumps.iter().find(|jp| jp.labels.contains(&label));
                assert!(jump.is_some(), "car_linear_{i} lacks {label}");
            }
        }
        assert!(!car.jumps.iter().any(|jp| jp.labels.contains(&format!("accel{}", i + 1))));
    }
}

#[test]
fn unknown_section_keyword() {
    let text = "(network (automaton A (mode a0) (init a0)))\n(frobnicate)";
    assert!(matches!(parse_model(text), Err(ModelIoError::Syntax { .. })));
}

fn state(modes: &[(&str, &str)], x: (f64, f64)) -> RunState {
    RunState {
        duration: Interval::new(0.0, 0.25),
        modes: modes.iter().map(|(a, q)| (a.to_string(), q.to_string())).collect(),
        start: BTreeMap::from([("x".to_string(), Interval::new(x.0, x.0))]),
        end: BTreeMap::from([("x".to_string(), Interval::new(x.0, x.1))]),
    }
}

#[test]
fn witness_round_trips() {
    let run = CompositeRun {
        states: vec![state(&[("A", "a0"), ("B", "b0")], (0.0, 0.1)), state(&[("A", "a1"), ("B", "b1")], (0.1, 1.0 / 3.0))],
        labels: vec![BTreeSet::from(["s".to_string()])],
    };
    let text = serialize_witness(&run);
    assert_eq!(text.matches("(state").count(), 2);
    assert_eq!(text.matches("(labels").count(), 1);
    assert_eq!(parse_witness(&text).unwrap(), run);
    assert!(parse_witness("(run (labels 0 (s)))").is_err());
}
