use super::*;
use crate::encode::Var;
use crate::modelio::{bundled, parse_model};
use crate::sat::EntryKind;

fn doc(text: &str) -> (Network, Goal) {
    let d = parse_model(text).unwrap();
    (d.network, d.goal)
}

fn empty() -> Blocked {
    Blocked::default()
}

fn cfg(guidance: Guidance, k: usize) -> Config {
    Config { guidance, k, max_delay: 1.0, ..Config::default() }
}

#[test]
fn toy_run_literals() {
    let (net, goal) = doc(bundled::TOY);
    let db = encode(&net, &goal, 1, 1.0).unwrap();
    let gen = RunGen::new(&net, 1);
    let lits = gen.gen_run(&db, &[]).unwrap();
    let names: Vec<String> = lits.iter().map(|&l| db.describe(l.var())).collect();
    let expect = [
        db.mode_literal(0, 0, "a0").unwrap(),
        db.mode_literal(0, 1, "b0").unwrap(),
        db.mode_literal(1, 0, "a1").unwrap(),
        db.sync_literal(0, "s").unwrap(),
        db.mode_literal(1, 1, "b1").unwrap(),
    ];
    assert_eq!(lits, expect.map(Var::pos).to_vec(), "{names:?}");
}

#[test]
fn toy_stack() {
    let (net, _) = doc(bundled::TOY);
    let gen = RunGen::new(&net, 1);
    let s = gen.dfs(&empty()).unwrap();
    assert_eq!(
        s,
        vec![
            Entry::Init { to: 0 },
            Entry::Init { to: 0 },
            Entry::Jump { from: 0, jump: 0, to: 1 },
            Entry::Jump { from: 0, jump: 0, to: 1 },
        ]
    );
}

#[test]
fn blocked_initial_mode_gives_no_run() {
    let (net, goal) = doc(bundled::TOY);
    let db = encode(&net, &goal, 1, 1.0).unwrap();
    let gen = RunGen::new(&net, 1);
    let trail = vec![TrailEntry {
        lit: db.mode_literal(0, 0, "a0").unwrap().neg(),
        kind: EntryKind::Decision,
        level: 1,
        antecedent: None,
    }];
    assert!(gen.gen_run(&db, &trail).is_none());
}

#[test]
fn zero_steps_emit_initial_modes_only() {
    let (net, goal) = doc(bundled::TOY);
    let db = encode(&net, &goal, 0, 1.0).unwrap();
    let gen = RunGen::new(&net, 0);
    let lits = gen.gen_run(&db, &[]).unwrap();
    assert_eq!(lits, vec![db.mode_literal(0, 0, "a0").unwrap().pos(), db.mode_literal(0, 1, "b0").unwrap().pos()]);
}

#[test]
fn blocked_only_jump_fails() {
    let (net, _) = doc(bundled::TOY);
    let gen = RunGen::new(&net, 1);
    let mut b = empty();
    b.modes.insert((1, 0, 1));
    // The noop is still a candidate, but a step where nobody synchronizes is rejected.
    assert!(gen.dfs(&b).is_none());
}

const THREE: &str = "(network
  (automaton A (alphabet s) (mode a0) (mode a1) (jump a0 a1 (labels s)) (init a0))
  (automaton B (alphabet s) (mode b0) (mode b1) (jump b0 b1 (labels s)) (init b0))
  (automaton C (alphabet s) (mode c0) (mode c1) (jump c0 c1 (labels s)) (init c0)))
  (goal)";

#[test]
fn noop_sibling_drops_labelled_jump() {
    let (net, _) = doc(bundled::TOY);
    let gen = RunGen::new(&net, 1);
    let jump = Entry::Jump { from: 0, jump: 0, to: 1 };
    assert!(!gen.admits(1, jump, &[Entry::Noop { mode: 0 }], 1, &empty()));
    assert!(gen.admits(1, jump, &[jump], 1, &empty()));
}

#[test]
fn noop_against_two_jumps_is_dropped() {
    let (net, _) = doc(THREE);
    let gen = RunGen::new(&net, 1);
    let jump = Entry::Jump { from: 0, jump: 0, to: 1 };
    assert!(!gen.admits(2, Entry::Noop { mode: 0 }, &[jump, jump], 1, &empty()));
    assert!(gen.admits(2, jump, &[jump, jump], 1, &empty()));
}

#[test]
fn blocked_sync_drops_jump() {
    let (net, _) = doc(bundled::TOY);
    let gen = RunGen::new(&net, 1);
    let mut b = empty();
    b.syncs.insert((0, "s".into()));
    assert!(!gen.admits(0, Entry::Jump { from: 0, jump: 0, to: 1 }, &[], 1, &b));
    assert!(gen.admits(0, Entry::Noop { mode: 0 }, &[], 1, &b));
}

#[test]
fn cheaper_mode_is_explored_first() {
    // From b the jump to d (cost 2) is declared before the jump to c (cost 1).
    let text = "(network (automaton A (alphabet s) (mode a) (mode b) (mode c) (mode d)
        (jump a b (labels s)) (jump a c (labels s)) (jump b d (labels s)) (jump b c (labels s)) (init a)))
      (goal)";
    let (net, _) = doc(text);
    let gen = RunGen::new(&net, 2);
    let stack = [Entry::Init { to: 0 }, Entry::Jump { from: 0, jump: 0, to: 1 }];
    let targets: Vec<usize> = gen.successors(&stack, &empty()).iter().map(|e| e.target()).collect();
    assert_eq!(targets, vec![2, 1, 3]);
}

#[test]
fn conflict_clause_negates_decisions() {
    let d = |v: u32, kind| TrailEntry { lit: Var(v).pos(), kind, level: 1, antecedent: None };
    let trail = vec![d(0, EntryKind::Premise), d(1, EntryKind::Decision), d(2, EntryKind::Implied), d(3, EntryKind::Decision)];
    assert_eq!(conflict_from_trail(&trail), Some(vec![Var(1).neg(), Var(3).neg()]));
    assert_eq!(conflict_from_trail(&trail[..2]), Some(vec![Var(1).neg()]));
    assert_eq!(conflict_from_trail(&trail[..1]), None);
}

#[test]
fn toy_is_delta_sat_in_every_mode() {
    let (net, goal) = doc(bundled::TOY);
    for g in Guidance::ALL {
        let (out, stats) = solve(&net, &goal, &cfg(g, 1)).unwrap();
        let Outcome::DeltaSat(w) = out else { panic!("{g}: {out:?}") };
        assert_eq!(w.run.mode_vector(1), vec!["a1", "b1"], "{g}");
        assert_eq!(w.run.labels[0], BTreeSet::from(["s".to_string()]));
        assert_eq!(stats.runs > 0, g != Guidance::Plain);
    }
}

#[test]
fn toy_unsat_in_every_mode() {
    let (net, goal) = doc(bundled::TOY_UNSAT);
    for g in Guidance::ALL {
        let (out, stats) = solve(&net, &goal, &cfg(g, 1)).unwrap();
        assert!(matches!(out, Outcome::Unsat), "{g}: {out:?}");
        // A has one initial mode, B one, so there is a single initial-choice prefix to refute.
        assert!(stats.conflict_clauses <= 1, "{g}: {stats}");
    }
}

#[test]
fn guidance_names_round_trip() {
    for g in Guidance::ALL {
        assert_eq!(g.name().parse::<Guidance>().unwrap(), g);
    }
    assert!("fast".parse::<Guidance>().is_err());
}

#[test]
fn dribble_without_a_full_cycle_is_refuted_quickly() {
    let d = parse_model(bundled::DRIBBLE).unwrap();
    let c = Config { guidance: Guidance::HeuristicLearn, k: 4, max_delay: 10.0, delta: 0.1, timeout: Some(Duration::from_secs(60)), ..Config::default() };
    let (out, stats) = solve(&d.network, &d.goal, &c).unwrap();
    assert!(matches!(out, Outcome::Unsat), "{out:?} {stats}");
}

#[test]
fn required_literals_steer_the_run() {
    // Both jumps reach a1; only the second also synchronizes with B on t.
    let text = "(network
      (automaton A (alphabet s t) (mode a0) (mode a1) (jump a0 a1 (labels s)) (jump a0 a1 (labels s t)) (init a0))
      (automaton B (alphabet t) (mode b0) (jump b0 b0 (labels t)) (init b0)))
      (goal)";
    let (net, goal) = doc(text);
    let db = encode(&net, &goal, 1, 1.0).unwrap();
    let gen = RunGen::new(&net, 1);
    let t = db.sync_literal(0, "t").unwrap();
    assert!(!gen.gen_run(&db, &[]).unwrap().contains(&t.pos()));
    let trail = [TrailEntry { lit: t.pos(), kind: EntryKind::Decision, level: 1, antecedent: None }];
    let run = gen.gen_run(&db, &trail).unwrap();
    assert!(run.contains(&t.pos()) && run.contains(&db.sync_literal(0, "s").unwrap().pos()));
    let a0 = db.mode_literal(1, 0, "a0").unwrap();
    let trail = [TrailEntry { lit: a0.pos(), kind: EntryKind::Decision, level: 1, antecedent: None }];
    assert!(gen.gen_run(&db, &trail).is_none());
}
