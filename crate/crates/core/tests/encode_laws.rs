use hyra_core::encode::{encode, AuxKind, BoolKey, Family, Var};
use hyra_core::modelio::{bundled, parse_model};

fn step_of(name: &str) -> usize {
    let at = name.find('@').expect("unrolled name");
    let rest = &name[at + 1..];
    let end = rest.find('.').unwrap_or(rest.len());
    rest[..end].parse().expect("step index")
}

#[test]
fn transition_alternatives_match_the_closed_form_on_every_bundled_model() {
    for (file, text) in bundled::ALL {
        let doc = parse_model(text).unwrap();
        let db = encode(&doc.network, &doc.goal, doc.k, doc.max_delay).unwrap();
        let per_step: usize = doc.network.automata.iter().map(|a| a.jumps.len() + a.modes.len()).sum();
        for step in 0..doc.k {
            assert_eq!(db.transition_alternatives(step), per_step, "{file} step {step}");
        }
        assert_eq!(db.count_family(Family::Transition), doc.k * doc.network.automata.len(), "{file}");
        assert_eq!(db.count_family(Family::Sync), doc.k, "{file}");
    }
}

#[test]
fn generator_one_counts_at_bound_three() {
    let doc = parse_model(bundled::get("generator_linear_1").unwrap()).unwrap();
    let db = encode(&doc.network, &doc.goal, 3, doc.max_delay).unwrap();
    let per_step: usize = doc.network.automata.iter().map(|a| a.jumps.len() + a.modes.len()).sum();
    let trans = db.vars.iter().filter(|k| matches!(k, BoolKey::Aux(AuxKind::Trans { .. }))).count();
    let noop = db.vars.iter().filter(|k| matches!(k, BoolKey::Aux(AuxKind::Noop { .. }))).count();
    assert_eq!(trans + noop, 3 * per_step);
    let jumps: usize = doc.network.automata.iter().map(|a| a.jumps.len()).sum();
    assert_eq!(trans, 3 * jumps);
}

#[test]
fn attached_constraints_stay_local_to_their_step() {
    for (file, text) in bundled::ALL {
        let doc = parse_model(text).unwrap();
        let db = encode(&doc.network, &doc.goal, doc.k, doc.max_delay).unwrap();
        for (i, key) in db.vars.iter().enumerate() {
            let allowed: Vec<usize> = match key {
                BoolKey::Mode { step, .. } => vec![*step],
                BoolKey::Aux(AuxKind::Noop { step, .. }) | BoolKey::Aux(AuxKind::Trans { step, .. }) => {
                    vec![*step, step + 1]
                }
                BoolKey::Aux(AuxKind::Init { .. }) => vec![0],
                BoolKey::Aux(AuxKind::Goal) => vec![doc.k],
                _ => continue,
            };
            for c in db.attached_constraints(Var(i as u32)) {
                c.for_each_var(&mut |name: &str| {
                    assert!(allowed.contains(&step_of(name)), "{file}: {} mentions {name}", db.describe(Var(i as u32)));
                });
            }
        }
    }
}

#[test]
fn encoding_is_deterministic() {
    for (file, text) in bundled::ALL {
        let doc = parse_model(text).unwrap();
        let a = encode(&doc.network, &doc.goal, doc.k, doc.max_delay).unwrap();
        let b = encode(&doc.network, &doc.goal, doc.k, doc.max_delay).unwrap();
        assert_eq!(a.dump(), b.dump(), "{file}");
        assert_eq!(a.vars, b.vars, "{file}");
    }
}

#[test]
fn every_numeric_name_is_declared() {
    for (file, text) in bundled::ALL {
        let doc = parse_model(text).unwrap();
        let db = encode(&doc.network, &doc.goal, doc.k, doc.max_delay).unwrap();
        for c in &db.constraints {
            c.for_each_var(&mut |name: &str| {
                assert!(db.num_var_index(name).is_some(), "{file}: undeclared {name}");
            });
        }
    }
}
