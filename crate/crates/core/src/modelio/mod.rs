//! Reading and writing `.hna` network models and `.run` witness files.
//!
//! A model file holds one `(network ...)` form, one `(goal ...)` form and an
//! optional `(defaults ...)` form:
//!
//! ```text
//! (network
//!   (automaton ball
//!     (vars (x 0 10) (v -20 20))
//!     (alphabet bounce)
//!     (mode moving (flow (ode (d/dt x v) (d/dt v (- -9.8 (* 0.1 (^ v 2))))))
//!                  (inv (>= x 0)))
//!     (jump moving moving (labels bounce)
//!           (guard (and (= x 0) (<= v 0))) (update (= v' (* -0.9 v))))
//!     (init moving (and (= x 1) (= v 0)))))
//! (goal (modes (ball moving)) (pred (and (>= x 1.5) (<= x 3))))
//! (defaults (k 8) (max-delay 10) (delta 0.1))
//! ```

mod sexp;

use crate::expr::{BinaryOp, Constraint, Formula, Interval, Rel, Term, UnaryOp};
use crate::model::{
    validate, Automaton, CompositeRun, Diagnostic, Flow, Goal, InitEntry, Jump, Mode, Network, RunState,
    VarDecl,
};
use sexp::{error_at, read_all, Sexp};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelIoError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("model is not well-formed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<Diagnostic>),
}

/// Step bound used when a model has no `(k ...)` default.
pub const FALLBACK_K: usize = 1;
/// Delay bound used when a model has no `(max-delay ...)` default.
pub const FALLBACK_MAX_DELAY: f64 = 100.0;
/// Precision used when a model has no `(delta ...)` default.
pub const FALLBACK_DELTA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub network: Network,
    pub goal: Goal,
    pub k: usize,
    pub max_delay: f64,
    pub delta: f64,
}

type Result<T> = std::result::Result<T, ModelIoError>;

fn atom_of<'a>(s: &'a Sexp, what: &str) -> Result<&'a str> {
    s.atom().ok_or_else(|| error_at(s.pos(), format!("expected {what}, found a list")))
}

fn list_of<'a>(s: &'a Sexp, what: &str) -> Result<&'a [Sexp]> {
    s.list().ok_or_else(|| error_at(s.pos(), format!("expected {what}, found an atom")))
}

fn number(s: &Sexp) -> Result<f64> {
    let a = atom_of(s, "a number")?;
    match a.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(error_at(s.pos(), format!("expected a number, found `{a}`"))),
    }
}

fn is_number(a: &str) -> bool {
    a.parse::<f64>().map(|v| !v.is_nan()).unwrap_or(false)
}

pub fn parse_term(s: &Sexp) -> Result<Term> {
    match s {
        Sexp::Atom(a, pos) => {
            if is_number(a) {
                Ok(Term::Const(a.parse().unwrap()))
            } else if a.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') {
                Ok(Term::Var(a.clone()))
            } else {
                Err(error_at(*pos, format!("`{a}` is not a number or variable")))
            }
        }
        Sexp::List(items, pos) => {
            let head = items
                .first()
                .and_then(Sexp::atom)
                .ok_or_else(|| error_at(*pos, "term application needs an operator"))?;
            let args = items[1..].iter().map(parse_term).collect::<Result<Vec<_>>>()?;
            let n = args.len();
            let fold = |op: BinaryOp, args: Vec<Term>| {
                if args.len() < 2 {
                    return Err(error_at(*pos, format!("`{head}` needs at least two arguments")));
                }
                let mut it = args.into_iter();
                let first = it.next().unwrap();
                Ok(it.fold(first, |acc, t| Term::binary(op, acc, t)))
            };
            let unary = |op: UnaryOp, args: Vec<Term>| -> Result<Term> {
                match <[Term; 1]>::try_from(args) {
                    Ok([t]) => Ok(Term::unary(op, t)),
                    Err(_) => Err(error_at(*pos, format!("`{head}` takes 1 argument, got {n}"))),
                }
            };
            match head {
                "+" => fold(BinaryOp::Add, args),
                "*" => fold(BinaryOp::Mul, args),
                "-" if n == 1 => unary(UnaryOp::Neg, args),
                "-" => fold(BinaryOp::Sub, args),
                "/" if n == 2 => fold(BinaryOp::Div, args),
                "/" => Err(error_at(*pos, format!("`/` takes 2 arguments, got {n}"))),
                "min" => fold(BinaryOp::Min, args),
                "max" => fold(BinaryOp::Max, args),
                "sin" => unary(UnaryOp::Sin, args),
                "cos" => unary(UnaryOp::Cos, args),
                "exp" => unary(UnaryOp::Exp, args),
                "sqrt" => unary(UnaryOp::Sqrt, args),
                "^" => {
                    let e = items.get(2).map(number).transpose()?;
                    match e {
                        Some(e) if n == 2 && e >= 0.0 && e.fract() == 0.0 && e <= u32::MAX as f64 => {
                            Ok(args.into_iter().next().unwrap().pow(e as u32))
                        }
                        _ => Err(error_at(*pos, "`^` takes a term and a non-negative integer exponent")),
                    }
                }
                other => Err(error_at(*pos, format!("unknown function `{other}`"))),
            }
        }
    }
}

pub fn parse_formula(s: &Sexp) -> Result<Formula> {
    match s {
        Sexp::Atom(a, pos) => match a.as_str() {
            "true" => Ok(Formula::tt()),
            "false" => Ok(Formula::ff()),
            _ => Err(error_at(*pos, format!("expected a formula, found `{a}`"))),
        },
        Sexp::List(items, pos) => {
            let head = items
                .first()
                .and_then(Sexp::atom)
                .ok_or_else(|| error_at(*pos, "formula needs a connective or relation"))?;
            match head {
                "and" | "or" => {
                    let parts = items[1..].iter().map(parse_formula).collect::<Result<Vec<_>>>()?;
                    Ok(if head == "and" { Formula::And(parts) } else { Formula::Or(parts) })
                }
                rel => {
                    let rel = Rel::from_symbol(rel)
                        .ok_or_else(|| error_at(*pos, format!("unknown relation `{rel}`")))?;
                    if items.len() != 3 {
                        return Err(error_at(*pos, "comparison takes two terms"));
                    }
                    Ok(Formula::Atom(Constraint::new(parse_term(&items[1])?, rel, parse_term(&items[2])?)))
                }
            }
        }
    }
}

fn parse_flow(items: &[Sexp], pos: sexp::Pos) -> Result<Flow> {
    let [body] = items else {
        return Err(error_at(pos, "`flow` takes exactly one `ode` or `closed-form` form"));
    };
    let parts = list_of(body, "a flow body")?;
    match body.head() {
        Some("ode") => {
            let mut eqs = Vec::new();
            for eq in &parts[1..] {
                let e = list_of(eq, "`(d/dt x term)`")?;
                if eq.head() != Some("d/dt") || e.len() != 3 {
                    return Err(error_at(eq.pos(), "expected `(d/dt x term)`"));
                }
                eqs.push((atom_of(&e[1], "a variable")?.to_string(), parse_term(&e[2])?));
            }
            Ok(Flow::Ode(eqs))
        }
        Some("closed-form") => {
            if parts.len() != 2 {
                return Err(error_at(body.pos(), "`closed-form` takes one formula"));
            }
            Ok(Flow::ClosedForm(parse_formula(&parts[1])?))
        }
        _ => Err(error_at(body.pos(), "expected `ode` or `closed-form`")),
    }
}

fn parse_automaton(items: &[Sexp], pos: sexp::Pos) -> Result<Automaton> {
    let name = items.get(1).ok_or_else(|| error_at(pos, "automaton needs a name"))?;
    let mut a = Automaton::new(atom_of(name, "an automaton name")?);
    for item in &items[2..] {
        let parts = list_of(item, "an automaton section")?;
        let p = item.pos();
        match item.head() {
            Some("vars") => {
                for v in &parts[1..] {
                    let d = list_of(v, "`(name lo hi)`")?;
                    if d.len() != 3 {
                        return Err(error_at(v.pos(), "variable declaration is `(name lo hi)`"));
                    }
                    let (lo, hi) = (number(&d[1])?, number(&d[2])?);
                    let bounds = Interval::try_new(lo, hi)
                        .ok_or_else(|| error_at(v.pos(), format!("empty bounds [{lo}, {hi}]")))?;
                    a.vars.push(VarDecl { name: atom_of(&d[0], "a variable name")?.to_string(), bounds });
                }
            }
            Some("shared") => {
                for v in &parts[1..] {
                    a.shared.push(atom_of(v, "a variable name")?.to_string());
                }
            }
            Some("alphabet") => {
                for l in &parts[1..] {
                    a.alphabet.insert(atom_of(l, "a label")?.to_string());
                }
            }
            Some("mode") => {
                let name = parts.get(1).ok_or_else(|| error_at(p, "mode needs a name"))?;
                let mut mode = Mode {
                    name: atom_of(name, "a mode name")?.to_string(),
                    flow: Flow::constant(),
                    invariant: Formula::tt(),
                };
                for sec in &parts[2..] {
                    let s = list_of(sec, "a mode section")?;
                    match sec.head() {
                        Some("flow") => mode.flow = parse_flow(&s[1..], sec.pos())?,
                        Some("inv") if s.len() == 2 => mode.invariant = parse_formula(&s[1])?,
                        _ => return Err(error_at(sec.pos(), "expected `(flow ...)` or `(inv formula)`")),
                    }
                }
                a.modes.push(mode);
            }
            Some("jump") => {
                if parts.len() < 3 {
                    return Err(error_at(p, "jump needs a source and a target mode"));
                }
                let mut jump = Jump {
                    from: atom_of(&parts[1], "a mode name")?.to_string(),
                    to: atom_of(&parts[2], "a mode name")?.to_string(),
                    labels: BTreeSet::new(),
                    guard: Formula::tt(),
                    update: Formula::tt(),
                };
                for sec in &parts[3..] {
                    let s = list_of(sec, "a jump section")?;
                    match sec.head() {
                        Some("labels") => {
                            for l in &s[1..] {
                                jump.labels.insert(atom_of(l, "a label")?.to_string());
                            }
                        }
                        Some("guard") if s.len() == 2 => jump.guard = parse_formula(&s[1])?,
                        Some("update") if s.len() == 2 => jump.update = parse_formula(&s[1])?,
                        _ => {
                            return Err(error_at(sec.pos(), "expected `(labels ...)`, `(guard f)` or `(update f)`"))
                        }
                    }
                }
                a.jumps.push(jump);
            }
            Some("init") => {
                let mode = parts.get(1).ok_or_else(|| error_at(p, "init needs a mode"))?;
                let formula = match parts.len() {
                    2 => Formula::tt(),
                    3 => parse_formula(&parts[2])?,
                    _ => return Err(error_at(p, "init is `(init mode [formula])`")),
                };
                a.init.push(InitEntry { mode: atom_of(mode, "a mode name")?.to_string(), formula });
            }
            Some(other) => return Err(error_at(p, format!("unknown automaton section `{other}`"))),
            None => return Err(error_at(p, "empty automaton section")),
        }
    }
    Ok(a)
}

fn parse_goal(items: &[Sexp]) -> Result<Goal> {
    let mut goal = Goal { modes: Vec::new(), predicate: Formula::tt() };
    for sec in &items[1..] {
        let s = list_of(sec, "a goal section")?;
        match sec.head() {
            Some("modes") => {
                for pair in &s[1..] {
                    let pr = list_of(pair, "`(automaton mode)`")?;
                    if pr.len() != 2 {
                        return Err(error_at(pair.pos(), "expected `(automaton mode)`"));
                    }
                    goal.modes.push((
                        atom_of(&pr[0], "an automaton name")?.to_string(),
                        atom_of(&pr[1], "a mode name")?.to_string(),
                    ));
                }
            }
            Some("pred") if s.len() == 2 => goal.predicate = parse_formula(&s[1])?,
            _ => return Err(error_at(sec.pos(), "expected `(modes ...)` or `(pred formula)`")),
        }
    }
    Ok(goal)
}

/// Parses a model file and validates it.
pub fn parse_model(text: &str) -> Result<ModelDocument> {
    let mut network = None;
    let mut goal = None;
    let (mut k, mut max_delay, mut delta) = (FALLBACK_K, FALLBACK_MAX_DELAY, FALLBACK_DELTA);
    for top in read_all(text)? {
        let items = list_of(&top, "a top-level section")?;
        match top.head() {
            Some("network") => {
                let mut automata = Vec::new();
                for a in &items[1..] {
                    if a.head() != Some("automaton") {
                        return Err(error_at(a.pos(), "expected `(automaton ...)`"));
                    }
                    automata.push(parse_automaton(a.list().unwrap(), a.pos())?);
                }
                network = Some(Network::new(automata));
            }
            Some("goal") => goal = Some(parse_goal(items)?),
            Some("defaults") => {
                for d in &items[1..] {
                    let s = list_of(d, "a default")?;
                    if s.len() != 2 {
                        return Err(error_at(d.pos(), "default is `(name value)`"));
                    }
                    let v = number(&s[1])?;
                    match d.head() {
                        Some("k") if v >= 0.0 && v.fract() == 0.0 => k = v as usize,
                        Some("max-delay") if v > 0.0 => max_delay = v,
                        Some("delta") if v > 0.0 => delta = v,
                        Some("k" | "max-delay" | "delta") => {
                            return Err(error_at(s[1].pos(), format!("invalid value {v}")))
                        }
                        _ => return Err(error_at(d.pos(), "unknown default; expected k, max-delay or delta")),
                    }
                }
            }
            Some(other) => return Err(error_at(top.pos(), format!("unknown section `{other}`"))),
            None => return Err(error_at(top.pos(), "empty top-level section")),
        }
    }
    let network = network.ok_or_else(|| error_at(sexp::Pos { line: 1, col: 1 }, "missing `(network ...)`"))?;
    let goal = goal.unwrap_or(Goal { modes: Vec::new(), predicate: Formula::tt() });
    let diags = validate(&network, &goal);
    if !diags.is_empty() {
        return Err(ModelIoError::Semantic(diags));
    }
    Ok(ModelDocument { network, goal, k, max_delay, delta })
}

fn num(x: f64) -> String {
    Term::Const(x).to_string()
}

/// Writes a model in the format [`parse_model`] reads.
pub fn serialize_model(doc: &ModelDocument) -> String {
    let mut s = String::from("(network\n");
    for a in &doc.network.automata {
        let _ = writeln!(s, "  (automaton {}", a.name);
        if !a.vars.is_empty() {
            s.push_str("    (vars");
            for v in &a.vars {
                let _ = write!(s, " ({} {} {})", v.name, num(v.bounds.lo()), num(v.bounds.hi()));
            }
            s.push_str(")\n");
        }
        if !a.shared.is_empty() {
            let _ = writeln!(s, "    (shared {})", a.shared.join(" "));
        }
        if !a.alphabet.is_empty() {
            let labels: Vec<_> = a.alphabet.iter().map(String::as_str).collect();
            let _ = writeln!(s, "    (alphabet {})", labels.join(" "));
        }
        for m in &a.modes {
            let _ = write!(s, "    (mode {}", m.name);
            match &m.flow {
                Flow::Ode(eqs) if eqs.is_empty() => {}
                Flow::Ode(eqs) => {
                    s.push_str(" (flow (ode");
                    for (x, t) in eqs {
                        let _ = write!(s, " (d/dt {x} {t})");
                    }
                    s.push_str("))");
                }
                Flow::ClosedForm(f) => {
                    let _ = write!(s, " (flow (closed-form {f}))");
                }
            }
            if !m.invariant.is_trivially_true() {
                let _ = write!(s, " (inv {})", m.invariant);
            }
            s.push_str(")\n");
        }
        for j in &a.jumps {
            let _ = write!(s, "    (jump {} {}", j.from, j.to);
            if !j.labels.is_empty() {
                let labels: Vec<_> = j.labels.iter().map(String::as_str).collect();
                let _ = write!(s, " (labels {})", labels.join(" "));
            }
            if !j.guard.is_trivially_true() {
                let _ = write!(s, " (guard {})", j.guard);
            }
            if !j.update.is_trivially_true() {
                let _ = write!(s, " (update {})", j.update);
            }
            s.push_str(")\n");
        }
        for e in &a.init {
            let _ = writeln!(s, "    (init {} {})", e.mode, e.formula);
        }
        s.push_str("  )\n");
    }
    s.push_str(")\n(goal");
    if !doc.goal.modes.is_empty() {
        s.push_str(" (modes");
        for (a, m) in &doc.goal.modes {
            let _ = write!(s, " ({a} {m})");
        }
        s.push(')');
    }
    let _ = writeln!(s, " (pred {}))", doc.goal.predicate);
    let _ = writeln!(s, "(defaults (k {}) (max-delay {}) (delta {}))", doc.k, num(doc.max_delay), num(doc.delta));
    s
}

fn write_valuation(s: &mut String, tag: &str, vals: &BTreeMap<String, Interval>) {
    let _ = write!(s, "\n    ({tag}");
    for (x, iv) in vals {
        let _ = write!(s, " ({x} {:?} {:?})", iv.lo(), iv.hi());
    }
    s.push(')');
}

/// Writes a composite run as a `.run` document.
pub fn serialize_witness(run: &CompositeRun) -> String {
    let mut s = String::from("(run");
    for (i, st) in run.states.iter().enumerate() {
        let _ = write!(s, "\n  (state {i}\n    (duration {:?} {:?})\n    (modes", st.duration.lo(), st.duration.hi());
        for (a, q) in &st.modes {
            let _ = write!(s, " ({a} {q})");
        }
        s.push(')');
        write_valuation(&mut s, "start", &st.start);
        write_valuation(&mut s, "end", &st.end);
        s.push(')');
        if let Some(labels) = run.labels.get(i) {
            let l: Vec<_> = labels.iter().map(String::as_str).collect();
            let _ = write!(s, "\n  (labels {i} ({}))", l.join(" "));
        }
    }
    s.push_str(")\n");
    s
}

fn parse_interval(items: &[Sexp], pos: sexp::Pos) -> Result<Interval> {
    let [lo, hi] = items else {
        return Err(error_at(pos, "interval is `lo hi`"));
    };
    let (lo, hi) = (number(lo)?, number(hi)?);
    Interval::try_new(lo, hi).ok_or_else(|| error_at(pos, "empty interval"))
}

fn parse_valuation(sec: &Sexp) -> Result<BTreeMap<String, Interval>> {
    let mut out = BTreeMap::new();
    for v in &list_of(sec, "a valuation")?[1..] {
        let e = list_of(v, "`(x lo hi)`")?;
        let name = e.first().ok_or_else(|| error_at(v.pos(), "empty entry"))?;
        out.insert(atom_of(name, "a variable")?.to_string(), parse_interval(&e[1..], v.pos())?);
    }
    Ok(out)
}

/// Reads a `.run` document produced by [`serialize_witness`].
pub fn parse_witness(text: &str) -> Result<CompositeRun> {
    let top = read_all(text)?;
    let [doc] = &top[..] else {
        return Err(error_at(sexp::Pos { line: 1, col: 1 }, "expected a single `(run ...)` form"));
    };
    if doc.head() != Some("run") {
        return Err(error_at(doc.pos(), "expected `(run ...)`"));
    }
    let mut run = CompositeRun::default();
    for item in &doc.list().unwrap()[1..] {
        let parts = list_of(item, "a run entry")?;
        let index = parts.get(1).map(number).transpose()?;
        match (item.head(), index) {
            (Some("state"), Some(i)) if i as usize == run.states.len() => {
                let mut st = RunState {
                    duration: Interval::point(0.0),
                    modes: Vec::new(),
                    start: BTreeMap::new(),
                    end: BTreeMap::new(),
                };
                for sec in &parts[2..] {
                    let s = list_of(sec, "a state section")?;
                    match sec.head() {
                        Some("duration") => st.duration = parse_interval(&s[1..], sec.pos())?,
                        Some("modes") => {
                            for m in &s[1..] {
                                let pr = list_of(m, "`(automaton mode)`")?;
                                if pr.len() != 2 {
                                    return Err(error_at(m.pos(), "expected `(automaton mode)`"));
                                }
                                st.modes.push((
                                    atom_of(&pr[0], "an automaton")?.to_string(),
                                    atom_of(&pr[1], "a mode")?.to_string(),
                                ));
                            }
                        }
                        Some("start") => st.start = parse_valuation(sec)?,
                        Some("end") => st.end = parse_valuation(sec)?,
                        _ => return Err(error_at(sec.pos(), "unknown state section")),
                    }
                }
                run.states.push(st);
            }
            (Some("labels"), Some(i)) if i as usize == run.labels.len() && parts.len() == 3 => {
                let mut set = BTreeSet::new();
                for l in list_of(&parts[2], "a label list")? {
                    set.insert(atom_of(l, "a label")?.to_string());
                }
                run.labels.push(set);
            }
            _ => return Err(error_at(item.pos(), "expected `(state i ...)` or `(labels i (...))` in order")),
        }
    }
    if !run.is_well_formed() {
        return Err(error_at(doc.pos(), "run must have one more state than label sets"));
    }
    Ok(run)
}

/// Benchmark models shipped with the crate.
pub mod bundled {
    pub const TOY: &str = include_str!("../../models/toy.hna");
    pub const TOY_UNSAT: &str = include_str!("../../models/toy_unsat.hna");
    pub const DRIBBLE: &str = include_str!("../../models/dribble.hna");

    /// `(file name, contents)` of every bundled model.
    pub const ALL: &[(&str, &str)] = &[
        ("toy.hna", TOY),
        ("toy_unsat.hna", TOY_UNSAT),
        ("dribble.hna", DRIBBLE),
        ("generator_linear_0.hna", include_str!("../../models/generator_linear_0.hna")),
        ("generator_linear_1.hna", include_str!("../../models/generator_linear_1.hna")),
        ("generator_linear_2.hna", include_str!("../../models/generator_linear_2.hna")),
        ("generator_linear_0_lock1.hna", include_str!("../../models/generator_linear_0_lock1.hna")),
        ("generator_linear_1_lock1.hna", include_str!("../../models/generator_linear_1_lock1.hna")),
        ("generator_linear_2_lock1.hna", include_str!("../../models/generator_linear_2_lock1.hna")),
        ("generator_nonlinear_1.hna", include_str!("../../models/generator_nonlinear_1.hna")),
        ("car_linear_1.hna", include_str!("../../models/car_linear_1.hna")),
        ("car_linear_2.hna", include_str!("../../models/car_linear_2.hna")),
        ("car_linear_3.hna", include_str!("../../models/car_linear_3.hna")),
        ("car_linear_1_lock2.hna", include_str!("../../models/car_linear_1_lock2.hna")),
        ("car_nonlinear_1.hna", include_str!("../../models/car_nonlinear_1.hna")),
    ];

    /// Looks a bundled model up by file name, with or without the `.hna` suffix.
    pub fn get(name: &str) -> Option<&'static str> {
        let file = if name.ends_with(".hna") { name.to_string() } else { format!("{name}.hna") };
        ALL.iter().find(|(n, _)| *n == file).map(|(_, t)| *t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_section_is_a_syntax_error() {
        let e = parse_model("(network (automaton A (mode a0) (init a0)))\n(bogus 1)").unwrap_err();
        assert!(matches!(e, ModelIoError::Syntax { line: 2, col: 1, .. }), "{e}");
        let e = parse_model("(network (automaton A (modes a0)))").unwrap_err();
        assert!(matches!(e, ModelIoError::Syntax { .. }));
    }

    #[test]
    fn semantic_errors_carry_diagnostics() {
        let e = parse_model("(network (automaton A (mode a0) (jump a0 q9) (init a0)))").unwrap_err();
        let ModelIoError::Semantic(d) = e else { panic!("{e:?}") };
        assert!(matches!(&d[..], [Diagnostic::UnknownMode { mode, .. }] if mode == "q9"));
    }

    #[test]
    fn term_syntax() {
        let t = parse_term(&read_all("(+ (* v t) x0)").unwrap()[0]).unwrap();
        assert_eq!(t.to_string(), "(+ (* v t) x0)");
        let t = parse_term(&read_all("(- x)").unwrap()[0]).unwrap();
        assert_eq!(t, -Term::var("x"));
        let t = parse_term(&read_all("(+ a b c)").unwrap()[0]).unwrap();
        assert_eq!(t.to_string(), "(+ (+ a b) c)");
        assert!(parse_term(&read_all("(^ x 1.5)").unwrap()[0]).is_err());
        assert!(parse_term(&read_all("(tan x)").unwrap()[0]).is_err());
    }

    #[test]
    fn empty_run_round_trip() {
        let run = CompositeRun {
            states: vec![RunState {
                duration: Interval::new(0.0, 0.5),
                modes: vec![("A".into(), "a0".into())],
                start: BTreeMap::from([("x".to_string(), Interval::new(1.0, 1.0))]),
                end: BTreeMap::from([("x".to_string(), Interval::new(0.1, 0.30000000000000004))]),
            }],
            labels: vec![],
        };
        let text = serialize_witness(&run);
        assert!(!text.contains("labels"));
        assert_eq!(parse_witness(&text).unwrap(), run);
    }
}
