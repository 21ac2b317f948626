//! Bounded unrolling of a network into a hybrid clause database.
//!
//! The Boolean skeleton uses one variable per `(step, automaton, mode)` and
//! per `(transition, label)`, plus auxiliary variables that select one
//! alternative out of each disjunction (init entries, noop and jump
//! alternatives, disjuncts of attached formulas). Numeric constraints are
//! attached to positive literals and become active when the literal is true.
//!
//! Numeric variables are named `x@i.0` and `x@i.t` for the start and end
//! value of `x` in step `i`, and `dur@i` for the duration of step `i`.

use crate::expr::{Constraint, Formula, Interval, Term};
use crate::model::{Flow, Goal, Network, DURATION};
use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use thiserror::Error;

/// Default cap on Boolean plus numeric variables.
pub const DEFAULT_VAR_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("encoding needs {needed} variables, above the cap of {cap}")]
    EncodingOverflow { needed: usize, cap: usize },
    #[error("no literal for {0}")]
    UnknownKey(String),
}

/// A Boolean variable, numbered from 0 in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

/// A literal: variable plus polarity, packed as `2 * var + negated`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn pos(self) -> Lit {
        Lit(self.0 << 1)
    }

    pub fn neg(self) -> Lit {
        Lit((self.0 << 1) | 1)
    }

    pub fn lit(self, positive: bool) -> Lit {
        if positive {
            self.pos()
        } else {
            self.neg()
        }
    }
}

impl Lit {
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_positive() {
            write!(f, "v{}", self.var().0)
        } else {
            write!(f, "-v{}", self.var().0)
        }
    }
}

/// Why an auxiliary variable exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxKind {
    Init { automaton: usize, entry: usize },
    Noop { step: usize, automaton: usize, mode: usize },
    Trans { step: usize, automaton: usize, jump: usize },
    Goal,
    Disjunct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolKey {
    /// `mode_step^automaton = mode`.
    Mode { step: usize, automaton: usize, mode: usize },
    /// `sync_step^label` for transition `step` (from step `step` to `step + 1`).
    Sync { step: usize, label: String },
    Aux(AuxKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumKey {
    Start { step: usize, var: usize },
    End { step: usize, var: usize },
    Delay { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumVar {
    pub key: NumKey,
    pub name: String,
    pub bounds: Interval,
}

pub fn start_var(step: usize, var: &str) -> String {
    format!("{var}@{step}.0")
}

pub fn end_var(step: usize, var: &str) -> String {
    format!("{var}@{step}.t")
}

pub fn delay_var(step: usize) -> String {
    format!("dur@{step}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Init,
    /// At-least-one alternative of an automaton at one transition.
    Transition,
    /// Structure of one noop or jump alternative.
    Alternative,
    /// Target-mode units and the goal predicate.
    Goal,
    /// At-least-one sync literal per transition.
    Sync,
    ExactlyOne,
    /// Disjunctions inside attached formulas.
    Disjunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub lits: Vec<Lit>,
    pub family: Family,
}

/// The unrolled problem.
#[derive(Debug, Clone)]
pub struct ClauseDB {
    pub network: Network,
    pub goal: Goal,
    pub k: usize,
    pub max_delay: f64,
    pub vars: Vec<BoolKey>,
    pub num_vars: Vec<NumVar>,
    pub clauses: Vec<Clause>,
    /// Constraint pool; attachments refer to it by index.
    pub constraints: Vec<Constraint>,
    /// Constraints activated by each variable being true, indexed by var.
    pub attached: Vec<Vec<usize>>,
    /// `[step][automaton][mode]`.
    mode_vars: Vec<Vec<Vec<Var>>>,
    /// `[transition]` label to variable.
    sync_vars: Vec<BTreeMap<String, Var>>,
    num_index: HashMap<String, usize>,
    labels: Vec<String>,
}

struct Builder {
    db: ClauseDB,
    cap: usize,
}

impl Builder {
    fn new_var(&mut self, key: BoolKey) -> Result<Var, EncodeError> {
        let v = Var(self.db.vars.len() as u32);
        self.db.vars.push(key);
        self.db.attached.push(Vec::new());
        let needed = self.db.vars.len() + self.db.num_vars.len();
        if needed > self.cap {
            return Err(EncodeError::EncodingOverflow { needed, cap: self.cap });
        }
        Ok(v)
    }

    fn clause(&mut self, family: Family, lits: Vec<Lit>) {
        self.db.clauses.push(Clause { lits, family });
    }

    /// Makes `formula` hold whenever `owner` is true. Conjunctions attach
    /// directly; each disjunction gets one auxiliary literal per disjunct.
    fn attach(&mut self, owner: Var, formula: &Formula) -> Result<(), EncodeError> {
        match formula {
            Formula::Atom(c) => {
                let id = self.db.constraints.len();
                self.db.constraints.push(c.clone());
                self.db.attached[owner.index()].push(id);
            }
            Formula::And(fs) => {
                for f in fs {
                    self.attach(owner, f)?;
                }
            }
            Formula::Or(fs) => {
                let mut lits = vec![owner.neg()];
                for f in fs {
                    let d = self.new_var(BoolKey::Aux(AuxKind::Disjunct))?;
                    lits.push(d.pos());
                    self.attach(d, f)?;
                }
                self.clause(Family::Disjunction, lits);
            }
        }
        Ok(())
    }
}

fn rename(f: &Formula, map: impl Fn(&str) -> String) -> Formula {
    f.rename(&map)
}

fn eq(a: String, b: String) -> Formula {
    Formula::Atom(Term::Var(a).eq(Term::Var(b)))
}

/// Unrolls `network` for `k` transitions with per-step delay in `[0, max_delay]`.
pub fn encode(network: &Network, goal: &Goal, k: usize, max_delay: f64) -> Result<ClauseDB, EncodeError> {
    encode_with_cap(network, goal, k, max_delay, DEFAULT_VAR_CAP)
}

pub fn encode_with_cap(
    network: &Network,
    goal: &Goal,
    k: usize,
    max_delay: f64,
    cap: usize,
) -> Result<ClauseDB, EncodeError> {
    let labels: Vec<String> = network.alphabet().into_iter().collect();
    let mut b = Builder {
        db: ClauseDB {
            network: network.clone(),
            goal: goal.clone(),
            k,
            max_delay,
            vars: Vec::new(),
            num_vars: Vec::new(),
            clauses: Vec::new(),
            constraints: Vec::new(),
            attached: Vec::new(),
            mode_vars: Vec::new(),
            sync_vars: Vec::new(),
            num_index: HashMap::new(),
            labels: labels.clone(),
        },
        cap,
    };
    let all_vars = network.variables();

    let mode_count: usize = network.automata.iter().map(|a| a.modes.len()).sum();
    let estimate = (k + 1) * (mode_count + 2 * all_vars.len() + 1) + k * labels.len();
    if estimate > cap {
        return Err(EncodeError::EncodingOverflow { needed: estimate, cap });
    }

    // Numeric variables.
    for step in 0..=k {
        for (i, (d, _)) in all_vars.iter().enumerate() {
            for (key, name) in [
                (NumKey::Start { step, var: i }, start_var(step, &d.name)),
                (NumKey::End { step, var: i }, end_var(step, &d.name)),
            ] {
                b.db.num_index.insert(name.clone(), b.db.num_vars.len());
                b.db.num_vars.push(NumVar { key, name, bounds: d.bounds });
            }
        }
        let name = delay_var(step);
        b.db.num_index.insert(name.clone(), b.db.num_vars.len());
        b.db.num_vars.push(NumVar { key: NumKey::Delay { step }, name, bounds: Interval::new(0.0, max_delay) });
    }

    // Mode variables first, then sync variables: this is the internal
    // decision order of the Boolean solver.
    for step in 0..=k {
        let mut per_aut = Vec::new();
        for (j, a) in network.automata.iter().enumerate() {
            let vs = (0..a.modes.len())
                .map(|q| b.new_var(BoolKey::Mode { step, automaton: j, mode: q }))
                .collect::<Result<Vec<_>, _>>()?;
            per_aut.push(vs);
        }
        b.db.mode_vars.push(per_aut);
    }
    for step in 0..k {
        let mut m = BTreeMap::new();
        for l in &labels {
            m.insert(l.clone(), b.new_var(BoolKey::Sync { step, label: l.clone() })?);
        }
        b.db.sync_vars.push(m);
    }

    // Exactly one mode per automaton per step.
    for step in 0..=k {
        for j in 0..network.automata.len() {
            let vs = b.db.mode_vars[step][j].clone();
            b.clause(Family::ExactlyOne, vs.iter().map(|v| v.pos()).collect());
            for x in 0..vs.len() {
                for y in x + 1..vs.len() {
                    b.clause(Family::ExactlyOne, vec![vs[x].neg(), vs[y].neg()]);
                }
            }
        }
    }

    for (j, a) in network.automata.iter().enumerate() {
        // Init: one selected entry fixes the initial mode and start values.
        let mut alts = Vec::new();
        for (r, e) in a.init.iter().enumerate() {
            let v = b.new_var(BoolKey::Aux(AuxKind::Init { automaton: j, entry: r }))?;
            let q = a.mode_index(&e.mode).expect("validated");
            b.clause(Family::Init, vec![v.neg(), b.db.mode_vars[0][j][q].pos()]);
            b.attach(v, &rename(&e.formula, |x| start_var(0, x)))?;
            alts.push(v.pos());
        }
        b.clause(Family::Init, alts);

        // Maintain: flows and endpoint invariants of the active mode.
        for step in 0..=k {
            for (q, m) in a.modes.iter().enumerate() {
                let mv = b.db.mode_vars[step][j][q];
                let mut parts = Vec::new();
                match &m.flow {
                    Flow::ClosedForm(f) => {
                        parts.push(rename(f, |x| closed_form_name(step, x)));
                        let written = f.free_vars();
                        for d in &a.vars {
                            if !written.contains(&crate::model::end_name(&d.name)) {
                                parts.push(eq(end_var(step, &d.name), start_var(step, &d.name)));
                            }
                        }
                    }
                    Flow::Ode(eqs) => {
                        for d in &a.vars {
                            if !eqs.iter().any(|(x, _)| x == &d.name) {
                                parts.push(eq(end_var(step, &d.name), start_var(step, &d.name)));
                            }
                        }
                    }
                }
                parts.push(rename(&m.invariant, |x| start_var(step, x)));
                parts.push(rename(&m.invariant, |x| end_var(step, x)));
                b.attach(mv, &Formula::And(parts))?;
            }
        }

        // Transitions: a noop or one of the jumps.
        for step in 0..k {
            let mut alts = Vec::new();
            let frame = |b: &mut Builder, v: Var, keep: &dyn Fn(&str) -> bool| -> Result<(), EncodeError> {
                let parts: Vec<Formula> = a
                    .vars
                    .iter()
                    .filter(|d| keep(&d.name))
                    .map(|d| eq(start_var(step + 1, &d.name), end_var(step, &d.name)))
                    .collect();
                b.attach(v, &Formula::And(parts))
            };
            for q in 0..a.modes.len() {
                let v = b.new_var(BoolKey::Aux(AuxKind::Noop { step, automaton: j, mode: q }))?;
                b.clause(Family::Alternative, vec![v.neg(), b.db.mode_vars[step][j][q].pos()]);
                b.clause(Family::Alternative, vec![v.neg(), b.db.mode_vars[step + 1][j][q].pos()]);
                for l in &a.alphabet {
                    b.clause(Family::Alternative, vec![v.neg(), b.db.sync_vars[step][l].neg()]);
                }
                frame(&mut b, v, &|_| true)?;
                alts.push(v.pos());
            }
            for (ji, jump) in a.jumps.iter().enumerate() {
                let v = b.new_var(BoolKey::Aux(AuxKind::Trans { step, automaton: j, jump: ji }))?;
                let from = a.mode_index(&jump.from).expect("validated");
                let to = a.mode_index(&jump.to).expect("validated");
                b.clause(Family::Alternative, vec![v.neg(), b.db.mode_vars[step][j][from].pos()]);
                b.clause(Family::Alternative, vec![v.neg(), b.db.mode_vars[step + 1][j][to].pos()]);
                for l in &a.alphabet {
                    let s = b.db.sync_vars[step][l];
                    let lit = if jump.labels.contains(l) { s.pos() } else { s.neg() };
                    b.clause(Family::Alternative, vec![v.neg(), lit]);
                }
                b.attach(v, &rename(&jump.guard, |x| end_var(step, x)))?;
                b.attach(
                    v,
                    &rename(&jump.update, |x| match x.strip_suffix('\'') {
                        Some(base) => start_var(step + 1, base),
                        None => end_var(step, x),
                    }),
                )?;
                let written = jump.written_vars();
                frame(&mut b, v, &|x| !written.contains(x))?;
                alts.push(v.pos());
            }
            b.clause(Family::Transition, alts);
        }
    }

    // Every transition synchronizes on at least one label.
    for step in 0..k {
        let lits = b.db.sync_vars[step].values().map(|v| v.pos()).collect();
        b.clause(Family::Sync, lits);
    }

    // Goal.
    for (aut, mode) in &goal.modes {
        let j = network.automaton_index(aut).expect("validated");
        let q = network.automata[j].mode_index(mode).expect("validated");
        b.clause(Family::Goal, vec![b.db.mode_vars[k][j][q].pos()]);
    }
    if !goal.predicate.is_trivially_true() {
        let g = b.new_var(BoolKey::Aux(AuxKind::Goal))?;
        b.clause(Family::Goal, vec![g.pos()]);
        b.attach(g, &rename(&goal.predicate, |x| end_var(k, x)))?;
    }
    Ok(b.db)
}

fn closed_form_name(step: usize, x: &str) -> String {
    if x == DURATION {
        delay_var(step)
    } else if let Some(base) = x.strip_suffix(".0") {
        start_var(step, base)
    } else if let Some(base) = x.strip_suffix(".t") {
        end_var(step, base)
    } else {
        x.to_string()
    }
}

impl ClauseDB {
    pub fn automaton_count(&self) -> usize {
        self.network.automata.len()
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn key(&self, v: Var) -> &BoolKey {
        &self.vars[v.index()]
    }

    /// The variable for `mode_step^automaton = mode`.
    pub fn mode_literal(&self, step: usize, automaton: usize, mode: &str) -> Result<Var, EncodeError> {
        let key = || format!("mode_{step}^{automaton} = {mode}");
        let a = self.network.automata.get(automaton).ok_or_else(|| EncodeError::UnknownKey(key()))?;
        let q = a.mode_index(mode).ok_or_else(|| EncodeError::UnknownKey(key()))?;
        self.mode_var(step, automaton, q).ok_or_else(|| EncodeError::UnknownKey(key()))
    }

    pub fn mode_var(&self, step: usize, automaton: usize, mode: usize) -> Option<Var> {
        self.mode_vars.get(step)?.get(automaton)?.get(mode).copied()
    }

    /// The variable for `sync_step^label`.
    pub fn sync_literal(&self, step: usize, label: &str) -> Result<Var, EncodeError> {
        self.sync_vars
            .get(step)
            .and_then(|m| m.get(label))
            .copied()
            .ok_or_else(|| EncodeError::UnknownKey(format!("sync_{step}^{label}")))
    }

    pub fn sync_vars(&self, step: usize) -> impl Iterator<Item = (&str, Var)> {
        self.sync_vars[step].iter().map(|(l, v)| (l.as_str(), *v))
    }

    pub fn mode_vars(&self, step: usize, automaton: usize) -> &[Var] {
        &self.mode_vars[step][automaton]
    }

    /// The sorted union alphabet.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_var_index(&self, name: &str) -> Option<usize> {
        self.num_index.get(name).copied()
    }

    /// Constraints attached to `v`.
    pub fn attached_constraints(&self, v: Var) -> impl Iterator<Item = &Constraint> {
        self.attached[v.index()].iter().map(|&c| &self.constraints[c])
    }

    pub fn count_family(&self, family: Family) -> usize {
        self.clauses.iter().filter(|c| c.family == family).count()
    }

    /// Noop and jump alternatives emitted for transition `step`.
    pub fn transition_alternatives(&self, step: usize) -> usize {
        self.vars
            .iter()
            .filter(|k| {
                matches!(k, BoolKey::Aux(AuxKind::Noop { step: s, .. }) | BoolKey::Aux(AuxKind::Trans { step: s, .. }) if *s == step)
            })
            .count()
    }

    pub fn describe(&self, v: Var) -> String {
        match self.key(v) {
            BoolKey::Mode { step, automaton, mode } => {
                let a = &self.network.automata[*automaton];
                format!("mode_{step}[{}]={}", a.name, a.modes[*mode].name)
            }
            BoolKey::Sync { step, label } => format!("sync_{step}[{label}]"),
            BoolKey::Aux(kind) => match kind {
                AuxKind::Init { automaton, entry } => format!("init[{}]#{entry}", self.network.automata[*automaton].name),
                AuxKind::Noop { step, automaton, mode } => {
                    let a = &self.network.automata[*automaton];
                    format!("noop_{step}[{}]={}", a.name, a.modes[*mode].name)
                }
                AuxKind::Trans { step, automaton, jump } => {
                    let a = &self.network.automata[*automaton];
                    let j = &a.jumps[*jump];
                    format!("trans_{step}[{}]#{jump}:{}->{}", a.name, j.from, j.to)
                }
                AuxKind::Goal => "goal".into(),
                AuxKind::Disjunct => format!("aux{}", v.0),
            },
        }
    }

    fn lit_name(&self, l: Lit) -> String {
        let name = format!("|{}|", self.describe(l.var()));
        if l.is_positive() {
            name
        } else {
            format!("(not {name})")
        }
    }

    /// SMT-LIB flavored listing for inspection. Not meant to be read back.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "; k = {}, max-delay = {}", self.k, self.max_delay);
        for v in &self.num_vars {
            let _ = writeln!(s, "(declare-fun {} () Real) ; in {}", v.name, v.bounds);
        }
        for i in 0..self.vars.len() {
            let _ = writeln!(s, "(declare-fun |{}| () Bool)", self.describe(Var(i as u32)));
        }
        for c in &self.clauses {
            let lits: Vec<_> = c.lits.iter().map(|&l| self.lit_name(l)).collect();
            let _ = writeln!(s, "(assert (or {})) ; {:?}", lits.join(" "), c.family);
        }
        for (i, cs) in self.attached.iter().enumerate() {
            for &c in cs {
                let _ = writeln!(
                    s,
                    "(assert (=> |{}| {}))",
                    self.describe(Var(i as u32)),
                    self.constraints[c]
                );
            }
        }
        s
    }
}
