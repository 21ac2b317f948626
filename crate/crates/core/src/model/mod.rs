//! Network data model: automata, modes, jumps, goals, and composite runs.
//!
//! Variable naming inside the formulas of an automaton:
//!
//! * invariants, guards, init formulas and ODE right-hand sides use the
//!   plain variable name `x` for the instantaneous value (for guards and the
//!   goal predicate that is the value at the end of the step);
//! * updates use `x` for the value before the jump and `x'` for the value at
//!   the start of the next step;
//! * closed-form flows use `x.0` and `x.t` for the start and end values and
//!   the reserved name `duration` for the time spent in the mode.
//!
//! Each continuous variable is declared (owned) by exactly one automaton.
//! Other automata read it after listing it as `shared`. Only the owner's flows
//! and updates may change it; owned variables that a mode's flow does not
//! mention stay constant, and owned variables that a jump's update does not
//! prime keep their value across the jump.

use crate::expr::{Formula, Interval, Term};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

/// Name of the mode-occupancy time inside closed-form flows.
pub const DURATION: &str = "duration";

pub fn start_name(var: &str) -> String {
    format!("{var}.0")
}

pub fn end_name(var: &str) -> String {
    format!("{var}.t")
}

pub fn primed_name(var: &str) -> String {
    format!("{var}'")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Flow {
    /// `d/dt x = term` for each listed variable.
    Ode(Vec<(String, Term)>),
    /// A relation over `x.0`, `x.t` and `duration`.
    ClosedForm(Formula),
}

impl Flow {
    pub fn constant() -> Flow {
        Flow::Ode(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub flow: Flow,
    pub invariant: Formula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub from: String,
    pub to: String,
    pub labels: BTreeSet<String>,
    pub guard: Formula,
    pub update: Formula,
}

impl Jump {
    /// Variables whose next-step start value the update constrains.
    pub fn written_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.update.for_each_var(&mut |v| {
            if let Some(base) = v.strip_suffix('\'') {
                out.insert(base.to_string());
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub bounds: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitEntry {
    pub mode: String,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Automaton {
    pub name: String,
    /// Variables owned by this automaton.
    pub vars: Vec<VarDecl>,
    /// Variables owned elsewhere that this automaton reads.
    pub shared: Vec<String>,
    pub alphabet: BTreeSet<String>,
    pub modes: Vec<Mode>,
    pub jumps: Vec<Jump>,
    pub init: Vec<InitEntry>,
}

impl Automaton {
    pub fn new(name: impl Into<String>) -> Automaton {
        Automaton {
            name: name.into(),
            vars: Vec::new(),
            shared: Vec::new(),
            alphabet: BTreeSet::new(),
            modes: Vec::new(),
            jumps: Vec::new(),
            init: Vec::new(),
        }
    }

    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.name == name)
    }

    pub fn mode(&self, name: &str) -> Option<&Mode> {
        self.modes.iter().find(|m| m.name == name)
    }

    pub fn owns(&self, var: &str) -> bool {
        self.vars.iter().any(|v| v.name == var)
    }

    pub fn sees(&self, var: &str) -> bool {
        self.owns(var) || self.shared.iter().any(|s| s == var)
    }

    /// The labels of `jump` this automaton synchronizes on (`ℓ ∩ 𝖫`).
    pub fn sync_labels<'a>(&'a self, jump: &'a Jump) -> impl Iterator<Item = &'a String> + 'a {
        jump.labels.iter().filter(|l| self.alphabet.contains(*l))
    }

    pub fn is_init_mode(&self, mode: &str) -> bool {
        self.init.iter().any(|e| e.mode == mode)
    }
}

/// All jumps leaving `mode`, in declaration order.
pub fn enabled_jumps<'a>(automaton: &'a Automaton, mode: &str) -> Vec<&'a Jump> {
    automaton.jumps.iter().filter(|j| j.from == mode).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub automata: Vec<Automaton>,
}

impl Network {
    pub fn new(automata: Vec<Automaton>) -> Network {
        Network { automata }
    }

    pub fn automaton_index(&self, name: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.name == name)
    }

    /// Every continuous variable with its bounds and owning automaton, in
    /// declaration order.
    pub fn variables(&self) -> Vec<(&VarDecl, usize)> {
        self.automata
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.vars.iter().map(move |v| (v, i)))
            .collect()
    }

    pub fn owner_of(&self, var: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.owns(var))
    }

    /// Union of all automata alphabets, sorted.
    pub fn alphabet(&self) -> BTreeSet<String> {
        self.automata.iter().flat_map(|a| a.alphabet.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    /// `(automaton, mode)` pairs the run must end in.
    pub modes: Vec<(String, String)>,
    /// Predicate over the end values of the last step.
    pub predicate: Formula,
}

impl Goal {
    pub fn target_mode(&self, automaton: &str) -> Option<&str> {
        self.modes.iter().find(|(a, _)| a == automaton).map(|(_, m)| m.as_str())
    }
}

/// Structural problems found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Diagnostic {
    #[error("network has no automata")]
    EmptyNetwork,
    #[error("duplicate automaton `{0}`")]
    DuplicateAutomaton(String),
    #[error("automaton `{automaton}`: duplicate mode `{mode}`")]
    DuplicateMode { automaton: String, mode: String },
    #[error("{locus}: unknown mode `{mode}`")]
    UnknownMode { locus: String, mode: String },
    #[error("goal: unknown automaton `{0}`")]
    UnknownAutomaton(String),
    #[error("{locus}: unbound variable `{var}`")]
    UnboundVariable { locus: String, var: String },
    #[error("automaton `{0}` has no init entry")]
    NoInit(String),
    #[error("variable `{var}` is declared by both `{first}` and `{second}`")]
    DuplicateOwner { var: String, first: String, second: String },
    #[error("automaton `{automaton}` shares `{var}`, which no automaton declares")]
    UnownedShared { automaton: String, var: String },
    #[error("{locus}: `{var}` is not owned by this automaton")]
    ForeignWrite { locus: String, var: String },
    #[error("{locus}: invariant must be a conjunction of comparisons")]
    DisjunctiveInvariant { locus: String },
    #[error("{locus}: `{var}` has two derivatives")]
    DuplicateDerivative { locus: String, var: String },
}

/// Checks every structural invariant of the network and goal. Returns an
/// empty list when the pair is well-formed.
pub fn validate(network: &Network, goal: &Goal) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if network.automata.is_empty() {
        out.push(Diagnostic::EmptyNetwork);
    }
    let mut names = BTreeSet::new();
    let mut owners: BTreeMap<&str, &str> = BTreeMap::new();
    for a in &network.automata {
        if !names.insert(a.name.as_str()) {
            out.push(Diagnostic::DuplicateAutomaton(a.name.clone()));
        }
        for v in &a.vars {
            if let Some(first) = owners.insert(&v.name, &a.name) {
                out.push(Diagnostic::DuplicateOwner {
                    var: v.name.clone(),
                    first: first.to_string(),
                    second: a.name.clone(),
                });
            }
        }
    }
    for a in &network.automata {
        for s in &a.shared {
            if !owners.contains_key(s.as_str()) {
                out.push(Diagnostic::UnownedShared { automaton: a.name.clone(), var: s.clone() });
            }
        }
        validate_automaton(a, &mut out);
    }
    for (aut, mode) in &goal.modes {
        match network.automata.iter().find(|a| &a.name == aut) {
            None => out.push(Diagnostic::UnknownAutomaton(aut.clone())),
            Some(a) if a.mode_index(mode).is_none() => out.push(Diagnostic::UnknownMode {
                locus: "goal".into(),
                mode: mode.clone(),
            }),
            Some(_) => {}
        }
    }
    for var in goal.predicate.free_vars() {
        if !owners.contains_key(var.as_str()) {
            out.push(Diagnostic::UnboundVariable { locus: "goal".into(), var });
        }
    }
    out
}

fn validate_automaton(a: &Automaton, out: &mut Vec<Diagnostic>) {
    let mut seen = BTreeSet::new();
    for m in &a.modes {
        if !seen.insert(m.name.as_str()) {
            out.push(Diagnostic::DuplicateMode { automaton: a.name.clone(), mode: m.name.clone() });
        }
    }
    if a.init.is_empty() {
        out.push(Diagnostic::NoInit(a.name.clone()));
    }
    let unbound = |locus: &str, var: String| Diagnostic::UnboundVariable { locus: locus.into(), var };
    for m in &a.modes {
        let locus = format!("automaton `{}`, mode `{}`", a.name, m.name);
        for v in m.invariant.free_vars() {
            if !a.sees(&v) {
                out.push(unbound(&locus, v));
            }
        }
        if m.invariant.as_conjunction().is_none() {
            out.push(Diagnostic::DisjunctiveInvariant { locus: locus.clone() });
        }
        match &m.flow {
            Flow::Ode(eqs) => {
                let mut lhs = BTreeSet::new();
                for (x, rhs) in eqs {
                    if !a.owns(x) {
                        out.push(Diagnostic::ForeignWrite { locus: locus.clone(), var: x.clone() });
                    }
                    if !lhs.insert(x.as_str()) {
                        out.push(Diagnostic::DuplicateDerivative { locus: locus.clone(), var: x.clone() });
                    }
                    for v in rhs.free_vars() {
                        if !a.sees(&v) {
                            out.push(unbound(&locus, v));
                        }
                    }
                }
            }
            Flow::ClosedForm(f) => {
                for v in f.free_vars() {
                    if v == DURATION {
                        continue;
                    }
                    match v.strip_suffix(".0").or_else(|| v.strip_suffix(".t")) {
                        Some(base) if a.sees(base) => {
                            if v.ends_with(".t") && !a.owns(base) {
                                out.push(Diagnostic::ForeignWrite { locus: locus.clone(), var: base.into() });
                            }
                        }
                        _ => out.push(unbound(&locus, v)),
                    }
                }
            }
        }
    }
    for (idx, j) in a.jumps.iter().enumerate() {
        let locus = format!("automaton `{}`, jump #{idx} `{}`->`{}`", a.name, j.from, j.to);
        for end in [&j.from, &j.to] {
            if a.mode_index(end).is_none() {
                out.push(Diagnostic::UnknownMode { locus: locus.clone(), mode: end.clone() });
            }
        }
        for v in j.guard.free_vars() {
            if !a.sees(&v) {
                out.push(unbound(&locus, v));
            }
        }
        for v in j.update.free_vars() {
            match v.strip_suffix('\'') {
                Some(base) if a.owns(base) => {}
                Some(base) if a.sees(base) => {
                    out.push(Diagnostic::ForeignWrite { locus: locus.clone(), var: base.into() })
                }
                Some(_) => out.push(unbound(&locus, v)),
                None if a.sees(&v) => {}
                None => out.push(unbound(&locus, v)),
            }
        }
    }
    for e in &a.init {
        let locus = format!("automaton `{}`, init", a.name);
        if a.mode_index(&e.mode).is_none() {
            out.push(Diagnostic::UnknownMode { locus: locus.clone(), mode: e.mode.clone() });
        }
        for v in e.formula.free_vars() {
            if !a.sees(&v) {
                out.push(unbound(&locus, v));
            }
        }
    }
}

/// Minimum number of jumps from an initial mode; `Infinite` when unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cost {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(c) => write!(f, "{c}"),
            Cost::Infinite => write!(f, "inf"),
        }
    }
}

/// Per-mode cost of one automaton, indexed like `Automaton::modes`.
pub fn run_costs_by_index(automaton: &Automaton) -> Vec<Cost> {
    let mut cost = vec![Cost::Infinite; automaton.modes.len()];
    let mut queue = VecDeque::new();
    for e in &automaton.init {
        if let Some(q) = automaton.mode_index(&e.mode) {
            if cost[q] != Cost::Finite(0) {
                cost[q] = Cost::Finite(0);
                queue.push_back(q);
            }
        }
    }
    let succ: Vec<Vec<usize>> = automaton
        .modes
        .iter()
        .map(|m| {
            enabled_jumps(automaton, &m.name)
                .into_iter()
                .filter_map(|j| automaton.mode_index(&j.to))
                .collect()
        })
        .collect();
    while let Some(q) = queue.pop_front() {
        let Cost::Finite(c) = cost[q] else { unreachable!() };
        for &r in &succ[q] {
            if cost[r] == Cost::Infinite {
                cost[r] = Cost::Finite(c + 1);
                queue.push_back(r);
            }
        }
    }
    cost
}

/// Mode name to cost for one automaton.
pub fn run_costs(automaton: &Automaton) -> BTreeMap<String, Cost> {
    automaton
        .modes
        .iter()
        .map(|m| m.name.clone())
        .zip(run_costs_by_index(automaton))
        .collect()
}

/// One timed network state of a composite run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub duration: Interval,
    /// Mode of each automaton, in network order.
    pub modes: Vec<(String, String)>,
    pub start: BTreeMap<String, Interval>,
    pub end: BTreeMap<String, Interval>,
}

/// States interleaved with synchronization label sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositeRun {
    pub states: Vec<RunState>,
    pub labels: Vec<BTreeSet<String>>,
}

impl CompositeRun {
    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.labels.len()
    }

    pub fn is_well_formed(&self) -> bool {
        self.states.len() == self.labels.len() + 1
            && self.states.iter().all(|s| s.duration.hi() >= 0.0)
    }

    /// The mode vector of state `i` as names only.
    pub fn mode_vector(&self, i: usize) -> Vec<&str> {
        self.states[i].modes.iter().map(|(_, m)| m.as_str()).collect()
    }
}
