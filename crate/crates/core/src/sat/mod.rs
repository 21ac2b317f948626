//! Trail-based Boolean search with an interval theory.
//!
//! The solver exposes the trail and two assertion entry points so an outer
//! search can steer it. Unit propagation uses two watched literals and
//! conflicts are resolved to the first unique implication point. Every
//! assertion is followed by a cheap propagation of the activated real
//! constraints; the full branch-and-prune check runs once the assignment is
//! total.

mod theory;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::encode::{BoolKey, ClauseDB, Lit, NumKey, Var};
use crate::expr::Interval;
use crate::icp::{IcpConfig, IcpError, IntervalBox, Space, DEFAULT_FLOW_STEPS};
use crate::model::{CompositeRun, RunState};
use theory::{Check, Theory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("literal {0:?} is not part of the encoding")]
    UnknownLiteral(Lit),
    #[error(transparent)]
    Theory(#[from] IcpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    /// Fixed at level 0.
    Premise,
    Decision,
    Implied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrailEntry {
    pub lit: Lit,
    pub kind: EntryKind,
    pub level: u32,
    /// Index of the clause that forced the literal, for implied entries.
    pub antecedent: Option<usize>,
}

/// Decision literals of a trail, in order.
pub fn decisions(trail: &[TrailEntry]) -> Vec<Lit> {
    trail.iter().filter(|e| e.kind == EntryKind::Decision).map(|e| e.lit).collect()
}

/// A δ-satisfying assignment.
#[derive(Debug, Clone)]
pub struct Witness {
    pub assignment: Vec<bool>,
    pub witness_box: IntervalBox,
    pub run: CompositeRun,
    /// Pool indices of the attached constraints that were active.
    pub active_constraints: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Unsat,
    DeltaSat(Box<Witness>),
    Consistent,
    /// The solver undid decisions down to this level.
    Backtrack(u32),
}

/// Where a stored clause came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Problem,
    /// First-UIP resolvent.
    Learned,
    /// Negated theory explanation.
    Theory,
    /// Added through [`Solver::assert_clause`].
    Asserted,
    /// Excludes a decision prefix the theory could not settle. Not entailed.
    Blocking,
}

#[derive(Debug, Clone)]
struct Stored {
    lits: Vec<Lit>,
    origin: Origin,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub decisions: usize,
    pub conflicts: usize,
    pub learned: usize,
    pub theory_conflicts: usize,
    pub icp_checks: usize,
    pub boxes: usize,
    pub prunes: usize,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub delta: f64,
    pub icp: IcpConfig,
    pub n_flow_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig { delta: 0.01, icp: IcpConfig::default(), n_flow_steps: DEFAULT_FLOW_STEPS }
    }
}

enum Settle {
    Ok,
    Unsat,
}

pub struct Solver<'a> {
    db: &'a ClauseDB,
    clauses: Vec<Stored>,
    watches: Vec<Vec<usize>>,
    value: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<TrailEntry>,
    /// Trail length at the start of each decision level above 0.
    trail_lim: Vec<usize>,
    qhead: usize,
    /// Trail prefix already handed to the theory.
    synced: usize,
    theory: Theory<'a>,
    unsat: bool,
    incomplete: bool,
    limit: Option<IcpError>,
    /// Lowest level reached by backjumps since the current call began.
    low_water: u32,
    stats: SolverStats,
    trace: Option<Box<dyn Write + Send + 'a>>,
}

impl<'a> Solver<'a> {
    pub fn new(db: &'a ClauseDB, cfg: SolverConfig) -> Result<Solver<'a>, SatError> {
        let n = db.var_count();
        let theory = Theory::new(db, cfg.delta, cfg.icp, cfg.n_flow_steps)?;
        let mut s = Solver {
            db,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            value: vec![None; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            synced: 0,
            theory,
            unsat: false,
            incomplete: false,
            limit: None,
            low_water: 0,
            stats: SolverStats::default(),
            trace: None,
        };
        for c in &db.clauses {
            if !s.add_problem_clause(c.lits.clone()) {
                s.unsat = true;
                break;
            }
        }
        if !s.unsat {
            s.low_water = 0;
            if let Settle::Unsat = s.settle() {
                s.unsat = true;
            }
        }
        Ok(s)
    }

    /// Writes decisions, learned clauses and backjumps in a DIMACS-like form.
    pub fn set_trace(&mut self, out: Box<dyn Write + Send + 'a>) {
        self.trace = Some(out);
    }

    fn log(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_mut() {
            let _ = writeln!(t, "{}", line());
        }
    }

    fn dimacs(lits: &[Lit]) -> String {
        let mut s = String::new();
        for l in lits {
            let v = l.var().0 as i64 + 1;
            let _ = write!(s, "{} ", if l.is_positive() { v } else { -v });
        }
        s.push('0');
        s
    }

    pub fn db(&self) -> &'a ClauseDB {
        self.db
    }

    pub fn space(&self) -> &Space {
        &self.theory.space
    }

    pub fn stats(&self) -> SolverStats {
        let mut s = self.stats;
        s.icp_checks = self.theory.checks;
        s.boxes = self.theory.stats.boxes;
        s.prunes = self.theory.stats.prunes;
        s
    }

    /// Whether some part of the search was cut off by a resource limit, so
    /// that an unsat answer is not conclusive.
    pub fn is_incomplete(&self) -> bool {
        self.incomplete
    }

    /// The most recent resource limit hit by the theory check.
    pub fn last_limit(&self) -> Option<&IcpError> {
        self.limit.as_ref()
    }

    pub fn get_trail(&self) -> Vec<TrailEntry> {
        self.trail.clone()
    }

    pub fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    pub fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var().index()].map(|v| v == l.is_positive())
    }

    /// Clauses that were not part of the encoding, with their origin.
    pub fn added_clauses(&self) -> impl Iterator<Item = (Origin, &[Lit])> {
        self.clauses.iter().filter(|c| c.origin != Origin::Problem).map(|c| (c.origin, c.lits.as_slice()))
    }

    fn check_lit(&self, l: Lit) -> Result<(), SatError> {
        if l.var().index() < self.value.len() {
            Ok(())
        } else {
            Err(SatError::UnknownLiteral(l))
        }
    }

    fn assign(&mut self, l: Lit, kind: EntryKind, reason: Option<usize>) {
        let v = l.var().index();
        debug_assert!(self.value[v].is_none());
        let level = self.decision_level();
        self.value[v] = Some(l.is_positive());
        self.level[v] = level;
        self.reason[v] = reason;
        let kind = if level == 0 { EntryKind::Premise } else { kind };
        self.trail.push(TrailEntry { lit: l, kind, level, antecedent: reason });
    }

    /// Adds an encoding clause at level 0. Returns false on an immediate contradiction.
    fn add_problem_clause(&mut self, mut lits: Vec<Lit>) -> bool {
        lits.sort_unstable_by_key(|l| l.0);
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == !w[1]) {
            return true;
        }
        match lits.len() {
            0 => false,
            1 => match self.lit_value(lits[0]) {
                Some(true) => true,
                Some(false) => false,
                None => {
                    let idx = self.store(lits, Origin::Problem, false);
                    let l = self.clauses[idx].lits[0];
                    self.assign(l, EntryKind::Premise, None);
                    true
                }
            },
            _ => {
                self.store(lits, Origin::Problem, true);
                true
            }
        }
    }

    fn store(&mut self, lits: Vec<Lit>, origin: Origin, watch: bool) -> usize {
        let idx = self.clauses.len();
        if watch && lits.len() >= 2 {
            self.watches[lits[0].index()].push(idx);
            self.watches[lits[1].index()].push(idx);
        }
        if origin != Origin::Problem {
            self.log(|| format!("c {:?} {}", origin, Self::dimacs(&lits)));
        }
        self.clauses.push(Stored { lits, origin });
        idx
    }

    /// Boolean unit propagation. Returns a falsified clause on conflict.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead].lit;
            self.qhead += 1;
            let falsified = !p;
            let ws = std::mem::take(&mut self.watches[falsified.index()]);
            let mut keep = Vec::with_capacity(ws.len());
            let mut conflict = None;
            let mut it = ws.into_iter();
            for c in it.by_ref() {
                let lits = &mut self.clauses[c].lits;
                if lits[0] == falsified {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if self.value[first.var().index()].map(|v| v == first.is_positive()) == Some(true) {
                    keep.push(c);
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    let l = lits[k];
                    if self.value[l.var().index()].map(|v| v == l.is_positive()) != Some(false) {
                        lits.swap(1, k);
                        self.watches[lits[1].index()].push(c);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                keep.push(c);
                match self.lit_value(first) {
                    Some(false) => {
                        conflict = Some(c);
                        break;
                    }
                    _ => self.assign(first, EntryKind::Implied, Some(c)),
                }
            }
            keep.extend(it);
            self.watches[falsified.index()] = keep;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn backtrack_to(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level as usize];
        for e in self.trail.drain(start..) {
            let v = e.lit.var().index();
            self.value[v] = None;
            self.reason[v] = None;
        }
        self.trail_lim.truncate(level as usize);
        self.qhead = self.qhead.min(self.trail.len());
        self.synced = self.synced.min(self.trail.len());
        self.theory.pop_to(level as usize);
        self.low_water = self.low_water.min(level);
        self.log(|| format!("b {level}"));
    }

    fn new_level(&mut self) {
        self.trail_lim.push(self.trail.len());
        self.theory.push_level();
    }

    /// First-UIP analysis of a clause falsified at the current level.
    /// Returns the learned clause (asserting literal first) and backjump level.
    fn analyze(&mut self, conflict: usize) -> (Vec<Lit>, u32) {
        let cur = self.decision_level();
        let mut seen = vec![false; self.value.len()];
        let mut learnt: Vec<Lit> = vec![Lit(0)];
        let mut pending = 0usize;
        let mut idx = self.trail.len();
        let mut clause = conflict;
        let mut p: Option<Lit> = None;
        loop {
            let lits = self.clauses[clause].lits.clone();
            for &q in &lits {
                if Some(q) == p {
                    continue;
                }
                let v = q.var().index();
                if seen[v] || self.level[v] == 0 {
                    continue;
                }
                seen[v] = true;
                if self.level[v] >= cur {
                    pending += 1;
                } else {
                    learnt.push(q);
                }
            }
            loop {
                idx -= 1;
                if seen[self.trail[idx].lit.var().index()] {
                    break;
                }
            }
            let lit = self.trail[idx].lit;
            seen[lit.var().index()] = false;
            pending -= 1;
            if pending == 0 {
                learnt[0] = !lit;
                break;
            }
            clause = self.reason[lit.var().index()].expect("implied literal at conflict level");
            p = Some(lit);
        }
        let mut back = 0;
        let mut at = 1;
        for (i, l) in learnt.iter().enumerate().skip(1) {
            let lv = self.level[l.var().index()];
            if lv > back {
                back = lv;
                at = i;
            }
        }
        if learnt.len() > 1 {
            learnt.swap(1, at);
        }
        (learnt, back)
    }

    /// Resolves a clause whose literals are all false.
    fn resolve_conflict(&mut self, conflict: usize) -> Settle {
        self.stats.conflicts += 1;
        let lits = self.clauses[conflict].lits.clone();
        let top = lits.iter().map(|l| self.level[l.var().index()]).max().unwrap_or(0);
        if top == 0 {
            self.unsat = true;
            return Settle::Unsat;
        }
        self.backtrack_to(top);
        let at_top = lits.iter().filter(|l| self.level[l.var().index()] == top).count();
        if at_top == 1 {
            // Already asserting: re-watch so the single top-level literal comes first.
            let mut lits = lits;
            lits.sort_by_key(|l| std::cmp::Reverse(self.level[l.var().index()]));
            let back = lits.get(1).map_or(0, |l| self.level[l.var().index()]);
            self.backtrack_to(back);
            self.assert_learned(lits, back, None);
            return Settle::Ok;
        }
        let (learnt, back) = self.analyze(conflict);
        self.backtrack_to(back);
        self.stats.learned += 1;
        self.assert_learned(learnt, back, Some(Origin::Learned));
        Settle::Ok
    }

    /// Stores `lits` (first literal unassigned, the rest false) and asserts its first literal.
    fn assert_learned(&mut self, lits: Vec<Lit>, _level: u32, origin: Option<Origin>) {
        let first = lits[0];
        let idx = match origin {
            Some(o) => self.store(lits, o, true),
            None => self.find_or_store(lits),
        };
        if self.lit_value(first).is_none() {
            self.assign(first, EntryKind::Implied, Some(idx));
        }
    }

    /// Reuses an already stored clause with the same literals, reordering it.
    fn find_or_store(&mut self, lits: Vec<Lit>) -> usize {
        // The conflict clause was stored just before resolution; re-register its watches.
        let idx = self.clauses.len() - 1;
        let same = {
            let mut a = self.clauses[idx].lits.clone();
            let mut b = lits.clone();
            a.sort_unstable_by_key(|l| l.0);
            b.sort_unstable_by_key(|l| l.0);
            a == b
        };
        if !same {
            return self.store(lits, Origin::Asserted, true);
        }
        let old = self.clauses[idx].lits.clone();
        if old.len() >= 2 {
            for w in [old[0], old[1]] {
                self.watches[w.index()].retain(|&c| c != idx);
            }
        }
        if lits.len() >= 2 {
            self.watches[lits[0].index()].push(idx);
            self.watches[lits[1].index()].push(idx);
        }
        self.clauses[idx].lits = lits;
        idx
    }

    /// Stores a clause that may be falsified, unit or open under the
    /// current assignment and brings the trail back in line with it.
    fn add_clause(&mut self, mut lits: Vec<Lit>, origin: Origin) -> Settle {
        lits.sort_unstable_by_key(|l| l.0);
        lits.dedup();
        if lits.is_empty() {
            self.unsat = true;
            return Settle::Unsat;
        }
        // Watch order: true or unassigned literals first, then false ones by descending level.
        let rank = |s: &Self, l: &Lit| match s.lit_value(*l) {
            Some(true) => (0, 0),
            None => (1, 0),
            Some(false) => (2, u32::MAX - s.level[l.var().index()]),
        };
        lits.sort_by_key(|l| rank(self, l));
        match (self.lit_value(lits[0]), lits.get(1).map(|&l| self.lit_value(l))) {
            (Some(false), _) => {
                let idx = self.store(lits, origin, true);
                self.resolve_conflict(idx)
            }
            (None, None) | (None, Some(Some(false))) => {
                // Unit: make the implication hold at the level it belongs to.
                let back = lits.get(1).map_or(0, |l| self.level[l.var().index()]);
                self.backtrack_to(back);
                let first = lits[0];
                let idx = self.store(lits, origin, true);
                if self.clauses[idx].lits.len() == 1 && back == 0 {
                    self.assign(first, EntryKind::Premise, None);
                } else {
                    self.assign(first, EntryKind::Implied, Some(idx));
                }
                Settle::Ok
            }
            _ => {
                self.store(lits, origin, true);
                Settle::Ok
            }
        }
    }

    /// Propagates Boolean and theory consequences to a fixpoint, resolving
    /// conflicts along the way.
    fn settle(&mut self) -> Settle {
        loop {
            if let Some(c) = self.propagate() {
                if let Settle::Unsat = self.resolve_conflict(c) {
                    return Settle::Unsat;
                }
                continue;
            }
            let fresh: Vec<Lit> = self.trail[self.synced..].iter().map(|e| e.lit).collect();
            self.synced = self.trail.len();
            match self.theory.assert_lits(&fresh, &self.value) {
                Ok(None) => return Settle::Ok,
                Ok(Some(clause)) => {
                    self.stats.theory_conflicts += 1;
                    if let Settle::Unsat = self.add_clause(clause, Origin::Theory) {
                        return Settle::Unsat;
                    }
                }
                Err(_) => {
                    // A flow that cannot even be built is treated as unconstrained.
                    return Settle::Ok;
                }
            }
        }
    }

    fn is_total(&self) -> bool {
        self.trail.len() == self.value.len()
    }

    fn verdict_after(&self, start_level: u32) -> Verdict {
        if self.low_water < start_level {
            Verdict::Backtrack(self.decision_level())
        } else {
            Verdict::Consistent
        }
    }

    /// Asserts `lit` as a decision, or with `None` completes the assignment
    /// with the internal heuristic and runs the full theory check.
    pub fn assert_lit(&mut self, lit: Option<Lit>) -> Result<Verdict, SatError> {
        if self.unsat {
            return Ok(Verdict::Unsat);
        }
        let start = self.decision_level();
        self.low_water = start;
        let Some(l) = lit else { return Ok(self.complete(start)) };
        self.check_lit(l)?;
        match self.lit_value(l) {
            Some(true) => return Ok(Verdict::Consistent),
            Some(false) if self.level[l.var().index()] == 0 => return Ok(Verdict::Unsat),
            Some(false) => return Ok(Verdict::Backtrack(start)),
            None => {}
        }
        self.decide(l);
        if let Settle::Unsat = self.settle() {
            return Ok(Verdict::Unsat);
        }
        if self.is_total() && self.low_water >= start {
            return Ok(self.full_check(start));
        }
        Ok(self.verdict_after(start))
    }

    fn decide(&mut self, l: Lit) {
        self.stats.decisions += 1;
        self.new_level();
        self.log(|| format!("d {}", Self::dimacs(&[l]).trim_end_matches(" 0")));
        self.assign(l, EntryKind::Decision, None);
    }

    fn complete(&mut self, start: u32) -> Verdict {
        loop {
            if self.low_water < start {
                return Verdict::Backtrack(self.decision_level());
            }
            let Some(v) = (0..self.value.len()).find(|&v| self.value[v].is_none()) else {
                return self.full_check(start);
            };
            self.decide(Var(v as u32).pos());
            if let Settle::Unsat = self.settle() {
                return Verdict::Unsat;
            }
        }
    }

    fn full_check(&mut self, start: u32) -> Verdict {
        match self.theory.final_check() {
            Check::Sat(b) => {
                let assignment: Vec<bool> = self.value.iter().map(|v| v.expect("total")).collect();
                let run = reconstruct(self.db, &self.theory.space, &assignment, &b);
                Verdict::DeltaSat(Box::new(Witness {
                    assignment,
                    witness_box: b,
                    run,
                    active_constraints: self.theory.active_atoms(),
                }))
            }
            Check::Conflict(clause) => {
                self.stats.theory_conflicts += 1;
                match self.add_clause(clause, Origin::Theory) {
                    Settle::Unsat => Verdict::Unsat,
                    Settle::Ok => match self.settle() {
                        Settle::Unsat => Verdict::Unsat,
                        Settle::Ok => Verdict::Backtrack(self.decision_level().min(start)),
                    },
                }
            }
            Check::Limit(e) => {
                self.incomplete = true;
                self.limit = Some(e);
                let block: Vec<Lit> = decisions(&self.trail).into_iter().map(|l| !l).collect();
                if block.is_empty() {
                    self.unsat = true;
                    return Verdict::Unsat;
                }
                match self.add_clause(block, Origin::Blocking) {
                    Settle::Unsat => Verdict::Unsat,
                    Settle::Ok => match self.settle() {
                        Settle::Unsat => Verdict::Unsat,
                        Settle::Ok => Verdict::Backtrack(self.decision_level().min(start)),
                    },
                }
            }
        }
    }

    /// Adds a clause permanently, backtracking as far as needed.
    pub fn assert_clause(&mut self, lits: &[Lit]) -> Result<Verdict, SatError> {
        for &l in lits {
            self.check_lit(l)?;
        }
        if self.unsat {
            return Ok(Verdict::Unsat);
        }
        let set: BTreeSet<u32> = lits.iter().map(|l| l.0).collect();
        if lits.iter().any(|&l| set.contains(&(!l).0)) {
            return Ok(Verdict::Consistent);
        }
        let start = self.decision_level();
        self.low_water = start;
        if let Settle::Unsat = self.add_clause(lits.to_vec(), Origin::Asserted) {
            return Ok(Verdict::Unsat);
        }
        if let Settle::Unsat = self.settle() {
            return Ok(Verdict::Unsat);
        }
        Ok(self.verdict_after(start))
    }
}

/// Builds the composite run described by a total assignment and a box.
pub fn reconstruct(db: &ClauseDB, space: &Space, assignment: &[bool], b: &IntervalBox) -> CompositeRun {
    let net = &db.network;
    let vars = net.variables();
    let mut run = CompositeRun::default();
    for step in 0..=db.k {
        let modes = net
            .automata
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let q = db.mode_vars(step, j).iter().position(|v| assignment[v.index()]).unwrap_or(0);
                (a.name.clone(), a.modes[q].name.clone())
            })
            .collect();
        let mut state = RunState {
            duration: Interval::point(0.0),
            modes,
            start: Default::default(),
            end: Default::default(),
        };
        for (i, nv) in db.num_vars.iter().enumerate() {
            let val = b.0[space.index(&nv.name).unwrap_or(i)];
            match nv.key {
                NumKey::Start { step: s, var } if s == step => {
                    state.start.insert(vars[var].0.name.clone(), val);
                }
                NumKey::End { step: s, var } if s == step => {
                    state.end.insert(vars[var].0.name.clone(), val);
                }
                NumKey::Delay { step: s } if s == step => state.duration = val,
                _ => {}
            }
        }
        run.states.push(state);
    }
    for step in 0..db.k {
        let labels = db
            .sync_vars(step)
            .filter(|(_, v)| assignment[v.index()])
            .map(|(l, _)| l.to_string())
            .collect();
        run.labels.push(labels);
    }
    run
}

/// Describes a literal for diagnostics.
pub fn describe(db: &ClauseDB, l: Lit) -> String {
    let name = db.describe(l.var());
    if l.is_positive() {
        name
    } else {
        format!("¬{name}")
    }
}

/// Whether `key` is a mode or sync variable.
pub fn is_discrete(db: &ClauseDB, v: Var) -> bool {
    matches!(db.key(v), BoolKey::Mode { .. } | BoolKey::Sync { .. })
}
