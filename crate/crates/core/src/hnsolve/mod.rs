//! Run-guided search on top of the Boolean/interval solver.
//!
//! Discrete runs of the network are generated by a cost-ordered depth-first
//! search that ignores continuous variables, then asserted literal by literal
//! so the solver follows the run forward. Dead ends in run generation either
//! become conflict clauses over the decision prefix (learning) or are handed
//! back to the solver's own search.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::encode::{encode, BoolKey, ClauseDB, EncodeError, Lit};
use crate::icp::{IcpConfig, DEFAULT_FLOW_STEPS};
use crate::model::{run_costs_by_index, validate, Cost, Diagnostic, Goal, Network};
use crate::sat::{decisions, SatError, Solver, SolverConfig, SolverStats, TrailEntry, Verdict, Witness};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sat(#[from] SatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Guidance {
    /// The solver alone.
    Plain,
    /// Run generation without conflict clauses.
    Heuristic,
    #[default]
    HeuristicLearn,
}

impl Guidance {
    pub const ALL: [Guidance; 3] = [Guidance::Plain, Guidance::Heuristic, Guidance::HeuristicLearn];

    pub fn name(self) -> &'static str {
        match self {
            Guidance::Plain => "plain",
            Guidance::Heuristic => "heuristic",
            Guidance::HeuristicLearn => "heuristic-learn",
        }
    }
}

impl fmt::Display for Guidance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Guidance {
    type Err = String;

    fn from_str(s: &str) -> Result<Guidance, String> {
        Guidance::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected plain, heuristic or heuristic-learn)"))
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub guidance: Guidance,
    pub k: usize,
    pub max_delay: f64,
    pub delta: f64,
    pub icp: IcpConfig,
    pub n_flow_steps: usize,
    pub timeout: Option<Duration>,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            guidance: Guidance::default(),
            k: 1,
            max_delay: 10.0,
            delta: 0.1,
            icp: IcpConfig::default(),
            n_flow_steps: DEFAULT_FLOW_STEPS,
            timeout: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub runs: usize,
    /// Clauses built from decision prefixes of dead-end trails.
    pub conflict_clauses: usize,
    /// The clauses counted by `conflict_clauses`, in the order they were asserted.
    pub learned_clauses: Vec<Vec<Lit>>,
    pub solver: SolverStats,
    pub elapsed: Duration,
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "runs={} conflict-clauses={} decisions={} conflicts={} learned={} theory-conflicts={} icp-checks={} boxes={} time={:.3}s",
            self.runs,
            self.conflict_clauses,
            self.solver.decisions,
            self.solver.conflicts,
            self.solver.learned,
            self.solver.theory_conflicts,
            self.solver.icp_checks,
            self.solver.boxes,
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone)]
pub enum Outcome {
    DeltaSat(Box<Witness>),
    Unsat,
    Unknown(String),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::DeltaSat(_) => "delta-sat",
            Outcome::Unsat => "unsat",
            Outcome::Unknown(_) => "unknown",
        }
    }
}

/// One entry of the search stack, concerning automaton `depth mod |automata|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entry {
    /// Choice of initial mode.
    Init { to: usize },
    /// A jump, by index into the automaton's jump list.
    Jump { from: usize, jump: usize, to: usize },
    /// Staying in `mode` with no labels.
    Noop { mode: usize },
}

impl Entry {
    pub fn target(self) -> usize {
        match self {
            Entry::Init { to } | Entry::Jump { to, .. } => to,
            Entry::Noop { mode } => mode,
        }
    }
}

/// Mode and sync literals of a trail, the only trail facts run generation reads.
#[derive(Debug, Default)]
pub struct Blocked {
    modes: HashSet<(usize, usize, usize)>,
    syncs: HashSet<(usize, String)>,
    /// Modes fixed true, by `(step, automaton)`.
    required_modes: HashMap<(usize, usize), usize>,
    required_syncs: HashSet<(usize, String)>,
}

impl Blocked {
    pub fn from_trail(db: &ClauseDB, trail: &[TrailEntry]) -> Blocked {
        let mut b = Blocked::default();
        for e in trail {
            let pos = e.lit.is_positive();
            match db.key(e.lit.var()) {
                BoolKey::Mode { step, automaton, mode } if pos => {
                    b.required_modes.insert((*step, *automaton), *mode);
                }
                BoolKey::Mode { step, automaton, mode } => {
                    b.modes.insert((*step, *automaton, *mode));
                }
                BoolKey::Sync { step, label } if pos => {
                    b.required_syncs.insert((*step, label.clone()));
                }
                BoolKey::Sync { step, label } => {
                    b.syncs.insert((*step, label.clone()));
                }
                BoolKey::Aux(_) => {}
            }
        }
        b
    }
}

/// Precomputed per-automaton data for run generation.
pub struct RunGen<'n> {
    net: &'n Network,
    k: usize,
    costs: Vec<Vec<Cost>>,
    /// Outgoing jump indices per automaton and mode.
    out: Vec<Vec<Vec<usize>>>,
    /// Synchronized labels per automaton and jump.
    labels: Vec<Vec<BTreeSet<String>>>,
}

impl<'n> RunGen<'n> {
    pub fn new(net: &'n Network, k: usize) -> RunGen<'n> {
        let costs = net.automata.iter().map(run_costs_by_index).collect();
        let out = net
            .automata
            .iter()
            .map(|a| {
                let mut out = vec![Vec::new(); a.modes.len()];
                for (ji, j) in a.jumps.iter().enumerate() {
                    if let Some(q) = a.mode_index(&j.from) {
                        out[q].push(ji);
                    }
                }
                out
            })
            .collect();
        let labels = net
            .automata
            .iter()
            .map(|a| a.jumps.iter().map(|j| a.sync_labels(j).cloned().collect()).collect())
            .collect();
        RunGen { net, k, costs, out, labels }
    }

    fn n(&self) -> usize {
        self.net.automata.len()
    }

    /// Synchronized labels emitted by an entry of automaton `i`.
    fn emitted(&self, i: usize, e: Entry) -> Option<&BTreeSet<String>> {
        match e {
            Entry::Jump { jump, .. } => Some(&self.labels[i][jump]),
            _ => None,
        }
    }

    /// Whether candidate `e` of automaton `i` survives the trail and the siblings already chosen this step.
    pub fn admits(&self, i: usize, e: Entry, siblings: &[Entry], step: usize, blocked: &Blocked) -> bool {
        if blocked.modes.contains(&(step, i, e.target()))
            || blocked.required_modes.get(&(step, i)).is_some_and(|&q| q != e.target())
        {
            return false;
        }
        let empty = BTreeSet::new();
        let li = self.emitted(i, e).unwrap_or(&empty);
        let ai = &self.net.automata[i].alphabet;
        if step > 0 {
            let key = |l: &String| (step - 1, l.clone());
            if li.iter().any(|l| blocked.syncs.contains(&key(l)))
                || ai.iter().any(|l| !li.contains(l) && blocked.required_syncs.contains(&key(l)))
            {
                return false;
            }
        }
        siblings.iter().enumerate().all(|(j, &s)| {
            let aj = &self.net.automata[j].alphabet;
            let lj = self.emitted(j, s).unwrap_or(&empty);
            // A noop emits nothing, so comparing projections onto the shared
            // alphabet also covers a noop facing a labelled jump.
            let shared = |l: &&String| ai.contains(*l) && aj.contains(*l);
            li.iter().filter(shared).eq(lj.iter().filter(shared))
        })
    }

    /// Candidates for position `|stack|`, filtered and sorted by target cost.
    fn successors(&self, stack: &[Entry], blocked: &Blocked) -> Vec<Entry> {
        let n = self.n();
        let (step, i) = (stack.len() / n, stack.len() % n);
        let a = &self.net.automata[i];
        let mut succ: Vec<Entry> = if step == 0 {
            let mut seen = BTreeSet::new();
            a.init
                .iter()
                .filter_map(|e| a.mode_index(&e.mode))
                .filter(|q| seen.insert(*q))
                .map(|to| Entry::Init { to })
                .collect()
        } else {
            let q = stack[stack.len() - n].target();
            let mut v: Vec<Entry> = self.out[i][q]
                .iter()
                .filter_map(|&jump| {
                    a.mode_index(&a.jumps[jump].to).map(|to| Entry::Jump { from: q, jump, to })
                })
                .collect();
            v.push(Entry::Noop { mode: q });
            v
        };
        let siblings = &stack[stack.len() - i..];
        succ.retain(|&e| self.admits(i, e, siblings, step, blocked));
        succ.sort_by_key(|e| self.costs[i][e.target()]);
        succ
    }

    /// Whether the completed step ending the stack emits at least one synchronized label.
    fn step_synchronizes(&self, stack: &[Entry]) -> bool {
        let n = self.n();
        let base = stack.len() - n;
        (0..n).any(|i| self.emitted(i, stack[base + i]).is_some_and(|l| !l.is_empty()))
    }

    /// Depth-first search for a complete stack of `|automata|·(k+1)` entries.
    pub fn dfs(&self, blocked: &Blocked) -> Option<Vec<Entry>> {
        let mut stack = Vec::with_capacity(self.n() * (self.k + 1));
        let mut failed = HashSet::new();
        self.descend(&mut stack, blocked, &mut failed).then_some(stack)
    }

    fn descend(&self, stack: &mut Vec<Entry>, blocked: &Blocked, failed: &mut HashSet<(usize, Vec<usize>)>) -> bool {
        let n = self.n();
        if stack.len() == n * (self.k + 1) {
            return true;
        }
        // At a step boundary the rest of the search depends only on the step and its mode vector.
        let key = (stack.len().is_multiple_of(n) && !stack.is_empty()).then(|| {
            let step = stack.len() / n - 1;
            (step, stack[stack.len() - n..].iter().map(|e| e.target()).collect::<Vec<_>>())
        });
        if let Some(key) = &key {
            if failed.contains(key) {
                return false;
            }
        }
        for e in self.successors(stack, blocked) {
            stack.push(e);
            let ok = if stack.len().is_multiple_of(n) && stack.len() > n && !self.step_synchronizes(stack) {
                false
            } else {
                self.descend(stack, blocked, failed)
            };
            if ok {
                return true;
            }
            stack.pop();
        }
        if let Some(key) = key {
            failed.insert(key);
        }
        false
    }

    /// Literals asserting the run described by a full stack, in run order.
    pub fn literals(&self, db: &ClauseDB, stack: &[Entry]) -> Vec<Lit> {
        let n = self.n();
        let mut out = Vec::new();
        for (j, &e) in stack.iter().enumerate() {
            let (step, i) = (j / n, j % n);
            if let Some(v) = db.mode_var(step, i, e.target()) {
                out.push(v.pos());
            }
            if let Some(labels) = self.emitted(i, e) {
                for l in labels {
                    if let Ok(v) = db.sync_literal(step - 1, l) {
                        if !out.contains(&v.pos()) {
                            out.push(v.pos());
                        }
                    }
                }
            }
        }
        out
    }

    /// Generates the literals of a run consistent with the trail, if there is one.
    pub fn gen_run(&self, db: &ClauseDB, trail: &[TrailEntry]) -> Option<Vec<Lit>> {
        let blocked = Blocked::from_trail(db, trail);
        self.dfs(&blocked).map(|s| self.literals(db, &s))
    }
}

/// Disjunction of the negated decisions of a trail, or `None` without decisions.
pub fn conflict_from_trail(trail: &[TrailEntry]) -> Option<Vec<Lit>> {
    let d = decisions(trail);
    (!d.is_empty()).then(|| d.into_iter().map(|l| !l).collect())
}

/// Encodes and solves a bounded reachability query.
pub fn solve(net: &Network, goal: &Goal, cfg: &Config) -> Result<(Outcome, Stats), SolveError> {
    let diags = validate(net, goal);
    if !diags.is_empty() {
        return Err(SolveError::Invalid(diags));
    }
    let db = encode(net, goal, cfg.k, cfg.max_delay)?;
    solve_db(&db, cfg, None)
}

/// Solves an already encoded query, optionally tracing the Boolean search.
pub fn solve_db(
    db: &ClauseDB,
    cfg: &Config,
    trace: Option<Box<dyn std::io::Write + Send + '_>>,
) -> Result<(Outcome, Stats), SolveError> {
    let start = Instant::now();
    let deadline = cfg.timeout.map(|t| start + t);
    let mut icp = cfg.icp.clone();
    icp.deadline = match (icp.deadline, deadline) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let scfg = SolverConfig { delta: cfg.delta, icp, n_flow_steps: cfg.n_flow_steps };
    let mut solver = Solver::new(db, scfg)?;
    if let Some(t) = trace {
        solver.set_trace(t);
    }
    let mut stats = Stats::default();
    let gen = RunGen::new(&db.network, db.k);
    let verdict = search(&mut solver, &gen, cfg.guidance, deadline, &mut stats);
    stats.solver = solver.stats();
    stats.elapsed = start.elapsed();
    let timed_out = deadline.is_some_and(|d| Instant::now() >= d);
    let outcome = match verdict? {
        Some(Verdict::DeltaSat(w)) => Outcome::DeltaSat(w),
        Some(_) if timed_out && solver.is_incomplete() => Outcome::Unknown("timeout".into()),
        Some(_) if solver.is_incomplete() => Outcome::Unknown(match solver.last_limit() {
            Some(e) => format!("resource limit: {e}"),
            None => "resource limit".into(),
        }),
        Some(_) => Outcome::Unsat,
        None => Outcome::Unknown("timeout".into()),
    };
    Ok((outcome, stats))
}

/// The main loop. Returns `None` on timeout, otherwise a final `DeltaSat` or `Unsat` verdict.
fn search(
    solver: &mut Solver,
    gen: &RunGen,
    guidance: Guidance,
    deadline: Option<Instant>,
    stats: &mut Stats,
) -> Result<Option<Verdict>, SatError> {
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    loop {
        if expired() {
            return Ok(None);
        }
        if guidance == Guidance::Plain {
            match solver.assert_lit(None)? {
                v @ (Verdict::DeltaSat(_) | Verdict::Unsat) => return Ok(Some(v)),
                _ => continue,
            }
        }
        let trail = solver.get_trail();
        let Some(run) = gen.gen_run(solver.db(), &trail) else {
            if guidance == Guidance::HeuristicLearn {
                let Some(clause) = conflict_from_trail(&trail) else { return Ok(Some(Verdict::Unsat)) };
                stats.conflict_clauses += 1;
                stats.learned_clauses.push(clause.clone());
                if let Verdict::Unsat = solver.assert_clause(&clause)? {
                    return Ok(Some(Verdict::Unsat));
                }
            } else {
                // Without learning the solver's own search has to make progress.
                if let v @ (Verdict::DeltaSat(_) | Verdict::Unsat) = solver.assert_lit(None)? {
                    return Ok(Some(v));
                }
            }
            continue;
        };
        stats.runs += 1;
        let mut followed = true;
        for l in run {
            match solver.assert_lit(Some(l))? {
                Verdict::Consistent => {}
                v @ (Verdict::DeltaSat(_) | Verdict::Unsat) => return Ok(Some(v)),
                Verdict::Backtrack(_) => {
                    followed = false;
                    break;
                }
            }
            if expired() {
                return Ok(None);
            }
        }
        if followed || solver.get_trail() == trail {
            // Either the run is fully asserted, or the trail refused it without
            // changing; in both cases the solver completes the assignment.
            if let v @ (Verdict::DeltaSat(_) | Verdict::Unsat) = solver.assert_lit(None)? {
                return Ok(Some(v));
            }
        }
    }
}

#[cfg(test)]
mod tests;
