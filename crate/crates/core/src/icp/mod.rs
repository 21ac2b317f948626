//! Interval constraint propagation: branch and prune over boxes.
//!
//! Constraints are compiled to [`Contractor`]s over the slots of a
//! [`Space`]. [`prune`] narrows a box to a propagation fixpoint, [`branch`]
//! bisects it, and [`delta_check`] alternates the two until it finds a box on
//! which every constraint holds to within δ or refutes the whole box.
//! Explanations are sets of contractor indices.

pub mod ode;
pub mod step;
pub mod tape;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::encode::ClauseDB;
use crate::expr::{Constraint, Interval, Rel, Term};
pub use ode::{Blowup, Enclosure, OdeSystem, Slice};
pub use step::{FlowContraction, StepFlow};
use tape::{Projection, Tape};

pub const DEFAULT_MAX_BOXES: usize = 100_000;
pub const DEFAULT_FLOW_STEPS: usize = 32;

/// Relative width reduction below which a narrowing does not wake dependents.
const IMPROVEMENT: f64 = 0.01;
/// Greedy explanation shrinking gives up after this many trial prunes.
const SHRINK_TRIALS: usize = 48;
/// Box budget of each trial search while shrinking a branched refutation.
const SHRINK_BOXES: usize = 400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IcpError {
    #[error("box limit of {0} exceeded")]
    ResourceLimit(usize),
    #[error("flow enclosure blew up")]
    EnclosureBlowup,
    #[error("search ended with boxes that are neither refuted nor delta-satisfied")]
    Inconclusive,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("nothing to branch on")]
    NothingToBranch,
    #[error("deadline passed")]
    Deadline,
}

/// Names and global bounds of the real variables.
#[derive(Debug, Clone, Default)]
pub struct Space {
    names: Vec<String>,
    bounds: Vec<Interval>,
    index: HashMap<String, usize>,
    /// Position of each slot in lexicographic name order.
    rank: Vec<usize>,
}

impl Space {
    pub fn new(vars: impl IntoIterator<Item = (String, Interval)>) -> Space {
        let mut s = Space::default();
        for (name, b) in vars {
            s.index.insert(name.clone(), s.names.len());
            s.names.push(name);
            s.bounds.push(b);
        }
        let mut order: Vec<usize> = (0..s.names.len()).collect();
        order.sort_by(|&a, &b| s.names[a].cmp(&s.names[b]));
        s.rank = vec![0; order.len()];
        for (r, &i) in order.iter().enumerate() {
            s.rank[i] = r;
        }
        s
    }

    pub fn from_db(db: &ClauseDB) -> Space {
        Space::new(db.num_vars.iter().map(|v| (v.name.clone(), v.bounds)))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// The box of all global bounds.
    pub fn root_box(&self) -> IntervalBox {
        IntervalBox(self.bounds.clone())
    }
}

/// One interval per slot of a [`Space`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox(pub Vec<Interval>);

impl IntervalBox {
    pub fn get(&self, space: &Space, name: &str) -> Option<Interval> {
        space.index(name).map(|i| self.0[i])
    }

    pub fn to_map(&self, space: &Space) -> BTreeMap<String, Interval> {
        (0..space.len()).map(|i| (space.name(i).to_string(), self.0[i])).collect()
    }

    pub fn contains(&self, other: &IntervalBox) -> bool {
        other.0.iter().zip(&self.0).all(|(a, b)| a.is_subset_of(b))
    }
}

/// Whether `g` lies within `delta` of `target`.
pub(crate) fn within(g: Interval, target: Interval, delta: f64) -> bool {
    g.lo() >= target.lo() - delta && g.hi() <= target.hi() + delta
}

/// A compiled atomic constraint `lhs - rhs ∈ target`.
#[derive(Debug, Clone)]
pub struct Atom {
    pub constraint: Constraint,
    tape: Tape,
    target: Interval,
}

impl Atom {
    pub fn compile(c: &Constraint, space: &Space) -> Result<Atom, IcpError> {
        let tape = Tape::compile(&c.difference(), &|v| space.index(v)).map_err(IcpError::UnknownVariable)?;
        let target = match c.rel {
            Rel::Ge | Rel::Gt => Interval::new(0.0, f64::INFINITY),
            Rel::Le | Rel::Lt => Interval::new(f64::NEG_INFINITY, 0.0),
            Rel::Eq => Interval::point(0.0),
        };
        Ok(Atom { constraint: c.clone(), tape, target })
    }

    /// Interval value of `lhs - rhs` over the box.
    pub fn eval(&self, vals: &[Interval]) -> Option<Interval> {
        self.tape.eval(vals, &mut Vec::new())
    }
}

/// Anything that can narrow a box.
#[derive(Debug, Clone)]
pub enum Contractor {
    Atom(Atom),
    Flow(Arc<StepFlow>),
}

enum Contraction {
    Done,
    Empty,
    Blowup,
}

impl Contractor {
    pub fn atom(c: &Constraint, space: &Space) -> Result<Contractor, IcpError> {
        Atom::compile(c, space).map(Contractor::Atom)
    }

    pub fn slots(&self) -> &[usize] {
        match self {
            Contractor::Atom(a) => a.tape.slots(),
            Contractor::Flow(f) => f.slots(),
        }
    }

    fn contract(&self, vals: &mut [Interval], scratch: &mut Vec<Interval>) -> Contraction {
        match self {
            Contractor::Atom(a) => match a.tape.project(vals, a.target, scratch) {
                Projection::Done => Contraction::Done,
                Projection::Empty => Contraction::Empty,
            },
            Contractor::Flow(f) => match f.contract(vals) {
                FlowContraction::Done => Contraction::Done,
                FlowContraction::Empty => Contraction::Empty,
                FlowContraction::Blowup => Contraction::Blowup,
            },
        }
    }

    /// Whether the constraint holds to within `delta` at every point of the box.
    pub fn delta_sat(&self, vals: &[Interval], delta: f64) -> bool {
        match self {
            Contractor::Atom(a) => a.eval(vals).is_some_and(|g| within(g, a.target, delta)),
            Contractor::Flow(f) => f.delta_sat(vals, delta),
        }
    }
}

/// Indices of contractors that jointly admit no point of the starting box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub enum PruneOutcome {
    Box(IntervalBox),
    Empty(Explanation),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeltaOutcome {
    Sat(IntervalBox),
    Unsat(Explanation),
}

#[derive(Debug, Clone)]
pub struct IcpConfig {
    pub max_boxes: usize,
    /// Worker threads for branch exploration; 1 explores sequentially.
    pub threads: usize,
    /// Wall-clock point after which searches give up.
    pub deadline: Option<Instant>,
}

impl Default for IcpConfig {
    fn default() -> IcpConfig {
        IcpConfig { max_boxes: DEFAULT_MAX_BOXES, threads: 1, deadline: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IcpStats {
    pub prunes: usize,
    pub boxes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// `blowup` is set when some flow could not be enclosed.
    Fixpoint { blowup: bool },
    Empty,
}

fn significant(old: Interval, new: Interval) -> bool {
    if old == new {
        return false;
    }
    let (w0, w1) = (old.width(), new.width());
    !w0.is_finite() || w1 < w0 * (1.0 - IMPROVEMENT) || w0 == 0.0
}

/// Worklist propagation over all of `items`, starting from the ones listed
/// in `wake` (the others are assumed to be at a fixpoint already).
/// Contractors that narrow anything, and the one that empties the box, are
/// marked in `used`.
pub fn propagate_from(items: &[&Contractor], wake: &[usize], vals: &mut [Interval], used: &mut [bool]) -> Propagation {
    let active = vec![true; items.len()];
    propagate_queue(items, &active, wake.iter().copied(), vals, used)
}

/// Greedily reduces an explanation of emptiness of `root`.
pub fn shrink_explanation(items: &[&Contractor], root: &IntervalBox, expl: Vec<usize>) -> Vec<usize> {
    shrink(expl, |cand| {
        let mut v = root.0.clone();
        let mut u = vec![false; items.len()];
        matches!(propagate(items, &mask(items.len(), cand), &mut v, &mut u), Propagation::Empty)
    })
}

fn propagate(items: &[&Contractor], active: &[bool], vals: &mut [Interval], used: &mut [bool]) -> Propagation {
    let wake = (0..items.len()).filter(|&i| active[i]);
    propagate_queue(items, active, wake, vals, used)
}

fn propagate_queue(
    items: &[&Contractor],
    active: &[bool],
    wake: impl Iterator<Item = usize>,
    vals: &mut [Interval],
    used: &mut [bool],
) -> Propagation {
    let mut watch: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, c) in items.iter().enumerate() {
        if active[i] {
            for &s in c.slots() {
                watch.entry(s).or_default().push(i);
            }
        }
    }
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut queued = vec![false; items.len()];
    for i in wake {
        if active[i] && !queued[i] {
            queued[i] = true;
            queue.push_back(i);
        }
    }
    let mut scratch = Vec::new();
    let mut blowup = vec![false; items.len()];
    let mut budget = 40 * items.len() + 100;
    let mut before = Vec::new();
    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        if budget == 0 {
            break;
        }
        budget -= 1;
        let c = items[i];
        before.clear();
        before.extend(c.slots().iter().map(|&s| vals[s]));
        match c.contract(vals, &mut scratch) {
            Contraction::Empty => {
                used[i] = true;
                return Propagation::Empty;
            }
            Contraction::Blowup => {
                blowup[i] = true;
                continue;
            }
            Contraction::Done => blowup[i] = false,
        }
        for (k, &s) in c.slots().iter().enumerate() {
            if vals[s] != before[k] {
                used[i] = true;
                if significant(before[k], vals[s]) {
                    for &j in watch.get(&s).into_iter().flatten() {
                        if j != i && !queued[j] {
                            queued[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }
    Propagation::Fixpoint { blowup: blowup.iter().any(|&b| b) }
}

/// Greedily drops members of `expl` while `still_empty` holds for the rest.
fn shrink(expl: Vec<usize>, mut still_empty: impl FnMut(&[usize]) -> bool) -> Vec<usize> {
    let mut keep = expl;
    if keep.len() <= 1 {
        return keep;
    }
    let mut k = keep.len();
    let mut trials = 0;
    while k > 0 && trials < SHRINK_TRIALS {
        k -= 1;
        let candidate: Vec<usize> = keep.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect();
        trials += 1;
        if still_empty(&candidate) {
            keep = candidate;
        }
    }
    keep
}

fn mask(n: usize, members: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in members {
        m[i] = true;
    }
    m
}

/// Narrows `b` under `items` to a propagation fixpoint.
pub fn prune(items: &[&Contractor], b: &IntervalBox) -> PruneOutcome {
    let all = vec![true; items.len()];
    let mut used = vec![false; items.len()];
    let mut vals = b.0.clone();
    match propagate(items, &all, &mut vals, &mut used) {
        Propagation::Fixpoint { .. } => PruneOutcome::Box(IntervalBox(vals)),
        Propagation::Empty => {
            let expl: Vec<usize> = (0..items.len()).filter(|&i| used[i]).collect();
            let expl = shrink(expl, |cand| {
                let mut v = b.0.clone();
                let mut u = vec![false; items.len()];
                matches!(propagate(items, &mask(items.len(), cand), &mut v, &mut u), Propagation::Empty)
            });
            PruneOutcome::Empty(Explanation(expl))
        }
    }
}

/// Splits the widest slot of `b` (ties to the lexicographically first name)
/// among those wider than `threshold`.
pub fn branch(space: &Space, b: &IntervalBox, threshold: f64) -> Result<(IntervalBox, IntervalBox), IcpError> {
    branch_among(space, b, 0..b.0.len(), threshold).ok_or(IcpError::NothingToBranch)
}

fn branch_among(
    space: &Space,
    b: &IntervalBox,
    candidates: impl IntoIterator<Item = usize>,
    threshold: f64,
) -> Option<(IntervalBox, IntervalBox)> {
    let mut best: Option<usize> = None;
    for s in candidates {
        let w = b.0[s].width();
        if !(w > threshold) || !bisectable(b.0[s]) {
            continue;
        }
        best = match best {
            None => Some(s),
            Some(o) => {
                let wo = b.0[o].width();
                if w > wo || (w == wo && space.rank[s] < space.rank[o]) {
                    Some(s)
                } else {
                    Some(o)
                }
            }
        };
    }
    let s = best?;
    let (lo, hi) = split(b.0[s]);
    let (mut l, mut h) = (b.clone(), b.clone());
    l.0[s] = lo;
    h.0[s] = hi;
    Some((l, h))
}

fn bisectable(x: Interval) -> bool {
    let m = split_point(x);
    m > x.lo() && m < x.hi()
}

fn split_point(x: Interval) -> f64 {
    match (x.lo().is_finite(), x.hi().is_finite()) {
        (true, true) => x.mid(),
        (false, false) => 0.0,
        (true, false) => x.lo().max(0.0) * 2.0 + 1.0,
        (false, true) => x.hi().min(0.0) * 2.0 - 1.0,
    }
}

fn split(x: Interval) -> (Interval, Interval) {
    let m = split_point(x);
    (Interval::new(x.lo(), m), Interval::new(m, x.hi()))
}

struct Node {
    vals: Vec<Interval>,
    used: Vec<bool>,
}

enum Search {
    Sat(Vec<Interval>),
    Refuted(Vec<bool>),
    Inconclusive(Vec<bool>),
    Limit,
}

struct Searcher<'a> {
    space: &'a Space,
    items: &'a [&'a Contractor],
    active: Vec<bool>,
    delta: f64,
    threshold: f64,
    max_boxes: usize,
    boxes: &'a AtomicUsize,
    prunes: AtomicUsize,
    deadline: Option<Instant>,
    timed_out: AtomicBool,
}

impl Searcher<'_> {
    /// Processes one box: prune, then either accept, refute, or split.
    fn step(&self, mut node: Node) -> Result<Option<Vec<Interval>>, StepEnd> {
        if self.boxes.fetch_add(1, Ordering::Relaxed) >= self.max_boxes {
            return Err(StepEnd::Limit);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out.store(true, Ordering::Relaxed);
            return Err(StepEnd::Limit);
        }
        self.prunes.fetch_add(1, Ordering::Relaxed);
        let blowup = match propagate(self.items, &self.active, &mut node.vals, &mut node.used) {
            Propagation::Empty => return Err(StepEnd::Refuted(node.used)),
            Propagation::Fixpoint { blowup } => blowup,
        };
        let open: Vec<usize> = (0..self.items.len())
            .filter(|&i| self.active[i] && !self.items[i].delta_sat(&node.vals, self.delta))
            .collect();
        if open.is_empty() && !blowup {
            return Ok(Some(node.vals));
        }
        let mut cand: Vec<usize> = open.iter().flat_map(|&i| self.items[i].slots().iter().copied()).collect();
        cand.sort_unstable();
        cand.dedup();
        let b = IntervalBox(node.vals);
        match branch_among(self.space, &b, cand, self.threshold) {
            Some((lo, hi)) => Err(StepEnd::Split(
                Node { vals: lo.0, used: node.used.clone() },
                Node { vals: hi.0, used: node.used },
            )),
            None => Err(StepEnd::Stuck(node.used)),
        }
    }

    fn run(&self, root: Node, stop: &dyn Fn() -> bool) -> Search {
        let n = self.items.len();
        let mut stack = vec![root];
        let mut refuted = vec![false; n];
        let mut stuck = false;
        while let Some(node) = stack.pop() {
            if stop() {
                return Search::Limit;
            }
            match self.step(node) {
                Ok(Some(v)) => return Search::Sat(v),
                Ok(None) => unreachable!("step either accepts or ends"),
                Err(StepEnd::Limit) => return Search::Limit,
                Err(StepEnd::Refuted(u)) => union(&mut refuted, &u),
                Err(StepEnd::Stuck(u)) => {
                    stuck = true;
                    union(&mut refuted, &u);
                }
                Err(StepEnd::Split(lo, hi)) => {
                    stack.push(hi);
                    stack.push(lo);
                }
            }
        }
        if stuck {
            Search::Inconclusive(refuted)
        } else {
            Search::Refuted(refuted)
        }
    }
}

enum StepEnd {
    Refuted(Vec<bool>),
    Stuck(Vec<bool>),
    Split(Node, Node),
    Limit,
}

fn union(acc: &mut [bool], u: &[bool]) {
    for (a, b) in acc.iter_mut().zip(u) {
        *a |= *b;
    }
}

/// Branch-and-prune search for a box on which every contractor holds to
/// within `delta`. Refutations report the contractors that took part,
/// reduced greedily.
pub fn delta_check(
    space: &Space,
    items: &[&Contractor],
    b: &IntervalBox,
    delta: f64,
    cfg: &IcpConfig,
    stats: &mut IcpStats,
) -> Result<DeltaOutcome, IcpError> {
    let boxes = AtomicUsize::new(0);
    let all = vec![true; items.len()];
    let (outcome, timed_out) = search(space, items, &all, b, delta, cfg, cfg.max_boxes, cfg.threads, &boxes, stats);
    stats.boxes += boxes.load(Ordering::Relaxed);
    match outcome {
        Search::Sat(v) => Ok(DeltaOutcome::Sat(IntervalBox(v))),
        Search::Limit if timed_out => Err(IcpError::Deadline),
        Search::Limit => Err(IcpError::ResourceLimit(cfg.max_boxes)),
        Search::Inconclusive(_) => Err(IcpError::Inconclusive),
        Search::Refuted(used) => {
            let expl: Vec<usize> = (0..items.len()).filter(|&i| used[i]).collect();
            let expl = shrink(expl, |cand| {
                let trial = AtomicUsize::new(0);
                let mut s = IcpStats::default();
                let (r, _) = search(space, items, &mask(items.len(), cand), b, delta, cfg, SHRINK_BOXES, 1, &trial, &mut s);
                stats.boxes += trial.load(Ordering::Relaxed);
                matches!(r, Search::Refuted(_))
            });
            if expl.is_empty() {
                // Only possible when the starting box itself is empty.
                return Ok(DeltaOutcome::Unsat(Explanation((0..items.len()).collect())));
            }
            Ok(DeltaOutcome::Unsat(Explanation(expl)))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    space: &Space,
    items: &[&Contractor],
    active: &[bool],
    b: &IntervalBox,
    delta: f64,
    cfg: &IcpConfig,
    max_boxes: usize,
    threads: usize,
    boxes: &AtomicUsize,
    stats: &mut IcpStats,
) -> (Search, bool) {
    let s = Searcher {
        space,
        items,
        active: active.to_vec(),
        delta,
        threshold: delta * f64::powi(2.0, -10),
        max_boxes,
        boxes,
        prunes: AtomicUsize::new(0),
        deadline: cfg.deadline,
        timed_out: AtomicBool::new(false),
    };
    let root = Node { vals: b.0.clone(), used: vec![false; items.len()] };
    let result = if threads <= 1 { s.run(root, &|| false) } else { parallel(&s, root, threads) };
    stats.prunes += s.prunes.load(Ordering::Relaxed);
    (result, s.timed_out.load(Ordering::Relaxed))
}

/// Expands the tree breadth-first into a frontier, explores frontier
/// subtrees on worker threads, and reports the lowest-index success.
fn parallel(s: &Searcher<'_>, root: Node, threads: usize) -> Search {
    let n = s.items.len();
    let mut frontier: VecDeque<Node> = VecDeque::from([root]);
    let mut refuted = vec![false; n];
    let mut stuck = false;
    while !frontier.is_empty() && frontier.len() < 4 * threads {
        let node = frontier.pop_front().expect("non-empty");
        match s.step(node) {
            Ok(Some(v)) => return Search::Sat(v),
            Ok(None) => unreachable!("step either accepts or ends"),
            Err(StepEnd::Limit) => return Search::Limit,
            Err(StepEnd::Refuted(u)) => union(&mut refuted, &u),
            Err(StepEnd::Stuck(u)) => {
                stuck = true;
                union(&mut refuted, &u);
            }
            Err(StepEnd::Split(lo, hi)) => {
                frontier.push_back(lo);
                frontier.push_back(hi);
            }
        }
    }
    let jobs: Vec<Node> = frontier.into_iter().collect();
    let best = AtomicUsize::new(usize::MAX);
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<Search>> = (0..jobs.len()).map(|_| None).collect();
    let slots: Vec<std::sync::Mutex<Option<Node>>> = jobs.into_iter().map(|j| std::sync::Mutex::new(Some(j))).collect();
    let out: Vec<std::sync::Mutex<Option<Search>>> = (0..slots.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= slots.len() {
                    break;
                }
                if i > best.load(Ordering::SeqCst) {
                    continue;
                }
                let node = slots[i].lock().expect("job lock").take().expect("job taken once");
                let r = s.run(node, &|| i > best.load(Ordering::SeqCst));
                if matches!(r, Search::Sat(_)) {
                    best.fetch_min(i, Ordering::SeqCst);
                }
                *out[i].lock().expect("result lock") = Some(r);
            });
        }
    });
    for (i, m) in out.into_iter().enumerate() {
        results[i] = m.into_inner().expect("result lock");
    }
    let mut limit = false;
    for r in results.into_iter() {
        match r {
            Some(Search::Sat(v)) => return Search::Sat(v),
            Some(Search::Refuted(u)) => union(&mut refuted, &u),
            Some(Search::Inconclusive(u)) => {
                stuck = true;
                union(&mut refuted, &u);
            }
            Some(Search::Limit) => limit = true,
            None => {}
        }
    }
    if limit {
        Search::Limit
    } else if stuck {
        Search::Inconclusive(refuted)
    } else {
        Search::Refuted(refuted)
    }
}

/// Encloses the solution of `dx/dt = f(x)` from `start` over `duration`.
/// Returns the end box and the `n_steps` windows of the final region.
pub fn flow_enclosure(
    odes: &[(String, Term)],
    start: &BTreeMap<String, Interval>,
    duration: Interval,
    n_steps: usize,
) -> Result<(BTreeMap<String, Interval>, Vec<BTreeMap<String, Interval>>), IcpError> {
    let names: Vec<&str> = odes.iter().map(|(x, _)| x.as_str()).collect();
    let resolve = |v: &str| names.iter().position(|n| *n == v);
    let rhs = odes
        .iter()
        .map(|(_, t)| Tape::compile(t, &resolve).map_err(IcpError::UnknownVariable))
        .collect::<Result<Vec<_>, _>>()?;
    let x0 = names
        .iter()
        .map(|n| start.get(*n).copied().ok_or_else(|| IcpError::UnknownVariable(n.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let sys = OdeSystem { rhs, bounds: vec![Interval::ENTIRE; names.len()] };
    let enc = sys
        .enclose(&x0, &[], duration, n_steps, 1.0, true)
        .map_err(|_| IcpError::EnclosureBlowup)?
        .ok_or(IcpError::EnclosureBlowup)?;
    let as_map = |v: &[Interval]| names.iter().map(|n| n.to_string()).zip(v.iter().copied()).collect();
    let windows = enc.slices.iter().map(|s| as_map(&s.state)).collect();
    Ok((as_map(&enc.end), windows))
}
