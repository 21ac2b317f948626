//! The bridge between Boolean assignments and interval propagation.
//!
//! Each decision level owns a frame: the box narrowed by every constraint
//! activated so far, and the set of constraints that did any narrowing.
//! A refutation is explained by that set, so frames never need replaying.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::encode::{AuxKind, BoolKey, ClauseDB, Lit, Var};
use crate::expr::Interval;
use crate::icp::{
    delta_check, propagate_from, shrink_explanation, Contractor, DeltaOutcome, IcpConfig, IcpError, IcpStats,
    IntervalBox, Propagation, Space, StepFlow,
};

/// A constraint the theory may activate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum ItemKey {
    /// An attached constraint, by pool index.
    Atom(usize),
    /// The dynamics of a step under a full mode vector.
    Flow(usize, Vec<usize>),
    /// The dynamics of steps `first..=last` run as one flow, with the
    /// literals that make the span valid.
    Span { first: usize, last: usize, modes: Vec<usize>, reasons: Vec<Lit> },
}

#[derive(Debug, Clone)]
struct Frame {
    vals: Vec<Interval>,
    active: Vec<ItemKey>,
    members: HashSet<ItemKey>,
    used: HashSet<ItemKey>,
}

pub(crate) enum Check {
    Sat(IntervalBox),
    /// Literals (all currently true) that cannot hold together.
    Conflict(Vec<Lit>),
    Limit(IcpError),
}

pub(crate) struct Theory<'a> {
    db: &'a ClauseDB,
    pub space: Space,
    atoms: Vec<Contractor>,
    owner: Vec<Var>,
    flows: HashMap<(usize, Vec<usize>), Option<Contractor>>,
    spans: HashMap<(usize, usize, Vec<usize>), Option<Contractor>>,
    /// Transition alternatives per `[step][automaton]`: the aux variable and
    /// the variables it leaves unchanged.
    carries: Vec<Vec<Vec<(Var, Vec<String>)>>>,
    frames: Vec<Frame>,
    pub delta: f64,
    pub icp: IcpConfig,
    pub n_flow_steps: usize,
    pub stats: IcpStats,
    pub checks: usize,
}

impl<'a> Theory<'a> {
    pub fn new(db: &'a ClauseDB, delta: f64, icp: IcpConfig, n_flow_steps: usize) -> Result<Theory<'a>, IcpError> {
        let space = Space::from_db(db);
        let atoms = db
            .constraints
            .iter()
            .map(|c| Contractor::atom(c, &space))
            .collect::<Result<Vec<_>, _>>()?;
        let mut owner = vec![Var(0); db.constraints.len()];
        for (v, ids) in db.attached.iter().enumerate() {
            for &id in ids {
                owner[id] = Var(v as u32);
            }
        }
        let net = &db.network;
        let mut carries = vec![vec![Vec::new(); net.automata.len()]; db.k];
        for (v, key) in db.vars.iter().enumerate() {
            let (step, j, kept) = match key {
                BoolKey::Aux(AuxKind::Noop { step, automaton, .. }) => {
                    (*step, *automaton, net.automata[*automaton].vars.iter().map(|d| d.name.clone()).collect())
                }
                BoolKey::Aux(AuxKind::Trans { step, automaton, jump }) => {
                    let a = &net.automata[*automaton];
                    let written = a.jumps[*jump].written_vars();
                    (*step, *automaton, a.vars.iter().map(|d| d.name.clone()).filter(|x| !written.contains(x)).collect())
                }
                _ => continue,
            };
            carries[step][j].push((Var(v as u32), kept));
        }
        let root = Frame {
            vals: space.root_box().0,
            active: Vec::new(),
            members: HashSet::new(),
            used: HashSet::new(),
        };
        Ok(Theory {
            db,
            space,
            atoms,
            owner,
            flows: HashMap::new(),
            spans: HashMap::new(),
            carries,
            frames: vec![root],
            delta,
            icp,
            n_flow_steps,
            stats: IcpStats::default(),
            checks: 0,
        })
    }

    pub fn push_level(&mut self) {
        let top = self.frames.last().expect("root frame").clone();
        self.frames.push(top);
    }

    pub fn pop_to(&mut self, level: usize) {
        self.frames.truncate(level + 1);
    }

    /// Mode index of each automaton at `step`, if all are assigned.
    fn mode_vector(&self, values: &[Option<bool>], step: usize) -> Option<Vec<usize>> {
        (0..self.db.automaton_count())
            .map(|j| self.db.mode_vars(step, j).iter().position(|v| values[v.index()] == Some(true)))
            .collect()
    }

    fn flow(&mut self, step: usize, modes: &[usize]) -> Result<bool, IcpError> {
        let key = (step, modes.to_vec());
        if !self.flows.contains_key(&key) {
            let f = StepFlow::build(self.db, &self.space, step, modes, self.n_flow_steps)?;
            self.flows.insert(key.clone(), f.map(|f| Contractor::Flow(Arc::new(f))));
        }
        Ok(self.flows[&key].is_some())
    }

    fn contractor(&self, key: &ItemKey) -> &Contractor {
        match key {
            ItemKey::Atom(id) => &self.atoms[*id],
            ItemKey::Flow(step, modes) => self.flows[&(*step, modes.clone())].as_ref().expect("active flows exist"),
            ItemKey::Span { first, last, modes, .. } => {
                self.spans[&(*first, *last, modes.clone())].as_ref().expect("active spans exist")
            }
        }
    }

    fn step_flow(&self, step: usize, modes: &[usize]) -> Option<&StepFlow> {
        match self.flows.get(&(step, modes.to_vec())) {
            Some(Some(Contractor::Flow(f))) => Some(f),
            _ => None,
        }
    }

    /// The true alternative of automaton `j` at transition `step` if it keeps every variable in `names`.
    fn carrier(&self, values: &[Option<bool>], step: usize, j: usize, names: &[&String]) -> Option<Var> {
        self.carries[step][j]
            .iter()
            .find(|(v, _)| values[v.index()] == Some(true))
            .filter(|(_, kept)| names.iter().all(|x| kept.contains(x)))
            .map(|(v, _)| *v)
    }

    /// Literals that make transition `step` carry the integrated state of the
    /// flow at `step` into the flow at `step + 1` unchanged.
    fn carry(&self, values: &[Option<bool>], step: usize, a: &[usize], b: &[usize]) -> Option<Vec<Lit>> {
        let fa = self.step_flow(step, a)?;
        let fb = self.step_flow(step + 1, b)?;
        if !fa.same_dynamics(fb) || fa.state_names.is_empty() {
            return None;
        }
        let net = &self.db.network;
        let mut lits = Vec::new();
        for j in 0..net.automata.len() {
            let owned: Vec<&String> = fa.state_names.iter().filter(|x| net.owner_of(x) == Some(j)).collect();
            if !owned.is_empty() {
                lits.push(self.carrier(values, step, j, &owned)?.pos());
            }
        }
        Some(lits)
    }

    /// Maximal spans of two or more steps over which the state is carried.
    fn spans_of(&mut self, values: &[Option<bool>]) -> Result<Vec<ItemKey>, IcpError> {
        let k = self.db.k;
        let vectors: Vec<Option<Vec<usize>>> = (0..=k).map(|i| self.mode_vector(values, i)).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < k {
            let mut reasons = Vec::new();
            let mut last = i;
            while last < k {
                let (Some(a), Some(b)) = (&vectors[last], &vectors[last + 1]) else { break };
                let Some(lits) = self.carry(values, last, a, b) else { break };
                reasons.extend(lits);
                last += 1;
            }
            if last > i {
                let modes = vectors[i].clone().expect("span start has a mode vector");
                for s in i..=last {
                    let v = vectors[s].as_ref().expect("span steps have mode vectors");
                    for (j, &q) in v.iter().enumerate() {
                        reasons.push(self.db.mode_var(s, j, q).expect("mode in range").pos());
                    }
                }
                let key = (i, last, modes.clone());
                if !self.spans.contains_key(&key) {
                    let f = StepFlow::build_span(self.db, &self.space, i, last, &modes, self.n_flow_steps)?;
                    self.spans.insert(key.clone(), f.map(|f| Contractor::Flow(Arc::new(f))));
                }
                if self.spans[&key].is_some() {
                    reasons.sort_unstable_by_key(|l| l.0);
                    reasons.dedup();
                    out.push(ItemKey::Span { first: i, last, modes, reasons });
                }
            }
            i = last + 1;
        }
        Ok(out)
    }

    /// True literals responsible for an item.
    fn reasons(&self, key: &ItemKey, out: &mut Vec<Lit>) {
        match key {
            ItemKey::Atom(id) => out.push(self.owner[*id].pos()),
            ItemKey::Flow(step, modes) => {
                for (j, &q) in modes.iter().enumerate() {
                    out.push(self.db.mode_var(*step, j, q).expect("mode in range").pos());
                }
            }
            ItemKey::Span { reasons, .. } => out.extend(reasons),
        }
    }

    fn clause_of<'k>(&self, keys: impl IntoIterator<Item = &'k ItemKey>) -> Vec<Lit> {
        let mut lits = Vec::new();
        for k in keys {
            self.reasons(k, &mut lits);
        }
        lits.sort_unstable_by_key(|l| l.0);
        lits.dedup();
        lits.into_iter().map(|l| !l).collect()
    }

    /// Activates what the newly assigned literals switch on and propagates.
    pub fn assert_lits(&mut self, fresh: &[Lit], values: &[Option<bool>]) -> Result<Option<Vec<Lit>>, IcpError> {
        let mut new_keys = Vec::new();
        let mut steps = Vec::new();
        let mut structural = false;
        for &l in fresh {
            if !l.is_positive() {
                continue;
            }
            for &id in &self.db.attached[l.var().index()] {
                new_keys.push(ItemKey::Atom(id));
            }
            match self.db.key(l.var()) {
                BoolKey::Mode { step, .. } => {
                    structural = true;
                    if !steps.contains(step) {
                        steps.push(*step);
                    }
                }
                BoolKey::Aux(AuxKind::Noop { .. } | AuxKind::Trans { .. }) => structural = true,
                _ => {}
            }
        }
        for step in steps {
            if let Some(modes) = self.mode_vector(values, step) {
                if self.flow(step, &modes)? {
                    new_keys.push(ItemKey::Flow(step, modes));
                }
            }
        }
        if structural && self.db.k > 0 {
            new_keys.extend(self.spans_of(values)?);
        }
        let frame = self.frames.last_mut().expect("root frame");
        let mut wake = Vec::new();
        for k in new_keys {
            if frame.members.insert(k.clone()) {
                wake.push(frame.active.len());
                frame.active.push(k);
            }
        }
        if wake.is_empty() {
            return Ok(None);
        }
        Ok(self.propagate(&wake))
    }

    fn propagate(&mut self, wake: &[usize]) -> Option<Vec<Lit>> {
        self.stats.prunes += 1;
        let frame = self.frames.last().expect("root frame");
        let items: Vec<&Contractor> = frame.active.iter().map(|k| self.contractor(k)).collect();
        let mut vals = frame.vals.clone();
        let mut used = vec![false; items.len()];
        let outcome = propagate_from(&items, wake, &mut vals, &mut used);
        let newly: Vec<usize> = (0..items.len()).filter(|&i| used[i]).collect();
        match outcome {
            Propagation::Fixpoint { .. } => {
                let frame = self.frames.last_mut().expect("root frame");
                for i in newly {
                    let k = frame.active[i].clone();
                    frame.used.insert(k);
                }
                frame.vals = vals;
                None
            }
            Propagation::Empty => {
                let frame = self.frames.last().expect("root frame");
                let mut expl: Vec<usize> = (0..items.len())
                    .filter(|&i| used[i] || frame.used.contains(&frame.active[i]))
                    .collect();
                if expl.len() > 1 {
                    expl = shrink_explanation(&items, &self.space.root_box(), expl);
                }
                Some(self.clause_of(expl.iter().map(|&i| &frame.active[i])))
            }
        }
    }

    /// Full branch-and-prune over every active constraint.
    pub fn final_check(&mut self) -> Check {
        self.checks += 1;
        let frame = self.frames.last().expect("root frame");
        let items: Vec<&Contractor> = frame.active.iter().map(|k| self.contractor(k)).collect();
        let start = IntervalBox(frame.vals.clone());
        let mut stats = IcpStats::default();
        let r = delta_check(&self.space, &items, &start, self.delta, &self.icp, &mut stats);
        let out = match r {
            Ok(DeltaOutcome::Sat(b)) => Check::Sat(b),
            Ok(DeltaOutcome::Unsat(e)) => {
                let mut keys: Vec<&ItemKey> = frame.active.iter().filter(|k| frame.used.contains(k)).collect();
                keys.extend(e.0.iter().map(|&i| &frame.active[i]));
                Check::Conflict(self.clause_of(keys))
            }
            Err(e) => Check::Limit(e),
        };
        self.stats.boxes += stats.boxes;
        self.stats.prunes += stats.prunes;
        out
    }

    /// Constraints active in the current frame, for independent re-checking.
    pub fn active_atoms(&self) -> Vec<usize> {
        let frame = self.frames.last().expect("root frame");
        frame
            .active
            .iter()
            .filter_map(|k| match k {
                ItemKey::Atom(id) => Some(*id),
                ItemKey::Flow(..) | ItemKey::Span { .. } => None,
            })
            .collect()
    }
}
