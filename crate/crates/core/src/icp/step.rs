//! Continuous dynamics of one unrolled step under a fixed mode vector.
//!
//! The same machinery also describes a span of consecutive steps through
//! which the integrated state is carried unchanged: the flow then runs from
//! the first step's start values for the sum of the steps' durations.
//!
//! Variables with an ODE in their owner's mode form the integrated state.
//! Every other variable read by a derivative or an invariant is a parameter
//! whose value over time comes from its own mode: held constant, given by an
//! explicit closed-form solution, or (for implicit relations) bounded by the
//! hull of its start and end values.

use super::ode::{grid, Blowup, Enclosure, OdeSystem, Slice};
use super::tape::Tape;
use super::{within, IcpError, Space};
use crate::encode::{delay_var, end_var, start_var, ClauseDB};
use crate::expr::{Interval, Rel, Term};
use crate::model::{Flow, DURATION};

#[derive(Debug, Clone)]
enum Param {
    Constant { start: usize, end: usize },
    /// `tape` reads `inputs` (global slots) then the elapsed time.
    Explicit { tape: Tape, inputs: Vec<usize> },
    Hull { start: usize, end: usize },
}

#[derive(Debug, Clone)]
struct LocalAtom {
    tape: Tape,
    target: Interval,
}

/// Outcome of contracting a box with a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowContraction {
    Done,
    Empty,
    /// The enclosure was too coarse to say anything.
    Blowup,
}

#[derive(Debug, Clone)]
pub struct StepFlow {
    pub step: usize,
    /// Last step of a span; equal to `step` for a single step.
    pub last: usize,
    /// `(start, end)` global slots of each integrated variable.
    state: Vec<(usize, usize)>,
    /// Integrated variable names, in `state` order.
    pub state_names: Vec<String>,
    ode: OdeSystem,
    params: Vec<Param>,
    durs: Vec<usize>,
    invariants: Vec<LocalAtom>,
    /// Printed derivatives and invariants, equal for steps with the same dynamics.
    signature: String,
    n_steps: usize,
    taylor: bool,
    slots: Vec<usize>,
}

fn target_of(rel: Rel) -> Interval {
    match rel {
        Rel::Ge | Rel::Gt => Interval::new(0.0, f64::INFINITY),
        Rel::Le | Rel::Lt => Interval::new(f64::NEG_INFINITY, 0.0),
        Rel::Eq => Interval::point(0.0),
    }
}

/// `x.t = term` with `term` over start values and the duration.
fn explicit_solution(flow: &crate::expr::Formula, var: &str) -> Option<Term> {
    let end = format!("{var}.t");
    let atoms = flow.as_conjunction()?;
    atoms.into_iter().find_map(|c| {
        if c.rel != Rel::Eq {
            return None;
        }
        let candidate = match (&c.lhs, &c.rhs) {
            (Term::Var(v), t) | (t, Term::Var(v)) if *v == end => t,
            _ => return None,
        };
        let closed = candidate.free_vars().iter().all(|v| v == DURATION || v.ends_with(".0"));
        closed.then(|| candidate.clone())
    })
}

fn mentions(flow: &crate::expr::Formula, name: &str) -> bool {
    flow.free_vars().contains(name)
}

impl StepFlow {
    /// Builds the dynamics of `step` with automaton `j` in mode `modes[j]`.
    /// Returns `None` when nothing varies in a way the endpoint constraints
    /// do not already capture.
    pub fn build(db: &ClauseDB, space: &Space, step: usize, modes: &[usize], n_steps: usize) -> Result<Option<StepFlow>, IcpError> {
        Self::build_span(db, space, step, step, modes, n_steps)
    }

    /// Builds the dynamics of `first..=last` under the mode vector of
    /// `first`. The caller is responsible for the span being valid: every
    /// step has the same dynamics and the state is carried across each
    /// transition. Spans whose flow reads parameters are not supported.
    pub fn build_span(
        db: &ClauseDB,
        space: &Space,
        first: usize,
        last: usize,
        modes: &[usize],
        n_steps: usize,
    ) -> Result<Option<StepFlow>, IcpError> {
        let step = first;
        let net = &db.network;
        let vars = net.variables();
        let global = |name: String| space.index(&name).ok_or(IcpError::UnknownVariable(name));
        let mode_of = |owner: usize| &net.automata[owner].modes[modes[owner]];

        let mut state_names = Vec::new();
        let mut rhs_terms = Vec::new();
        let mut state = Vec::new();
        let mut bounds = Vec::new();
        for (d, owner) in &vars {
            if let Flow::Ode(eqs) = &mode_of(*owner).flow {
                if let Some((_, t)) = eqs.iter().find(|(x, _)| *x == d.name) {
                    state_names.push(d.name.clone());
                    rhs_terms.push(t.clone());
                    state.push((global(start_var(first, &d.name))?, global(end_var(last, &d.name))?));
                    bounds.push(d.bounds);
                }
            }
        }

        let is_constant = |name: &str| -> bool {
            let Some(&(_, owner)) = vars.iter().find(|(d, _)| d.name == name) else { return true };
            match &mode_of(owner).flow {
                Flow::Ode(eqs) => !eqs.iter().any(|(x, _)| x == name),
                Flow::ClosedForm(f) => !mentions(f, &format!("{name}.t")),
            }
        };

        let mut inv_atoms = Vec::new();
        for (j, a) in net.automata.iter().enumerate() {
            let m = &a.modes[modes[j]];
            for c in m.invariant.as_conjunction().into_iter().flatten() {
                let fv = c.lhs.free_vars().into_iter().chain(c.rhs.free_vars());
                let varies = fv.into_iter().any(|v| state_names.contains(&v) || !is_constant(&v));
                if varies {
                    inv_atoms.push(c.clone());
                }
            }
        }
        if state.is_empty() && inv_atoms.is_empty() {
            return Ok(None);
        }

        let mut param_names: Vec<String> = Vec::new();
        let mut collect = |t: &Term| {
            for v in t.free_vars() {
                if !state_names.contains(&v) && !param_names.contains(&v) {
                    param_names.push(v);
                }
            }
        };
        rhs_terms.iter().for_each(&mut collect);
        for c in &inv_atoms {
            collect(&c.lhs);
            collect(&c.rhs);
        }
        param_names.sort();
        if last != first && (!param_names.is_empty() || state.is_empty()) {
            return Ok(None);
        }

        let mut params = Vec::new();
        let mut taylor = true;
        let rhs_vars: Vec<String> = rhs_terms.iter().flat_map(|t| t.free_vars()).collect();
        for name in &param_names {
            let (start, end) = (global(start_var(step, name))?, global(end_var(step, name))?);
            let &(_, owner) = vars.iter().find(|(d, _)| d.name == *name).expect("validated variable");
            let p = if is_constant(name) {
                Param::Constant { start, end }
            } else {
                match &mode_of(owner).flow {
                    Flow::ClosedForm(f) => match explicit_solution(f, name) {
                        Some(sol) => {
                            let mut inputs = Vec::new();
                            let mut input_names = Vec::new();
                            for v in sol.free_vars() {
                                if v != DURATION {
                                    let base = v.strip_suffix(".0").expect("start value");
                                    inputs.push(global(start_var(step, base))?);
                                    input_names.push(v);
                                }
                            }
                            let k = inputs.len();
                            let resolve = |v: &str| {
                                if v == DURATION {
                                    Some(k)
                                } else {
                                    input_names.iter().position(|n| n == v)
                                }
                            };
                            let tape = Tape::compile(&sol, &resolve).map_err(IcpError::UnknownVariable)?;
                            Param::Explicit { tape, inputs }
                        }
                        None => Param::Hull { start, end },
                    },
                    Flow::Ode(_) => Param::Hull { start, end },
                }
            };
            if !matches!(p, Param::Constant { .. }) && rhs_vars.contains(name) {
                taylor = false;
            }
            params.push(p);
        }

        let local = |v: &str| {
            state_names
                .iter()
                .position(|n| n == v)
                .or_else(|| param_names.iter().position(|n| n == v).map(|p| p + state_names.len()))
        };
        let rhs = rhs_terms
            .iter()
            .map(|t| Tape::compile(t, &local).map_err(IcpError::UnknownVariable))
            .collect::<Result<Vec<_>, _>>()?;
        let invariants = inv_atoms
            .iter()
            .map(|c| {
                Ok(LocalAtom {
                    tape: Tape::compile(&c.difference(), &local).map_err(IcpError::UnknownVariable)?,
                    target: target_of(c.rel),
                })
            })
            .collect::<Result<Vec<_>, IcpError>>()?;

        let durs = (first..=last).map(|i| global(delay_var(i))).collect::<Result<Vec<_>, _>>()?;
        let mut signature = String::new();
        for (x, t) in state_names.iter().zip(&rhs_terms) {
            signature.push_str(&format!("d/dt {x} = {t:?};"));
        }
        for c in &inv_atoms {
            signature.push_str(&format!("inv {c:?};"));
        }
        let mut slots: Vec<usize> = durs.clone();
        for &(s, e) in &state {
            slots.extend([s, e]);
        }
        for p in &params {
            match p {
                Param::Constant { start, end } | Param::Hull { start, end } => slots.extend([*start, *end]),
                Param::Explicit { inputs, .. } => slots.extend(inputs),
            }
        }
        slots.sort_unstable();
        slots.dedup();

        Ok(Some(StepFlow {
            step,
            last,
            state,
            state_names,
            ode: OdeSystem { rhs, bounds },
            params,
            durs,
            invariants,
            signature,
            n_steps,
            taylor,
            slots,
        }))
    }

    /// Global slots read or narrowed.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn is_span(&self) -> bool {
        self.last != self.step
    }

    /// Whether two flows integrate the same system under the same invariants.
    pub fn same_dynamics(&self, other: &StepFlow) -> bool {
        self.signature == other.signature && self.params.is_empty() && other.params.is_empty()
    }

    fn duration(&self, vals: &[Interval]) -> Interval {
        self.durs.iter().fold(Interval::point(0.0), |acc, &d| acc.add(vals[d]))
    }

    /// Narrows the durations so that their sum lies in `t`. Returns false if that is impossible.
    fn narrow_duration(&self, vals: &mut [Interval], t: Interval) -> bool {
        for (k, &d) in self.durs.iter().enumerate() {
            let others = self
                .durs
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .fold(Interval::point(0.0), |acc, (_, &o)| acc.add(vals[o]));
            match vals[d].intersect(&t.sub(others)) {
                Some(v) => vals[d] = v,
                None => return false,
            }
        }
        true
    }

    fn param_values(&self, vals: &[Interval], time: Interval) -> Option<Vec<Interval>> {
        let mut scratch = Vec::new();
        self.params
            .iter()
            .map(|p| match p {
                Param::Constant { start, end } => vals[*start].intersect(&vals[*end]),
                Param::Hull { start, end } => Some(vals[*start].hull(&vals[*end])),
                Param::Explicit { tape, inputs } => {
                    let mut local: Vec<Interval> = inputs.iter().map(|&i| vals[i]).collect();
                    local.push(time);
                    Some(tape.eval(&local, &mut scratch).unwrap_or(Interval::ENTIRE))
                }
            })
            .collect()
    }

    /// Evaluates every invariant atom on a window. `Err(())` means some atom
    /// is violated throughout the window.
    fn invariant_margin(&self, vals: &[Interval], time: Interval, state: &[Interval], delta: f64) -> Result<bool, ()> {
        if self.invariants.is_empty() {
            return Ok(true);
        }
        let Some(params) = self.param_values(vals, time) else { return Err(()) };
        let local: Vec<Interval> = state.iter().chain(&params).copied().collect();
        let mut scratch = Vec::new();
        let mut ok = true;
        for a in &self.invariants {
            match a.tape.eval(&local, &mut scratch) {
                None => return Err(()),
                Some(g) => {
                    if g.intersect(&a.target).is_none() {
                        return Err(());
                    }
                    ok &= within(g, a.target, delta);
                }
            }
        }
        Ok(ok)
    }

    fn enclose(&self, vals: &[Interval], from_end: bool, duration: Interval) -> Result<Option<Enclosure>, Blowup> {
        let Some(params) = self.param_values(vals, Interval::new(0.0, duration.hi())) else { return Ok(None) };
        let start: Vec<Interval> = self.state.iter().map(|&(s, e)| vals[if from_end { e } else { s }]).collect();
        let sign = if from_end { -1.0 } else { 1.0 };
        self.ode.enclose(&start, &params, duration, self.n_steps, sign, self.taylor)
    }

    /// Time windows for a flow without integrated state.
    fn time_grid(&self, d: Interval) -> Vec<(Interval, bool)> {
        let n = self.n_steps.max(1);
        let (tlo, thi) = (d.lo().max(0.0), d.hi().max(0.0));
        let points = |a: f64, b: f64| grid(a, b, n);
        let mut out = Vec::new();
        if tlo > 0.0 {
            out.extend(points(0.0, tlo).windows(2).map(|w| (Interval::new(w[0], w[1]), true)));
        }
        if thi > tlo {
            out.extend(points(tlo, thi).windows(2).map(|w| (Interval::new(w[0], w[1]), false)));
        } else {
            out.push((Interval::point(tlo), true));
        }
        out
    }

    pub fn contract(&self, vals: &mut [Interval]) -> FlowContraction {
        let d = self.duration(vals);
        if self.state.is_empty() {
            let mut thi = d.hi();
            for (time, definite) in self.time_grid(d) {
                if self.invariant_margin(vals, time, &[], 0.0).is_err() {
                    if definite {
                        return FlowContraction::Empty;
                    }
                    thi = thi.min(time.lo());
                    break;
                }
            }
            return match d.intersect(&Interval::new(f64::NEG_INFINITY, thi)) {
                Some(v) if self.narrow_duration(vals, v) => FlowContraction::Done,
                _ => FlowContraction::Empty,
            };
        }

        let fwd = match self.enclose(vals, false, d) {
            Err(Blowup) => return FlowContraction::Blowup,
            Ok(None) => return FlowContraction::Empty,
            Ok(Some(e)) => e,
        };
        let mut thi = d.hi().min(fwd.horizon);
        for s in &fwd.slices {
            if self.invariant_margin(vals, s.time, &s.state, 0.0).is_err() {
                if s.definite {
                    return FlowContraction::Empty;
                }
                thi = thi.min(s.time.lo());
                break;
            }
        }
        let any_final = fwd.slices.iter().any(|s| !s.definite);
        let ends: Vec<&Slice> = if any_final {
            fwd.slices.iter().filter(|s| !s.definite).collect()
        } else {
            fwd.slices.last().into_iter().collect()
        };
        let mut t_range: Option<Interval> = None;
        let mut x_range: Option<Vec<Interval>> = None;
        for s in ends {
            if s.time.lo() > thi {
                break;
            }
            let meets = self.state.iter().zip(&s.state).all(|(&(_, e), x)| vals[e].intersect(x).is_some());
            if meets {
                t_range = Some(t_range.map_or(s.time, |t| t.hull(&s.time)));
                x_range = Some(match x_range {
                    None => s.state.clone(),
                    Some(r) => r.iter().zip(&s.state).map(|(a, b)| a.hull(b)).collect(),
                });
            }
        }
        let (Some(t_range), Some(x_range)) = (t_range, x_range) else { return FlowContraction::Empty };
        let Some(t_new) = d
            .intersect(&t_range)
            .and_then(|t| t.intersect(&Interval::new(f64::NEG_INFINITY, thi)))
        else {
            return FlowContraction::Empty;
        };
        if !self.narrow_duration(vals, t_new) {
            return FlowContraction::Empty;
        }
        for (&(_, e), x) in self.state.iter().zip(&x_range) {
            match vals[e].intersect(x) {
                Some(v) => vals[e] = v,
                None => return FlowContraction::Empty,
            }
        }

        match self.enclose(vals, true, t_new) {
            Err(Blowup) => {}
            Ok(None) => return FlowContraction::Empty,
            Ok(Some(rev)) => {
                for (&(s, _), x) in self.state.iter().zip(&rev.end) {
                    match vals[s].intersect(x) {
                        Some(v) => vals[s] = v,
                        None => return FlowContraction::Empty,
                    }
                }
            }
        }
        FlowContraction::Done
    }

    /// Whether every point of the box follows the flow to within `delta`
    /// and keeps every invariant to within `delta` along the way.
    pub fn delta_sat(&self, vals: &[Interval], delta: f64) -> bool {
        if self.is_span() {
            // Spans only add propagation; the steps they cover are checked individually.
            return true;
        }
        let d = self.duration(vals);
        if self.state.is_empty() {
            return self.time_grid(d).into_iter().all(|(t, _)| self.invariant_margin(vals, t, &[], delta) == Ok(true));
        }
        let Ok(Some(fwd)) = self.enclose(vals, false, d) else { return false };
        if fwd.horizon < d.hi() {
            return false;
        }
        if !fwd.slices.iter().all(|s| self.invariant_margin(vals, s.time, &s.state, delta) == Ok(true)) {
            return false;
        }
        self.state.iter().zip(&fwd.end).all(|(&(_, e), x)| {
            let xt = vals[e];
            xt.hi() - x.lo() <= delta && x.hi() - xt.lo() <= delta
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::encode;
    use crate::modelio::parse_model;

    const DRIFT: &str = "(network (automaton A (vars (x 0 10)) (alphabet s)
        (mode m (flow (ode (d/dt x 1))))
        (jump m m (labels s))
        (init m (= x 1))))
      (goal)";

    fn setup(k: usize) -> (ClauseDB, Space) {
        let doc = parse_model(DRIFT).unwrap();
        let db = encode(&doc.network, &doc.goal, k, 1.0).unwrap();
        let space = Space::from_db(&db);
        (db, space)
    }

    fn set(space: &Space, vals: &mut [Interval], name: &str, lo: f64, hi: f64) {
        vals[space.index(name).unwrap()] = Interval::new(lo, hi);
    }

    #[test]
    fn span_integrates_over_summed_durations() {
        let (db, space) = setup(2);
        let span = StepFlow::build_span(&db, &space, 0, 2, &[0], 8).unwrap().unwrap();
        let single = StepFlow::build(&db, &space, 1, &[0], 8).unwrap().unwrap();
        assert!(span.is_span() && !single.is_span());
        assert!(span.same_dynamics(&single));
        let mut vals = space.root_box().0;
        set(&space, &mut vals, &start_var(0, "x"), 1.0, 1.0);
        set(&space, &mut vals, &delay_var(0), 0.5, 0.5);
        set(&space, &mut vals, &delay_var(1), 0.25, 0.25);
        set(&space, &mut vals, &delay_var(2), 0.0, 0.25);
        assert_eq!(span.contract(&mut vals), FlowContraction::Done);
        let end = vals[space.index(&end_var(2, "x")).unwrap()];
        assert!(end.lo() >= 1.75 - 1e-9 && end.hi() <= 2.0 + 1e-9, "{end:?}");
    }

    #[test]
    fn span_refutes_unreachable_end() {
        let (db, space) = setup(2);
        let span = StepFlow::build_span(&db, &space, 0, 2, &[0], 8).unwrap().unwrap();
        let mut vals = space.root_box().0;
        set(&space, &mut vals, &start_var(0, "x"), 1.0, 1.0);
        for i in 0..=2 {
            set(&space, &mut vals, &delay_var(i), 0.0, 0.5);
        }
        set(&space, &mut vals, &end_var(2, "x"), 3.0, 3.0);
        assert_eq!(span.contract(&mut vals), FlowContraction::Empty);
    }

    #[test]
    fn span_narrows_durations_from_the_end_value() {
        let (db, space) = setup(1);
        let span = StepFlow::build_span(&db, &space, 0, 1, &[0], 8).unwrap().unwrap();
        let mut vals = space.root_box().0;
        set(&space, &mut vals, &start_var(0, "x"), 1.0, 1.0);
        set(&space, &mut vals, &delay_var(0), 0.0, 0.25);
        set(&space, &mut vals, &delay_var(1), 0.0, 1.0);
        set(&space, &mut vals, &end_var(1, "x"), 2.0, 2.0);
        assert_eq!(span.contract(&mut vals), FlowContraction::Done);
        let d1 = vals[space.index(&delay_var(1)).unwrap()];
        // The exact answer is d1 in [0.75, 1]; the time grid bounds how much of it is recovered.
        assert!(d1.lo() > 0.5 && d1.contains(0.75) && d1.contains(1.0), "{d1:?}");
    }
}
