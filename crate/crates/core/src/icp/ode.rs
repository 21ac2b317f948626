//! Validated interval integration of ODE systems.
//!
//! Each segment first finds an a priori enclosure of the trajectory by
//! Picard iteration, then tightens the endpoint with a second-order Taylor
//! expansion whose remainder is bounded over the a priori enclosure. The
//! declared variable bounds act as a standing invariant: trajectories are
//! only followed while they stay inside them.

use super::tape::Tape;
use crate::expr::Interval;

/// Width beyond which an enclosure is considered useless.
pub const BLOWUP_WIDTH: f64 = 1e7;

const MAX_SPLIT_DEPTH: u32 = 12;
const PICARD_ITERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blowup;

/// `dx/dt = f(x, p)` with `f` compiled over slots `0..n` (state) followed by
/// the parameter slots.
#[derive(Debug, Clone)]
pub struct OdeSystem {
    pub rhs: Vec<Tape>,
    pub bounds: Vec<Interval>,
}

/// The state enclosure over a time window relative to the start of the flow.
#[derive(Debug, Clone)]
pub struct Slice {
    pub time: Interval,
    pub state: Vec<Interval>,
    /// Every duration in the requested range covers this window.
    pub definite: bool,
}

#[derive(Debug, Clone)]
pub struct Enclosure {
    /// States reachable at the requested durations that stay in bounds.
    pub end: Vec<Interval>,
    pub slices: Vec<Slice>,
    /// Durations beyond this leave the declared bounds.
    pub horizon: f64,
}

enum Advance {
    /// `next` is `None` when every trajectory has left the bounds at the end
    /// of the segment.
    Ok { next: Option<Vec<Interval>>, over: Vec<Interval> },
    Fail,
    /// Every trajectory leaves the bounds within the segment.
    Leaves,
}

type Segment = (Option<Vec<Interval>>, Vec<Interval>);

struct Ctx<'a> {
    sys: &'a OdeSystem,
    params: &'a [Interval],
    sign: f64,
    taylor: bool,
    vals: Vec<Interval>,
    scratch: Vec<Interval>,
    grad: Vec<Interval>,
}

fn sub_box(a: &[Interval], b: &[Interval]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.is_subset_of(y))
}

fn meet(a: &[Interval], b: &[Interval]) -> Option<Vec<Interval>> {
    a.iter().zip(b).map(|(x, y)| x.intersect(y)).collect()
}

fn hull(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    a.iter().zip(b).map(|(x, y)| x.hull(y)).collect()
}

fn too_wide(b: &[Interval]) -> bool {
    b.iter().any(|x| !(x.width() <= BLOWUP_WIDTH))
}

impl Ctx<'_> {
    fn n(&self) -> usize {
        self.sys.rhs.len()
    }

    fn load(&mut self, state: &[Interval]) {
        self.vals.clear();
        self.vals.extend_from_slice(state);
        self.vals.extend_from_slice(self.params);
    }

    fn f(&mut self, state: &[Interval]) -> Option<Vec<Interval>> {
        self.load(state);
        let mut out = Vec::with_capacity(self.n());
        for t in &self.sys.rhs {
            out.push(t.eval(&self.vals, &mut self.scratch)?.scale(self.sign));
        }
        Some(out)
    }

    /// `f` and its Jacobian with respect to the state.
    fn f_jac(&mut self, state: &[Interval]) -> Option<(Vec<Interval>, Vec<Vec<Interval>>)> {
        self.load(state);
        let n = self.n();
        let (mut fs, mut js) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for t in &self.sys.rhs {
            let v = t.eval_grad(&self.vals, n, &mut self.scratch, &mut self.grad)?;
            fs.push(v.scale(self.sign));
            js.push(self.grad.iter().map(|g| g.scale(self.sign)).collect());
        }
        Some((fs, js))
    }

    fn advance(&mut self, x: &[Interval], h: f64) -> Advance {
        let n = self.n();
        let span = Interval::new(0.0, h);
        let Some(fx) = self.f(x) else { return Advance::Fail };
        let euler = |x: &[Interval], f: &[Interval]| -> Vec<Interval> {
            x.iter().zip(f).map(|(a, b)| a.add(span.mul(*b))).collect()
        };
        let widen = |b: Vec<Interval>| -> Vec<Interval> {
            b.into_iter().map(|i| i.inflate(0.1 * i.width() + 1e-9 * (1.0 + i.mag()))).collect()
        };
        let mut guess = widen(euler(x, &fx));
        let mut over = None;
        for _ in 0..PICARD_ITERS {
            let Some(inside) = meet(&guess, &self.sys.bounds) else { return Advance::Leaves };
            let Some(fb) = self.f(&inside) else { return Advance::Fail };
            let next = euler(x, &fb);
            if too_wide(&next) {
                return Advance::Fail;
            }
            if sub_box(&next, &guess) {
                over = Some(next);
                break;
            }
            guess = widen(hull(&guess, &next));
        }
        let Some(over) = over else { return Advance::Fail };
        let Some(over) = meet(&over, &self.sys.bounds) else { return Advance::Leaves };
        let Some(f_over) = self.f(&over) else { return Advance::Fail };
        let hp = Interval::point(h);
        let mut next: Vec<Interval> = x.iter().zip(&f_over).map(|(a, b)| a.add(hp.mul(*b))).collect();
        if self.taylor {
            if let Some(tight) = self.taylor_step(x, &over, h) {
                match meet(&next, &tight) {
                    Some(v) => next = v,
                    None => return Advance::Ok { next: None, over },
                }
            }
        }
        let next = meet(&next, &over).and_then(|v| meet(&v, &self.sys.bounds));
        debug_assert!(next.as_ref().is_none_or(|v| v.len() == n));
        Advance::Ok { next, over }
    }

    /// Second-order remainder `h²/2 · (J f)` over the enclosure.
    fn remainder(&mut self, over: &[Interval], h2: Interval) -> Option<Vec<Interval>> {
        let (fo, jo) = self.f_jac(over)?;
        Some(
            jo.iter()
                .map(|row| {
                    let jf = row.iter().zip(&fo).fold(Interval::point(0.0), |acc, (j, f)| acc.add(j.mul(*f)));
                    jf.mul(h2)
                })
                .collect(),
        )
    }

    fn taylor_step(&mut self, x: &[Interval], over: &[Interval], h: f64) -> Option<Vec<Interval>> {
        let hp = Interval::point(h);
        let r = self.remainder(over, hp.mul(hp).scale(0.5))?;
        let (fx, jx) = self.f_jac(x)?;
        let natural: Vec<Interval> = (0..x.len()).map(|i| x[i].add(hp.mul(fx[i])).add(r[i])).collect();
        let c: Vec<Interval> = x.iter().map(|i| Interval::point(i.mid())).collect();
        let fc = self.f(&c)?;
        let mut mean = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut acc = c[i].add(hp.mul(fc[i])).add(r[i]);
            for k in 0..x.len() {
                let coef = if i == k { Interval::point(1.0).add(hp.mul(jx[i][k])) } else { hp.mul(jx[i][k]) };
                acc = acc.add(coef.mul(x[k].sub(c[k])));
            }
            mean.push(acc);
        }
        meet(&natural, &mean)
    }

    /// States over `[0, s]` for every `s ∈ [0, h]`, tightened with a Taylor
    /// expansion in the time offset.
    fn window(&mut self, x: &[Interval], over: &[Interval], h: f64) -> Vec<Interval> {
        if !self.taylor {
            return over.to_vec();
        }
        let span = Interval::new(0.0, h);
        let (Some(fx), Some(r)) = (self.f(x), self.remainder(over, Interval::new(0.0, 0.5 * h * h))) else {
            return over.to_vec();
        };
        let t: Vec<Interval> = (0..x.len()).map(|i| x[i].add(span.mul(fx[i])).add(r[i])).collect();
        meet(over, &t).unwrap_or_else(|| over.to_vec())
    }

    /// Integrates over `h`, halving on failure. Returns the endpoint
    /// enclosure (if any trajectory is still in bounds) and the enclosure
    /// over the whole segment, or `None` if the segment cannot be entered.
    fn segment(&mut self, x: &[Interval], h: f64, depth: u32) -> Result<Option<Segment>, Blowup> {
        match self.advance(x, h) {
            Advance::Ok { next, over } => {
                let w = self.window(x, &over, h);
                Ok(Some((next, w)))
            }
            Advance::Leaves => Ok(None),
            Advance::Fail if depth < MAX_SPLIT_DEPTH => {
                let Some((mid, o1)) = self.segment(x, h / 2.0, depth + 1)? else { return Ok(None) };
                let Some(mid) = mid else { return Ok(Some((None, o1))) };
                match self.segment(&mid, h / 2.0, depth + 1)? {
                    Some((end, o2)) => Ok(Some((end, hull(&o1, &o2)))),
                    None => Ok(Some((None, o1))),
                }
            }
            Advance::Fail => Err(Blowup),
        }
    }
}

impl OdeSystem {
    /// Encloses the flow from `start` for every duration in `duration`.
    /// `sign = -1.0` integrates the time-reversed system. `taylor` may only
    /// be set when the parameters are constant in time. Returns `None` when
    /// no trajectory stays within bounds for the shortest duration.
    pub fn enclose(
        &self,
        start: &[Interval],
        params: &[Interval],
        duration: Interval,
        n_steps: usize,
        sign: f64,
        taylor: bool,
    ) -> Result<Option<Enclosure>, Blowup> {
        let n_steps = n_steps.max(1);
        let mut ctx = Ctx {
            sys: self,
            params,
            sign,
            taylor,
            vals: Vec::new(),
            scratch: Vec::new(),
            grad: Vec::new(),
        };
        let Some(mut x) = meet(start, &self.bounds) else { return Ok(None) };
        let (tlo, thi) = (duration.lo().max(0.0), duration.hi().max(0.0));
        let mut slices = Vec::new();
        if tlo > 0.0 {
            for w in grid(0.0, tlo, n_steps).windows(2) {
                let Some((Some(next), over)) = ctx.segment(&x, w[1] - w[0], 0)? else { return Ok(None) };
                slices.push(Slice { time: Interval::new(w[0], w[1]), state: over, definite: true });
                x = next;
            }
        }
        if thi <= tlo {
            slices.push(Slice { time: Interval::point(tlo), state: x.clone(), definite: true });
            return Ok(Some(Enclosure { end: x, slices, horizon: thi }));
        }
        let mut end: Option<Vec<Interval>> = None;
        let mut horizon = thi;
        for (r, w) in grid(tlo, thi, n_steps).windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            match ctx.segment(&x, b - a, 0)? {
                Some((next, over)) => {
                    end = Some(match end {
                        Some(e) => hull(&e, &over),
                        None => over.clone(),
                    });
                    slices.push(Slice { time: Interval::new(a, b), state: over, definite: false });
                    match next {
                        Some(next) => x = next,
                        None => {
                            horizon = b;
                            break;
                        }
                    }
                }
                None => {
                    if r == 0 {
                        // Only the exact shortest duration may remain.
                        slices.push(Slice { time: Interval::point(tlo), state: x.clone(), definite: false });
                        end = Some(x.clone());
                    }
                    horizon = a;
                    break;
                }
            }
        }
        Ok(Some(Enclosure { end: end.expect("at least one window"), slices, horizon }))
    }
}

/// `n + 1` non-decreasing points from `a` to `b`. Neighbouring points are
/// within a factor of two of each other away from zero, so their
/// differences are exact and the step sizes add up to `b - a`.
pub(crate) fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut p = vec![a; n + 1];
    for r in 1..=n {
        p[r] = if r == n { b } else { (a + h * r as f64).clamp(p[r - 1], b) };
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Term;

    fn system(terms: &[Term], names: &[&str], bounds: Interval) -> OdeSystem {
        let resolve = |v: &str| names.iter().position(|n| *n == v);
        OdeSystem {
            rhs: terms.iter().map(|t| Tape::compile(t, &resolve).unwrap()).collect(),
            bounds: vec![bounds; terms.len()],
        }
    }

    #[test]
    fn unit_rate_is_exact_enough() {
        let sys = system(&[Term::constant(1.0)], &["x"], Interval::ENTIRE);
        let e = sys.enclose(&[Interval::point(0.0)], &[], Interval::point(2.0), 10, 1.0, true).unwrap().unwrap();
        assert!(e.end[0].contains(2.0) && e.end[0].width() <= 0.05, "{:?}", e.end);
    }

    #[test]
    fn constant_flow_keeps_the_start_box() {
        let sys = system(&[Term::constant(0.0)], &["x"], Interval::ENTIRE);
        let x0 = Interval::new(1.0, 2.0);
        let e = sys.enclose(&[x0], &[], Interval::new(0.0, 5.0), 8, 1.0, true).unwrap().unwrap();
        assert!(x0.is_subset_of(&e.end[0]) && e.end[0].width() < 1.0 + 1e-9);
    }

    #[test]
    fn exponential_growth_contains_exact_value() {
        let sys = system(&[Term::var("x")], &["x"], Interval::ENTIRE);
        let e = sys.enclose(&[Interval::point(1.0)], &[], Interval::point(1.0), 32, 1.0, true).unwrap().unwrap();
        assert!(e.end[0].contains(std::f64::consts::E), "{:?}", e.end);
        assert!(e.end[0].width() < 0.05);
    }

    #[test]
    fn reverse_integration_returns_to_start() {
        let sys = system(&[Term::var("x")], &["x"], Interval::ENTIRE);
        let e = sys
            .enclose(&[Interval::point(std::f64::consts::E)], &[], Interval::point(1.0), 32, -1.0, true)
            .unwrap()
            .unwrap();
        assert!(e.end[0].contains(1.0) && e.end[0].width() < 0.05, "{:?}", e.end);
    }

    #[test]
    fn leaving_bounds_cuts_the_horizon() {
        let sys = system(&[Term::constant(1.0)], &["x"], Interval::new(0.0, 3.0));
        let e = sys.enclose(&[Interval::point(0.0)], &[], Interval::new(0.0, 10.0), 10, 1.0, true).unwrap().unwrap();
        assert!(e.horizon <= 4.0 && e.horizon >= 3.0, "{}", e.horizon);
        let none = sys.enclose(&[Interval::point(0.0)], &[], Interval::point(5.0), 10, 1.0, true).unwrap();
        assert!(none.is_none());
    }
}
