//! Terms flattened into evaluation tapes with forward-backward projection.

use crate::expr::{BinaryOp, Interval, Term, UnaryOp};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(Interval),
    Var(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    Pow(usize, u32),
}

/// A term in post-order. Variable nodes refer to caller-chosen slots.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    slots: Vec<usize>,
}

/// Result of projecting a tape onto a target interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Empty,
    Done,
}

impl Tape {
    /// Flattens `term`, mapping each variable name to a slot with `resolve`.
    /// Returns the first name `resolve` rejects.
    pub fn compile(term: &Term, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Tape, String> {
        let mut tape = Tape { ops: Vec::new(), slots: Vec::new() };
        tape.push(term, resolve)?;
        tape.slots.sort_unstable();
        tape.slots.dedup();
        Ok(tape)
    }

    fn push(&mut self, term: &Term, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<usize, String> {
        let op = match term {
            Term::Const(c) => Op::Const(Interval::point(*c)),
            Term::Var(name) => {
                let s = resolve(name).ok_or_else(|| name.clone())?;
                self.slots.push(s);
                Op::Var(s)
            }
            Term::Unary(op, a) => Op::Unary(*op, self.push(a, resolve)?),
            Term::Binary(op, a, b) => {
                let a = self.push(a, resolve)?;
                let b = self.push(b, resolve)?;
                Op::Binary(*op, a, b)
            }
            Term::Pow(a, n) => Op::Pow(self.push(a, resolve)?, *n),
        };
        self.ops.push(op);
        Ok(self.ops.len() - 1)
    }

    /// Distinct slots the tape reads, ascending.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    /// Interval value of every node; `None` if some sub-term is undefined
    /// everywhere on the box.
    fn forward(&self, vals: &[Interval], out: &mut Vec<Interval>) -> Option<()> {
        out.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(s) => vals[s],
                Op::Unary(u, a) => {
                    let x = out[a];
                    match u {
                        UnaryOp::Neg => x.neg(),
                        UnaryOp::Sin => x.sin(),
                        UnaryOp::Cos => x.cos(),
                        UnaryOp::Exp => x.exp(),
                        UnaryOp::Sqrt => x.sqrt()?,
                    }
                }
                Op::Binary(b, a, c) => {
                    let (x, y) = (out[a], out[c]);
                    match b {
                        BinaryOp::Add => x.add(y),
                        BinaryOp::Sub => x.sub(y),
                        BinaryOp::Mul => x.mul(y),
                        BinaryOp::Div => x.div(y)?,
                        BinaryOp::Min => x.min(y),
                        BinaryOp::Max => x.max(y),
                    }
                }
                Op::Pow(a, n) => out[a].powi(n),
            };
            out.push(v);
        }
        Some(())
    }

    /// Interval enclosure of the term; `None` when it is undefined on the whole box.
    pub fn eval(&self, vals: &[Interval], scratch: &mut Vec<Interval>) -> Option<Interval> {
        self.forward(vals, scratch)?;
        scratch.last().copied()
    }

    /// Narrows `vals` so that the term can still take a value in `target`.
    /// No point of `vals` at which the term lies in `target` is removed.
    pub fn project(&self, vals: &mut [Interval], target: Interval, scratch: &mut Vec<Interval>) -> Projection {
        if self.forward(vals, scratch).is_none() {
            return Projection::Empty;
        }
        let n = scratch.len();
        match scratch[n - 1].intersect(&target) {
            Some(v) => scratch[n - 1] = v,
            None => return Projection::Empty,
        }
        for i in (0..n).rev() {
            let c = scratch[i];
            let ok = match self.ops[i] {
                Op::Const(k) => k.intersect(&c).is_some(),
                Op::Var(s) => match vals[s].intersect(&c) {
                    Some(v) => {
                        vals[s] = v;
                        true
                    }
                    None => false,
                },
                Op::Unary(u, a) => {
                    let by = unary_inverse(u, c, scratch[a]);
                    narrow(scratch, a, by)
                }
                Op::Pow(a, k) => {
                    let by = pow_inverse(k, c, scratch[a]);
                    narrow(scratch, a, by)
                }
                Op::Binary(b, a, d) => {
                    let (x, y) = (scratch[a], scratch[d]);
                    match b {
                        BinaryOp::Add => narrow(scratch, a, Some(c.sub(y))) && {
                            let x = scratch[a];
                            narrow(scratch, d, Some(c.sub(x)))
                        },
                        BinaryOp::Sub => narrow(scratch, a, Some(c.add(y))) && {
                            let x = scratch[a];
                            narrow(scratch, d, Some(x.sub(c)))
                        },
                        BinaryOp::Mul => narrow(scratch, a, mul_inverse(c, y)) && {
                            let x = scratch[a];
                            narrow(scratch, d, mul_inverse(c, x))
                        },
                        BinaryOp::Div => {
                            // c = x / y, so x = c·y and y = x / c.
                            narrow(scratch, a, Some(c.mul(y))) && {
                                let x = scratch[a];
                                narrow(scratch, d, mul_inverse(x, c))
                            }
                        }
                        BinaryOp::Min => {
                            let lower = Interval::new(c.lo(), f64::INFINITY);
                            narrow(scratch, a, Some(lower))
                                && narrow(scratch, d, Some(lower))
                                && (y.lo() <= c.hi() || narrow(scratch, a, Some(c)))
                                && (x.lo() <= c.hi() || narrow(scratch, d, Some(c)))
                        }
                        BinaryOp::Max => {
                            let upper = Interval::new(f64::NEG_INFINITY, c.hi());
                            narrow(scratch, a, Some(upper))
                                && narrow(scratch, d, Some(upper))
                                && (y.hi() >= c.lo() || narrow(scratch, a, Some(c)))
                                && (x.hi() >= c.lo() || narrow(scratch, d, Some(c)))
                        }
                    }
                }
            };
            if !ok {
                return Projection::Empty;
            }
        }
        Projection::Done
    }

    /// Value and gradient with respect to slots `0..n`, by forward-mode
    /// differentiation. `grad` receives `n` entries.
    pub fn eval_grad(&self, vals: &[Interval], n: usize, scratch: &mut Vec<Interval>, grad: &mut Vec<Interval>) -> Option<Interval> {
        self.forward(vals, scratch)?;
        let zero = Interval::point(0.0);
        let mut d = vec![zero; self.ops.len() * n];
        for (i, op) in self.ops.iter().enumerate() {
            let (head, tail) = d.split_at_mut(i * n);
            let out = &mut tail[..n];
            let g = |j: usize, k: usize| head[j * n + k];
            let v = scratch[i];
            match *op {
                Op::Const(_) => {}
                Op::Var(s) => {
                    if s < n {
                        out[s] = Interval::point(1.0);
                    }
                }
                Op::Unary(u, a) => {
                    let x = scratch[a];
                    let f = match u {
                        UnaryOp::Neg => Interval::point(-1.0),
                        UnaryOp::Sin => x.cos(),
                        UnaryOp::Cos => x.sin().neg(),
                        UnaryOp::Exp => v,
                        UnaryOp::Sqrt => Interval::point(1.0).div(v.scale(2.0)).unwrap_or(Interval::ENTIRE),
                    };
                    for k in 0..n {
                        out[k] = f.mul(g(a, k));
                    }
                }
                Op::Pow(a, m) => {
                    let f = if m == 0 { zero } else { scratch[a].powi(m - 1).scale(m as f64) };
                    for k in 0..n {
                        out[k] = f.mul(g(a, k));
                    }
                }
                Op::Binary(b, a, c) => {
                    let (x, y) = (scratch[a], scratch[c]);
                    for k in 0..n {
                        let (da, dc) = (g(a, k), g(c, k));
                        out[k] = match b {
                            BinaryOp::Add => da.add(dc),
                            BinaryOp::Sub => da.sub(dc),
                            BinaryOp::Mul => da.mul(y).add(x.mul(dc)),
                            BinaryOp::Div => da.sub(v.mul(dc)).div(y).unwrap_or(Interval::ENTIRE),
                            BinaryOp::Min => {
                                if x.hi() < y.lo() {
                                    da
                                } else if y.hi() < x.lo() {
                                    dc
                                } else {
                                    da.hull(&dc)
                                }
                            }
                            BinaryOp::Max => {
                                if x.lo() > y.hi() {
                                    da
                                } else if y.lo() > x.hi() {
                                    dc
                                } else {
                                    da.hull(&dc)
                                }
                            }
                        };
                    }
                }
            }
        }
        grad.clear();
        let last = self.ops.len() - 1;
        grad.extend_from_slice(&d[last * n..last * n + n]);
        scratch.last().copied()
    }
}

fn narrow(nodes: &mut [Interval], i: usize, by: Option<Interval>) -> bool {
    match by {
        None => false,
        Some(b) => match nodes[i].intersect(&b) {
            Some(v) => {
                nodes[i] = v;
                true
            }
            None => false,
        },
    }
}

/// Values of `x` with `x·y ∈ c` for some `y` in `y`. `None` if there are none.
fn mul_inverse(c: Interval, y: Interval) -> Option<Interval> {
    if c.contains_zero() && y.contains_zero() {
        return Some(Interval::ENTIRE);
    }
    if y.lo() == 0.0 && y.hi() == 0.0 {
        return None;
    }
    c.div(y)
}

fn unary_inverse(op: UnaryOp, c: Interval, x: Interval) -> Option<Interval> {
    match op {
        UnaryOp::Neg => Some(c.neg()),
        UnaryOp::Sin | UnaryOp::Cos => {
            let range = Interval::new(-1.0, 1.0);
            c.intersect(&range).map(|_| x)
        }
        UnaryOp::Exp => c.ln(),
        UnaryOp::Sqrt => {
            let c = c.intersect(&Interval::new(0.0, f64::INFINITY))?;
            Some(c.sqr().intersect(&Interval::new(0.0, f64::INFINITY))?)
        }
    }
}

fn root_down(v: f64, n: u32) -> f64 {
    let r = v.powf(1.0 / n as f64);
    (r - r * 1e-14).next_down().max(0.0)
}

fn root_up(v: f64, n: u32) -> f64 {
    let r = v.powf(1.0 / n as f64);
    (r + r * 1e-14).next_up()
}

fn pow_inverse(n: u32, c: Interval, x: Interval) -> Option<Interval> {
    match n {
        0 => c.contains(1.0).then_some(x),
        1 => Some(c),
        _ if n.is_multiple_of(2) => {
            let c = c.intersect(&Interval::new(0.0, f64::INFINITY))?;
            let r = root_up(c.hi(), n);
            let outer = Interval::new(-r, r);
            if c.lo() > 0.0 {
                let l = root_down(c.lo(), n);
                if x.lo() > -l {
                    return Interval::new(l, r).intersect(&x);
                }
                if x.hi() < l {
                    return Interval::new(-r, -l).intersect(&x);
                }
            }
            Some(outer)
        }
        _ => {
            let signed = |v: f64, up: bool| {
                if v.is_infinite() {
                    v
                } else if v >= 0.0 {
                    if up { root_up(v, n) } else { root_down(v, n) }
                } else if up {
                    -root_down(-v, n)
                } else {
                    -root_up(-v, n)
                }
            };
            Some(Interval::new(signed(c.lo(), false), signed(c.hi(), true)))
        }
    }
}
