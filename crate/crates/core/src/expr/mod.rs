//! Terms and quantifier-free formulas over real variables.
//!
//! Terms are built from constants, variables, and a fixed set of functions
//! (`+ - * / neg ^ sin cos exp sqrt min max`). Formulas are conjunctions and
//! disjunctions of comparisons between terms. The textual form of both is an
//! s-expression, e.g. `(+ (* v t) x0)` or `(and (>= x 0) (<= x 3))`.

mod interval;

pub use interval::Interval;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("term is undefined on the whole box")]
    EmptyResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Min => "min",
            BinaryOp::Max => "max",
        }
    }
}

/// A real-valued term.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Const(f64),
    Var(String),
    Unary(UnaryOp, Box<Term>),
    Binary(BinaryOp, Box<Term>, Box<Term>),
    /// Integer power `t^n`, `n ≥ 0`.
    Pow(Box<Term>, u32),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(c: f64) -> Term {
        Term::Const(c)
    }

    pub fn unary(op: UnaryOp, t: Term) -> Term {
        Term::Unary(op, Box::new(t))
    }

    pub fn binary(op: BinaryOp, a: Term, b: Term) -> Term {
        Term::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn pow(self, n: u32) -> Term {
        Term::Pow(Box::new(self), n)
    }

    pub fn sin(self) -> Term {
        Term::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Term {
        Term::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Term {
        Term::unary(UnaryOp::Exp, self)
    }

    pub fn sqrt(self) -> Term {
        Term::unary(UnaryOp::Sqrt, self)
    }

    pub fn min(self, o: Term) -> Term {
        Term::binary(BinaryOp::Min, self, o)
    }

    pub fn max(self, o: Term) -> Term {
        Term::binary(BinaryOp::Max, self, o)
    }

    pub fn ge(self, o: Term) -> Constraint {
        Constraint::new(self, Rel::Ge, o)
    }

    pub fn gt(self, o: Term) -> Constraint {
        Constraint::new(self, Rel::Gt, o)
    }

    pub fn le(self, o: Term) -> Constraint {
        Constraint::new(self, Rel::Le, o)
    }

    pub fn lt(self, o: Term) -> Constraint {
        Constraint::new(self, Rel::Lt, o)
    }

    pub fn eq(self, o: Term) -> Constraint {
        Constraint::new(self, Rel::Eq, o)
    }

    /// Visits every variable occurrence.
    pub fn for_each_var(&self, f: &mut impl FnMut(&str)) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => f(v),
            Term::Unary(_, a) | Term::Pow(a, _) => a.for_each_var(f),
            Term::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_var(&mut |v| {
            out.insert(v.to_string());
        });
        out
    }

    /// Substitutes every variable by the term returned from `f`.
    pub fn substitute(&self, f: &impl Fn(&str) -> Term) -> Term {
        match self {
            Term::Const(c) => Term::Const(*c),
            Term::Var(v) => f(v),
            Term::Unary(op, a) => Term::unary(*op, a.substitute(f)),
            Term::Binary(op, a, b) => Term::binary(*op, a.substitute(f), b.substitute(f)),
            Term::Pow(a, n) => Term::Pow(Box::new(a.substitute(f)), *n),
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Term {
        self.substitute(&|v| Term::Var(f(v)))
    }

    /// Exact floating-point evaluation at a point.
    pub fn eval_point(&self, env: &(impl Valuation<f64> + ?Sized)) -> Result<f64, ExprError> {
        let v = match self {
            Term::Const(c) => *c,
            Term::Var(name) => env
                .lookup(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.clone()))?,
            Term::Unary(op, a) => {
                let x = a.eval_point(env)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::DomainError(format!("sqrt of {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
            Term::Binary(op, a, b) => {
                let (x, y) = (a.eval_point(env)?, b.eval_point(env)?);
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::DomainError(format!("{x} / 0")));
                        }
                        x / y
                    }
                    BinaryOp::Min => x.min(y),
                    BinaryOp::Max => x.max(y),
                }
            }
            Term::Pow(a, n) => a.eval_point(env)?.powi(*n as i32),
        };
        if v.is_nan() {
            return Err(ExprError::DomainError(format!("`{self}` evaluates to NaN")));
        }
        Ok(v)
    }

    /// Outward-rounded interval enclosure of the term over a box.
    pub fn eval_interval(&self, env: &(impl Valuation<Interval> + ?Sized)) -> Result<Interval, ExprError> {
        Ok(match self {
            Term::Const(c) => Interval::point(*c),
            Term::Var(name) => env
                .lookup(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.clone()))?,
            Term::Unary(op, a) => {
                let x = a.eval_interval(env)?;
                match op {
                    UnaryOp::Neg => x.neg(),
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Sqrt => x.sqrt().ok_or(ExprError::EmptyResult)?,
                }
            }
            Term::Binary(op, a, b) => {
                let (x, y) = (a.eval_interval(env)?, b.eval_interval(env)?);
                match op {
                    BinaryOp::Add => x.add(y),
                    BinaryOp::Sub => x.sub(y),
                    BinaryOp::Mul => x.mul(y),
                    BinaryOp::Div => x.div(y).ok_or(ExprError::EmptyResult)?,
                    BinaryOp::Min => x.min(y),
                    BinaryOp::Max => x.max(y),
                }
            }
            Term::Pow(a, n) => a.eval_interval(env)?.powi(*n),
        })
    }
}

/// Lookup of variable values by name.
pub trait Valuation<T> {
    fn lookup(&self, name: &str) -> Option<T>;
}

impl<T: Copy> Valuation<T> for BTreeMap<String, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Valuation<T> for HashMap<String, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Valuation<T> for [(&str, T)] {
    fn lookup(&self, name: &str) -> Option<T> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<T: Copy, const N: usize> Valuation<T> for [(&str, T); N] {
    fn lookup(&self, name: &str) -> Option<T> {
        self.as_slice().lookup(name)
    }
}

impl<T, F: Fn(&str) -> Option<T>> Valuation<T> for F {
    fn lookup(&self, name: &str) -> Option<T> {
        self(name)
    }
}

/// Free-function form of [`Term::eval_point`].
pub fn eval_point(term: &Term, env: &(impl Valuation<f64> + ?Sized)) -> Result<f64, ExprError> {
    term.eval_point(env)
}

/// Free-function form of [`Term::eval_interval`].
pub fn eval_interval(term: &Term, env: &(impl Valuation<Interval> + ?Sized)) -> Result<Interval, ExprError> {
    term.eval_interval(env)
}

pub fn free_vars(formula: &Formula) -> BTreeSet<String> {
    formula.free_vars()
}

macro_rules! term_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl std::ops::$tr for Term {
            type Output = Term;
            fn $method(self, rhs: Term) -> Term {
                Term::binary($op, self, rhs)
            }
        }
        impl std::ops::$tr<f64> for Term {
            type Output = Term;
            fn $method(self, rhs: f64) -> Term {
                Term::binary($op, self, Term::Const(rhs))
            }
        }
        impl std::ops::$tr<Term> for f64 {
            type Output = Term;
            fn $method(self, rhs: Term) -> Term {
                Term::binary($op, Term::Const(self), rhs)
            }
        }
    };
}

term_binop!(Add, add, BinaryOp::Add);
term_binop!(Sub, sub, BinaryOp::Sub);
term_binop!(Mul, mul, BinaryOp::Mul);
term_binop!(Div, div, BinaryOp::Div);

impl std::ops::Neg for Term {
    type Output = Term;
    fn neg(self) -> Term {
        Term::unary(UnaryOp::Neg, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Gt,
    Ge,
    Eq,
    Le,
    Lt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Gt => ">",
            Rel::Ge => ">=",
            Rel::Eq => "=",
            Rel::Le => "<=",
            Rel::Lt => "<",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Rel> {
        Some(match s {
            ">" => Rel::Gt,
            ">=" => Rel::Ge,
            "=" => Rel::Eq,
            "<=" => Rel::Le,
            "<" => Rel::Lt,
            _ => return None,
        })
    }
}

/// `t ≥ 0` or `t > 0`, the canonical atom shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub term: Term,
    pub strict: bool,
}

/// An atomic comparison `lhs rel rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub lhs: Term,
    pub rel: Rel,
    pub rhs: Term,
}

impl Constraint {
    pub fn new(lhs: Term, rel: Rel, rhs: Term) -> Constraint {
        Constraint { lhs, rel, rhs }
    }

    /// `lhs - rhs`, the term whose sign the relation constrains.
    pub fn difference(&self) -> Term {
        match (&self.lhs, &self.rhs) {
            (l, Term::Const(c)) if *c == 0.0 => l.clone(),
            (l, r) => l.clone() - r.clone(),
        }
    }

    /// Rewrites into `t > 0` / `t ≥ 0` atoms; equality becomes two `≥` atoms.
    pub fn normalize(&self) -> Vec<Normalized> {
        let d = self.difference();
        match self.rel {
            Rel::Gt => vec![Normalized { term: d, strict: true }],
            Rel::Ge => vec![Normalized { term: d, strict: false }],
            Rel::Lt => vec![Normalized { term: -d, strict: true }],
            Rel::Le => vec![Normalized { term: -d, strict: false }],
            Rel::Eq => vec![
                Normalized { term: d.clone(), strict: false },
                Normalized { term: -d, strict: false },
            ],
        }
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(&str)) {
        self.lhs.for_each_var(f);
        self.rhs.for_each_var(f);
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Constraint {
        Constraint::new(self.lhs.rename(f), self.rel, self.rhs.rename(f))
    }

    /// Exact truth at a point.
    pub fn holds_at(&self, env: &(impl Valuation<f64> + ?Sized)) -> Result<bool, ExprError> {
        let (l, r) = (self.lhs.eval_point(env)?, self.rhs.eval_point(env)?);
        Ok(match self.rel {
            Rel::Gt => l > r,
            Rel::Ge => l >= r,
            Rel::Eq => l == r,
            Rel::Le => l <= r,
            Rel::Lt => l < r,
        })
    }

    /// Truth at a point with every normalized atom weakened to `t ≥ -δ`.
    pub fn holds_within(&self, env: &(impl Valuation<f64> + ?Sized), delta: f64) -> Result<bool, ExprError> {
        for n in self.normalize() {
            if n.term.eval_point(env)? < -delta {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A quantifier-free formula.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(Constraint),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::And(Vec::new())
    }

    pub fn ff() -> Formula {
        Formula::Or(Vec::new())
    }

    pub fn is_trivially_true(&self) -> bool {
        match self {
            Formula::And(fs) => fs.iter().all(Formula::is_trivially_true),
            _ => false,
        }
    }

    pub fn and(fs: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::And(fs.into_iter().collect())
    }

    pub fn or(fs: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::Or(fs.into_iter().collect())
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(&str)) {
        match self {
            Formula::Atom(c) => c.for_each_var(f),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| g.for_each_var(f)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_var(&mut |v| {
            out.insert(v.to_string());
        });
        out
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Formula {
        match self {
            Formula::Atom(c) => Formula::Atom(c.rename(f)),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.rename(f)).collect()),
        }
    }

    /// All atoms, in order, regardless of the connective structure.
    pub fn atoms(&self) -> Vec<&Constraint> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Constraint>) {
            match f {
                Formula::Atom(c) => out.push(c),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, out)),
            }
        }
        go(self, &mut out);
        out
    }

    /// Flattens nested conjunctions; `None` if a disjunction occurs anywhere.
    pub fn as_conjunction(&self) -> Option<Vec<&Constraint>> {
        match self {
            Formula::Atom(c) => Some(vec![c]),
            Formula::And(fs) => {
                let mut out = Vec::new();
                for g in fs {
                    out.extend(g.as_conjunction()?);
                }
                Some(out)
            }
            Formula::Or(_) => None,
        }
    }

    pub fn holds_within(&self, env: &(impl Valuation<f64> + ?Sized), delta: f64) -> Result<bool, ExprError> {
        Ok(match self {
            Formula::Atom(c) => c.holds_within(env, delta)?,
            Formula::And(fs) => {
                for g in fs {
                    if !g.holds_within(env, delta)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for g in fs {
                    if g.holds_within(env, delta)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }
}

impl From<Constraint> for Formula {
    fn from(c: Constraint) -> Formula {
        Formula::Atom(c)
    }
}

fn fmt_num(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_finite() && c == c.trunc() && c.abs() < 1e15 {
        write!(f, "{}", c as i64)
    } else {
        write!(f, "{c:?}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => fmt_num(f, *c),
            Term::Var(v) => write!(f, "{v}"),
            Term::Unary(op, a) => write!(f, "({} {a})", op.symbol()),
            Term::Binary(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
            Term::Pow(a, n) => write!(f, "(^ {a} {n})"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.rel.symbol(), self.lhs, self.rhs)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (head, fs) = match self {
            Formula::Atom(c) => return write!(f, "{c}"),
            Formula::And(fs) => ("and", fs),
            Formula::Or(fs) => ("or", fs),
        };
        write!(f, "({head}")?;
        for g in fs {
            write!(f, " {g}")?;
        }
        write!(f, ")")
    }
}
