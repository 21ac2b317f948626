//! Closed real intervals with outward rounding.
//!
//! Every primitive operation widens its result by one ulp on each side, so a
//! computed interval always contains the exact real result of the operation
//! applied to any points of its inputs. Transcendental functions are widened
//! by two ulps because the platform `libm` is only faithfully rounded.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

/// A non-empty closed interval `[lo, hi]`. Bounds may be infinite.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Builds `[lo, hi]`. Panics if the bounds are NaN or out of order.
    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(
            !lo.is_nan() && !hi.is_nan() && lo <= hi,
            "invalid interval [{lo}, {hi}]"
        );
        Interval { lo, hi }
    }

    /// Builds `[lo, hi]`, or `None` if the bounds do not describe a non-empty interval.
    pub fn try_new(lo: f64, hi: f64) -> Option<Interval> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            None
        } else {
            Some(Interval { lo, hi })
        }
    }

    pub fn point(x: f64) -> Interval {
        Interval::new(x, x)
    }

    /// Rounds `[lo, hi]` outward by one ulp on each side.
    fn outward(lo: f64, hi: f64) -> Interval {
        Interval::new(down(lo), up(hi))
    }

    fn outward2(lo: f64, hi: f64) -> Interval {
        Interval::new(down(down(lo)), up(up(hi)))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY {
            0.0
        } else if self.lo == f64::NEG_INFINITY {
            self.hi.min(0.0) - 1.0
        } else if self.hi == f64::INFINITY {
            self.lo.max(0.0) + 1.0
        } else {
            let m = 0.5 * self.lo + 0.5 * self.hi;
            m.clamp(self.lo, self.hi)
        }
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Widens both bounds by `amount` (absolute).
    pub fn inflate(&self, amount: f64) -> Interval {
        Interval::outward(self.lo - amount, self.hi + amount)
    }

    /// Splits at the midpoint.
    pub fn bisect(&self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::outward(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Interval) -> Interval {
        Interval::outward(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(self, o: Interval) -> Interval {
        if self.is_zero() || o.is_zero() {
            return Interval::point(0.0);
        }
        let cands = [
            mul0(self.lo, o.lo),
            mul0(self.lo, o.hi),
            mul0(self.hi, o.lo),
            mul0(self.hi, o.hi),
        ];
        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::outward(lo, hi)
    }

    fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    /// Interval division. A divisor of exactly `[0, 0]` has no defined
    /// quotient and yields `None`; any other divisor containing zero yields
    /// the whole real line.
    pub fn div(self, o: Interval) -> Option<Interval> {
        if o.is_zero() {
            return None;
        }
        if o.contains_zero() {
            if o.lo == 0.0 {
                return Some(self.div_nonneg_zero_lo(o.hi));
            }
            if o.hi == 0.0 {
                return Some(self.div_nonneg_zero_lo(-o.lo).neg());
            }
            return Some(Interval::ENTIRE);
        }
        let cands = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Interval::outward(lo, hi))
    }

    /// `self / [0+, d]` for `d > 0`.
    fn div_nonneg_zero_lo(self, d: f64) -> Interval {
        if self.lo >= 0.0 {
            if self.lo == 0.0 {
                Interval::new(0.0, f64::INFINITY)
            } else {
                Interval::new(down(self.lo / d), f64::INFINITY)
            }
        } else if self.hi <= 0.0 {
            if self.hi == 0.0 {
                Interval::new(f64::NEG_INFINITY, 0.0)
            } else {
                Interval::new(f64::NEG_INFINITY, up(self.hi / d))
            }
        } else {
            Interval::ENTIRE
        }
    }

    pub fn sqr(self) -> Interval {
        let (a, b) = (self.lo.abs(), self.hi.abs());
        if self.contains_zero() {
            Interval::new(0.0, up(a.max(b) * a.max(b)))
        } else {
            let (m, n) = (a.min(b), a.max(b));
            Interval::outward(m * m, n * n).clamp_lo(0.0)
        }
    }

    fn clamp_lo(self, lo: f64) -> Interval {
        Interval {
            lo: self.lo.max(lo),
            hi: self.hi.max(lo),
        }
    }

    /// Integer power with exponent `n ≥ 0`.
    pub fn powi(self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => self,
            2 => self.sqr(),
            _ => {
                let p = |x: f64| x.powi(n as i32);
                if n % 2 == 1 {
                    // powi is not correctly rounded; widen by two ulps.
                    Interval::outward2(p(self.lo), p(self.hi))
                } else if self.contains_zero() {
                    let m = self.mag();
                    Interval::new(0.0, up(up(p(m))))
                } else {
                    let (a, b) = (self.lo.abs(), self.hi.abs());
                    Interval::outward2(p(a.min(b)), p(a.max(b))).clamp_lo(0.0)
                }
            }
        }
    }

    pub fn exp(self) -> Interval {
        Interval::outward2(self.lo.exp(), self.hi.exp()).clamp_lo(0.0)
    }

    /// Natural logarithm restricted to the positive part; `None` if the interval is entirely non-positive.
    pub fn ln(self) -> Option<Interval> {
        if self.hi <= 0.0 {
            return None;
        }
        let lo = if self.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.lo.ln()
        };
        Some(Interval::outward2(lo, self.hi.ln()))
    }

    /// Square root of the non-negative part; `None` if the interval is entirely negative.
    pub fn sqrt(self) -> Option<Interval> {
        if self.hi < 0.0 {
            return None;
        }
        let lo = self.lo.max(0.0);
        Some(Interval::outward(lo.sqrt(), self.hi.sqrt()).clamp_lo(0.0))
    }

    pub fn sin(self) -> Interval {
        // sin(x) = cos(x - pi/2)
        self.sub(Interval::point(FRAC_PI_2)).cos()
    }

    pub fn cos(self) -> Interval {
        if !self.is_finite() || self.width() >= 2.0 * PI {
            return Interval::new(-1.0, 1.0);
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        // Maxima at 2kπ, minima at (2k+1)π.
        let k_lo = (self.lo / PI).ceil();
        let k_hi = (self.hi / PI).floor();
        let mut k = k_lo;
        while k <= k_hi {
            if (k as i64).rem_euclid(2) == 0 {
                hi = 1.0;
            } else {
                lo = -1.0;
            }
            k += 1.0;
        }
        let r = Interval::outward2(lo, hi);
        Interval::new(r.lo.max(-1.0), r.hi.min(1.0))
    }

    pub fn min(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    pub fn max(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    /// Scales by a scalar with outward rounding.
    pub fn scale(self, s: f64) -> Interval {
        self.mul(Interval::point(s))
    }
}

/// Multiplication with the convention `0 · ∞ = 0`.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl From<[f64; 2]> for Interval {
    fn from(b: [f64; 2]) -> Interval {
        Interval::new(b[0], b[1])
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Interval {
        Interval::point(x)
    }
}
