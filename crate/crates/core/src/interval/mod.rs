//! Closed floating-point intervals with outward rounding.

mod matrix;
pub mod round;
mod vector;

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use matrix::{mat_opnorm_upper, IMatrix};
pub use vector::{vec_norm_sup, IBox, IVector};

use round::*;

/// A closed interval `[lo, hi]` of reals with `lo <= hi`.
///
/// Endpoints may be infinite (the result of an unbounded operation) but
/// never NaN.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// The whole real line.
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Builds `[lo, hi]`.
    ///
    /// # Panics
    /// If `lo > hi` or either bound is NaN. Use [`Interval::try_new`] for
    /// untrusted input.
    #[inline]
    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo <= hi, "invalid interval bounds [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn try_new(lo: f64, hi: f64) -> Result<Interval> {
        if lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::InvalidBounds { lo, hi })
        }
    }

    /// Degenerate interval `[x, x]`.
    #[inline]
    pub fn point(x: f64) -> Interval {
        Interval::new(x, x)
    }

    /// Symmetric interval `[c - r, c + r]` with outward rounding.
    pub fn centered(c: f64, r: f64) -> Interval {
        let r = r.abs();
        Interval::new(sub_down(c, r), add_up(c, r))
    }

    /// Encloses the real number written in decimal notation.
    ///
    /// The nearest double is widened by one ulp on each side, so the
    /// result contains the exact decimal value whether or not it is
    /// representable.
    pub fn from_decimal(s: &str) -> Result<Interval> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::ParseDecimal(s.to_string()))?;
        if !x.is_finite() {
            return Err(Error::ParseDecimal(s.to_string()));
        }
        Ok(Interval::new(x.next_down(), x.next_up()))
    }

    /// An enclosure of π.
    pub fn pi() -> Interval {
        Interval::new(std::f64::consts::PI, std::f64::consts::PI.next_up())
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    /// Midpoint, finite whenever both bounds are finite.
    pub fn mid(self) -> f64 {
        if self.lo == f64::NEG_INFINITY {
            if self.hi == f64::INFINITY {
                0.0
            } else {
                f64::MIN
            }
        } else if self.hi == f64::INFINITY {
            f64::MAX
        } else {
            let m = 0.5 * self.lo + 0.5 * self.hi;
            m.clamp(self.lo, self.hi)
        }
    }

    /// Upper bound on the distance from [`Interval::mid`] to either end.
    pub fn rad(self) -> f64 {
        let m = self.mid();
        sub_up(m, self.lo).max(sub_up(self.hi, m))
    }

    /// Upper bound on `hi - lo`.
    pub fn width(self) -> f64 {
        sub_up(self.hi, self.lo)
    }

    /// Largest absolute value attained.
    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value attained.
    pub fn mig(self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn is_point(self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    /// `self ⊆ other`.
    pub fn subset(self, other: Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// `self` lies in the topological interior of `other`.
    pub fn interior_subset(self, other: Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn overlaps(self, other: Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Certainly positive.
    pub fn is_pos(self) -> bool {
        self.lo > 0.0
    }

    /// Certainly negative.
    pub fn is_neg(self) -> bool {
        self.hi < 0.0
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Intersection, or `None` when the intervals are disjoint.
    pub fn intersect(self, other: Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Halves at the midpoint.
    pub fn split(self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    /// `k` consecutive pieces covering `self`.
    pub fn subdivide(self, k: usize) -> Vec<Interval> {
        assert!(k >= 1, "subdivision count must be positive");
        let w = self.hi - self.lo;
        let cut = |i: usize| -> f64 {
            if i == 0 {
                self.lo
            } else if i == k {
                self.hi
            } else {
                (self.lo + w * (i as f64) / (k as f64)).clamp(self.lo, self.hi)
            }
        };
        (0..k).map(|i| Interval::new(cut(i), cut(i + 1))).collect()
    }

    /// Grows both ends outward by `r >= 0`.
    pub fn inflate(self, r: f64) -> Interval {
        Interval::new(sub_down(self.lo, r), add_up(self.hi, r))
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Interval {
        let r = r.abs();
        Interval::new(-r, r)
    }

    /// Division that refuses a divisor containing zero.
    pub fn checked_div(self, rhs: Interval) -> Result<Interval> {
        if rhs.contains_zero() {
            return Err(Error::DivisionByZeroInterval(rhs));
        }
        Ok(self.div_nonzero(rhs))
    }

    fn div_nonzero(self, rhs: Interval) -> Interval {
        let (a, b) = (self, rhs);
        let q = [(a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi)];
        let lo = q
            .iter()
            .map(|&(x, y)| div_down(x, y))
            .fold(f64::INFINITY, f64::min);
        let hi = q
            .iter()
            .map(|&(x, y)| div_up(x, y))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    pub fn recip(self) -> Result<Interval> {
        Interval::ONE.checked_div(self)
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval::new(0.0, self.mag())
        }
    }

    /// `x²`, tighter than `x * x` when the interval straddles zero.
    pub fn sqr(self) -> Interval {
        let a = self.abs();
        Interval::new(mul_down(a.lo, a.lo), mul_up(a.hi, a.hi))
    }

    pub fn sqrt(self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::DomainError {
                function: "sqrt",
                arg: self,
            });
        }
        Ok(Interval::new(sqrt_down(self.lo), sqrt_up(self.hi)))
    }

    pub fn exp(self) -> Interval {
        let lo = if self.lo == f64::NEG_INFINITY {
            0.0
        } else {
            pad_down(self.lo.exp()).max(0.0)
        };
        let hi = if self.hi == f64::INFINITY {
            f64::INFINITY
        } else {
            pad_up(self.hi.exp())
        };
        Interval::new(lo, hi)
    }

    pub fn sin(self) -> Interval {
        // sin attains 1 at π/2 + 2kπ and -1 at -π/2 + 2kπ.
        self.periodic_range(0.5, -0.5, f64::sin)
    }

    pub fn cos(self) -> Interval {
        // cos attains 1 at 2kπ and -1 at π + 2kπ.
        self.periodic_range(0.0, 1.0, f64::cos)
    }

    /// Range of a 2π-periodic unimodal function with maximum at `max_at·π`
    /// and minimum at `min_at·π` (mod 2π).
    fn periodic_range(self, max_at: f64, min_at: f64, f: fn(f64) -> f64) -> Interval {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.width() >= 7.0 {
            return Interval::new(-1.0, 1.0);
        }
        let two_pi = Interval::pi() * 2.0;
        let may_hit = |phase: f64| -> bool {
            let t = (self - Interval::pi() * phase).checked_div(two_pi);
            match t {
                Ok(t) => t.lo.ceil() <= t.hi.floor(),
                Err(_) => true,
            }
        };
        let fa = f(self.lo);
        let fb = f(self.hi);
        let hi = if may_hit(max_at) {
            1.0
        } else {
            pad_up(fa.max(fb)).min(1.0)
        };
        let lo = if may_hit(min_at) {
            -1.0
        } else {
            pad_down(fa.min(fb)).max(-1.0)
        };
        Interval::new(lo, hi)
    }

    /// Integer power; negative exponents require `0 ∉ self`.
    pub fn powi(self, n: i32) -> Result<Interval> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let n = n as u32;
        if n == 0 {
            return Ok(Interval::ONE);
        }
        let (dn_lo, up_lo) = pow_mag(self.lo.abs(), n);
        let (dn_hi, up_hi) = pow_mag(self.hi.abs(), n);
        Ok(if n % 2 == 1 {
            let lo = if self.lo < 0.0 { -up_lo } else { dn_lo };
            let hi = if self.hi < 0.0 { -dn_hi } else { up_hi };
            Interval::new(lo, hi)
        } else if self.lo >= 0.0 {
            Interval::new(dn_lo, up_hi)
        } else if self.hi <= 0.0 {
            Interval::new(dn_hi, up_lo)
        } else {
            Interval::new(0.0, up_lo.max(up_hi))
        })
    }
}

/// Directed bounds on `m^n` for `m >= 0`.
fn pow_mag(m: f64, n: u32) -> (f64, f64) {
    let (mut base_d, mut base_u) = (m, m);
    let (mut acc_d, mut acc_u) = (1.0, 1.0);
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc_d = mul_down(acc_d, base_d).max(0.0);
            acc_u = mul_up(acc_u, base_u);
        }
        e >>= 1;
        if e > 0 {
            base_d = mul_down(base_d, base_d).max(0.0);
            base_u = mul_up(base_u, base_u);
        }
    }
    (acc_d, acc_u)
}

impl Default for Interval {
    fn default() -> Self {
        Interval::ZERO
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = f.precision() {
            write!(f, "[{:.*e}, {:.*e}]", p, self.lo, p, self.hi)
        } else {
            write!(f, "[{:?}, {:?}]", self.lo, self.hi)
        }
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: sub_down(self.lo, rhs.hi),
            hi: sub_up(self.hi, rhs.lo),
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        let (a, b) = (self, rhs);
        if a.lo >= 0.0 && b.lo >= 0.0 {
            return Interval {
                lo: mul_down(a.lo, b.lo),
                hi: mul_up(a.hi, b.hi),
            };
        }
        let p = [(a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi)];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (x, y) in p {
            lo = lo.min(mul_down(x, y));
            hi = hi.max(mul_up(x, y));
        }
        Interval { lo, hi }
    }
}

/// Returns [`Interval::ENTIRE`] when the divisor contains zero; see
/// [`Interval::checked_div`] for the fallible form.
impl Div for Interval {
    type Output = Interval;
    fn div(self, rhs: Interval) -> Interval {
        if rhs.contains_zero() {
            Interval::ENTIRE
        } else {
            self.div_nonzero(rhs)
        }
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Interval {
            type Output = Interval;
            #[inline]
            fn $m(self, rhs: f64) -> Interval {
                $tr::$m(self, Interval::point(rhs))
            }
        }
        impl $tr<Interval> for f64 {
            type Output = Interval;
            #[inline]
            fn $m(self, rhs: Interval) -> Interval {
                $tr::$m(Interval::point(self), rhs)
            }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

impl AddAssign for Interval {
    fn add_assign(&mut self, rhs: Interval) {
        *self = *self + rhs;
    }
}

impl SubAssign for Interval {
    fn sub_assign(&mut self, rhs: Interval) {
        *self = *self - rhs;
    }
}

impl MulAssign for Interval {
    fn mul_assign(&mut self, rhs: Interval) {
        *self = *self * rhs;
    }
}

impl Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[f64; 2]>::deserialize(d)?;
        Interval::try_new(lo, hi).map_err(serde::de::Error::custom)
    }
}
