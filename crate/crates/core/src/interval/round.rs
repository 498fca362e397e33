//! Directed rounding on top of round-to-nearest.
//!
//! Each kernel computes the nearest result and recovers the sign of the
//! rounding error with an error-free transformation (TwoSum for addition,
//! an FMA residual for products, quotients and square roots). The endpoint
//! is moved one representable value outward only when that error is
//! nonzero in the wrong direction. Below [`TINY`] the FMA residual itself can
//! be inexact, so those results are nudged unconditionally.

/// Magnitude under which residuals are no longer exact.
const TINY: f64 = 1.0e-290;

#[inline]
fn down_overflow(s: f64) -> f64 {
    if s == f64::INFINITY {
        f64::MAX
    } else {
        s
    }
}

#[inline]
fn up_overflow(s: f64) -> f64 {
    if s == f64::NEG_INFINITY {
        f64::MIN
    } else {
        s
    }
}

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !a.is_finite() || !b.is_finite() {
        return if s.is_nan() { f64::NEG_INFINITY } else { s };
    }
    if !s.is_finite() {
        return down_overflow(s);
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !a.is_finite() || !b.is_finite() {
        return if s.is_nan() { f64::INFINITY } else { s };
    }
    if !s.is_finite() {
        return up_overflow(s);
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if a == 0.0 || b == 0.0 {
        return if p.is_nan() { f64::NEG_INFINITY } else { 0.0 };
    }
    if !a.is_finite() || !b.is_finite() {
        return p;
    }
    if !p.is_finite() {
        return down_overflow(p);
    }
    if p.abs() < TINY {
        return p.next_down();
    }
    if a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if a == 0.0 || b == 0.0 {
        return if p.is_nan() { f64::INFINITY } else { 0.0 };
    }
    if !a.is_finite() || !b.is_finite() {
        return p;
    }
    if !p.is_finite() {
        return up_overflow(p);
    }
    if p.abs() < TINY {
        return p.next_up();
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Sign of `a/b - q` where `q` is the rounded quotient, or `None` when the
/// residual cannot be trusted.
#[inline]
fn div_err_sign(a: f64, b: f64, q: f64) -> Option<f64> {
    if !q.is_finite() || q.abs() < TINY || a.abs() < TINY || !b.is_finite() {
        return None;
    }
    let r = (-q).mul_add(b, a);
    Some(if r == 0.0 {
        0.0
    } else {
        r.signum() * b.signum()
    })
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if a == 0.0 && b != 0.0 {
        return 0.0;
    }
    match div_err_sign(a, b, q) {
        Some(e) if e >= 0.0 => q,
        Some(_) => q.next_down(),
        None if q.is_nan() => f64::NEG_INFINITY,
        None if q.is_infinite() => {
            if a.is_finite() {
                down_overflow(q)
            } else {
                q
            }
        }
        None if b.is_infinite() && a.is_finite() => 0.0f64.min(-q.abs()).min(q),
        None => q.next_down(),
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    -div_down(-a, b)
}

#[inline]
pub fn sqrt_down(x: f64) -> f64 {
    let s = x.sqrt();
    if x == 0.0 || x == f64::INFINITY {
        return s;
    }
    if x < TINY {
        return s.next_down().max(0.0);
    }
    if (-s).mul_add(s, x) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up(x: f64) -> f64 {
    let s = x.sqrt();
    if x == 0.0 || x == f64::INFINITY {
        return s;
    }
    if x < TINY {
        return s.next_up();
    }
    if (-s).mul_add(s, x) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Pads a value from a faithfully rounded library kernel by two ulps.
#[inline]
pub fn pad_down(v: f64) -> f64 {
    v.next_down().next_down()
}

#[inline]
pub fn pad_up(v: f64) -> f64 {
    v.next_up().next_up()
}
