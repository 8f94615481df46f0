//! Directed rounding on top of round-to-nearest binary64.
//!
//! Each helper computes the nearest result and then uses an error-free
//! transformation to decide whether it has to step one ulp outward. Exact
//! results are returned unchanged, so point arithmetic stays point.

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
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
    if !s.is_finite() {
        return s;
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
    if !p.is_finite() {
        return p;
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
    if !p.is_finite() {
        return p;
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// `a / b` rounded toward -inf. Requires `b > 0`.
#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    debug_assert!(b > 0.0);
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    // a - q*b is exactly representable; its sign is the sign of the error.
    if (-q).mul_add(b, a) < 0.0 {
        q.next_down()
    } else {
        q
    }
}

/// `a / b` rounded toward +inf. Requires `b > 0`.
#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    debug_assert!(b > 0.0);
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if (-q).mul_add(b, a) > 0.0 {
        q.next_up()
    } else {
        q
    }
}

pub fn sum_down(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, add_down)
}

pub fn sum_up(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, add_up)
}
