//! Interval arithmetic over probabilities.
//!
//! Everything in this module works on nonnegative quantities: probabilities,
//! likelihoods, and products of them. Bounds are rounded outward so a computed
//! interval always contains the exact real result.

mod rounding;
mod sort;

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rounding::{add_down, add_up, div_down, div_up, mul_down, mul_up, sub_down, sub_up};
pub use sort::{incremental_sort_cursor, IncrementalSort};

/// Slack allowed when checking that an interval vector can hold a distribution.
pub const COHERENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("invalid interval bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("negative bound in interval [{lo}, {hi}]")]
    NegativeBound { lo: f64, hi: f64 },
    #[error("interval vectors must have at least one entry")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("interval vector is not coherent (sum lo = {sum_lo}, sum hi = {sum_hi})")]
    Incoherent { sum_lo: f64, sum_hi: f64 },
    #[error("cannot normalize an all-zero vector (conflicting evidence)")]
    Degenerate,
}

/// Closed interval `[lo, hi]` of reals.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(IntervalError::InvalidBounds { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// Degenerate interval `[v, v]`.
    ///
    /// # Panics
    /// If `v` is NaN.
    pub fn point(v: f64) -> Self {
        assert!(!v.is_nan(), "NaN point interval");
        Interval { lo: v, hi: v }
    }

    // Internal constructor for bounds produced by directed rounding.
    pub(crate) fn from_bounds(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi: hi.max(lo) }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + (self.hi - self.lo) / 2.0
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_with_slack(&self, x: f64, slack: f64) -> bool {
        self.lo - slack <= x && x <= self.hi + slack
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Product of two nonnegative intervals.
    pub fn checked_mul(self, other: Interval) -> Result<Interval, IntervalError> {
        for iv in [self, other] {
            if iv.lo < 0.0 {
                return Err(IntervalError::NegativeBound { lo: iv.lo, hi: iv.hi });
            }
        }
        Ok(self.mul_nonneg(other))
    }

    #[inline]
    pub(crate) fn mul_nonneg(self, other: Interval) -> Interval {
        Interval::from_bounds(mul_down(self.lo, other.lo), mul_up(self.hi, other.hi))
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval::from_bounds(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "[{:.*}, {:.*}]", p, self.lo, p, self.hi),
            None => write!(f, "[{}, {}]", self.lo, self.hi),
        }
    }
}

/// One interval per state of a variable (or per joint configuration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalVector(Vec<Interval>);

impl IntervalVector {
    pub fn new(entries: Vec<Interval>) -> Result<Self, IntervalError> {
        if entries.is_empty() {
            return Err(IntervalError::Empty);
        }
        Ok(IntervalVector(entries))
    }

    pub(crate) fn from_entries(entries: Vec<Interval>) -> Self {
        debug_assert!(!entries.is_empty());
        IntervalVector(entries)
    }

    /// `n` copies of `[0, 1]`: nothing is known about the distribution.
    pub fn vacuous(n: usize) -> Result<Self, IntervalError> {
        if n == 0 {
            return Err(IntervalError::Empty);
        }
        Ok(IntervalVector(vec![Interval::UNIT; n]))
    }

    pub fn point(values: &[f64]) -> Result<Self, IntervalError> {
        if values.is_empty() {
            return Err(IntervalError::Empty);
        }
        values
            .iter()
            .map(|&v| Interval::new(v, v))
            .collect::<Result<Vec<_>, _>>()
            .map(IntervalVector)
    }

    /// Point distribution putting all mass on `state`.
    pub fn indicator(n: usize, state: usize) -> Self {
        assert!(state < n, "indicator state {state} out of range {n}");
        let mut v = vec![Interval::ZERO; n];
        v[state] = Interval::ONE;
        IntervalVector(v)
    }

    /// Uniform distribution, as a point when `1/n` is representable.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        let iv = Interval::from_bounds(div_down(1.0, n as f64), div_up(1.0, n as f64));
        IntervalVector(vec![iv; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Interval] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn into_entries(self) -> Vec<Interval> {
        self.0
    }

    pub fn sum_lo(&self) -> f64 {
        rounding::sum_down(self.0.iter().map(|iv| iv.lo))
    }

    pub fn sum_hi(&self) -> f64 {
        rounding::sum_up(self.0.iter().map(|iv| iv.hi))
    }

    /// Interval bounding the sum of the entries.
    pub fn total(&self) -> Interval {
        Interval::from_bounds(self.sum_lo(), self.sum_hi())
    }

    /// True when some exact distribution fits inside the vector.
    pub fn is_coherent(&self) -> bool {
        self.sum_lo() <= 1.0 + COHERENCE_TOLERANCE && self.sum_hi() >= 1.0 - COHERENCE_TOLERANCE
    }

    pub fn is_vacuous(&self) -> bool {
        self.0.iter().all(|iv| *iv == Interval::UNIT)
    }

    pub fn is_point(&self) -> bool {
        self.0.iter().all(Interval::is_point)
    }

    /// Largest entry width.
    pub fn width(&self) -> f64 {
        self.0.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.0.iter().map(Interval::midpoint).collect()
    }

    pub fn contains_point(&self, p: &[f64], slack: f64) -> bool {
        p.len() == self.len() && self.0.iter().zip(p).all(|(iv, &x)| iv.contains_with_slack(x, slack))
    }

    pub fn is_subset_of(&self, other: &IntervalVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.is_subset_of(b))
    }

    /// Entrywise intersection; `None` when some pair of entries is disjoint.
    pub fn intersect(&self, other: &IntervalVector) -> Option<IntervalVector> {
        if self.len() != other.len() {
            return None;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(IntervalVector)
    }

    /// Entrywise product of nonnegative vectors.
    pub fn hadamard(&self, other: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        if self.len() != other.len() {
            return Err(IntervalError::LengthMismatch(self.len(), other.len()));
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_mul(*b))
            .collect::<Result<Vec<_>, _>>()
            .map(IntervalVector)
    }

    /// Normalizes each position against the extreme values of the others:
    /// `lo_i / (lo_i + sum_{j != i} hi_j)` and `hi_i / (hi_i + sum_{j != i} lo_j)`.
    ///
    /// The result contains `p / sum(p)` for every nonzero point selection `p`
    /// from `self`, and is always coherent.
    pub fn normalize(&self) -> Result<IntervalVector, IntervalError> {
        if self.0.iter().any(|iv| iv.lo < 0.0) {
            let bad = self.0.iter().find(|iv| iv.lo < 0.0).unwrap();
            return Err(IntervalError::NegativeBound { lo: bad.lo, hi: bad.hi });
        }
        if self.0.iter().all(|iv| iv.hi == 0.0) {
            return Err(IntervalError::Degenerate);
        }
        let total_lo = self.sum_lo();
        let total_hi = self.sum_hi();
        let out = self
            .0
            .iter()
            .map(|iv| {
                let others_hi = sub_up(total_hi, iv.hi).max(0.0);
                let others_lo = sub_down(total_lo, iv.lo).max(0.0);
                let den_lo = add_up(iv.lo, others_hi);
                let lo = if den_lo > 0.0 {
                    div_down(iv.lo, den_lo)
                } else if iv.hi > 0.0 {
                    // Every other entry is exactly zero: all mass sits here.
                    1.0
                } else {
                    0.0
                };
                let den_hi = add_down(iv.hi, others_lo);
                let hi = if den_hi > 0.0 { div_up(iv.hi, den_hi) } else { 0.0 };
                let lo = lo.clamp(0.0, 1.0);
                let hi = hi.clamp(0.0, 1.0);
                Interval { lo, hi: hi.max(lo) }
            })
            .collect();
        Ok(IntervalVector(out))
    }
}

impl std::ops::Index<usize> for IntervalVector {
    type Output = Interval;

    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a IntervalVector {
    type Item = &'a Interval;
    type IntoIter = std::slice::Iter<'a, Interval>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for IntervalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, iv) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            fmt::Display::fmt(iv, f)?;
        }
        write!(f, ")")
    }
}

/// `[0, 1]` vector of length `n`.
pub fn vacuous(n: usize) -> Result<IntervalVector, IntervalError> {
    IntervalVector::vacuous(n)
}

/// Tight bounds on `sum_i a_i * b_i` where `b` ranges over distributions
/// inside the box `b`.
///
/// The lower bound starts every `b_i` at its lower end and hands the
/// remaining mass to the entries with the smallest `a_i.lo` first; the upper
/// bound does the same with the largest `a_i.hi` first.
pub fn ar_dot(a: &IntervalVector, b: &IntervalVector) -> Result<Interval, IntervalError> {
    ar_dot_slices(a.entries(), b.entries())
}

pub(crate) fn ar_dot_slices(a: &[Interval], b: &[Interval]) -> Result<Interval, IntervalError> {
    if a.len() != b.len() {
        return Err(IntervalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(IntervalError::Empty);
    }
    if let Some(bad) = a.iter().chain(b).find(|iv| iv.lo < 0.0) {
        return Err(IntervalError::NegativeBound { lo: bad.lo, hi: bad.hi });
    }
    let sum_lo_up = rounding::sum_up(b.iter().map(|iv| iv.lo));
    let sum_lo_down = rounding::sum_down(b.iter().map(|iv| iv.lo));
    let sum_hi = rounding::sum_up(b.iter().map(|iv| iv.hi));
    if sum_lo_down > 1.0 + COHERENCE_TOLERANCE || sum_hi < 1.0 - COHERENCE_TOLERANCE {
        return Err(IntervalError::Incoherent { sum_lo: sum_lo_down, sum_hi });
    }

    // Single entry: b must be exactly 1.
    if a.len() == 1 {
        return Ok(a[0]);
    }

    let lower = {
        let mut weight: Vec<f64> = b.iter().map(|iv| iv.lo).collect();
        let mut remaining = sub_down(1.0, sum_lo_up).max(0.0);
        if remaining > 0.0 {
            let keys: Vec<f64> = a.iter().map(|iv| iv.lo).collect();
            for i in IncrementalSort::new(&keys) {
                let room = sub_up(b[i].hi, b[i].lo);
                let inc = room.min(remaining);
                weight[i] = add_down(b[i].lo, inc);
                remaining = sub_down(remaining, inc).max(0.0);
                if remaining == 0.0 {
                    break;
                }
            }
        }
        rounding::sum_down(a.iter().zip(&weight).map(|(x, &w)| mul_down(x.lo, w)))
    };

    let upper = {
        let mut weight: Vec<f64> = b.iter().map(|iv| iv.lo).collect();
        let mut remaining = sub_up(1.0, sum_lo_down).max(0.0);
        if remaining > 0.0 {
            let keys: Vec<f64> = a.iter().map(|iv| -iv.hi).collect();
            for i in IncrementalSort::new(&keys) {
                let room = sub_up(b[i].hi, b[i].lo);
                let inc = room.min(remaining);
                weight[i] = add_up(b[i].lo, inc);
                remaining = sub_up(remaining, inc).max(0.0);
                if remaining == 0.0 {
                    break;
                }
            }
        }
        rounding::sum_up(a.iter().zip(&weight).map(|(x, &w)| mul_up(x.hi, w)))
    };

    Ok(Interval::from_bounds(lower.max(0.0), upper.max(lower.max(0.0))))
}

#[cfg(test)]
mod tests;
