//! Closed real intervals, boxes over named unknowns and finite unions of boxes.
//!
//! Every arithmetic result is widened outward by a relative `1e-12` plus one
//! ulp on each side, so it encloses the exact real result of the operation on
//! any points of the operands. Division by an interval containing zero yields
//! the hull of the two-piece result, which is usually unbounded.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Relative outward widening applied after every operation.
pub const REL_INFLATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("non-integer power of an interval containing negative numbers: {base} ^ {exponent}")]
    Domain { base: Interval, exponent: Interval },
    #[error("boxes range over different unknowns")]
    Mismatch,
    #[error("unknown dimension `{0}`")]
    NoSuchDim(String),
}

/// A closed interval `[lo, hi]`; the empty interval is a distinguished value.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl From<Interval> for (f64, f64) {
    fn from(i: Interval) -> Self {
        (i.lo, i.hi)
    }
}

impl From<(f64, f64)> for Interval {
    fn from((lo, hi): (f64, f64)) -> Self {
        Interval::new(lo, hi)
    }
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        (x - REL_INFLATION * x.abs()).next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        (x + REL_INFLATION * x.abs()).next_up()
    } else {
        x
    }
}

/// Operations accepted by [`Interval::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Abs,
    Min,
    Max,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const NONNEG: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    /// Builds `[lo, hi]`; returns the empty interval when `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Interval {
        if lo <= hi {
            Interval { lo, hi }
        } else {
            Interval::EMPTY
        }
    }

    pub fn point(x: f64) -> Interval {
        Interval::new(x, x)
    }

    /// `[lo, hi]` widened outward by the standard inflation.
    pub fn inflated(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() {
            return Interval::ENTIRE;
        }
        Interval::new(down(lo), up(hi))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    /// A finite point inside the interval (the midpoint when bounded).
    pub fn mid(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let m = 0.5 * self.lo + 0.5 * self.hi;
                m.clamp(self.lo, self.hi)
            }
            (false, false) => 0.0,
            (true, false) => {
                if self.lo >= 0.0 {
                    (2.0 * self.lo).max(1.0)
                } else {
                    0.0
                }
            }
            (false, true) => {
                if self.hi <= 0.0 {
                    (2.0 * self.hi).min(-1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// `width / |mid|`, or the plain width when the midpoint is zero.
    pub fn relative_width(&self) -> f64 {
        let w = self.width();
        let m = self.mid().abs();
        if m > 0.0 && m.is_finite() {
            w / m
        } else {
            w
        }
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Splits at the midpoint.
    pub fn bisect(&self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval::new(self.lo, m), Interval::new(m, self.hi))
    }

    pub fn apply(op: IntervalOp, a: Interval, b: Option<Interval>) -> Result<Interval, IntervalError> {
        let b = b.unwrap_or(Interval::EMPTY);
        Ok(match op {
            IntervalOp::Add => a.add(&b),
            IntervalOp::Sub => a.sub(&b),
            IntervalOp::Mul => a.mul(&b),
            IntervalOp::Div => a.div(&b),
            IntervalOp::Pow => return a.pow(&b),
            IntervalOp::Neg => a.neg(),
            IntervalOp::Abs => a.abs(),
            IntervalOp::Min => a.min(&b),
            IntervalOp::Max => a.max(&b),
        })
    }

    pub fn add(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval::inflated(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval::inflated(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn neg(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(-self.hi, -self.lo)
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        // 0 * inf is taken as 0: the operands hold reals, not infinities.
        let p = |x: f64, y: f64| if x == 0.0 || y == 0.0 { 0.0 } else { x * y };
        let c = [p(self.lo, o.lo), p(self.lo, o.hi), p(self.hi, o.lo), p(self.hi, o.hi)];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::inflated(lo, hi)
    }

    /// Division; the hull of the extended result when the divisor contains zero.
    pub fn div(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        if !o.contains_zero() {
            return self.mul(&o.recip());
        }
        if o.lo == 0.0 && o.hi == 0.0 {
            return Interval::EMPTY;
        }
        if self.contains_zero() {
            return Interval::ENTIRE;
        }
        let (lo, hi) = if self.lo > 0.0 {
            if o.hi == 0.0 {
                (f64::NEG_INFINITY, self.lo / o.lo)
            } else if o.lo == 0.0 {
                (self.lo / o.hi, f64::INFINITY)
            } else {
                return Interval::ENTIRE;
            }
        } else if o.hi == 0.0 {
            (self.hi / o.lo, f64::INFINITY)
        } else if o.lo == 0.0 {
            (f64::NEG_INFINITY, self.hi / o.hi)
        } else {
            return Interval::ENTIRE;
        };
        Interval::inflated(lo, hi)
    }

    fn recip(&self) -> Interval {
        Interval::inflated(1.0 / self.hi, 1.0 / self.lo)
    }

    pub fn abs(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval::new(0.0, self.mag())
        }
    }

    pub fn min(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.min(o.lo), self.hi.min(o.hi))
    }

    pub fn max(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.max(o.lo), self.hi.max(o.hi))
    }

    /// Integer power.
    pub fn powi(&self, n: i32) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if n == 0 {
            return Interval::point(1.0);
        }
        if n < 0 {
            return Interval::point(1.0).div(&self.powi(-n));
        }
        let (a, b) = (self.lo.powi(n), self.hi.powi(n));
        if n % 2 == 1 || self.lo >= 0.0 {
            Interval::inflated(a, b)
        } else if self.hi <= 0.0 {
            Interval::inflated(b, a)
        } else {
            Interval::inflated(0.0, a.max(b))
        }
    }

    /// General power. Integer point exponents accept any base; otherwise the
    /// base must be non-negative.
    pub fn pow(&self, e: &Interval) -> Result<Interval, IntervalError> {
        if self.is_empty() || e.is_empty() {
            return Ok(Interval::EMPTY);
        }
        if let Some(n) = e.as_integer() {
            return Ok(self.powi(n));
        }
        if self.lo < 0.0 {
            return Err(IntervalError::Domain {
                base: *self,
                exponent: *e,
            });
        }
        Ok(self.pow_nonneg(e))
    }

    fn pow_nonneg(&self, e: &Interval) -> Interval {
        let f = |x: f64, y: f64| {
            if x == 0.0 {
                if y > 0.0 {
                    0.0
                } else if y == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                x.powf(y)
            }
        };
        let c = [f(self.lo, e.lo), f(self.lo, e.hi), f(self.hi, e.lo), f(self.hi, e.hi)];
        let mut lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if e.contains_zero() {
            lo = lo.min(1.0);
            hi = hi.max(1.0);
        }
        Interval::inflated(lo, hi)
    }

    /// Returns the exponent as an `i32` when the interval is an integral point.
    pub fn as_integer(&self) -> Option<i32> {
        if self.is_point() && self.lo.fract() == 0.0 && self.lo.abs() <= i32::MAX as f64 {
            Some(self.lo as i32)
        } else {
            None
        }
    }

    /// Real `n`-th root of a non-negative interval (the part below zero is dropped).
    pub fn root(&self, n: f64) -> Interval {
        let c = self.intersect(&Interval::NONNEG);
        if c.is_empty() {
            return Interval::EMPTY;
        }
        Interval::inflated(c.lo.powf(1.0 / n), c.hi.powf(1.0 / n))
    }

    /// Increasing Hill function `x^n / (x^n + theta^n)`, taken as 0 for `x <= 0`.
    pub fn sig_plus(&self, theta: &Interval, slope: &Interval) -> Interval {
        if self.is_empty() || theta.is_empty() || slope.is_empty() {
            return Interval::EMPTY;
        }
        if theta.lo <= 0.0 || slope.lo <= 0.0 {
            return Interval::new(0.0, 1.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in [slope.lo, slope.hi] {
            lo = lo.min(sig_plus(self.lo, theta.hi, n));
            hi = hi.max(sig_plus(self.hi, theta.lo, n));
        }
        Interval::inflated(lo, hi).intersect(&Interval::new(0.0, 1.0))
    }
}

/// Point Hill function used by both evaluators.
pub fn sig_plus(x: f64, theta: f64, n: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let r = (theta / x).powf(n);
    1.0 / (1.0 + r)
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{:e}, {:e}]", self.lo, self.hi)
        }
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::add(&self, &rhs)
    }
}

impl std::ops::Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::sub(&self, &rhs)
    }
}

impl std::ops::Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        Interval::mul(&self, &rhs)
    }
}

impl std::ops::Div for Interval {
    type Output = Interval;
    fn div(self, rhs: Interval) -> Interval {
        Interval::div(&self, &rhs)
    }
}

impl std::ops::Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::neg(&self)
    }
}

/// Cartesian product of intervals over an ordered set of named unknowns.
#[derive(Clone, PartialEq)]
pub struct IntervalBox {
    names: Arc<[String]>,
    dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(names: Arc<[String]>, dims: Vec<Interval>) -> IntervalBox {
        assert_eq!(names.len(), dims.len(), "one interval per unknown");
        IntervalBox { names, dims }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, Interval)>) -> IntervalBox {
        let (names, dims): (Vec<String>, Vec<Interval>) =
            pairs.into_iter().map(|(n, i)| (n.into(), i)).unzip();
        IntervalBox::new(names.into(), dims)
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn dims_mut(&mut self) -> &mut [Interval] {
        &mut self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().any(Interval::is_empty)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.index_of(name).map(|i| self.dims[i])
    }

    pub fn set(&mut self, name: &str, value: Interval) -> Result<(), IntervalError> {
        let i = self
            .index_of(name)
            .ok_or_else(|| IntervalError::NoSuchDim(name.to_string()))?;
        self.dims[i] = value;
        Ok(())
    }

    pub fn same_unknowns(&self, other: &IntervalBox) -> bool {
        Arc::ptr_eq(&self.names, &other.names) || self.names == other.names
    }

    fn check(&self, other: &IntervalBox) -> Result<(), IntervalError> {
        if self.same_unknowns(other) {
            Ok(())
        } else {
            Err(IntervalError::Mismatch)
        }
    }

    pub fn intersect(&self, other: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        self.check(other)?;
        let dims = self.dims.iter().zip(&other.dims).map(|(a, b)| a.intersect(b)).collect();
        Ok(IntervalBox::new(self.names.clone(), dims))
    }

    pub fn hull(&self, other: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        self.check(other)?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        let dims = self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect();
        Ok(IntervalBox::new(self.names.clone(), dims))
    }

    pub fn is_subset(&self, other: &IntervalBox) -> bool {
        self.is_empty() || self.dims.iter().zip(&other.dims).all(|(a, b)| a.is_subset(b))
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.dims.iter().zip(x).all(|(d, v)| d.contains(*v))
    }

    /// Plain Lebesgue volume (0 for an empty box).
    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.dims.iter().map(Interval::width).product()
    }

    /// Dimension with the largest relative width; ties go to the first declared.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        let mut best_w = f64::NEG_INFINITY;
        for (i, d) in self.dims.iter().enumerate() {
            let w = d.relative_width();
            if w > best_w {
                best = i;
                best_w = w;
            }
        }
        best
    }

    /// Bisects `dim` (default: [`IntervalBox::widest_dim`]).
    pub fn split(&self, dim: Option<usize>) -> (IntervalBox, IntervalBox) {
        let d = dim.unwrap_or_else(|| self.widest_dim());
        let (a, b) = self.dims[d].bisect();
        let mut left = self.clone();
        let mut right = self.clone();
        left.dims[d] = a;
        right.dims[d] = b;
        (left, right)
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.names.iter().zip(&self.dims)).finish()
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, d) in self.names.iter().zip(&self.dims) {
            writeln!(f, "{n:>16} in {d}")?;
        }
        Ok(())
    }
}

/// A finite union of boxes over the same unknowns; overlaps are allowed.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BoxUnion {
    boxes: Vec<IntervalBox>,
}

impl BoxUnion {
    pub fn new(boxes: Vec<IntervalBox>) -> Result<BoxUnion, IntervalError> {
        if let Some(first) = boxes.first() {
            if boxes.iter().any(|b| !b.same_unknowns(first)) {
                return Err(IntervalError::Mismatch);
            }
        }
        Ok(BoxUnion {
            boxes: boxes.into_iter().filter(|b| !b.is_empty()).collect(),
        })
    }

    pub fn single(b: IntervalBox) -> BoxUnion {
        BoxUnion::new(vec![b]).expect("one box always matches itself")
    }

    pub fn boxes(&self) -> &[IntervalBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Sum of box volumes (overlaps counted twice).
    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(IntervalBox::volume).sum()
    }

    pub fn hull(&self) -> Option<IntervalBox> {
        let mut it = self.boxes.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, b| acc.hull(b).expect("same unknowns")))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains_point(x))
    }

    pub fn into_boxes(self) -> Vec<IntervalBox> {
        self.boxes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    fn close(a: Interval, lo: f64, hi: f64) {
        assert_relative_eq!(a.lo(), lo, max_relative = 1e-10, epsilon = 1e-300);
        assert_relative_eq!(a.hi(), hi, max_relative = 1e-10, epsilon = 1e-300);
    }

    #[test]
    fn endpoint_arithmetic() {
        close(iv(1.0, 2.0) + iv(3.0, 4.0), 4.0, 6.0);
        close(iv(-1.0, 2.0) * iv(3.0, 4.0), -4.0, 8.0);
        close(iv(1.0, 2.0) - iv(3.0, 4.0), -3.0, -1.0);
        close(iv(1.0, 2.0) / iv(4.0, 8.0), 0.125, 0.5);
    }

    #[test]
    fn division_through_zero_is_unbounded() {
        let q = iv(1.0, 1.0) / iv(-1.0, 1.0);
        assert_eq!(q, Interval::ENTIRE);
        let half = iv(1.0, 2.0) / iv(0.0, 4.0);
        assert_relative_eq!(half.lo(), 0.25, max_relative = 1e-10);
        assert_eq!(half.hi(), f64::INFINITY);
        assert!((iv(1.0, 2.0) / iv(0.0, 0.0)).is_empty());
    }

    #[test]
    fn empty_propagates() {
        assert!((Interval::EMPTY + iv(0.0, 1.0)).is_empty());
        assert!(Interval::EMPTY.abs().is_empty());
        assert!(iv(2.0, 1.0).is_empty());
        assert!(Interval::new(f64::NAN, 1.0).is_empty());
    }

    #[test]
    fn powers() {
        close(iv(-2.0, 3.0).powi(2), 0.0, 9.0);
        close(iv(-2.0, -1.0).powi(3), -8.0, -1.0);
        close(iv(4.0, 9.0).pow(&Interval::point(0.5)).unwrap(), 2.0, 3.0);
        assert!(iv(-1.0, 4.0).pow(&Interval::point(0.5)).is_err());
        close(iv(2.0, 4.0).powi(-1), 0.25, 0.5);
    }

    #[test]
    fn hill_function_is_monotone() {
        let s = iv(1.0, 2.0).sig_plus(&iv(1.0, 1.0), &Interval::point(4.0));
        assert_relative_eq!(s.lo(), 0.5, max_relative = 1e-9);
        assert_relative_eq!(s.hi(), 16.0 / 17.0, max_relative = 1e-9);
        assert_eq!(sig_plus(-1.0, 1.0, 4.0), 0.0);
    }

    #[test]
    fn box_intersection_and_split() {
        let a = IntervalBox::from_pairs([("x", iv(0.0, 2.0))]);
        let b = IntervalBox::new(a.names().clone(), vec![iv(1.0, 3.0)]);
        assert_eq!(a.intersect(&b).unwrap().dims(), &[iv(1.0, 2.0)]);
        let c = IntervalBox::new(a.names().clone(), vec![iv(2.5, 3.0)]);
        assert!(a.intersect(&c).unwrap().is_empty());

        let xy = IntervalBox::from_pairs([("x", iv(0.0, 4.0)), ("y", iv(0.0, 1.0))]);
        let (l, r) = xy.split(None);
        assert_eq!(l.dims(), &[iv(0.0, 2.0), iv(0.0, 1.0)]);
        assert_eq!(r.dims(), &[iv(2.0, 4.0), iv(0.0, 1.0)]);
        assert_eq!(l.hull(&r).unwrap(), xy);
    }

    #[test]
    fn mismatched_boxes_are_rejected() {
        let a = IntervalBox::from_pairs([("x", iv(0.0, 1.0))]);
        let b = IntervalBox::from_pairs([("y", iv(0.0, 1.0))]);
        assert_eq!(a.intersect(&b), Err(IntervalError::Mismatch));
        assert!(BoxUnion::new(vec![a, b]).is_err());
    }

    #[test]
    fn split_prefers_relative_width() {
        // y is narrower in absolute terms but wider relative to its magnitude
        let b = IntervalBox::from_pairs([("x", iv(100.0, 110.0)), ("y", iv(1e-6, 1e-5))]);
        assert_eq!(b.widest_dim(), 1);
    }
}
