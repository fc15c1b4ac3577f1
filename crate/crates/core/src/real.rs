//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the physics is written against: `f32` or `f64`.
///
/// Tolerances quoted throughout the crate assume `f64`; `f32` works but only
/// to single-precision accuracy.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn from_i64_lossy(n: i64) -> Self {
        Self::from_i64(n).expect("i64 representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated (Kahan-Babuska) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for KahanSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Unevaluated sum `hi + lo` carrying roughly twice the working precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DoubleWord<T> {
    pub hi: T,
    pub lo: T,
}

#[inline]
fn two_sum<T: Real>(a: T, b: T) -> DoubleWord<T> {
    let s = a + b;
    let bb = s - a;
    DoubleWord { hi: s, lo: (a - (s - bb)) + (b - bb) }
}

#[inline]
fn quick_two_sum<T: Real>(a: T, b: T) -> DoubleWord<T> {
    let s = a + b;
    DoubleWord { hi: s, lo: b - (s - a) }
}

#[inline]
fn two_prod<T: Real>(a: T, b: T) -> DoubleWord<T> {
    let p = a * b;
    DoubleWord { hi: p, lo: a.mul_add(b, -p) }
}

impl<T: Real> DoubleWord<T> {
    pub fn new(x: T) -> Self {
        Self { hi: x, lo: T::zero() }
    }

    pub fn square(x: T) -> Self {
        two_prod(x, x)
    }

    pub fn value(self) -> T {
        self.hi + self.lo
    }

    pub fn add(self, o: Self) -> Self {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let u = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(u.hi, u.lo + t.lo)
    }

    pub fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul(self, o: Self) -> Self {
        let p = two_prod(self.hi, o.hi);
        quick_two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }

    pub fn mul_scalar(self, x: T) -> Self {
        let p = two_prod(self.hi, x);
        quick_two_sum(p.hi, p.lo + self.lo * x)
    }

    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul_scalar(q1).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul_scalar(q2).neg());
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Self::new(q3))
    }

    pub fn div_scalar(self, x: T) -> Self {
        self.div(Self::new(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_word_resolves_below_epsilon() {
        let third = DoubleWord::new(1.0f64).div_scalar(3.0);
        let back = third.mul_scalar(3.0).add(DoubleWord::new(-1.0));
        assert!(back.value().abs() < 1e-30);
        let tiny = DoubleWord::new(1.0f64).add(DoubleWord::new(1e-20)).add(DoubleWord::new(-1.0));
        assert!((tiny.value() - 1e-20).abs() < 1e-34);
        let sq = DoubleWord::square(1.0f64 + f64::EPSILON);
        assert_eq!(sq.lo, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::<f64>::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-12).abs() < 1e-20);
    }
}
