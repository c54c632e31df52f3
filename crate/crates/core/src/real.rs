//! Scalar abstraction. Every numerical routine in this crate is generic over
//! a floating scalar so the same code runs at `f32` or `f64`; the crate root
//! exposes `f64` aliases for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating scalar the toolkit is generic over.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal must be representable")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar must widen to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::of_f64(v)
}

/// Neumaier compensated accumulator. Callers are responsible for feeding
/// terms in a fixed order when reproducibility matters.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<T: Real> {
    sum: T,
    comp: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_handles_cancellation() {
        let mut acc = CompensatedSum::<f64>::new();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
        }
        assert_eq!(acc.value(), 1.0 + 1e-15);
    }

    #[test]
    fn literals_convert_both_ways() {
        let x: f32 = real(0.25);
        assert_eq!(x, 0.25f32);
        assert_eq!(0.25f64.as_f64(), 0.25);
    }
}
