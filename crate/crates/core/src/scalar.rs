//! Scalar abstraction shared by the numerical modules.
//!
//! Everything that evaluates `H`, Green functions, Perron roots or front
//! geometry is written against [`Real`], so the same code runs in `f32` and
//! `f64`. Tolerances that only make sense in double precision are passed in
//! by the caller rather than hard-coded.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, panicking only if the target cannot
    /// represent any finite value (never for `f32`/`f64`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
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
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub(crate) fn dot_lattice<T: Real>(a: &[T], y: &[i64]) -> T {
    a.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&x, &k)| acc + x * T::from_i64_lossy(k))
}

/// Pairwise summation; the split points depend only on the length, so the
/// result is reproducible bit for bit.
pub(crate) fn pairwise_sum<V>(values: &[V]) -> V
where
    V: Copy + std::ops::Add<Output = V> + Default,
{
    match values.len() {
        0 => V::default(),
        1 => values[0],
        n if n <= 16 => values.iter().fold(V::default(), |acc, &v| acc + v),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
