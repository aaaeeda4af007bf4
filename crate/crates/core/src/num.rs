//! Scalar abstraction shared by the geometric and optimization modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar used throughout the layout engine: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tolerance for unit-length and orthogonality checks on direction vectors.
    const UNIT_TOLERANCE: f64;
    /// Denominator threshold below which a ray is treated as parallel to a slab.
    const PARALLEL_EPSILON: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const UNIT_TOLERANCE: f64 = 1e-5;
    const PARALLEL_EPSILON: f64 = 1e-7;
}

impl Real for f64 {
    const UNIT_TOLERANCE: f64 = 1e-9;
    const PARALLEL_EPSILON: f64 = 1e-9;
}
