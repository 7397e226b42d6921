//! Scalar abstraction shared by the spectral models.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the noise models are written against (`f32` or `f64`).
///
/// Detuning-scaling quantities reach `Δ⁵ ~ 1e51` in rad/s units, so anything
/// that touches the detuning planner should be instantiated with `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `(sin x, cos x)` with the quadrant reduced first, so that multiples of π/2
/// (as represented in `T`) give exact zeros and unit values.
pub fn quadrant_sin_cos<T: Real>(x: T) -> (T, T) {
    let k = (x / T::FRAC_PI_2()).round();
    let (s, c) = (x - k * T::FRAC_PI_2()).sin_cos();
    match k.to_i64().map(|k| k.rem_euclid(4)) {
        Some(0) => (s, c),
        Some(1) => (c, -s),
        Some(2) => (-s, -c),
        Some(3) => (-c, s),
        _ => x.sin_cos(),
    }
}

/// `2π·f`: ordinary frequency (Hz) to angular frequency (rad/s).
#[inline]
pub fn hz_to_angular<T: Real>(f: T) -> T {
    T::TAU() * f
}

/// `ω/2π`: angular frequency (rad/s) to ordinary frequency (Hz).
#[inline]
pub fn angular_to_hz<T: Real>(w: T) -> T {
    w / T::TAU()
}

/// Power ratio in decibels.
#[inline]
pub fn to_db<T: Real>(x: T) -> T {
    lit::<T>(10.0) * x.log10()
}

/// Decibels back to a power ratio.
#[inline]
pub fn from_db<T: Real>(db: T) -> T {
    lit::<T>(10.0).powf(db / lit(10.0))
}
