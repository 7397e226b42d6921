//! Quantum noise of a light-probed atomic spin oscillator: the detected
//! spectrum in shot-noise units, ponderomotive squeezing and the virtual
//! frequency shift it causes, detuning trade-offs against tensor noise,
//! Zeeman-resolved (MORS) population fits, a simplified projection onto a
//! gravitational-wave interferometer, and a fitting/CLI layer for measured
//! spectra.
//!
//! The models are generic over [`Real`] (`f32`/`f64`). The aliases at the
//! crate root fix the scalar to `f64`, which is what the fitting engine,
//! loaders and CLI use.

// Validation deliberately uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod detuning;
pub mod error;
pub mod fit;
pub mod gwd;
pub mod io;
pub mod mors;
pub mod optim;
pub mod scalar;
pub mod spectrum;
pub mod spin;
pub mod squeeze;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Spectrum = spectrum::Spectrum<f64>;
pub type OscillatorParams = spin::OscillatorParams<f64>;
pub type ProbeConfig = spin::ProbeConfig<f64>;
pub type TensorConfig = spin::TensorConfig<f64>;
pub type NoiseBudget = spin::NoiseBudget<f64>;
pub type SqueezeResult = squeeze::SqueezeResult<f64>;
pub type SearchDomain = squeeze::SearchDomain<f64>;
pub type EffectiveOscillator = squeeze::EffectiveOscillator<f64>;
pub type DetuningScaling = detuning::DetuningScaling<f64>;
pub type ZeemanPopulations = mors::ZeemanPopulations<f64>;
pub type ZeemanLadder = mors::ZeemanLadder<f64>;
pub type GwdConfig = gwd::GwdConfig<f64>;
