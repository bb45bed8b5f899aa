//! Room average power response estimation from a loudspeaker's echo-path
//! self-response, room-compensation filter design, a rectangular-room
//! image-source simulator and a cross-validation harness.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

pub mod equalizer;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod num;
pub mod roomsim;
pub mod spectra;

pub use error::{Error, Result};
pub use num::Real;

pub type Impulse = spectra::ImpulseResponse<f64>;
pub type Spectrum = spectra::LogPowerSpectrum<f64>;
pub type Record = roomsim::DatasetRecord<f64>;
pub type TrainingSet = estimators::Dataset<f64>;
pub type Estimator = estimators::Model<f64>;
pub type Basis = estimators::PcaBasis<f64>;
pub type Target = equalizer::TargetCurve<f64>;
pub type Filter = equalizer::EqFilter<f64>;
pub type Surface = eval::ErrorSurface<f64>;

pub type Spectrum32 = spectra::LogPowerSpectrum<f32>;
pub type Estimator32 = estimators::Model<f32>;
