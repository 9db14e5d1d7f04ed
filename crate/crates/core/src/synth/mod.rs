//! Seeded forward generators used as oracles for every fitter.
//!
//! Generators evaluate model formulas of their own (the vibronic spectrum
//! uses the forward model, which is not part of any fitter) and attach the
//! ground truth as `true_<param>` metadata so round-trip harnesses can
//! compare against it.

mod cube;
mod noise;
mod rng;
mod scalar;
mod spectrum;

pub use cube::{gen_cube, CubeSpec, CubeTruth, EmitterTruth, SyntheticCube};
pub use noise::{NoiseKind, NoiseModel};
pub use rng::CounterRng;
pub use scalar::{gen_scalar_dataset, latin_hypercube, ScalarModel};
pub use spectrum::{gen_vibronic_spectrum, vibronic_wavelength_grid};

use crate::spectra::SpectrumError;
use crate::survey::SurveyError;
use crate::vibronic::VibronicError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("model {model} needs parameter '{name}'")]
    MissingParameter { model: &'static str, name: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Vibronic(#[from] VibronicError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Survey(#[from] SurveyError),
}
