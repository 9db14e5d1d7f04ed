//! Finite-temperature Huang–Rhys vibronic model.
//!
//! The emission lineshape relative to the zero-phonon energy is
//! L(ΔE) = e^{−S}I₀(ΔE) + Σₙ e^{−S}Sⁿ/n!·(I₀ ⊗ Iₙ)(ΔE), where I₀ is the ZPL
//! profile and Iₙ the n-fold self-convolution of the one-phonon distribution
//! I₁ built from the phonon spectral function S(E) and Bose–Einstein factors.

mod bose;
mod distribution;
mod fit;
mod model;
mod profile;
mod psf;
mod series;

pub use bose::bose_einstein;
pub use distribution::{
    auto_n_max, lattice_step, n_phonon, one_phonon, one_phonon_with, poisson_weights, psb, psb_with, resolve_n_max,
    Distribution, NMax, OnePhonon, Psb, DEFAULT_OVERSAMPLE, DEFAULT_TAIL_TOLERANCE, N_MAX_CAP,
};
pub use fit::{fit_vibronic, fitted_model, initial_guess, FitConfig, InitialGuess, PhononComponent, VibronicFit, VibronicObjective};
pub use model::{forward_lineshape, forward_lineshape_with, ModelNumerics, VibronicModel, VibronicParams};
pub use profile::{ZplProfile, ZplShape};
pub use psf::{PhononSpectralFunction, DEFAULT_DELTA_E, DEFAULT_E_MAX};
pub use series::{fit_temperature_series, SeriesElement, SeriesReport, Z_THRESHOLD};

use crate::spectra::SpectrumError;

#[derive(Debug, thiserror::Error)]
pub enum VibronicError {
    #[error("phonon energy must be positive, got {0} eV")]
    NonPositiveEnergy(f64),
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),
    #[error("phonon spectral function is zero everywhere")]
    EmptySpectralFunction,
    #[error("Huang–Rhys factor must be ≥ 0, got {0}")]
    NegativeHuangRhys(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("phonon order must be ≥ 1, got {0}")]
    InvalidOrder(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fit did not converge after {} iterations ({})", .0.iterations, .0.termination)]
    NonConvergence(Box<VibronicFit>),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}
