//! Photophysics analysis toolkit for solid-state quantum emitters.
//!
//! The crate turns raw photoluminescence measurements into physical
//! parameters:
//!
//! - [`spectra`]: spectrum containers, detector calibration, wavelength to
//!   energy conversion and the E³-normalized lineshape.
//! - [`vibronic`]: the finite-temperature Huang–Rhys model (zero-phonon line
//!   plus multi-phonon sideband) and its weighted least-squares inversion.
//! - [`photophysics`]: scalar-model fitters for linewidths, power and
//!   temperature broadening, saturation, g²(τ) antibunching and lifetimes,
//!   plus the radiative-lifetime calculator.
//! - [`survey`]: hyperspectral confocal cubes, emitter detection and ZPL
//!   population statistics.
//! - [`synth`]: seeded forward generators used to validate every fitter.
//!
//! All analysis functions are pure; they take immutable inputs and can be
//! called from any number of threads.

pub mod constants;
pub mod lsq;
pub mod photophysics;
pub mod spectra;
pub mod survey;
pub mod synth;
pub mod table;
pub mod vibronic;

pub(crate) mod numeric;

pub use constants::PhysicalConstants;
