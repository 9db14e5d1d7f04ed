//! Hyperspectral confocal maps: cube storage, emitter hotspot detection,
//! per-emitter spectrum extraction and ZPL population statistics.

mod cube;
mod detect;
mod io;
mod stats;

pub use cube::HyperspectralCube;
pub use detect::{band_image, detect_emitters, smooth_periodic, DetectionConfig, EmitterRecord, MAD_TO_SIGMA};
pub use io::{read_cube, read_pixel_dir, read_qehc, write_pixel_dir, write_qehc, QehcHeader, QEHC_DTYPE, QEHC_FORMAT};
pub use stats::{zpl_distribution, zpl_distribution_from_values, Histogram, ZplDistribution, MIN_EMITTERS};

use crate::spectra::SpectrumError;

#[derive(Debug, thiserror::Error)]
pub enum SurveyError {
    #[error("band [{lo}, {hi}] nm is not inside the cube range [{min}, {max}] nm")]
    BandOutOfRange { lo: f64, hi: f64, min: f64, max: f64 },
    #[error("cube has no pixels or no wavelengths")]
    EmptyCube,
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {need} emitters, got {got}")]
    TooFewEmitters { need: usize, got: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}
