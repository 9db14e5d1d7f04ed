//! Scalar-model fitters: peak linewidths and IRF correction, power and
//! temperature broadening, saturation, g²(τ) antibunching, excited-state
//! lifetimes, and the radiative-lifetime calculator.
//!
//! Positive parameters are fitted through their logarithm and the
//! antibunching depth through a logistic transform, so every fit is an
//! unconstrained least-squares problem. Reported 1σ uncertainties come from
//! the unscaled covariance (JᵀJ)⁻¹ of the weighted residuals, mapped to the
//! physical parameters by the delta method.

mod g2;
mod irf;
mod lifetime;
mod peak;
mod power;
mod radiative;
mod saturation;
mod temperature;

pub use g2::{fit_g2, g2_model, G2Fit, G2Options};
pub use irf::{add_irf, correct_irf, IrfMethod, DEFAULT_IRF_FWHM_EV};
pub use lifetime::{fit_lifetime, LifetimeFit};
pub use peak::{fit_peak, peak_profile, PeakFit, PeakShape, MIN_PEAK_SNR, SUSPECT_CHI2_REDUCED};
pub use power::{fit_power_broadening, power_broadening, PowerBroadeningFit, MIN_POWER_SPAN};
pub use radiative::{radiative_lifetime, radiative_prefactor};
pub use saturation::{fit_saturation, saturation_model, SaturationFit};
pub use temperature::{fit_temperature_broadening, temperature_broadening, TemperatureBroadeningFit};

use crate::lsq::{self, LmConfig, LmResult, Problem};
use crate::spectra::SpectrumError;

/// A fit result returned alongside a convergence failure.
#[derive(Debug, Clone)]
pub enum PartialFit {
    Peak(PeakFit),
    Power(PowerBroadeningFit),
    Temperature(TemperatureBroadeningFit),
    Saturation(SaturationFit),
    G2(G2Fit),
    Lifetime(LifetimeFit),
}

impl PartialFit {
    pub fn report_json(&self) -> serde_json::Value {
        match self {
            PartialFit::Peak(f) => f.report_json(),
            PartialFit::Power(f) => f.report_json(),
            PartialFit::Temperature(f) => f.report_json(),
            PartialFit::Saturation(f) => f.report_json(),
            PartialFit::G2(f) => f.report_json(),
            PartialFit::Lifetime(f) => f.report_json(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PhotophysicsError {
    #[error("no peak found: signal-to-noise {snr:.2} below {min}")]
    NoPeakFound { snr: f64, min: f64 },
    #[error("fit did not converge")]
    NonConvergence(Box<PartialFit>),
    #[error("raw width {raw} does not exceed the instrument response {irf}")]
    IrfExceedsRaw { raw: f64, irf: f64 },
    #[error("power values span a factor {ratio:.3}, need at least {need}")]
    InsufficientSpan { ratio: f64, need: f64 },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("width must be positive, got {0}")]
    NegativeWidthInput(f64),
    #[error("all intensities are zero")]
    AllZeroIntensity,
    #[error("histogram asymptote {asymptote:.4} deviates from 1 by more than 20%; enable normalization")]
    UnnormalizedHistogram { asymptote: f64 },
    #[error("input must be positive: {0}")]
    NonPositiveInput(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Goodness-of-fit summary shared by all scalar fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitStats {
    pub chi2: f64,
    pub dof: usize,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitStats {
    pub(crate) fn from_result(r: &LmResult, n_points: usize, n_params: usize) -> Self {
        let dof = n_points.saturating_sub(n_params).max(1);
        Self {
            chi2: r.cost,
            dof,
            chi2_reduced: r.cost / dof as f64,
            converged: r.converged(),
            iterations: r.iterations,
        }
    }

    pub(crate) fn exact(chi2: f64, n_points: usize, n_params: usize) -> Self {
        let dof = n_points.saturating_sub(n_params).max(1);
        Self { chi2, dof, chi2_reduced: chi2 / dof as f64, converged: true, iterations: 1 }
    }
}

/// 1/σ weights; non-positive σ falls back to the smallest positive σ (or 1).
pub(crate) fn weights(sigma: &[f64]) -> Vec<f64> {
    let floor = sigma.iter().cloned().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    sigma
        .iter()
        .map(|&s| {
            if s > 0.0 && s.is_finite() {
                1.0 / s
            } else if floor.is_finite() {
                1.0 / floor
            } else {
                1.0
            }
        })
        .collect()
}

/// Weighted residuals (f(p, xᵢ) − yᵢ)/σᵢ of a scalar curve.
pub(crate) struct CurveProblem<'a, F: Fn(&[f64], f64) -> f64> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub w: &'a [f64],
    pub n_params: usize,
    pub f: F,
}

impl<F: Fn(&[f64], f64) -> f64> Problem for CurveProblem<'_, F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .zip(self.y)
            .zip(self.w)
            .map(|((&x, &y), &w)| ((self.f)(p, x) - y) * w)
            .collect()
    }
}

pub(crate) fn run<P: Problem>(problem: &P, start: &[f64], n_points: usize) -> LmResult {
    let cfg = LmConfig { cost_floor: n_points as f64, ..LmConfig::default() };
    lsq::minimize(problem, start, &cfg)
}

/// Standard deviations of g(p) for a diagonal transform with derivatives `d`.
pub(crate) fn transformed_sigmas(r: &LmResult, d: &[f64]) -> Vec<f64> {
    d.iter().enumerate().map(|(k, dk)| (r.covariance[(k, k)].max(0.0)).sqrt() * dk.abs()).collect()
}

/// Ordinary weighted linear regression y = c0 + c1·x.
pub(crate) fn linear_regression(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sw += wi;
        sx += wi * xi;
        sy += wi * yi;
        sxx += wi * xi * xi;
        sxy += wi * xi * yi;
    }
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    let c1 = (sw * sxy - sx * sy) / det;
    let c0 = (sy - c1 * sx) / sw;
    Some((c0, c1))
}
