//! Independent fits across a temperature series and a test for temperature-independent S_HR.

use rayon::prelude::*;
use serde_json::json;

use super::fit::{fit_vibronic, FitConfig, VibronicFit};
use super::VibronicError;
use crate::spectra::Lineshape;

/// |z| above which a temperature point is considered inconsistent with the mean.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct SeriesElement {
    pub temperature: f64,
    /// Present when the fit converged.
    pub fit: Option<VibronicFit>,
    /// Failure description when it did not.
    pub error: Option<String>,
    /// (S_i − S̄)/σ_i for successful fits with σ_i > 0.
    pub z_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SeriesReport {
    pub elements: Vec<SeriesElement>,
    /// Inverse-variance weighted mean of S_HR over successful fits.
    pub s_hr_mean: f64,
    pub s_hr_mean_sigma: f64,
    /// True iff at least two fits succeeded and every |z| ≤ 3.
    pub temperature_independent: bool,
}

impl SeriesReport {
    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "s_hr_mean": self.s_hr_mean,
            "s_hr_mean_sigma": self.s_hr_mean_sigma,
            "temperature_independent": self.temperature_independent,
            "z_threshold": Z_THRESHOLD,
            "points": self.elements.iter().map(|e| json!({
                "temperature_k": e.temperature,
                "ok": e.fit.is_some(),
                "error": e.error,
                "s_hr": e.fit.as_ref().map(|f| f.params.s_hr),
                "s_hr_sigma": e.fit.as_ref().map(|f| f.s_hr_sigma),
                "z_score": e.z_score,
                "fit": e.fit.as_ref().map(|f| f.report_json()),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Fits every (lineshape, T) pair independently; results keep the input order.
pub fn fit_temperature_series(series: &[(Lineshape, f64)], config: &FitConfig) -> Result<SeriesReport, VibronicError> {
    if series.len() < 2 {
        return Err(VibronicError::DegenerateSeries(format!(
            "need at least two temperatures, got {}",
            series.len()
        )));
    }
    let fits: Vec<Result<VibronicFit, VibronicError>> =
        series.par_iter().map(|(ls, t)| fit_vibronic(ls, config, *t)).collect();
    let mut elements: Vec<SeriesElement> = series
        .iter()
        .zip(fits)
        .map(|((_, t), r)| match r {
            Ok(fit) => SeriesElement { temperature: *t, fit: Some(fit), error: None, z_score: None },
            Err(e) => SeriesElement { temperature: *t, fit: None, error: Some(e.to_string()), z_score: None },
        })
        .collect();

    let usable: Vec<(f64, f64)> = elements
        .iter()
        .filter_map(|e| e.fit.as_ref())
        .filter(|f| f.s_hr_sigma > 0.0 && f.s_hr_sigma.is_finite())
        .map(|f| (f.params.s_hr, f.s_hr_sigma))
        .collect();
    let wsum: f64 = usable.iter().map(|(_, s)| 1.0 / (s * s)).sum();
    let (mean, mean_sigma) = if wsum > 0.0 {
        (usable.iter().map(|(v, s)| v / (s * s)).sum::<f64>() / wsum, 1.0 / wsum.sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    for e in elements.iter_mut() {
        if let Some(f) = &e.fit {
            if f.s_hr_sigma > 0.0 && f.s_hr_sigma.is_finite() && mean.is_finite() {
                e.z_score = Some((f.params.s_hr - mean) / f.s_hr_sigma);
            }
        }
    }
    let scored = elements.iter().filter(|e| e.z_score.is_some()).count();
    let temperature_independent = scored >= 2
        && elements.iter().all(|e| e.fit.is_none() || e.z_score.is_some_and(|z| z.abs() <= Z_THRESHOLD));
    Ok(SeriesReport { elements, s_hr_mean: mean, s_hr_mean_sigma: mean_sigma, temperature_independent })
}
