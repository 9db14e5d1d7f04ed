use serde_json::json;

use super::{run, weights, CurveProblem, FitStats, PartialFit, PhotophysicsError};
use crate::numeric::median;
use crate::spectra::{AxisKind, Spectrum, SpectrumError};

pub use crate::vibronic::ZplShape as PeakShape;

/// Minimum (peak − baseline)/σ for a fit to be attempted.
pub const MIN_PEAK_SNR: f64 = 3.0;
/// Fits with χ²_red above this are flagged as suspect.
pub const SUSPECT_CHI2_REDUCED: f64 = 10.0;

/// Peak-normalized profile (value 1 at the center).
pub fn peak_profile(shape: PeakShape, x: f64, center: f64, fwhm: f64) -> f64 {
    let t = (x - center) / fwhm;
    match shape {
        PeakShape::Lorentzian => 1.0 / (1.0 + 4.0 * t * t),
        PeakShape::Gaussian => (-4.0 * std::f64::consts::LN_2 * t * t).exp(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakFit {
    pub shape: PeakShape,
    /// eV.
    pub center: f64,
    pub center_sigma: f64,
    /// eV.
    pub fwhm_raw: f64,
    pub fwhm_sigma: f64,
    pub fwhm_irf_corrected: Option<f64>,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub baseline: f64,
    pub baseline_sigma: f64,
    /// Initial (peak − baseline)/σ estimate.
    pub snr: f64,
    /// χ²_red above [`SUSPECT_CHI2_REDUCED`]: the single-peak model does not describe the data.
    pub suspect: bool,
    pub stats: FitStats,
}

impl PeakFit {
    pub fn evaluate(&self, e: f64) -> f64 {
        self.baseline + self.amplitude * peak_profile(self.shape, e, self.center, self.fwhm_raw)
    }

    /// Gaussian standard deviation equivalent to the FWHM.
    pub fn gaussian_sigma(&self) -> f64 {
        self.fwhm_raw / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    /// Copy with the IRF-corrected width filled in.
    pub fn with_irf(mut self, irf_fwhm: f64, method: super::IrfMethod) -> Result<Self, PhotophysicsError> {
        self.fwhm_irf_corrected = Some(super::correct_irf(self.fwhm_raw, irf_fwhm, method)?);
        Ok(self)
    }

    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "model": "peak",
            "shape": self.shape.as_str(),
            "center_ev": self.center,
            "center_sigma_ev": self.center_sigma,
            "center_nm": crate::constants::ev_to_wavelength_nm(self.center),
            "fwhm_raw_ev": self.fwhm_raw,
            "fwhm_raw_sigma_ev": self.fwhm_sigma,
            "fwhm_irf_corrected_ev": self.fwhm_irf_corrected,
            "amplitude": self.amplitude,
            "amplitude_sigma": self.amplitude_sigma,
            "baseline": self.baseline,
            "baseline_sigma": self.baseline_sigma,
            "snr": self.snr,
            "suspect": self.suspect,
            "chi2_reduced": self.stats.chi2_reduced,
            "converged": self.stats.converged,
            "iterations": self.stats.iterations,
        })
    }
}

/// Fits baseline + amplitude·profile(center, FWHM) to an energy-axis spectrum,
/// optionally restricted to `window` = (lo, hi) in eV.
pub fn fit_peak(spectrum: &Spectrum, shape: PeakShape, window: Option<(f64, f64)>) -> Result<PeakFit, PhotophysicsError> {
    if spectrum.axis_kind() != AxisKind::EnergyEv {
        return Err(SpectrumError::WrongAxisKind { expected: AxisKind::EnergyEv, found: spectrum.axis_kind() }.into());
    }
    let sorted = spectrum.sorted_ascending();
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<_> = sorted.bins().iter().filter(|b| b.axis >= lo && b.axis <= hi).collect();
    if pts.len() < 5 {
        return Err(PhotophysicsError::TooFewPoints { need: 5, got: pts.len() });
    }
    let x: Vec<f64> = pts.iter().map(|b| b.axis).collect();
    let y: Vec<f64> = pts.iter().map(|b| b.intensity).collect();
    let sigma: Vec<f64> = pts.iter().map(|b| b.sigma).collect();
    let w = weights(&sigma);

    // baseline from the outer fifth of the window on each side
    let n = x.len();
    let edge = (n / 5).max(1);
    let outer: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).cloned().collect();
    let baseline0 = median(&outer);
    let ip = (0..n).fold(0, |best, i| if y[i] > y[best] { i } else { best });
    let amp0 = y[ip] - baseline0;
    let sig_list: Vec<f64> = w.iter().map(|wi| 1.0 / wi).collect();
    let noise = median(&sig_list);
    let snr = if noise > 0.0 { amp0 / noise } else { f64::INFINITY };
    if !(snr >= MIN_PEAK_SNR) {
        return Err(PhotophysicsError::NoPeakFound { snr, min: MIN_PEAK_SNR });
    }
    let half = baseline0 + 0.5 * amp0;
    let left = (0..ip).rev().find(|&i| y[i] <= half).map(|i| x[i]).unwrap_or(x[0]);
    let right = (ip + 1..n).find(|&i| y[i] <= half).map(|i| x[i]).unwrap_or(x[n - 1]);
    let min_dx = x.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    let fwhm0 = (right - left).max(2.0 * min_dx);

    let problem = CurveProblem {
        x: &x,
        y: &y,
        w: &w,
        n_params: 4,
        f: |p: &[f64], e: f64| p[3] + p[2] * peak_profile(shape, e, x[ip] + p[0], p[1].exp()),
    };
    let r = run(&problem, &[0.0, fwhm0.ln(), amp0, baseline0], n);
    let fwhm = r.params[1].exp();
    let sd = super::transformed_sigmas(&r, &[1.0, fwhm, 1.0, 1.0]);
    let stats = FitStats::from_result(&r, n, 4);
    let fit = PeakFit {
        shape,
        center: x[ip] + r.params[0],
        center_sigma: sd[0],
        fwhm_raw: fwhm,
        fwhm_sigma: sd[1],
        fwhm_irf_corrected: None,
        amplitude: r.params[2],
        amplitude_sigma: sd[2],
        baseline: r.params[3],
        baseline_sigma: sd[3],
        snr,
        suspect: stats.chi2_reduced > SUSPECT_CHI2_REDUCED,
        stats,
    };
    if !stats.converged {
        return Err(PhotophysicsError::NonConvergence(Box::new(PartialFit::Peak(fit))));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Bin;

    fn spectrum(shape: PeakShape, fwhm: f64, extra: Option<(f64, f64)>) -> Spectrum {
        let bins = (0..301)
            .map(|i| {
                let e = 1.566 + i as f64 * 1e-5;
                let mut v = 50.0 + 1000.0 * peak_profile(shape, e, 1.5675, fwhm);
                if let Some((c, a)) = extra {
                    v += a * peak_profile(shape, e, c, fwhm);
                }
                Bin::new(e, v, v.sqrt())
            })
            .collect();
        Spectrum::new(AxisKind::EnergyEv, bins).unwrap()
    }

    #[test]
    fn lorentzian_width_recovered() {
        let f = fit_peak(&spectrum(PeakShape::Lorentzian, 148e-6, None), PeakShape::Lorentzian, None).unwrap();
        assert!((f.fwhm_raw / 148e-6 - 1.0).abs() < 1e-3);
        assert!((f.center - 1.5675).abs() < 1e-9);
        assert!(!f.suspect);
    }

    #[test]
    fn gaussian_sigma_relation() {
        let f = fit_peak(&spectrum(PeakShape::Gaussian, 200e-6, None), PeakShape::Gaussian, None).unwrap();
        let factor = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
        assert!((f.gaussian_sigma() * factor - f.fwhm_raw).abs() <= 1e-10 * f.fwhm_raw);
        assert!((f.fwhm_raw / 200e-6 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn overlapping_peaks_never_silent() {
        let s = spectrum(PeakShape::Lorentzian, 148e-6, Some((1.56772, 900.0)));
        match fit_peak(&s, PeakShape::Lorentzian, None) {
            Ok(f) => assert!(f.suspect, "chi2_red = {}", f.stats.chi2_reduced),
            Err(PhotophysicsError::NoPeakFound { .. }) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn flat_spectrum_has_no_peak() {
        let bins = (0..50).map(|i| Bin::new(1.5 + i as f64 * 1e-4, 100.0, 10.0)).collect();
        let s = Spectrum::new(AxisKind::EnergyEv, bins).unwrap();
        assert!(matches!(fit_peak(&s, PeakShape::Lorentzian, None), Err(PhotophysicsError::NoPeakFound { .. })));
    }

    #[test]
    fn wavelength_axis_rejected() {
        let bins = (0..50).map(|i| Bin::new(700.0 + i as f64, 100.0, 10.0)).collect();
        let s = Spectrum::new(AxisKind::WavelengthNm, bins).unwrap();
        assert!(matches!(fit_peak(&s, PeakShape::Lorentzian, None), Err(PhotophysicsError::Spectrum(_))));
    }
}
