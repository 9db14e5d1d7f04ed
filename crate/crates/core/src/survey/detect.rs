use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HyperspectralCube, SurveyError};
use crate::constants::ev_to_wavelength_nm;
use crate::constants::wavelength_nm_to_ev;
use crate::numeric::{mad, median};
use crate::photophysics::{fit_peak, PeakFit, PeakShape};
use crate::spectra::{to_energy, Spectrum};

/// Scale factor turning the median absolute deviation into a Gaussian σ.
pub const MAD_TO_SIGMA: f64 = 1.4826;
const SMOOTH_SIGMA_PX: f64 = 1.0;
const SMOOTH_RADIUS_PX: isize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Integration band (lo, hi) in nm; `None` uses the full range.
    pub band_nm: Option<(f64, f64)>,
    /// Threshold in units of the scaled MAD above the median.
    pub min_snr: f64,
    pub min_separation_px: f64,
    pub peak_shape: PeakShape,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { band_nm: None, min_snr: 6.0, min_separation_px: 4.0, peak_shape: PeakShape::Lorentzian }
    }
}

#[derive(Debug, Clone)]
pub struct EmitterRecord {
    pub x: usize,
    pub y: usize,
    /// (smoothed value − median)/(1.4826·MAD).
    pub snr: f64,
    /// Wavelength-axis spectrum of the pixel.
    pub spectrum: Spectrum,
    /// Peak center converted to nm; `None` when the peak fit failed.
    pub zpl_nm: Option<f64>,
    pub peak: Option<PeakFit>,
    pub fit_error: Option<String>,
}

impl EmitterRecord {
    pub fn report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "x_px": self.x,
            "y_px": self.y,
            "snr": self.snr,
            "zpl_nm": self.zpl_nm,
            "peak": self.peak.as_ref().map(|p| p.report_json()),
            "fit_error": self.fit_error,
        })
    }
}

/// Trapezoidal weights integrating the linear interpolant over [lo, hi].
fn band_weights(wl: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut w = vec![0.0; wl.len()];
    for k in 0..wl.len().saturating_sub(1) {
        let (a, b) = (wl[k].max(lo), wl[k + 1].min(hi));
        if b <= a {
            continue;
        }
        let h = wl[k + 1] - wl[k];
        // ∫ of the hat functions of nodes k and k+1 over [a, b]
        let ta = (a - wl[k]) / h;
        let tb = (b - wl[k]) / h;
        w[k] += h * ((tb - ta) - 0.5 * (tb * tb - ta * ta));
        w[k + 1] += h * 0.5 * (tb * tb - ta * ta);
    }
    w
}

/// Band-integrated image, row-major (y, x).
pub fn band_image(cube: &HyperspectralCube, band_nm: Option<(f64, f64)>) -> Result<Vec<f64>, SurveyError> {
    let wl = cube.wavelengths();
    let (min, max) = (wl[0], wl[wl.len() - 1]);
    let (lo, hi) = band_nm.unwrap_or((min, max));
    if !(lo < hi) || lo < min || hi > max {
        return Err(SurveyError::BandOutOfRange { lo, hi, min, max });
    }
    let w = if wl.len() == 1 { vec![1.0] } else { band_weights(wl, lo, hi) };
    Ok((0..cube.ny())
        .flat_map(|y| (0..cube.nx()).map(move |x| (y, x)))
        .map(|(y, x)| cube.pixel(y, x).iter().zip(&w).map(|(v, wk)| v * wk).sum())
        .collect())
}

/// Separable Gaussian smoothing with periodic boundaries.
pub fn smooth_periodic(image: &[f64], nx: usize, ny: usize, sigma_px: f64) -> Vec<f64> {
    let kernel: Vec<f64> = (-SMOOTH_RADIUS_PX..=SMOOTH_RADIUS_PX)
        .map(|d| (-0.5 * (d as f64 / sigma_px).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    let mut rows = vec![0.0; image.len()];
    for y in 0..ny {
        for x in 0..nx {
            rows[y * nx + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * image[y * nx + wrap(x as isize + k as isize - SMOOTH_RADIUS_PX, nx)])
                .sum();
        }
    }
    let mut out = vec![0.0; image.len()];
    for y in 0..ny {
        for x in 0..nx {
            out[y * nx + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * rows[wrap(y as isize + k as isize - SMOOTH_RADIUS_PX, ny) * nx + x])
                .sum();
        }
    }
    out
}

fn periodic_distance(a: (usize, usize), b: (usize, usize), nx: usize, ny: usize) -> f64 {
    let d = |p: usize, q: usize, n: usize| {
        let t = p.abs_diff(q);
        t.min(n - t) as f64
    };
    d(a.0, b.0, ny).hypot(d(a.1, b.1, nx))
}

/// Finds emitter hotspots and fits the ZPL of each one.
///
/// The band image is smoothed with a 1 px Gaussian, strict 8-neighbour
/// maxima above median + min_snr·1.4826·MAD are kept, and of any two
/// maxima closer than `min_separation_px` only the brighter survives.
/// Boundaries are periodic. Records are ordered by descending SNR, then
/// by (y, x).
pub fn detect_emitters(cube: &HyperspectralCube, config: &DetectionConfig) -> Result<Vec<EmitterRecord>, SurveyError> {
    if !(config.min_snr > 0.0) {
        return Err(SurveyError::InvalidParameter(format!("min_snr must be > 0, got {}", config.min_snr)));
    }
    if !(config.min_separation_px >= 1.0) {
        return Err(SurveyError::InvalidParameter(format!(
            "min_separation_px must be >= 1, got {}",
            config.min_separation_px
        )));
    }
    let (nx, ny) = (cube.nx(), cube.ny());
    let image = smooth_periodic(&band_image(cube, config.band_nm)?, nx, ny, SMOOTH_SIGMA_PX);
    let med = median(&image);
    let noise = MAD_TO_SIGMA * mad(&image);
    if !(noise > 0.0) {
        return Ok(Vec::new());
    }
    let threshold = med + config.min_snr * noise;

    let mut candidates = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            let v = image[y * nx + x];
            if v <= threshold {
                continue;
            }
            let is_max = (-1isize..=1).all(|dy| {
                (-1isize..=1).all(|dx| {
                    if dy == 0 && dx == 0 {
                        return true;
                    }
                    let yy = (y as isize + dy).rem_euclid(ny as isize) as usize;
                    let xx = (x as isize + dx).rem_euclid(nx as isize) as usize;
                    (yy, xx) == (y, x) || v > image[yy * nx + xx]
                })
            });
            if is_max {
                candidates.push((v, y, x));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut kept: Vec<(f64, usize, usize)> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| periodic_distance((k.1, k.2), (c.1, c.2), nx, ny) >= config.min_separation_px) {
            kept.push(c);
        }
    }

    let window = config.band_nm.map(|(lo, hi)| (wavelength_nm_to_ev(hi), wavelength_nm_to_ev(lo)));
    let records = kept
        .par_iter()
        .map(|&(v, y, x)| -> Result<EmitterRecord, SurveyError> {
            let spectrum = cube.pixel_spectrum(y, x)?;
            let energy = to_energy(&spectrum)?;
            let (peak, fit_error) = match fit_peak(&energy, config.peak_shape, window) {
                Ok(p) => (Some(p), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(EmitterRecord {
                x,
                y,
                snr: (v - med) / noise,
                spectrum,
                zpl_nm: peak.as_ref().map(|p| ev_to_wavelength_nm(p.center)),
                peak,
                fit_error,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(records)
}
