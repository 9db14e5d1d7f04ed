use serde::{Deserialize, Serialize};

use super::rng::CounterRng;
use super::SynthError;
use crate::survey::HyperspectralCube;

/// Parameters of a seeded emitter-field cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubeSpec {
    pub nx: usize,
    pub ny: usize,
    pub n_emitters: usize,
    /// Minimum pairwise (periodic) distance between emitters.
    pub min_distance_px: f64,
    /// Spatial Gaussian σ of each emitter spot.
    pub spot_sigma_px: f64,
    /// Mean counts per channel at the spot center and ZPL peak.
    pub peak_counts: f64,
    /// Mean background counts per channel and pixel.
    pub background_counts: f64,
    pub wavelength_min_nm: f64,
    pub wavelength_max_nm: f64,
    pub wavelength_step_nm: f64,
    /// ZPLs are drawn from Normal(mean, sd), redrawn outside the band.
    pub zpl_mean_nm: f64,
    pub zpl_sd_nm: f64,
    pub zpl_fwhm_nm: f64,
    pub seed: u64,
}

impl Default for CubeSpec {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            n_emitters: 25,
            min_distance_px: 6.0,
            spot_sigma_px: 1.5,
            peak_counts: 200.0,
            background_counts: 5.0,
            wavelength_min_nm: 600.0,
            wavelength_max_nm: 950.0,
            wavelength_step_nm: 1.0,
            zpl_mean_nm: 770.0,
            zpl_sd_nm: 33.0,
            zpl_fwhm_nm: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterTruth {
    /// Sub-pixel position; pixel centers sit at integer coordinates.
    pub x: f64,
    pub y: f64,
    pub zpl_nm: f64,
    pub fwhm_nm: f64,
    pub peak_counts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeTruth {
    pub spec: CubeSpec,
    pub emitters: Vec<EmitterTruth>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCube {
    pub cube: HyperspectralCube,
    pub truth: CubeTruth,
}

fn periodic_delta(a: f64, b: f64, n: usize) -> f64 {
    let n = n as f64;
    let d = (a - b).rem_euclid(n);
    d.min(n - d)
}

/// Poisson-noised cube of Gaussian spots with Lorentzian spectra on a flat
/// background. Positions and ZPLs use stream 0 of the seed, pixel noise
/// stream 1.
pub fn gen_cube(spec: &CubeSpec) -> Result<SyntheticCube, SynthError> {
    let positive = [
        ("spot_sigma_px", spec.spot_sigma_px),
        ("peak_counts", spec.peak_counts),
        ("wavelength_step_nm", spec.wavelength_step_nm),
        ("zpl_sd_nm", spec.zpl_sd_nm),
        ("zpl_fwhm_nm", spec.zpl_fwhm_nm),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SynthError::InvalidParameter(format!("{name} must be > 0")));
        }
    }
    if spec.nx == 0 || spec.ny == 0 || !(spec.background_counts >= 0.0) {
        return Err(SynthError::InvalidParameter("cube needs nx, ny ≥ 1 and a non-negative background".into()));
    }
    if !(spec.wavelength_max_nm > spec.wavelength_min_nm && spec.wavelength_min_nm > 0.0) {
        return Err(SynthError::InvalidParameter("wavelength range must be positive and increasing".into()));
    }
    let n_wl = ((spec.wavelength_max_nm - spec.wavelength_min_nm) / spec.wavelength_step_nm).round() as usize + 1;
    let wavelengths: Vec<f64> = (0..n_wl).map(|i| spec.wavelength_min_nm + i as f64 * spec.wavelength_step_nm).collect();
    let (wl_lo, wl_hi) = (wavelengths[0], wavelengths[n_wl - 1]);

    let mut rng = CounterRng::new(spec.seed, 0);
    let mut emitters: Vec<EmitterTruth> = Vec::with_capacity(spec.n_emitters);
    let max_attempts = 10_000 * spec.n_emitters.max(1);
    let mut attempts = 0;
    while emitters.len() < spec.n_emitters {
        attempts += 1;
        if attempts > max_attempts {
            return Err(SynthError::InvalidParameter(format!(
                "could not place {} emitters {} px apart in {}×{}",
                spec.n_emitters, spec.min_distance_px, spec.ny, spec.nx
            )));
        }
        let x = rng.uniform_range(0.0, spec.nx as f64);
        let y = rng.uniform_range(0.0, spec.ny as f64);
        let clear = emitters.iter().all(|e| {
            periodic_delta(e.x, x, spec.nx).hypot(periodic_delta(e.y, y, spec.ny)) >= spec.min_distance_px
        });
        if !clear {
            continue;
        }
        // keep the ZPL well inside the recorded band
        let margin = 5.0 * spec.zpl_fwhm_nm;
        let zpl = loop {
            let z = spec.zpl_mean_nm + spec.zpl_sd_nm * rng.normal();
            if z > wl_lo + margin && z < wl_hi - margin {
                break z;
            }
        };
        emitters.push(EmitterTruth { x, y, zpl_nm: zpl, fwhm_nm: spec.zpl_fwhm_nm, peak_counts: spec.peak_counts });
    }

    let mut noise = CounterRng::new(spec.seed, 1);
    let mut data = Vec::with_capacity(spec.nx * spec.ny * n_wl);
    let mut mean = vec![0.0; n_wl];
    for py in 0..spec.ny {
        for px in 0..spec.nx {
            mean.iter_mut().for_each(|m| *m = spec.background_counts);
            for e in &emitters {
                let dx = periodic_delta(px as f64, e.x, spec.nx);
                let dy = periodic_delta(py as f64, e.y, spec.ny);
                let spot = (-(dx * dx + dy * dy) / (2.0 * spec.spot_sigma_px.powi(2))).exp();
                if spot < 1e-12 {
                    continue;
                }
                let half = 0.5 * e.fwhm_nm;
                for (m, w) in mean.iter_mut().zip(&wavelengths) {
                    let t = (w - e.zpl_nm) / half;
                    *m += e.peak_counts * spot / (1.0 + t * t);
                }
            }
            data.extend(mean.iter().map(|&m| noise.poisson(m) as f64));
        }
    }
    let cube = HyperspectralCube::new(spec.nx, spec.ny, wavelengths, data)?;
    Ok(SyntheticCube { cube, truth: CubeTruth { spec: spec.clone(), emitters } })
}
