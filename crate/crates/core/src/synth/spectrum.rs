use std::collections::BTreeMap;

use super::noise::{NoiseKind, NoiseModel};
use super::SynthError;
use crate::constants::HC_EV_NM;
use crate::spectra::{AxisKind, Bin, Spectrum};
use crate::vibronic::{ModelNumerics, VibronicModel, VibronicParams};

/// Wavelength grid (ascending, nm) for a vibronic spectrum: spacing Γ/8 at the
/// ZPL growing to 2 meV in the sideband, covering ΔE ∈ [−30 meV, 800 meV].
pub fn vibronic_wavelength_grid(e_zpl: f64, gamma: f64) -> Vec<f64> {
    let fine = gamma / 8.0;
    let coarse = 0.002;
    let step = |d: f64| (0.25 * d.abs()).clamp(fine, coarse);
    let mut de = vec![0.0];
    let mut x: f64 = 0.0;
    while x < 0.8 {
        x += step(x);
        de.push(x);
    }
    x = 0.0;
    while x > -0.03 {
        x -= step(x);
        de.push(x);
    }
    let mut wl: Vec<f64> = de.iter().map(|d| HC_EV_NM / (e_zpl - d)).collect();
    wl.sort_by(|a, b| a.total_cmp(b));
    wl
}

/// Emission spectrum on `wavelengths_nm` for `params`.
///
/// The lineshape L(ΔE) is multiplied by E³ and by the Jacobian hc/λ² to give a
/// per-nm spectrum, scaled to a peak of `noise.scale` counts for Poisson noise
/// (1 otherwise, or `scale` for noiseless data when given), then noised.
pub fn gen_vibronic_spectrum(
    params: &VibronicParams,
    wavelengths_nm: &[f64],
    noise: &NoiseModel,
) -> Result<Spectrum, SynthError> {
    noise.validate()?;
    if wavelengths_nm.iter().any(|w| !(*w > 0.0)) {
        return Err(SynthError::InvalidParameter("wavelengths must be positive".into()));
    }
    let model = VibronicModel::new(params, &ModelNumerics::default())?;
    let energies: Vec<f64> = wavelengths_nm.iter().map(|w| HC_EV_NM / w).collect();
    let de: Vec<f64> = energies.iter().map(|e| params.e_zpl - e).collect();
    let lineshape = model.evaluate(&de);
    let per_nm: Vec<f64> = lineshape
        .iter()
        .zip(&energies)
        .zip(wavelengths_nm)
        .map(|((l, e), w)| l * e * e * e * HC_EV_NM / (w * w))
        .collect();
    let peak = per_nm.iter().cloned().fold(0.0, f64::max);
    let target = match noise.kind {
        NoiseKind::Poisson => noise.scale,
        NoiseKind::None if noise.scale > 0.0 => noise.scale,
        _ => 1.0,
    };
    let scaled: Vec<f64> = per_nm.iter().map(|v| v * target / peak).collect();
    let (values, sigma) = noise.apply(&scaled)?;
    let bins = wavelengths_nm
        .iter()
        .zip(values.iter().zip(&sigma))
        .map(|(w, (v, s))| Bin::new(*w, *v, *s))
        .collect();

    let mut meta = BTreeMap::new();
    meta.insert("axis_kind".to_string(), AxisKind::WavelengthNm.as_str().to_string());
    meta.insert("temperature_K".into(), format!("{}", params.temperature));
    meta.insert("e_zpl_hint_ev".into(), format!("{}", params.e_zpl));
    meta.insert("true_e_zpl_ev".into(), format!("{}", params.e_zpl));
    meta.insert("true_gamma_zpl_ev".into(), format!("{}", params.gamma_zpl));
    meta.insert("true_s_hr".into(), format!("{}", params.s_hr));
    meta.insert("true_zpl_shape".into(), params.zpl_shape.as_str().to_string());
    meta.insert("true_n_max".into(), params.n_max.to_string());
    meta.insert("true_psf_delta_e_ev".into(), format!("{}", params.psf.delta_e()));
    meta.insert("true_psf_e_max_ev".into(), format!("{}", params.psf.e_max()));
    meta.insert(
        "true_psf".into(),
        params.psf.values().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";"),
    );
    meta.insert("noise_kind".into(), noise.kind.as_str().to_string());
    meta.insert("noise_scale".into(), format!("{}", noise.scale));
    meta.insert("seed".into(), noise.seed.to_string());
    meta.insert("stream".into(), noise.stream.to_string());
    Ok(Spectrum::with_metadata(AxisKind::WavelengthNm, bins, meta)?)
}
