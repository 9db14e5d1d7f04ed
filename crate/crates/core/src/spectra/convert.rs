use super::{AxisKind, Bin, EfficiencyCurve, Lineshape, Spectrum, SpectrumError, CALIBRATED_KEY};
use crate::constants::HC_EV_NM;

fn require_kind(s: &Spectrum, kind: AxisKind) -> Result<(), SpectrumError> {
    if s.axis_kind() != kind {
        return Err(SpectrumError::WrongAxisKind { expected: kind, found: s.axis_kind() });
    }
    Ok(())
}

fn efficiencies(spectrum: &Spectrum, curve: &EfficiencyCurve) -> Result<Vec<f64>, SpectrumError> {
    spectrum
        .bins()
        .iter()
        .map(|b| curve.at(b.axis).ok_or(SpectrumError::AxisNotCovered(b.axis)))
        .collect()
}

/// Divides intensity and sigma bin-wise by the interpolated detection efficiency.
pub fn calibrate(spectrum: &Spectrum, curve: &EfficiencyCurve) -> Result<Spectrum, SpectrumError> {
    require_kind(spectrum, AxisKind::WavelengthNm)?;
    if spectrum.is_calibrated() {
        return Err(SpectrumError::AlreadyCalibrated);
    }
    let eff = efficiencies(spectrum, curve)?;
    let bins = spectrum
        .bins()
        .iter()
        .zip(&eff)
        .map(|(b, e)| Bin::new(b.axis, b.intensity / e, b.sigma / e))
        .collect();
    let mut out = spectrum.replace_bins(AxisKind::WavelengthNm, bins)?;
    out.metadata.insert(CALIBRATED_KEY.to_string(), "true".to_string());
    Ok(out)
}

/// Inverse of [`calibrate`]: multiplies the efficiency back in.
pub fn uncalibrate(spectrum: &Spectrum, curve: &EfficiencyCurve) -> Result<Spectrum, SpectrumError> {
    require_kind(spectrum, AxisKind::WavelengthNm)?;
    if !spectrum.is_calibrated() {
        return Err(SpectrumError::NotCalibrated);
    }
    let eff = efficiencies(spectrum, curve)?;
    let bins = spectrum
        .bins()
        .iter()
        .zip(&eff)
        .map(|(b, e)| Bin::new(b.axis, b.intensity * e, b.sigma * e))
        .collect();
    let mut out = spectrum.replace_bins(AxisKind::WavelengthNm, bins)?;
    out.metadata.remove(CALIBRATED_KEY);
    Ok(out)
}

/// Converts a wavelength-domain density to the energy domain, E = hc/λ.
///
/// The density picks up the Jacobian |dλ/dE| = λ²/(hc) so that
/// S(E)dE = S(λ)dλ. The output axis is ascending in energy.
pub fn to_energy(spectrum: &Spectrum) -> Result<Spectrum, SpectrumError> {
    require_kind(spectrum, AxisKind::WavelengthNm)?;
    let mut bins = Vec::with_capacity(spectrum.len());
    for b in spectrum.bins() {
        if !(b.axis > 0.0) {
            return Err(SpectrumError::NonPositiveWavelength(b.axis));
        }
        let jac = b.axis * b.axis / HC_EV_NM;
        bins.push(Bin::new(HC_EV_NM / b.axis, b.intensity * jac, b.sigma * jac));
    }
    bins.sort_by(|a, b| a.axis.total_cmp(&b.axis));
    let mut out = spectrum.replace_bins(AxisKind::EnergyEv, bins)?;
    out.metadata.insert("axis_kind".into(), AxisKind::EnergyEv.as_str().into());
    Ok(out)
}

/// Inverse of [`to_energy`], output ascending in wavelength.
pub fn to_wavelength(spectrum: &Spectrum) -> Result<Spectrum, SpectrumError> {
    require_kind(spectrum, AxisKind::EnergyEv)?;
    let mut bins = Vec::with_capacity(spectrum.len());
    for b in spectrum.bins() {
        if !(b.axis > 0.0) {
            return Err(SpectrumError::ZeroEnergyBin(b.axis));
        }
        let lambda = HC_EV_NM / b.axis;
        let jac = HC_EV_NM / (lambda * lambda);
        bins.push(Bin::new(lambda, b.intensity * jac, b.sigma * jac));
    }
    bins.sort_by(|a, b| a.axis.total_cmp(&b.axis));
    let mut out = spectrum.replace_bins(AxisKind::WavelengthNm, bins)?;
    out.metadata.insert("axis_kind".into(), AxisKind::WavelengthNm.as_str().into());
    Ok(out)
}

/// L(E) = S(E)/E³ expressed on ΔE = e_zpl_hint − E (ascending ΔE).
pub fn to_lineshape(spectrum: &Spectrum, e_zpl_hint: f64) -> Result<Lineshape, SpectrumError> {
    require_kind(spectrum, AxisKind::EnergyEv)?;
    let mut points = Vec::with_capacity(spectrum.len());
    for b in spectrum.bins() {
        if !(b.axis > 0.0) {
            return Err(SpectrumError::ZeroEnergyBin(b.axis));
        }
        let e3 = b.axis * b.axis * b.axis;
        points.push((e_zpl_hint - b.axis, b.intensity / e3, b.sigma / e3));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let delta_e = points.iter().map(|p| p.0).collect();
    let density = points.iter().map(|p| p.1).collect();
    let sigma = points.iter().map(|p| p.2).collect();
    Lineshape::new(delta_e, density, sigma, e_zpl_hint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::trapz;
    use proptest::prelude::*;

    fn wl_spectrum(axis: &[f64], y: &[f64]) -> Spectrum {
        Spectrum::from_arrays(AxisKind::WavelengthNm, axis, y, None).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn flat_curve_of_one_is_identity() {
        let x = grid(700.0, 720.0, 21);
        let s = wl_spectrum(&x, &vec![5.0; 21]);
        let curve = EfficiencyCurve::flat(600.0, 900.0, 1.0).unwrap();
        let c = calibrate(&s, &curve).unwrap();
        assert_eq!(c.bins(), s.bins());
        assert!(c.is_calibrated());
    }

    #[test]
    fn half_efficiency_doubles_counts_and_sigma() {
        let x = grid(700.0, 720.0, 10);
        let y = vec![100.0; 10];
        let s = Spectrum::from_arrays(AxisKind::WavelengthNm, &x, &y, Some(&[10.0; 10])).unwrap();
        let curve = EfficiencyCurve::flat(600.0, 900.0, 0.5).unwrap();
        let c = calibrate(&s, &curve).unwrap();
        assert!(c.bins().iter().all(|b| b.intensity == 200.0 && b.sigma == 20.0));
    }

    #[test]
    fn calibrate_errors() {
        let x = grid(700.0, 720.0, 10);
        let s = wl_spectrum(&x, &vec![1.0; 10]);
        let short = EfficiencyCurve::flat(705.0, 900.0, 1.0).unwrap();
        assert!(matches!(calibrate(&s, &short), Err(SpectrumError::AxisNotCovered(_))));
        let ok = EfficiencyCurve::flat(600.0, 900.0, 1.0).unwrap();
        let once = calibrate(&s, &ok).unwrap();
        assert!(matches!(calibrate(&once, &ok), Err(SpectrumError::AlreadyCalibrated)));
    }

    #[test]
    fn sawtooth_round_trip() {
        let samples: Vec<(f64, f64)> = (0..41)
            .map(|i| (690.0 + i as f64, if i % 2 == 0 { 0.2 } else { 0.9 }))
            .collect();
        let curve = EfficiencyCurve::new(samples).unwrap();
        let x = grid(700.0, 720.0, 97);
        let y: Vec<f64> = x.iter().map(|v| 1000.0 + 50.0 * (v * 0.37).sin()).collect();
        let s = wl_spectrum(&x, &y);
        let back = uncalibrate(&calibrate(&s, &curve).unwrap(), &curve).unwrap();
        for (a, b) in s.bins().iter().zip(back.bins()) {
            assert!((a.intensity - b.intensity).abs() <= 1e-12 * a.intensity.abs());
            assert!((a.sigma - b.sigma).abs() <= 1e-12 * a.sigma.abs());
        }
    }

    #[test]
    fn reference_zpl_energies() {
        let x = grid(791.3, 799.3, 9);
        let e = to_energy(&wl_spectrum(&x, &vec![1.0; 9])).unwrap();
        // ascending energy: the 791.3 nm bin is last
        assert!((e.bins()[8].axis - 1.5668).abs() < 5e-5);
        let x = grid(859.9, 867.9, 9);
        let e = to_energy(&wl_spectrum(&x, &vec![1.0; 9])).unwrap();
        assert!((e.bins()[8].axis - 1.4418).abs() < 5e-5);
    }

    #[test]
    fn boxcar_area_preserved() {
        // unit-area boxcar on [800, 810] nm sampled every 0.001 nm
        let x = grid(795.0, 815.0, 20_001);
        let y: Vec<f64> = x.iter().map(|&v| if (800.0..=810.0).contains(&v) { 0.1 } else { 0.0 }).collect();
        let s = wl_spectrum(&x, &y);
        assert!((s.integral() - 1.0).abs() < 1e-3);
        let e = to_energy(&s).unwrap();
        assert!((e.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn non_positive_wavelength_rejected() {
        let x = grid(-1.0, 6.0, 8);
        let s = wl_spectrum(&x, &vec![1.0; 8]);
        assert!(matches!(to_energy(&s), Err(SpectrumError::NonPositiveWavelength(_))));
    }

    #[test]
    fn lineshape_of_constant_spectrum() {
        let e = grid(1.0, 2.0, 11);
        let s = Spectrum::from_arrays(AxisKind::EnergyEv, &e, &vec![1.0; 11], Some(&[8.0; 11])).unwrap();
        let l = to_lineshape(&s, 1.5).unwrap();
        // ΔE ascending means E descending: first point is E = 2 eV
        assert!((l.delta_e[0] - (-0.5)).abs() < 1e-15);
        assert!((l.density[0] - 0.125).abs() < 1e-15);
        assert!((l.sigma[0] - 1.0).abs() < 1e-15);
        assert!((l.density[10] - 1.0).abs() < 1e-15);
        for (i, d) in l.density.iter().enumerate() {
            let en = l.e_zpl_hint - l.delta_e[i];
            assert!((d * en * en * en - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_energy_bin_rejected() {
        let e = grid(0.0, 1.0, 8);
        let s = Spectrum::from_arrays(AxisKind::EnergyEv, &e, &vec![1.0; 8], None).unwrap();
        assert!(matches!(to_lineshape(&s, 0.5), Err(SpectrumError::ZeroEnergyBin(_))));
    }

    proptest! {
        #[test]
        fn jacobian_conserves_area(
            center in 720.0f64..880.0,
            width in 3.0f64..30.0,
            amp in 1.0f64..1e5,
        ) {
            let x = grid(center - 8.0 * width, center + 8.0 * width, 4001);
            let y: Vec<f64> = x.iter().map(|v| amp * (-0.5 * ((v - center) / width).powi(2)).exp()).collect();
            let s = wl_spectrum(&x, &y);
            let e = to_energy(&s).unwrap();
            let rel = (e.integral() - s.integral()).abs() / s.integral();
            prop_assert!(rel < 5e-3);
        }

        #[test]
        fn lineshape_inverse_identity(vals in proptest::collection::vec(0.0f64..1e4, 8..40)) {
            let n = vals.len();
            let e = grid(1.2, 1.8, n);
            let s = Spectrum::from_arrays(AxisKind::EnergyEv, &e, &vals, None);
            let Ok(s) = s else { return Ok(()); };
            if trapz(&e, &vals) <= 0.0 { return Ok(()); }
            let l = to_lineshape(&s, 1.6).unwrap();
            for (i, d) in l.density.iter().enumerate() {
                let en = l.e_zpl_hint - l.delta_e[i];
                let orig = vals[n - 1 - i];
                prop_assert!((d * en * en * en - orig).abs() <= 1e-12 * orig.abs().max(1e-300));
            }
        }
    }
}
