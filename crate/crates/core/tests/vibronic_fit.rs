//! Round trips through the synthetic generator, the spectrum conversions and
//! the vibronic fit.

use qekit_core::lsq::{finite_difference_jacobian, Problem};
use qekit_core::spectra::{to_energy, to_lineshape, Lineshape};
use qekit_core::synth::{gen_vibronic_spectrum, vibronic_wavelength_grid, CounterRng, NoiseModel};
use qekit_core::vibronic::*;

const E_ZPL: f64 = 1.567;
const GAMMA: f64 = 150e-6;

/// Broad acoustic band plus an optical mode near 165 meV.
fn hbn_like_psf() -> PhononSpectralFunction {
    PhononSpectralFunction::from_fn(DEFAULT_DELTA_E, DEFAULT_E_MAX, |e| {
        (-((e - 0.05) / 0.012f64).powi(2)).exp() + 0.6 * (-((e - 0.165) / 0.006f64).powi(2)).exp()
    })
    .unwrap()
}

fn params(s_hr: f64, t: f64) -> VibronicParams {
    VibronicParams {
        e_zpl: E_ZPL,
        gamma_zpl: GAMMA,
        s_hr,
        psf: hbn_like_psf(),
        temperature: t,
        zpl_shape: ZplShape::Lorentzian,
        n_max: NMax::Auto,
    }
}

fn synthetic_lineshape(s_hr: f64, t: f64, noise: NoiseModel) -> Lineshape {
    let p = params(s_hr, t);
    let spec = gen_vibronic_spectrum(&p, &vibronic_wavelength_grid(E_ZPL, GAMMA), &noise).unwrap();
    to_lineshape(&to_energy(&spec).unwrap(), E_ZPL).unwrap()
}

#[test]
fn noiseless_round_trip_at_2_14() {
    let ls = synthetic_lineshape(2.14, 4.0, NoiseModel::none());
    let fit = fit_vibronic(&ls, &FitConfig::default(), 4.0).unwrap();
    assert!((fit.params.s_hr - 2.14).abs() <= 0.02, "S = {}", fit.params.s_hr);
    assert!((fit.params.e_zpl - E_ZPL).abs() < 1e-6);
    assert!((fit.weight_closure() - 1.0).abs() <= 1e-6);
    let report = fit.report_json();
    let total: f64 = report["zpl_weight"].as_f64().unwrap()
        + report["n_phonon"].as_array().unwrap().iter().map(|c| c["weight"].as_f64().unwrap()).sum::<f64>();
    assert!((total - 1.0).abs() <= 1e-6);
    // the psf is reported with ∫S(E)dE = S_HR
    assert!((fit.params.psf.integral() - fit.params.s_hr).abs() < 1e-9);
}

#[test]
fn noisy_round_trip_at_0_72() {
    let ls = synthetic_lineshape(0.72, 4.0, NoiseModel::poisson(1e4, 2024));
    let fit = fit_vibronic(&ls, &FitConfig::default(), 4.0).unwrap();
    assert!(fit.s_hr_sigma > 0.0);
    assert!((fit.params.s_hr - 0.72).abs() <= 3.0 * fit.s_hr_sigma, "S = {} ± {}", fit.params.s_hr, fit.s_hr_sigma);
    assert!(fit.s_hr_sigma < 0.12, "σ_S = {}", fit.s_hr_sigma);
    assert!(fit.chi2_reduced < 2.0);
}

#[test]
fn pure_lorentzian_has_no_sideband() {
    let ls = synthetic_lineshape(0.0, 4.0, NoiseModel::none());
    let fit = fit_vibronic(&ls, &FitConfig::default(), 4.0).unwrap();
    assert!(fit.params.s_hr <= 0.05, "S = {}", fit.params.s_hr);
    assert!(fit.params.psf.values().iter().all(|v| *v <= 0.05 / DEFAULT_DELTA_E));
}

#[test]
fn fit_is_deterministic() {
    let ls = synthetic_lineshape(1.04, 4.0, NoiseModel::poisson(1e4, 5));
    let a = fit_vibronic(&ls, &FitConfig::default(), 4.0).unwrap();
    let b = fit_vibronic(&ls, &FitConfig::default(), 4.0).unwrap();
    assert_eq!(a.params.s_hr.to_bits(), b.params.s_hr.to_bits());
    assert_eq!(a.report_json(), b.report_json());
}

#[test]
fn fixed_gamma_mode() {
    let ls = synthetic_lineshape(1.70, 4.0, NoiseModel::none());
    let cfg = FitConfig { gamma_fixed_ev: Some(GAMMA), ..FitConfig::default() };
    let fit = fit_vibronic(&ls, &cfg, 4.0).unwrap();
    assert_eq!(fit.params.gamma_zpl, GAMMA);
    assert!(fit.gamma_zpl_sigma.is_none());
    assert!((fit.params.s_hr - 1.70).abs() <= 0.02);
}

#[test]
fn insufficient_coverage_rejected() {
    let ls = synthetic_lineshape(1.0, 4.0, NoiseModel::none());
    let keep: Vec<usize> = (0..ls.len()).filter(|&i| ls.delta_e[i] < 0.1).collect();
    let cut = Lineshape::new(
        keep.iter().map(|&i| ls.delta_e[i]).collect(),
        keep.iter().map(|&i| ls.density[i]).collect(),
        keep.iter().map(|&i| ls.sigma[i]).collect(),
        ls.e_zpl_hint,
    )
    .unwrap();
    assert!(matches!(fit_vibronic(&cut, &FitConfig::default(), 4.0), Err(VibronicError::DegenerateData(_))));
}

/// Max over columns of ‖J_analytic − J_fd‖/‖J_fd‖.
fn jacobian_mismatch(obj: &VibronicObjective, p: &[f64]) -> f64 {
    let ja = obj.jacobian(p);
    let jf = finite_difference_jacobian(|q| obj.residuals(q), p);
    (0..ja.ncols())
        .filter_map(|k| {
            let d = (ja.column(k) - jf.column(k)).norm();
            let n = jf.column(k).norm();
            (n > 0.0).then(|| d / n)
        })
        .fold(0.0, f64::max)
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    let ls = synthetic_lineshape(1.04, 10.0, NoiseModel::poisson(1e4, 77));
    let obj = VibronicObjective::new(&ls, &FitConfig::default(), 10.0, 6).unwrap();
    let mut rng = CounterRng::new(3, 0);
    for _ in 0..3 {
        let psf: Vec<f64> = (0..100).map(|_| rng.uniform_range(0.05, 1.0)).collect();
        let p = obj.pack(
            E_ZPL + rng.uniform_range(-2e-5, 2e-5),
            rng.uniform_range(100e-6, 250e-6),
            rng.uniform_range(0.5, 2.2),
            rng.uniform_range(0.5, 2.0),
            &psf,
        );
        let m = jacobian_mismatch(&obj, &p);
        assert!(m < 1e-5, "relative mismatch {m:e}");
    }
}

#[test]
fn constant_series_is_temperature_independent() {
    let series: Vec<(Lineshape, f64)> = [4.0, 10.0, 20.0, 30.0, 40.0]
        .iter()
        .enumerate()
        .map(|(k, &t)| (synthetic_lineshape(0.72, t, NoiseModel::poisson(1e4, 40).with_stream(k as u64)), t))
        .collect();
    let report = fit_temperature_series(&series, &FitConfig::default()).unwrap();
    assert!(report.temperature_independent, "{:?}", report.elements.iter().map(|e| e.z_score).collect::<Vec<_>>());
    assert!((report.s_hr_mean - 0.72).abs() < 3.0 * report.s_hr_mean_sigma);
}

#[test]
fn stepped_series_is_flagged() {
    let series: Vec<(Lineshape, f64)> = [(0.5, 4.0), (0.875, 10.0), (1.25, 20.0), (1.625, 30.0), (2.0, 40.0)]
        .iter()
        .enumerate()
        .map(|(k, &(s, t))| (synthetic_lineshape(s, t, NoiseModel::poisson(1e4, 41).with_stream(k as u64)), t))
        .collect();
    let report = fit_temperature_series(&series, &FitConfig::default()).unwrap();
    assert!(!report.temperature_independent);
}

#[test]
fn single_temperature_series_rejected() {
    let ls = synthetic_lineshape(0.72, 4.0, NoiseModel::none());
    assert!(matches!(
        fit_temperature_series(&[(ls, 4.0)], &FitConfig::default()),
        Err(VibronicError::DegenerateSeries(_))
    ));
}
