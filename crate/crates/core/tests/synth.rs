//! Vibronic spectrum generator: inverse chain, determinism and noise statistics.

use qekit_core::spectra::{to_energy, to_lineshape};
use qekit_core::synth::{gen_vibronic_spectrum, vibronic_wavelength_grid, NoiseModel};
use qekit_core::vibronic::*;

const E_ZPL: f64 = 1.567;
const GAMMA: f64 = 150e-6;

fn params(s_hr: f64) -> VibronicParams {
    VibronicParams {
        e_zpl: E_ZPL,
        gamma_zpl: GAMMA,
        s_hr,
        psf: PhononSpectralFunction::from_fn(DEFAULT_DELTA_E, DEFAULT_E_MAX, |e| (-((e - 0.05) / 0.02f64).powi(2)).exp())
            .unwrap(),
        temperature: 4.0,
        zpl_shape: ZplShape::Lorentzian,
        n_max: NMax::Auto,
    }
}

#[test]
fn bare_zpl_recovered_through_inverse_chain() {
    let spec = gen_vibronic_spectrum(&params(0.0), &vibronic_wavelength_grid(E_ZPL, GAMMA), &NoiseModel::none()).unwrap();
    let ls = to_lineshape(&to_energy(&spec).unwrap(), E_ZPL).unwrap();
    // Cauchy shape up to a constant factor inside the profile support, zero outside
    let half = GAMMA / 2.0;
    let i0 = ls.delta_e.iter().position(|x| *x >= 0.0).unwrap();
    let r0 = ls.density[i0] * (ls.delta_e[i0].powi(2) + half * half);
    for (x, d) in ls.delta_e.iter().zip(&ls.density) {
        if x.abs() < DEFAULT_E_MAX - 1e-9 {
            let r = d * (x * x + half * half);
            assert!(((r - r0) / r0).abs() <= 1e-9, "{r} vs {r0} at {x}");
        } else if x.abs() > DEFAULT_E_MAX + 1e-9 {
            assert_eq!(*d, 0.0);
        }
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let grid = vibronic_wavelength_grid(E_ZPL, GAMMA);
    let a = gen_vibronic_spectrum(&params(1.04), &grid, &NoiseModel::poisson(1e4, 9)).unwrap();
    let b = gen_vibronic_spectrum(&params(1.04), &grid, &NoiseModel::poisson(1e4, 9)).unwrap();
    assert_eq!(a, b);
    let c = gen_vibronic_spectrum(&params(1.04), &grid, &NoiseModel::poisson(1e4, 10)).unwrap();
    assert_ne!(a.intensity(), c.intensity());
}

#[test]
fn poisson_replica_mean_matches_noiseless_curve() {
    let grid = vibronic_wavelength_grid(E_ZPL, GAMMA);
    let p = params(0.72);
    let clean = gen_vibronic_spectrum(&p, &grid, &NoiseModel { scale: 1e4, ..NoiseModel::none() }).unwrap();
    let mut sum = vec![0.0; grid.len()];
    for k in 0..200 {
        let s = gen_vibronic_spectrum(&p, &grid, &NoiseModel::poisson(1e4, 3).with_stream(k)).unwrap();
        for (acc, v) in sum.iter_mut().zip(s.intensity()) {
            *acc += v;
        }
    }
    let mut checked = 0;
    for (acc, truth) in sum.iter().zip(clean.intensity()) {
        if truth > 100.0 {
            let mean = acc / 200.0;
            assert!(((mean - truth) / truth).abs() <= 0.02, "{mean} vs {truth}");
            checked += 1;
        }
    }
    assert!(checked > 10);
}
