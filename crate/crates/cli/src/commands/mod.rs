//! Subcommand implementations.

mod convert;
mod scalar;
mod survey;
mod synth;
mod vibronic;

use std::path::Path;

use serde_json::{json, Value};

use crate::args::{Command, IrfFlags, VibronicFlags};
use crate::config::flag_map;
use crate::{input_err, CliError, Outcome};
use qekit_core::spectra::{read_spectrum, to_energy, AxisKind, EfficiencyCurve, Spectrum};
use qekit_core::table::Table;

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Convert { common, to, e_zpl_hint_ev, efficiency, rebin_counts } => {
            let flags = flag_map([
                ("to", to.clone().map(Value::from)),
                ("e_zpl_hint_ev", e_zpl_hint_ev.map(Value::from)),
                ("efficiency", efficiency.as_ref().map(|p| Value::from(p.display().to_string()))),
                ("rebin_counts", rebin_counts.map(Value::from)),
            ]);
            convert::run(common, flags)
        }
        Command::VibronicFit { common, vib, temperature_k } => {
            let mut flags = vibronic_flags(vib);
            if let Some(t) = temperature_k {
                flags.insert("temperature_k".into(), Value::from(*t));
            }
            vibronic::run_fit(common, flags)
        }
        Command::TempSeries { common, vib } => vibronic::run_series(common, vibronic_flags(vib)),
        Command::PeakFit { common, zpl_shape, irf, window_lo_ev, window_hi_ev } => {
            let mut flags = irf_flags(irf);
            flags.extend(flag_map([
                ("shape", zpl_shape.clone().map(Value::from)),
                ("window_lo_ev", window_lo_ev.map(Value::from)),
                ("window_hi_ev", window_hi_ev.map(Value::from)),
            ]));
            scalar::peak(common, flags)
        }
        Command::PowerFit { common } => scalar::power(common),
        Command::TempFit { common, irf } => scalar::temperature(common, irf_flags(irf)),
        Command::SatFit { common, background } => scalar::saturation(common, flag_map([("background", background.map(Value::from))])),
        Command::G2Fit { common, irf_fwhm_ns, normalize } => scalar::g2(
            common,
            flag_map([("irf_fwhm_ns", irf_fwhm_ns.map(Value::from)), ("normalize", normalize.map(Value::from))]),
        ),
        Command::LifetimeFit { common } => scalar::lifetime(common),
        Command::Radlife { common, e_zpl, mu, n } => scalar::radlife(
            common,
            flag_map([
                ("e_zpl_ev", e_zpl.map(Value::from)),
                ("mu_e_angstrom", mu.map(Value::from)),
                ("refractive_index", n.map(Value::from)),
            ]),
        ),
        Command::Survey { common, band_lo_nm, band_hi_nm, min_snr, min_separation_px, zpl_shape } => survey::run(
            common,
            flag_map([
                ("band_lo_nm", band_lo_nm.map(Value::from)),
                ("band_hi_nm", band_hi_nm.map(Value::from)),
                ("min_snr", min_snr.map(Value::from)),
                ("min_separation_px", min_separation_px.map(Value::from)),
                ("peak_shape", zpl_shape.clone().map(Value::from)),
            ]),
        ),
        Command::Synth { common, kind, noise, noise_scale, temperature_k, s_hr, zpl_shape } => synth::run(
            common,
            flag_map([
                ("kind", kind.clone().map(Value::from)),
                ("noise", noise.clone().map(Value::from)),
                ("noise_scale", noise_scale.map(Value::from)),
                ("temperature_k", temperature_k.map(Value::from)),
                ("s_hr", s_hr.map(Value::from)),
                ("zpl_shape", zpl_shape.clone().map(Value::from)),
            ]),
        ),
    }
}

fn vibronic_flags(v: &VibronicFlags) -> serde_json::Map<String, Value> {
    flag_map([
        ("zpl_shape", v.zpl_shape.clone().map(Value::from)),
        ("delta_e_ev", v.delta_e_mev.map(|x| Value::from(x * 1e-3))),
        ("e_max_ev", v.e_max_mev.map(|x| Value::from(x * 1e-3))),
        ("n_max", v.n_max.as_ref().map(|s| s.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::from(s.clone())))),
        ("gamma_fixed_ev", v.gamma_fixed_uev.map(|x| Value::from(x * 1e-6))),
        ("smoothness_lambda", v.smoothness_lambda.map(Value::from)),
        ("e_zpl_hint_ev", v.e_zpl_hint_ev.map(Value::from)),
    ])
}

fn irf_flags(irf: &IrfFlags) -> serde_json::Map<String, Value> {
    flag_map([
        ("irf_fwhm_ev", irf.irf_fwhm_uev.map(|x| Value::from(x * 1e-6))),
        ("irf_method", irf.irf_method.clone().map(Value::from)),
    ])
}

/// Reads a spectrum and returns it on an ascending energy axis.
fn read_energy_spectrum(path: &Path) -> Result<Spectrum, CliError> {
    let s = read_spectrum(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    match s.axis_kind() {
        AxisKind::WavelengthNm => to_energy(&s).map_err(input_err),
        AxisKind::EnergyEv => Ok(s.sorted_ascending()),
    }
}

/// Reads an `x,y,sigma` point file with the given header. Without a sigma
/// column, `default_sigma` fills it in (or the column is required).
fn read_points(path: &Path, columns: [&str; 3], default_sigma: Option<fn(f64) -> f64>) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let t = Table::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let optional: &[&str] = if default_sigma.is_some() { &[columns[2]] } else { &[] };
    let required: &[&str] = if default_sigma.is_some() { &columns[..2] } else { &columns };
    t.expect_columns(required, optional).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(t.rows
        .iter()
        .map(|r| {
            let s = match (r.get(2), default_sigma) {
                (Some(s), _) => *s,
                (None, Some(f)) => f(r[1]),
                (None, None) => unreachable!("sigma column required"),
            };
            (r[0], r[1], s)
        })
        .collect())
}

/// `n` evenly spaced samples of `f` on [lo, hi].
fn sampled_curve(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let n = n.max(2);
    let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let y = x.iter().map(|&v| f(v)).collect();
    (x, y)
}

fn curve_json(x: &[f64], y: &[f64]) -> Value {
    json!({ "x": x, "y": y })
}

/// Reads a `wavelength_nm,efficiency` detection-efficiency table.
fn read_efficiency(path: &Path) -> Result<EfficiencyCurve, CliError> {
    let t = Table::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    t.expect_columns(&["wavelength_nm", "efficiency"], &[]).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    EfficiencyCurve::new(t.rows.iter().map(|r| (r[0], r[1])).collect()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
