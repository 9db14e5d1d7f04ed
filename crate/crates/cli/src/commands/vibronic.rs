use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{read_efficiency, read_energy_spectrum};
use crate::args::Common;
use crate::config::{resolve, RunConfig};
use crate::svg::{Plot, Series, Style};
use crate::{input_err, CliError, Outcome};
use qekit_core::spectra::{calibrate, read_spectrum, to_energy, to_lineshape, AxisKind, Lineshape};
use qekit_core::vibronic::{fit_temperature_series, fit_vibronic, FitConfig, VibronicError, VibronicFit};

/// Phonon orders drawn individually in the plot.
const PLOTTED_ORDERS: usize = 6;

/// Keys of the `fit` table that may also be given at top level via flags.
const FIT_KEYS: &[&str] = &["zpl_shape", "delta_e_ev", "e_max_ev", "n_max", "gamma_fixed_ev", "smoothness_lambda"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct VibronicRun {
    /// Falls back to the input's `temperature_K` metadata.
    temperature_k: Option<f64>,
    /// Falls back to the input's metadata, then to the brightest bin.
    e_zpl_hint_ev: Option<f64>,
    /// Photon-energy window (eV) applied before the fit.
    window_lo_ev: Option<f64>,
    window_hi_ev: Option<f64>,
    /// Detection-efficiency table applied to wavelength-axis inputs.
    efficiency: Option<PathBuf>,
    fit: FitConfig,
}

fn nest_fit_flags(mut flags: Map<String, Value>) -> Map<String, Value> {
    let mut fit = Map::new();
    for k in FIT_KEYS {
        if let Some(v) = flags.remove(*k) {
            fit.insert(k.to_string(), v);
        }
    }
    if !fit.is_empty() {
        flags.insert("fit".into(), Value::Object(fit));
    }
    flags
}

struct Prepared {
    lineshape: Lineshape,
    temperature: Option<f64>,
}

fn prepare(path: &Path, run: &VibronicRun) -> Result<Prepared, CliError> {
    let spectrum = match &run.efficiency {
        Some(eff) => {
            let raw = read_spectrum(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if raw.axis_kind() != AxisKind::WavelengthNm {
                return Err(CliError::Input(format!("{}: efficiency correction needs a wavelength axis", path.display())));
            }
            to_energy(&calibrate(&raw, &read_efficiency(eff)?).map_err(input_err)?).map_err(input_err)?
        }
        None => read_energy_spectrum(path)?,
    };
    let temperature = match run.temperature_k {
        Some(t) => Some(t),
        None => spectrum.temperature_k().map_err(input_err)?,
    };
    let hint = match run.e_zpl_hint_ev {
        Some(h) => h,
        None => match spectrum.metadata_f64("e_zpl_hint_ev").map_err(input_err)? {
            Some(h) => h,
            None => spectrum
                .bins()
                .iter()
                .max_by(|a, b| a.intensity.total_cmp(&b.intensity))
                .map(|b| b.axis)
                .ok_or_else(|| CliError::Input("empty spectrum".into()))?,
        },
    };
    let mut lineshape = to_lineshape(&spectrum, hint).map_err(input_err)?;
    if run.window_lo_ev.is_some() || run.window_hi_ev.is_some() {
        // photon-energy window [lo, hi] is ΔE ∈ [hint − hi, hint − lo]
        let lo = run.window_hi_ev.map_or(f64::NEG_INFINITY, |h| hint - h);
        let hi = run.window_lo_ev.map_or(f64::INFINITY, |l| hint - l);
        lineshape = lineshape.window(lo, hi).map_err(input_err)?;
    }
    Ok(Prepared { lineshape, temperature })
}

fn settle(r: Result<VibronicFit, VibronicError>) -> Result<VibronicFit, CliError> {
    match r {
        Ok(f) => Ok(f),
        Err(VibronicError::NonConvergence(f)) => Ok(*f),
        Err(e) => Err(input_err(e)),
    }
}

fn fit_report(fit: &VibronicFit, hint: f64) -> Value {
    let energy: Vec<f64> = fit.delta_e.iter().map(|d| hint - d).collect();
    let mut report = fit.report_json();
    report["e_zpl_hint_ev"] = json!(hint);
    report["weight_closure"] = json!(fit.weight_closure());
    report["curve"] = json!({
        "delta_e_ev": fit.delta_e,
        "energy_ev": energy,
        "data": fit.data,
        "sigma": fit.data_sigma,
        "model": fit.model,
        "zpl": fit.zpl_component,
        "n_phonon": fit.n_phonon_components.iter().map(|c| json!({"n": c.n, "values": c.spectrum})).collect::<Vec<_>>(),
    });
    report
}

fn fit_plot(fit: &VibronicFit, hint: f64) -> Plot {
    let energy: Vec<f64> = fit.delta_e.iter().map(|d| hint - d).collect();
    let mut plot = Plot::new("Vibronic decomposition", "E (eV)", "L (1/eV³, scaled)");
    plot.push(Series::new("data", energy.clone(), fit.data.clone(), Style::Points));
    plot.push(Series::new("ZPL", energy.clone(), fit.zpl_component.clone(), Style::Line));
    for c in fit.n_phonon_components.iter().take(PLOTTED_ORDERS) {
        plot.push(Series::new(&format!("n = {}", c.n), energy.clone(), c.spectrum.clone(), Style::Line));
    }
    plot.push(Series::new("model", energy, fit.model.clone(), Style::Line));
    plot
}

pub fn run_fit(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<VibronicRun>("vibronic-fit", common, nest_fit_flags(flags))?;
    let run: VibronicRun = cfg.params()?;
    let prepared = prepare(cfg.single_input()?, &run)?;
    let t = prepared
        .temperature
        .ok_or_else(|| CliError::Usage("temperature unknown: pass --temperature-k or add temperature_K metadata".into()))?;
    let fit = settle(fit_vibronic(&prepared.lineshape, &run.fit, t))?;
    let hint = prepared.lineshape.e_zpl_hint;
    let report = fit_report(&fit, hint);
    Ok(Outcome::new(cfg, report).with_plot(fit_plot(&fit, hint)))
}

/// Input files of a series: every path given, with directories expanded to
/// their `*.csv` files in name order.
fn series_files(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if cfg.input.is_empty() {
        return Err(CliError::Usage("temp-series needs --input".into()));
    }
    let mut files = Vec::new();
    for p in &cfg.input {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|source| CliError::Io { path: p.display().to_string(), source })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

pub fn run_series(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<VibronicRun>("temp-series", common, nest_fit_flags(flags))?;
    let run: VibronicRun = cfg.params()?;
    if run.temperature_k.is_some() {
        return Err(CliError::Usage("temp-series reads each temperature from its file's temperature_K metadata".into()));
    }
    let mut series = Vec::new();
    for f in series_files(&cfg)? {
        let p = prepare(&f, &run)?;
        let t = p.temperature.ok_or_else(|| CliError::Input(format!("{}: missing temperature_K metadata", f.display())))?;
        series.push((p.lineshape, t));
    }
    let report = fit_temperature_series(&series, &run.fit).map_err(input_err)?;

    let mut json = report.report_json();
    let z: Vec<f64> = report.elements.iter().filter_map(|e| e.z_score).collect();
    let converged = report.elements.iter().all(|e| e.fit.as_ref().is_some_and(|f| f.converged));
    json["converged"] = json!(converged);
    json["chi2_reduced"] = json!(z.iter().map(|v| v * v).sum::<f64>() / (z.len().max(2) - 1) as f64);

    let ok: Vec<_> = report.elements.iter().filter_map(|e| e.fit.as_ref().map(|f| (e.temperature, f))).collect();
    let temps: Vec<f64> = ok.iter().map(|(t, _)| *t).collect();
    let mut plot = Plot::new("Huang-Rhys factor versus temperature", "T (K)", "S_HR");
    plot.push(Series::new("S_HR", temps.clone(), ok.iter().map(|(_, f)| f.params.s_hr).collect(), Style::Points));
    plot.push(Series::new("weighted mean", temps.clone(), vec![report.s_hr_mean; temps.len()], Style::Line));
    Ok(Outcome::new(cfg, json).with_plot(plot))
}
