use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::args::Common;
use crate::config::resolve;
use crate::svg::{Plot, Series, Style};
use crate::{input_err, CliError, Outcome};
use qekit_core::spectra::write_spectrum;
use qekit_core::survey::write_qehc;
use qekit_core::synth::{gen_cube, gen_scalar_dataset, gen_vibronic_spectrum, vibronic_wavelength_grid, CubeSpec, NoiseKind, NoiseModel, ScalarModel};
use qekit_core::vibronic::{NMax, PhononSpectralFunction, VibronicParams, ZplShape, DEFAULT_DELTA_E, DEFAULT_E_MAX};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthParams {
    /// `vibronic`, `cube`, or a scalar model name.
    kind: String,
    noise: NoiseKind,
    /// Peak counts (Poisson) or relative σ (Gaussian); a preset when absent.
    noise_scale: Option<f64>,
    /// Replica index within the seed.
    stream: u64,
    e_zpl_ev: f64,
    gamma_zpl_ev: f64,
    s_hr: f64,
    temperature_k: f64,
    zpl_shape: ZplShape,
    n_max: NMax,
    delta_e_ev: f64,
    e_max_ev: f64,
    /// Gaussian psf modes as (center eV, width eV, relative height).
    psf_modes: Vec<[f64; 3]>,
    /// Overrides of the scalar model's preset parameters.
    model_params: BTreeMap<String, f64>,
    /// Sample points of a scalar model; a preset grid when absent.
    x: Option<Vec<f64>>,
    cube: CubeSpec,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            kind: "vibronic".into(),
            noise: NoiseKind::None,
            noise_scale: None,
            stream: 0,
            e_zpl_ev: 1.567,
            gamma_zpl_ev: 150e-6,
            s_hr: 1.04,
            temperature_k: 4.0,
            zpl_shape: ZplShape::Lorentzian,
            n_max: NMax::Auto,
            delta_e_ev: DEFAULT_DELTA_E,
            e_max_ev: DEFAULT_E_MAX,
            psf_modes: vec![[0.05, 0.012, 1.0], [0.165, 0.006, 0.6]],
            model_params: BTreeMap::new(),
            x: None,
            cube: CubeSpec::default(),
        }
    }
}

fn preset_params(model: ScalarModel) -> &'static [(&'static str, f64)] {
    match model {
        ScalarModel::PowerBroadening => &[("gamma0_ev", 103.8e-6), ("p0", 35.0)],
        ScalarModel::TemperatureBroadening => &[("gamma0_ev", 97.3e-6), ("a_ev_per_k", 3.0e-7), ("b_ev_per_k5", 2.0e-13)],
        ScalarModel::Saturation => &[("i_sat", 0.82e6), ("p_sat", 1.1)],
        ScalarModel::G2 => &[("alpha", 0.77), ("tau0_ns", 1.74)],
        ScalarModel::Lifetime => &[("tau_ns", 1.74), ("amplitude", 1.0e4)],
    }
}

fn preset_grid(model: ScalarModel) -> Vec<f64> {
    match model {
        ScalarModel::PowerBroadening => (0..12).map(|i| 0.5 * 1.6f64.powi(i)).collect(),
        ScalarModel::TemperatureBroadening => (0..12).map(|i| 4.0 + 6.0 * i as f64).collect(),
        ScalarModel::Saturation => (0..14).map(|i| 0.02 * 1.5f64.powi(i)).collect(),
        ScalarModel::G2 => (-80..=80).map(|i| i as f64 * 0.25).collect(),
        ScalarModel::Lifetime => (-40..400).map(|i| i as f64 * 0.05).collect(),
    }
}

fn noise_model(p: &SynthParams, seed: u64, default_poisson: f64) -> NoiseModel {
    let scale = p.noise_scale.unwrap_or(match p.noise {
        NoiseKind::None => 0.0,
        NoiseKind::Poisson => default_poisson,
        NoiseKind::Gaussian => 0.01,
    });
    NoiseModel { kind: p.noise, scale, seed, stream: p.stream }
}

pub fn run(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<SynthParams>("synth", common, flags)?;
    let p: SynthParams = cfg.params()?;
    let output = cfg.require_output()?.to_path_buf();
    let write_err = |e: &dyn std::fmt::Display| CliError::Input(format!("{}: {e}", output.display()));

    let (report, plot) = match p.kind.as_str() {
        "vibronic" => {
            let psf = PhononSpectralFunction::from_fn(p.delta_e_ev, p.e_max_ev, |e| {
                p.psf_modes.iter().map(|[c, w, h]| h * (-((e - c) / w).powi(2)).exp()).sum()
            })
            .map_err(input_err)?;
            let params = VibronicParams {
                e_zpl: p.e_zpl_ev,
                gamma_zpl: p.gamma_zpl_ev,
                s_hr: p.s_hr,
                psf,
                temperature: p.temperature_k,
                zpl_shape: p.zpl_shape,
                n_max: p.n_max,
            };
            let noise = noise_model(&p, cfg.seed, 1e4);
            let grid = vibronic_wavelength_grid(p.e_zpl_ev, p.gamma_zpl_ev);
            let spectrum = gen_vibronic_spectrum(&params, &grid, &noise).map_err(input_err)?;
            write_spectrum(&spectrum, &output).map_err(|e| write_err(&e))?;
            let report = json!({
                "kind": "vibronic",
                "n_points": spectrum.len(),
                "truth": spectrum.metadata.iter().filter(|(k, _)| k.starts_with("true_")).collect::<BTreeMap<_, _>>(),
            });
            let mut plot = Plot::new("Synthetic vibronic spectrum", "λ (nm)", "counts");
            plot.push(Series::new("spectrum", spectrum.axis(), spectrum.intensity(), Style::Line));
            (report, plot)
        }
        "cube" => {
            let spec = CubeSpec { seed: cfg.seed, ..p.cube.clone() };
            let synthetic = gen_cube(&spec).map_err(input_err)?;
            write_qehc(&synthetic.cube, &output).map_err(|e| write_err(&e))?;
            let t = &synthetic.truth;
            let report = json!({
                "kind": "cube",
                "truth": serde_json::to_value(t).expect("truth serializes"),
            });
            let mut plot = Plot::new("Synthetic emitter positions", "x (px)", "y (px)");
            plot.push(Series::new(
                "emitters",
                t.emitters.iter().map(|e| e.x).collect(),
                t.emitters.iter().map(|e| e.y).collect(),
                Style::Points,
            ));
            (report, plot)
        }
        other => {
            let model: ScalarModel = other
                .parse()
                .map_err(|_| CliError::Usage(format!("unknown synth kind '{other}': expected vibronic, cube, power_broadening, temperature_broadening, saturation, g2 or lifetime")))?;
            let mut truth: BTreeMap<String, f64> = preset_params(model).iter().map(|(k, v)| (k.to_string(), *v)).collect();
            truth.extend(p.model_params.clone());
            let x = p.x.clone().unwrap_or_else(|| preset_grid(model));
            let noise = noise_model(&p, cfg.seed, 1e4);
            let table = gen_scalar_dataset(model, &truth, &x, &noise).map_err(input_err)?;
            table.write(&output).map_err(|e| write_err(&e))?;
            let report = json!({
                "kind": model.as_str(),
                "n_points": table.rows.len(),
                "truth": table.metadata.iter().filter(|(k, _)| k.starts_with("true_")).collect::<BTreeMap<_, _>>(),
            });
            let cols = model.columns();
            let mut plot = Plot::new(&format!("Synthetic {}", model.as_str()), cols[0], cols[1]);
            plot.push(Series::new("data", table.rows.iter().map(|r| r[0]).collect(), table.rows.iter().map(|r| r[1]).collect(), Style::Points));
            (report, plot)
        }
    };
    let mut report = report;
    report["data_file"] = json!(output.display().to_string());
    report["converged"] = json!(true);
    let mut out = Outcome::new(cfg, report).with_plot(plot);
    out.report_path = Some(output.with_extension("report.json"));
    Ok(out)
}
