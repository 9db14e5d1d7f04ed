use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::read_efficiency;
use crate::args::Common;
use crate::config::resolve;
use crate::{input_err, CliError, Outcome};
use qekit_core::spectra::{
    calibrate, equal_count_edges, lineshape_to_table, read_spectrum, rebin, to_energy, to_lineshape, to_wavelength,
    write_spectrum, AxisKind, Spectrum,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Target {
    #[default]
    Energy,
    Wavelength,
    Lineshape,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConvertParams {
    to: Target,
    /// Reference for the lineshape ΔE axis; falls back to metadata, then the brightest bin.
    e_zpl_hint_ev: Option<f64>,
    efficiency: Option<PathBuf>,
    /// Merge bins until each holds at least this many counts (in the input's axis).
    rebin_counts: Option<f64>,
}

fn axis_as(s: &Spectrum, kind: AxisKind) -> Result<Spectrum, CliError> {
    match (s.axis_kind(), kind) {
        (a, b) if a == b => Ok(s.sorted_ascending()),
        (AxisKind::WavelengthNm, AxisKind::EnergyEv) => to_energy(s).map_err(input_err),
        _ => to_wavelength(s).map_err(input_err),
    }
}

pub fn run(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<ConvertParams>("convert", common, flags)?;
    let p: ConvertParams = cfg.params()?;
    let input = cfg.single_input()?.to_path_buf();
    let output = cfg.require_output()?.to_path_buf();
    let mut s = read_spectrum(&input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let n_in = s.len();
    if let Some(eff) = &p.efficiency {
        if s.axis_kind() != AxisKind::WavelengthNm {
            return Err(CliError::Input("efficiency correction needs a wavelength axis".into()));
        }
        s = calibrate(&s, &read_efficiency(eff)?).map_err(input_err)?;
    }
    if let Some(c) = p.rebin_counts {
        if !(c > 0.0) {
            return Err(CliError::Usage(format!("rebin_counts must be > 0, got {c}")));
        }
        s = rebin(&s, &equal_count_edges(&s, c)).map_err(input_err)?;
    }

    let mut report = json!({
        "input_bins": n_in,
        "calibrated": s.is_calibrated(),
        "rebinned": p.rebin_counts.is_some(),
        "converged": true,
    });
    match p.to {
        Target::Energy | Target::Wavelength => {
            let kind = if p.to == Target::Energy { AxisKind::EnergyEv } else { AxisKind::WavelengthNm };
            let out = axis_as(&s, kind)?;
            write_spectrum(&out, &output).map_err(input_err)?;
            let (lo, hi) = out.axis_range();
            report["axis_kind"] = json!(kind.as_str());
            report["output_bins"] = json!(out.len());
            report["axis_min"] = json!(lo);
            report["axis_max"] = json!(hi);
            report["integral"] = json!(out.integral());
        }
        Target::Lineshape => {
            let e = axis_as(&s, AxisKind::EnergyEv)?;
            let hint = match p.e_zpl_hint_ev {
                Some(h) => h,
                None => match e.metadata_f64("e_zpl_hint_ev").map_err(input_err)? {
                    Some(h) => h,
                    None => e.bins().iter().max_by(|a, b| a.intensity.total_cmp(&b.intensity)).map(|b| b.axis).unwrap_or(0.0),
                },
            };
            let l = to_lineshape(&e, hint).map_err(input_err)?;
            lineshape_to_table(&l)
                .write(&output)
                .map_err(|err| CliError::Input(format!("{}: {err}", output.display())))?;
            report["axis_kind"] = json!("delta_e_ev");
            report["e_zpl_hint_ev"] = json!(hint);
            report["output_bins"] = json!(l.len());
            report["delta_e_min_ev"] = json!(l.delta_e[0]);
            report["delta_e_max_ev"] = json!(l.delta_e[l.len() - 1]);
            report["integral"] = json!(l.integral());
        }
    }
    report["data_file"] = json!(output.display().to_string());
    let mut out = Outcome::new(cfg, report);
    out.report_path = Some(output.with_extension("report.json"));
    Ok(out)
}
