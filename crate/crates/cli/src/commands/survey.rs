use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::args::Common;
use crate::config::resolve;
use crate::svg::{Plot, Series, Style};
use crate::{input_err, CliError, Outcome};
use qekit_core::photophysics::PeakShape;
use qekit_core::survey::{detect_emitters, read_cube, zpl_distribution, DetectionConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SurveyParams {
    band_lo_nm: Option<f64>,
    band_hi_nm: Option<f64>,
    min_snr: f64,
    min_separation_px: f64,
    peak_shape: PeakShape,
    hist_bin_nm: f64,
}

impl Default for SurveyParams {
    fn default() -> Self {
        let d = DetectionConfig::default();
        Self {
            band_lo_nm: None,
            band_hi_nm: None,
            min_snr: d.min_snr,
            min_separation_px: d.min_separation_px,
            peak_shape: d.peak_shape,
            hist_bin_nm: 5.0,
        }
    }
}

pub fn run(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<SurveyParams>("survey", common, flags)?;
    let p: SurveyParams = cfg.params()?;
    let path = cfg.single_input()?;
    let cube = read_cube(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let band_nm = match (p.band_lo_nm, p.band_hi_nm) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    };
    let detection = DetectionConfig {
        band_nm,
        min_snr: p.min_snr,
        min_separation_px: p.min_separation_px,
        peak_shape: p.peak_shape,
    };
    let records = detect_emitters(&cube, &detection).map_err(input_err)?;
    let distribution = zpl_distribution(&records, p.hist_bin_nm);

    let mut report = json!({
        "nx": cube.nx(),
        "ny": cube.ny(),
        "n_emitters": records.len(),
        "n_zpl_fitted": records.iter().filter(|r| r.zpl_nm.is_some()).count(),
        "emitters": records.iter().map(|r| r.report_json()).collect::<Vec<_>>(),
        "converged": true,
    });
    let mut plot = Plot::new("ZPL distribution", "ZPL (nm)", "emitters");
    match &distribution {
        Ok(d) => {
            report["distribution"] = serde_json::to_value(d).expect("distribution serializes");
            let h = &d.histogram;
            let centers: Vec<f64> = h.edges_nm.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            let counts: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
            plot.push(Series::new("histogram", centers, counts, Style::Points));
            if !d.degenerate {
                let (lo, hi) = (h.edges_nm[0], h.edges_nm[h.edges_nm.len() - 1]);
                let scale = d.values_nm.len() as f64 * p.hist_bin_nm / (d.sigma_nm * (2.0 * std::f64::consts::PI).sqrt());
                let (x, y) = super::sampled_curve(lo, hi, 200, |x| scale * (-0.5 * ((x - d.mean_nm) / d.sigma_nm).powi(2)).exp());
                plot.push(Series::new("normal fit", x, y, Style::Line));
            }
        }
        Err(e) => {
            report["distribution"] = Value::Null;
            report["distribution_error"] = json!(e.to_string());
        }
    }
    Ok(Outcome::new(cfg, report).with_plot(plot))
}
