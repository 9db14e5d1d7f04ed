//! Peak, linewidth, saturation, antibunching, lifetime and radiative-lifetime commands.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{curve_json, read_energy_spectrum, read_points, sampled_curve};
use crate::args::Common;
use crate::config::resolve;
use crate::svg::{Plot, Series, Style};
use crate::{input_err, CliError, Outcome};
use qekit_core::photophysics::*;
use qekit_core::spectra::poisson_sigma;

const DEFAULT_CURVE_POINTS: usize = 200;

fn default_curve_points() -> usize {
    DEFAULT_CURVE_POINTS
}

/// Uniform access to the scalar fit results.
trait ScalarFit: Sized {
    fn evaluate_at(&self, x: f64) -> f64;
    fn report(&self) -> Value;
    fn from_partial(p: PartialFit) -> Option<Self>;
}

macro_rules! scalar_fit {
    ($t:ty, $variant:ident) => {
        impl ScalarFit for $t {
            fn evaluate_at(&self, x: f64) -> f64 {
                self.evaluate(x)
            }
            fn report(&self) -> Value {
                self.report_json()
            }
            fn from_partial(p: PartialFit) -> Option<Self> {
                match p {
                    PartialFit::$variant(f) => Some(f),
                    _ => None,
                }
            }
        }
    };
}

scalar_fit!(PowerBroadeningFit, Power);
scalar_fit!(TemperatureBroadeningFit, Temperature);
scalar_fit!(SaturationFit, Saturation);
scalar_fit!(G2Fit, G2);
scalar_fit!(LifetimeFit, Lifetime);
scalar_fit!(PeakFit, Peak);

/// Unwraps a fit result, keeping the partial fit of a convergence failure.
fn settle<F: ScalarFit>(r: Result<F, PhotophysicsError>) -> Result<F, CliError> {
    match r {
        Ok(f) => Ok(f),
        Err(PhotophysicsError::NonConvergence(p)) => {
            F::from_partial(*p).ok_or_else(|| CliError::Input("fit returned an unexpected result type".into()))
        }
        Err(e) => Err(input_err(e)),
    }
}

/// Report with a sampled model curve and a data-plus-fit plot.
fn point_fit_outcome<F: ScalarFit>(
    cfg: crate::config::RunConfig,
    fit: &F,
    data: &[(f64, f64, f64)],
    curve_range: (f64, f64),
    curve_points: usize,
    labels: (&str, &str, &str),
) -> Outcome {
    let (cx, cy) = sampled_curve(curve_range.0, curve_range.1, curve_points, |x| fit.evaluate_at(x));
    let mut report = fit.report();
    report["curve"] = curve_json(&cx, &cy);
    let mut plot = Plot::new(labels.0, labels.1, labels.2);
    plot.push(Series::new("data", data.iter().map(|p| p.0).collect(), data.iter().map(|p| p.1).collect(), Style::Points));
    plot.push(Series::new("fit", cx, cy, Style::Line));
    Outcome::new(cfg, report).with_plot(plot)
}

fn x_range(data: &[(f64, f64, f64)]) -> (f64, f64) {
    data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct CurveOnly {
    curve_points: usize,
}

impl Default for CurveOnly {
    fn default() -> Self {
        Self { curve_points: DEFAULT_CURVE_POINTS }
    }
}

pub fn power(common: &Common) -> Result<Outcome, CliError> {
    let cfg = resolve::<CurveOnly>("power-fit", common, Map::new())?;
    let p: CurveOnly = cfg.params()?;
    let data = read_points(cfg.single_input()?, ["power", "fwhm_ev", "sigma"], None)?;
    let fit = settle(fit_power_broadening(&data))?;
    let (lo, hi) = x_range(&data);
    Ok(point_fit_outcome(cfg, &fit, &data, (lo.min(0.0), hi), p.curve_points, ("Power broadening", "power", "FWHM (eV)")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct TempFitParams {
    irf_fwhm_ev: Option<f64>,
    irf_method: IrfMethod,
    #[serde(default = "default_curve_points")]
    curve_points: usize,
}

impl Default for TempFitParams {
    fn default() -> Self {
        Self { irf_fwhm_ev: None, irf_method: IrfMethod::Linear, curve_points: DEFAULT_CURVE_POINTS }
    }
}

pub fn temperature(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<TempFitParams>("temp-fit", common, flags)?;
    let p: TempFitParams = cfg.params()?;
    let data = read_points(cfg.single_input()?, ["temperature_k", "fwhm_ev", "sigma"], None)?;
    let fit = settle(fit_temperature_broadening(&data, p.irf_fwhm_ev.map(|w| (w, p.irf_method))))?;
    let (_, hi) = x_range(&data);
    let (t, total) = sampled_curve(0.0, hi, p.curve_points, |x| fit.evaluate(x));
    let constant: Vec<f64> = t.iter().map(|_| fit.gamma0).collect();
    let linear: Vec<f64> = t.iter().map(|x| fit.a * x).collect();
    let quintic: Vec<f64> = t.iter().map(|x| fit.b * x.powi(5)).collect();

    let mut report = fit.report();
    report["curve"] = json!({
        "temperature_k": t,
        "total_ev": total,
        "gamma0_ev": constant,
        "linear_ev": linear,
        "quintic_ev": quintic,
    });
    report["fitted_widths_ev"] = json!(fit.widths);

    let mut plot = Plot::new("Temperature broadening", "temperature (K)", "FWHM (eV)");
    let base1 = constant.clone();
    let base2: Vec<f64> = base1.iter().zip(&linear).map(|(a, b)| a + b).collect();
    plot.push(Series::band("Γ₀", t.clone(), constant, vec![0.0; t.len()]));
    plot.push(Series::band("aT", t.clone(), linear, base1));
    plot.push(Series::band("bT⁵", t.clone(), quintic, base2));
    plot.push(Series::new("total", t, total, Style::Line));
    plot.push(Series::new("data", data.iter().map(|d| d.0).collect(), fit.widths.clone(), Style::Points));
    Ok(Outcome::new(cfg, report).with_plot(plot))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SatParams {
    background: bool,
    #[serde(default = "default_curve_points")]
    curve_points: usize,
}

impl Default for SatParams {
    fn default() -> Self {
        Self { background: false, curve_points: DEFAULT_CURVE_POINTS }
    }
}

pub fn saturation(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<SatParams>("sat-fit", common, flags)?;
    let p: SatParams = cfg.params()?;
    let data = read_points(cfg.single_input()?, ["power", "intensity", "sigma"], None)?;
    let fit = settle(fit_saturation(&data, p.background))?;
    let (_, hi) = x_range(&data);
    Ok(point_fit_outcome(cfg, &fit, &data, (0.0, hi), p.curve_points, ("Saturation", "power", "intensity (counts/s)")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct G2Params {
    irf_fwhm_ns: Option<f64>,
    normalize: bool,
    exclude_center: bool,
    #[serde(default = "default_curve_points")]
    curve_points: usize,
}

impl Default for G2Params {
    fn default() -> Self {
        let o = G2Options::default();
        Self { irf_fwhm_ns: o.irf_fwhm_ns, normalize: o.normalize, exclude_center: o.exclude_center, curve_points: 4 * DEFAULT_CURVE_POINTS + 1 }
    }
}

pub fn g2(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<G2Params>("g2-fit", common, flags)?;
    let p: G2Params = cfg.params()?;
    let data = read_points(cfg.single_input()?, ["tau_ns", "g2", "sigma"], None)?;
    let options = G2Options { irf_fwhm_ns: p.irf_fwhm_ns, normalize: p.normalize, exclude_center: p.exclude_center };
    let fit = settle(fit_g2(&data, &options))?;
    let range = x_range(&data);
    Ok(point_fit_outcome(cfg, &fit, &data, range, p.curve_points, ("Second-order autocorrelation", "τ (ns)", "g²(τ)")))
}

pub fn lifetime(common: &Common) -> Result<Outcome, CliError> {
    let cfg = resolve::<CurveOnly>("lifetime-fit", common, Map::new())?;
    let p: CurveOnly = cfg.params()?;
    let data = read_points(cfg.single_input()?, ["t_ns", "counts", "sigma"], Some(poisson_sigma))?;
    let fit = settle(fit_lifetime(&data))?;
    let (_, hi) = x_range(&data);
    Ok(point_fit_outcome(cfg, &fit, &data, (0.0, hi), p.curve_points, ("Excited-state lifetime", "t (ns)", "counts")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct PeakParams {
    shape: PeakShape,
    window_lo_ev: Option<f64>,
    window_hi_ev: Option<f64>,
    irf_fwhm_ev: Option<f64>,
    irf_method: IrfMethod,
    #[serde(default = "default_curve_points")]
    curve_points: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            shape: PeakShape::Lorentzian,
            window_lo_ev: None,
            window_hi_ev: None,
            irf_fwhm_ev: None,
            irf_method: IrfMethod::Linear,
            curve_points: 4 * DEFAULT_CURVE_POINTS,
        }
    }
}

pub fn peak(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<PeakParams>("peak-fit", common, flags)?;
    let p: PeakParams = cfg.params()?;
    let spectrum = read_energy_spectrum(cfg.single_input()?)?;
    let window = match (p.window_lo_ev, p.window_hi_ev) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    };
    let mut fit = settle(fit_peak(&spectrum, p.shape, window))?;
    if let Some(w) = p.irf_fwhm_ev {
        fit = fit.with_irf(w, p.irf_method).map_err(input_err)?;
    }
    let data: Vec<(f64, f64, f64)> = spectrum
        .bins()
        .iter()
        .filter(|b| window.is_none_or(|(lo, hi)| b.axis >= lo && b.axis <= hi))
        .map(|b| (b.axis, b.intensity, b.sigma))
        .collect();
    let range = x_range(&data);
    Ok(point_fit_outcome(cfg, &fit, &data, range, p.curve_points, ("Peak fit", "E (eV)", "intensity")))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RadlifeParams {
    e_zpl_ev: Option<f64>,
    mu_e_angstrom: Option<f64>,
    refractive_index: Option<f64>,
}

pub fn radlife(common: &Common, flags: Map<String, Value>) -> Result<Outcome, CliError> {
    let cfg = resolve::<RadlifeParams>("radlife", common, flags)?;
    let p: RadlifeParams = cfg.params()?;
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("radlife needs --{flag}")));
    let (e, mu, n) = (need(p.e_zpl_ev, "e-zpl")?, need(p.mu_e_angstrom, "mu")?, need(p.refractive_index, "n")?);
    let tau = radiative_lifetime(e, mu, n).map_err(input_err)?;
    let report = json!({
        "model": "radiative_lifetime",
        "e_zpl_ev": e,
        "mu_e_angstrom": mu,
        "refractive_index": n,
        "tau_rad_ns": tau,
    });
    let mut out = Outcome::new(cfg, report);
    out.summary = Some(format!("tau_rad = {tau:.2} ns"));
    Ok(out)
}
