//! Point-set generators for the scalar photophysics models.

use std::collections::BTreeMap;

use super::noise::NoiseModel;
use super::rng::CounterRng;
use super::SynthError;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarModel {
    PowerBroadening,
    TemperatureBroadening,
    Saturation,
    G2,
    Lifetime,
}

impl std::str::FromStr for ScalarModel {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "power_broadening" => ScalarModel::PowerBroadening,
            "temperature_broadening" => ScalarModel::TemperatureBroadening,
            "saturation" => ScalarModel::Saturation,
            "g2" => ScalarModel::G2,
            "lifetime" => ScalarModel::Lifetime,
            other => return Err(SynthError::UnknownModel(other.to_string())),
        })
    }
}

impl ScalarModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalarModel::PowerBroadening => "power_broadening",
            ScalarModel::TemperatureBroadening => "temperature_broadening",
            ScalarModel::Saturation => "saturation",
            ScalarModel::G2 => "g2",
            ScalarModel::Lifetime => "lifetime",
        }
    }

    /// CSV header of the generated point set.
    pub fn columns(self) -> [&'static str; 3] {
        match self {
            ScalarModel::PowerBroadening => ["power", "fwhm_ev", "sigma"],
            ScalarModel::TemperatureBroadening => ["temperature_k", "fwhm_ev", "sigma"],
            ScalarModel::Saturation => ["power", "intensity", "sigma"],
            ScalarModel::G2 => ["tau_ns", "g2", "sigma"],
            ScalarModel::Lifetime => ["t_ns", "counts", "sigma"],
        }
    }

    /// (required, optional-with-default) parameter names.
    pub fn parameters(self) -> (&'static [&'static str], &'static [(&'static str, f64)]) {
        match self {
            ScalarModel::PowerBroadening => (&["gamma0_ev", "p0"], &[]),
            ScalarModel::TemperatureBroadening => (&["gamma0_ev", "a_ev_per_k", "b_ev_per_k5"], &[]),
            ScalarModel::Saturation => (&["i_sat", "p_sat"], &[("background_slope", 0.0)]),
            ScalarModel::G2 => (&["alpha", "tau0_ns"], &[("irf_fwhm_ns", 0.0), ("norm", 1.0)]),
            ScalarModel::Lifetime => (&["tau_ns", "amplitude"], &[("baseline", 0.0)]),
        }
    }
}

fn resolve(model: ScalarModel, given: &BTreeMap<String, f64>) -> Result<BTreeMap<&'static str, f64>, SynthError> {
    let (required, optional) = model.parameters();
    for k in given.keys() {
        if !required.contains(&k.as_str()) && !optional.iter().any(|(n, _)| n == k) {
            return Err(SynthError::InvalidParameter(format!("unknown parameter '{k}' for model {}", model.as_str())));
        }
    }
    let mut out = BTreeMap::new();
    for &name in required {
        let v = *given.get(name).ok_or(SynthError::MissingParameter { model: model.as_str(), name })?;
        out.insert(name, v);
    }
    for &(name, default) in optional {
        out.insert(name, given.get(name).copied().unwrap_or(default));
    }
    if out.values().any(|v| !v.is_finite()) {
        return Err(SynthError::InvalidParameter("parameters must be finite".into()));
    }
    Ok(out)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// g²(τ) convolved with a unit-area Gaussian of the given FWHM, by quadrature
/// split at the cusp of |τ|.
fn g2_convolved(tau: f64, alpha: f64, tau0: f64, fwhm: f64) -> f64 {
    let bare = |t: f64| 1.0 - alpha * (-t.abs() / tau0).exp();
    if fwhm <= 0.0 {
        return bare(tau);
    }
    let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let kernel = |u: f64| (-0.5 * (u / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let (lo, hi) = (-10.0 * sigma, 10.0 * sigma);
    let f = |u: f64| bare(tau - u) * kernel(u);
    if tau > lo && tau < hi {
        simpson(f, lo, tau, 4000) + simpson(f, tau, hi, 4000)
    } else {
        simpson(f, lo, hi, 8000)
    }
}

fn evaluate(model: ScalarModel, p: &BTreeMap<&'static str, f64>, x: f64) -> f64 {
    match model {
        ScalarModel::PowerBroadening => p["gamma0_ev"] * (1.0 + x / p["p0"]).sqrt(),
        ScalarModel::TemperatureBroadening => p["gamma0_ev"] + p["a_ev_per_k"] * x + p["b_ev_per_k5"] * x.powi(5),
        ScalarModel::Saturation => p["i_sat"] * x / (x + p["p_sat"]) + p["background_slope"] * x,
        ScalarModel::G2 => p["norm"] * g2_convolved(x, p["alpha"], p["tau0_ns"], p["irf_fwhm_ns"]),
        ScalarModel::Lifetime => {
            if x < 0.0 {
                p["baseline"]
            } else {
                p["baseline"] + p["amplitude"] * (-x / p["tau_ns"]).exp()
            }
        }
    }
}

fn check_feasible(model: ScalarModel, p: &BTreeMap<&'static str, f64>) -> Result<(), SynthError> {
    let positive = |names: &[&str]| -> Result<(), SynthError> {
        for n in names {
            if !(p[n] > 0.0) {
                return Err(SynthError::InvalidParameter(format!("{n} must be > 0")));
            }
        }
        Ok(())
    };
    match model {
        ScalarModel::PowerBroadening => positive(&["gamma0_ev", "p0"]),
        ScalarModel::TemperatureBroadening => {
            positive(&["gamma0_ev"])?;
            if p["a_ev_per_k"] < 0.0 || p["b_ev_per_k5"] < 0.0 {
                return Err(SynthError::InvalidParameter("a and b must be ≥ 0".into()));
            }
            Ok(())
        }
        ScalarModel::Saturation => positive(&["i_sat", "p_sat"]),
        ScalarModel::G2 => {
            positive(&["tau0_ns", "norm"])?;
            if !(0.0..=1.0).contains(&p["alpha"]) || p["irf_fwhm_ns"] < 0.0 {
                return Err(SynthError::InvalidParameter("alpha must lie in [0, 1] and irf_fwhm_ns ≥ 0".into()));
            }
            Ok(())
        }
        ScalarModel::Lifetime => positive(&["tau_ns"]),
    }
}

/// Exact model values at `sample_points` plus noise, as a three-column table
/// with the ground truth in `true_<param>` metadata.
pub fn gen_scalar_dataset(
    model: ScalarModel,
    true_params: &BTreeMap<String, f64>,
    sample_points: &[f64],
    noise: &NoiseModel,
) -> Result<Table, SynthError> {
    let p = resolve(model, true_params)?;
    check_feasible(model, &p)?;
    if sample_points.is_empty() || sample_points.iter().any(|x| !x.is_finite()) {
        return Err(SynthError::InvalidParameter("sample points must be finite and non-empty".into()));
    }
    let y: Vec<f64> = sample_points.iter().map(|&x| evaluate(model, &p, x)).collect();
    let (values, sigma) = noise.apply(&y)?;
    let mut table = Table::new(&model.columns());
    table.rows = sample_points
        .iter()
        .zip(values.iter().zip(&sigma))
        .map(|(x, (v, s))| vec![*x, *v, *s])
        .collect();
    table.metadata.insert("model".into(), model.as_str().into());
    for (k, v) in &p {
        table.metadata.insert(format!("true_{k}"), format!("{v}"));
    }
    table.metadata.insert("noise_kind".into(), noise.kind.as_str().into());
    table.metadata.insert("noise_scale".into(), format!("{}", noise.scale));
    table.metadata.insert("seed".into(), noise.seed.to_string());
    table.metadata.insert("stream".into(), noise.stream.to_string());
    Ok(table)
}

/// `n` points of a Latin hypercube over the given per-dimension bounds.
pub fn latin_hypercube(n: usize, bounds: &[(f64, f64)], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = CounterRng::new(seed, u64::MAX);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
    for &(lo, hi) in bounds {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            strata.swap(i, j);
        }
        columns.push(strata.iter().map(|&s| lo + (hi - lo) * (s as f64 + rng.uniform()) / n as f64).collect());
    }
    (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}
