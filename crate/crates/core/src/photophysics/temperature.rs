use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::{correct_irf, FitStats, IrfMethod, PhotophysicsError};

/// Γ(T) = Γ₀ + aT + bT⁵.
pub fn temperature_broadening(t: f64, gamma0: f64, a: f64, b: f64) -> f64 {
    gamma0 + a * t + b * t.powi(5)
}

/// Γ₀, aT and bT⁵ at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentPoint {
    pub temperature: f64,
    pub constant: f64,
    pub linear: f64,
    pub quintic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureBroadeningFit {
    /// eV.
    pub gamma0: f64,
    pub gamma0_sigma: f64,
    /// eV/K.
    pub a: f64,
    pub a_sigma: f64,
    /// eV/K⁵.
    pub b: f64,
    pub b_sigma: f64,
    /// Which of a, b sit on their zero bound.
    pub a_at_bound: bool,
    pub b_at_bound: bool,
    /// Widths actually fitted (after IRF correction when requested).
    pub widths: Vec<f64>,
    pub component_curves: Vec<ComponentPoint>,
    pub stats: FitStats,
}

impl TemperatureBroadeningFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        temperature_broadening(t, self.gamma0, self.a, self.b)
    }

    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "model": "temperature_broadening",
            "gamma0_ev": self.gamma0,
            "gamma0_sigma_ev": self.gamma0_sigma,
            "a_ev_per_k": self.a,
            "a_sigma_ev_per_k": self.a_sigma,
            "b_ev_per_k5": self.b,
            "b_sigma_ev_per_k5": self.b_sigma,
            "a_at_bound": self.a_at_bound,
            "b_at_bound": self.b_at_bound,
            "chi2_reduced": self.stats.chi2_reduced,
            "converged": self.stats.converged,
            "components": self.component_curves.iter().map(|c| json!({
                "temperature_k": c.temperature,
                "gamma0_ev": c.constant,
                "linear_ev": c.linear,
                "quintic_ev": c.quintic,
            })).collect::<Vec<_>>(),
        })
    }
}

struct Candidate {
    coef: [f64; 3],
    sigma: [f64; 3],
    chi2: f64,
}

/// Weighted least squares restricted to the columns in `active`.
fn solve_subset(cols: &[Vec<f64>; 3], y: &[f64], w: &[f64], active: &[usize]) -> Option<Candidate> {
    let n = y.len();
    // column scaling keeps T⁵ from dominating the conditioning
    let scale: Vec<f64> = active
        .iter()
        .map(|&c| {
            let s = (0..n).map(|i| (cols[c][i] * w[i]).powi(2)).sum::<f64>().sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let a = DMatrix::from_fn(n, active.len(), |i, j| cols[active[j]][i] * w[i] / scale[j]);
    let b = DVector::from_fn(n, |i, _| y[i] * w[i]);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).ok()?;
    let ata_inv = crate::lsq::pseudo_inverse_normal(&a);
    let mut coef = [0.0; 3];
    let mut sigma = [0.0; 3];
    for (j, &c) in active.iter().enumerate() {
        coef[c] = x[j] / scale[j];
        sigma[c] = ata_inv[(j, j)].max(0.0).sqrt() / scale[j];
    }
    let chi2 = (&a * &x - &b).norm_squared();
    Some(Candidate { coef, sigma, chi2 })
}

/// Weighted fit of Γ₀ + aT + bT⁵ with a, b ≥ 0.
///
/// The bound-constrained problem is solved exactly by enumerating the four
/// active sets and keeping the feasible minimum. With `irf` set, each input
/// width is IRF-corrected first.
pub fn fit_temperature_broadening(
    points: &[(f64, f64, f64)],
    irf: Option<(f64, IrfMethod)>,
) -> Result<TemperatureBroadeningFit, PhotophysicsError> {
    if points.len() < 4 {
        return Err(PhotophysicsError::TooFewPoints { need: 4, got: points.len() });
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0)) {
        return Err(PhotophysicsError::NonPositiveInput(format!("temperature = {}", p.0)));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(PhotophysicsError::NegativeWidthInput(p.1));
    }
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut y = Vec::with_capacity(points.len());
    let mut sig = Vec::with_capacity(points.len());
    for &(_, raw, s) in points {
        match irf {
            Some((irf_fwhm, method)) => {
                let c = correct_irf(raw, irf_fwhm, method)?;
                let ds = match method {
                    IrfMethod::Linear => 1.0,
                    IrfMethod::Quadrature => raw / c,
                };
                y.push(c);
                sig.push(s * ds);
            }
            None => {
                y.push(raw);
                sig.push(s);
            }
        }
    }
    let w = super::weights(&sig);
    let cols = [vec![1.0; t.len()], t.clone(), t.iter().map(|v| v.powi(5)).collect()];

    let best = [&[0usize, 1, 2][..], &[0, 1], &[0, 2], &[0]]
        .iter()
        .filter_map(|active| solve_subset(&cols, &y, &w, active))
        .filter(|c| c.coef[1] >= 0.0 && c.coef[2] >= 0.0)
        .min_by(|a, b| a.chi2.total_cmp(&b.chi2))
        .ok_or_else(|| PhotophysicsError::InvalidInput("temperature fit is singular".into()))?;

    let [gamma0, a, b] = best.coef;
    if !(gamma0 > 0.0) {
        return Err(PhotophysicsError::InvalidInput(format!("fitted Γ₀ = {gamma0:e} eV is not positive")));
    }
    let n_free = 1 + usize::from(a > 0.0) + usize::from(b > 0.0);
    let component_curves = t
        .iter()
        .map(|&ti| ComponentPoint { temperature: ti, constant: gamma0, linear: a * ti, quintic: b * ti.powi(5) })
        .collect();
    Ok(TemperatureBroadeningFit {
        gamma0,
        gamma0_sigma: best.sigma[0],
        a,
        a_sigma: best.sigma[1],
        b,
        b_sigma: best.sigma[2],
        a_at_bound: a == 0.0,
        b_at_bound: b == 0.0,
        widths: y,
        component_curves,
        stats: FitStats::exact(best.chi2, t.len(), n_free),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: [f64; 8] = [4.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];

    #[test]
    fn recovers_exact_model() {
        let (g0, a, b) = (53.3e-6, 2.0e-7, 4.0e-13);
        let pts: Vec<_> = TS.iter().map(|&t| (t, temperature_broadening(t, g0, a, b), 1e-6)).collect();
        let f = fit_temperature_broadening(&pts, None).unwrap();
        assert!((f.gamma0 / g0 - 1.0).abs() < 1e-9);
        assert!((f.a / a - 1.0).abs() < 1e-8);
        assert!((f.b / b - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_width_pins_both_slopes() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, 1e-4, 1e-6)).collect();
        let f = fit_temperature_broadening(&pts, None).unwrap();
        assert!(f.a.abs() < 1e-18 && f.b.abs() < 1e-25);
        assert!((f.gamma0 - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn irf_correction_shifts_constant() {
        let pts: Vec<_> = TS.iter().map(|&t| (t, temperature_broadening(t, 97.3e-6, 1e-7, 1e-13), 1e-6)).collect();
        let f = fit_temperature_broadening(&pts, Some((44.0e-6, IrfMethod::Linear))).unwrap();
        assert!((f.gamma0 - 53.3e-6).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut pts: Vec<_> = TS.iter().map(|&t| (t, 1e-4, 1e-6)).collect();
        pts[2].1 = -1e-5;
        assert!(matches!(fit_temperature_broadening(&pts, None), Err(PhotophysicsError::NegativeWidthInput(_))));
        assert!(matches!(fit_temperature_broadening(&pts[..3], None), Err(PhotophysicsError::TooFewPoints { .. })));
    }
}
