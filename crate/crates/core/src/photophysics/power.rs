use serde_json::json;

use super::{linear_regression, run, transformed_sigmas, weights, CurveProblem, FitStats, PartialFit, PhotophysicsError};

/// Minimum max/min ratio of the sampled powers.
pub const MIN_POWER_SPAN: f64 = 3.0;

/// Γ(P) = Γ₀·√(1 + P/P₀).
pub fn power_broadening(p: f64, gamma0: f64, p0: f64) -> f64 {
    gamma0 * (1.0 + p / p0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerBroadeningFit {
    /// eV.
    pub gamma0: f64,
    pub gamma0_sigma: f64,
    /// Same unit as the input powers.
    pub p0: f64,
    pub p0_sigma: f64,
    pub stats: FitStats,
}

impl PowerBroadeningFit {
    pub fn evaluate(&self, p: f64) -> f64 {
        power_broadening(p, self.gamma0, self.p0)
    }

    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "model": "power_broadening",
            "gamma0_ev": self.gamma0,
            "gamma0_sigma_ev": self.gamma0_sigma,
            "p0": self.p0,
            "p0_sigma": self.p0_sigma,
            "chi2_reduced": self.stats.chi2_reduced,
            "converged": self.stats.converged,
            "iterations": self.stats.iterations,
        })
    }
}

/// Weighted fit of Γ = Γ₀√(1 + P/P₀) to (power, FWHM, σ) points.
pub fn fit_power_broadening(points: &[(f64, f64, f64)]) -> Result<PowerBroadeningFit, PhotophysicsError> {
    if points.len() < 3 {
        return Err(PhotophysicsError::TooFewPoints { need: 3, got: points.len() });
    }
    if let Some(p) = points.iter().find(|p| !(p.0 >= 0.0)) {
        return Err(PhotophysicsError::NonPositiveInput(format!("power = {}", p.0)));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(PhotophysicsError::NegativeWidthInput(p.1));
    }
    let pmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let pmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let ratio = if pmin > 0.0 { pmax / pmin } else if pmax > 0.0 { f64::INFINITY } else { 1.0 };
    if ratio < MIN_POWER_SPAN {
        return Err(PhotophysicsError::InsufficientSpan { ratio, need: MIN_POWER_SPAN });
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w = weights(&points.iter().map(|p| p.2).collect::<Vec<_>>());

    // Γ² = Γ₀² + (Γ₀²/P₀)·P is linear in P
    let y2: Vec<f64> = y.iter().map(|v| v * v).collect();
    let w2: Vec<f64> = y.iter().zip(&w).map(|(v, wi)| (wi / (2.0 * v)).powi(2)).collect();
    let (gamma0_init, p0_init) = match linear_regression(&x, &y2, &w2) {
        Some((c0, c1)) if c0 > 0.0 && c1 > 0.0 => (c0.sqrt(), c0 / c1),
        _ => {
            let g = y.iter().cloned().fold(f64::INFINITY, f64::min);
            (g, pmax.max(1e-300))
        }
    };
    let problem = CurveProblem {
        x: &x,
        y: &y,
        w: &w,
        n_params: 2,
        f: |p: &[f64], pw: f64| power_broadening(pw, p[0].exp(), p[1].exp()),
    };
    let r = run(&problem, &[gamma0_init.ln(), p0_init.ln()], x.len());
    let (gamma0, p0) = (r.params[0].exp(), r.params[1].exp());
    let sd = transformed_sigmas(&r, &[gamma0, p0]);
    let fit = PowerBroadeningFit {
        gamma0,
        gamma0_sigma: sd[0],
        p0,
        p0_sigma: sd[1],
        stats: FitStats::from_result(&r, x.len(), 2),
    };
    if !fit.stats.converged {
        return Err(PhotophysicsError::NonConvergence(Box::new(PartialFit::Power(fit))));
    }
    Ok(fit)
}
