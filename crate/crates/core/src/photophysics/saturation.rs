use serde_json::json;

use super::{linear_regression, run, transformed_sigmas, weights, CurveProblem, FitStats, PartialFit, PhotophysicsError};

/// I(P) = I_sat·P/(P + P_sat) + c·P.
pub fn saturation_model(p: f64, i_sat: f64, p_sat: f64, background_slope: f64) -> f64 {
    i_sat * p / (p + p_sat) + background_slope * p
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationFit {
    /// counts/s.
    pub i_sat: f64,
    pub i_sat_sigma: f64,
    /// Same unit as the input powers.
    pub p_sat: f64,
    pub p_sat_sigma: f64,
    /// Present when the linear background term was fitted.
    pub background_slope: Option<f64>,
    pub background_slope_sigma: Option<f64>,
    pub stats: FitStats,
}

impl SaturationFit {
    pub fn evaluate(&self, p: f64) -> f64 {
        saturation_model(p, self.i_sat, self.p_sat, self.background_slope.unwrap_or(0.0))
    }

    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "model": "saturation",
            "i_sat_counts_per_s": self.i_sat,
            "i_sat_sigma_counts_per_s": self.i_sat_sigma,
            "p_sat": self.p_sat,
            "p_sat_sigma": self.p_sat_sigma,
            "background_slope_counts_per_s_per_power": self.background_slope,
            "background_slope_sigma_counts_per_s_per_power": self.background_slope_sigma,
            "chi2_reduced": self.stats.chi2_reduced,
            "converged": self.stats.converged,
            "iterations": self.stats.iterations,
        })
    }
}

/// Weighted saturation fit, optionally with a linear background c·P.
pub fn fit_saturation(points: &[(f64, f64, f64)], background: bool) -> Result<SaturationFit, PhotophysicsError> {
    let n_params = if background { 3 } else { 2 };
    if points.len() < n_params + 1 {
        return Err(PhotophysicsError::TooFewPoints { need: n_params + 1, got: points.len() });
    }
    if points.iter().all(|p| p.1 == 0.0) {
        return Err(PhotophysicsError::AllZeroIntensity);
    }
    if let Some(p) = points.iter().find(|p| !(p.0 >= 0.0)) {
        return Err(PhotophysicsError::NonPositiveInput(format!("power = {}", p.0)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w = weights(&points.iter().map(|p| p.2).collect::<Vec<_>>());

    // 1/I = 1/I_sat + (P_sat/I_sat)·(1/P)
    let (mut rx, mut ry, mut rw) = (Vec::new(), Vec::new(), Vec::new());
    for ((&p, &i), &wi) in x.iter().zip(&y).zip(&w) {
        if p > 0.0 && i > 0.0 {
            rx.push(1.0 / p);
            ry.push(1.0 / i);
            rw.push((wi * i * i).powi(2));
        }
    }
    let pmax = x.iter().cloned().fold(0.0, f64::max);
    let imax = y.iter().cloned().fold(0.0, f64::max);
    let (i0, p0) = match linear_regression(&rx, &ry, &rw) {
        Some((c0, c1)) if c0 > 0.0 && c1 > 0.0 => (1.0 / c0, c1 / c0),
        _ => (2.0 * imax, pmax.max(f64::MIN_POSITIVE)),
    };
    let problem = CurveProblem {
        x: &x,
        y: &y,
        w: &w,
        n_params,
        f: |q: &[f64], pw: f64| saturation_model(pw, q[0].exp(), q[1].exp(), if q.len() > 2 { q[2] } else { 0.0 }),
    };
    let mut start = vec![i0.ln(), p0.ln()];
    if background {
        start.push(0.0);
    }
    let r = run(&problem, &start, x.len());
    let (i_sat, p_sat) = (r.params[0].exp(), r.params[1].exp());
    let mut d = vec![i_sat, p_sat];
    if background {
        d.push(1.0);
    }
    let sd = transformed_sigmas(&r, &d);
    let fit = SaturationFit {
        i_sat,
        i_sat_sigma: sd[0],
        p_sat,
        p_sat_sigma: sd[1],
        background_slope: background.then(|| r.params[2]),
        background_slope_sigma: background.then(|| sd[2]),
        stats: FitStats::from_result(&r, x.len(), n_params),
    };
    if !fit.stats.converged {
        return Err(PhotophysicsError::NonConvergence(Box::new(PartialFit::Saturation(fit))));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: [f64; 8] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0];

    #[test]
    fn model_limits() {
        assert_eq!(saturation_model(1.1, 0.82e6, 1.1, 0.0), 0.41e6);
        let h = 1e-9;
        let slope = saturation_model(h, 0.82e6, 1.1, 0.0) / h;
        assert!((slope / (0.82e6 / 1.1) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn recovers_exact_samples() {
        let pts: Vec<_> = P.iter().map(|&p| (p, saturation_model(p, 0.82e6, 1.1, 0.0), 1e3)).collect();
        let f = fit_saturation(&pts, false).unwrap();
        assert!((f.i_sat / 0.82e6 - 1.0).abs() < 1e-6);
        assert!((f.p_sat / 1.1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_background_slope() {
        let pts: Vec<_> = P.iter().map(|&p| (p, saturation_model(p, 0.82e6, 1.1, 2.0e4), 1e3)).collect();
        let f = fit_saturation(&pts, true).unwrap();
        assert!((f.p_sat / 1.1 - 1.0).abs() < 1e-5);
        assert!((f.background_slope.unwrap() / 2.0e4 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn all_zero_rejected() {
        let pts: Vec<_> = P.iter().map(|&p| (p, 0.0, 1.0)).collect();
        assert!(matches!(fit_saturation(&pts, false), Err(PhotophysicsError::AllZeroIntensity)));
    }
}
