use serde_json::json;

use super::{linear_regression, run, transformed_sigmas, weights, CurveProblem, FitStats, PartialFit, PhotophysicsError};

const MIN_DECAY_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeFit {
    /// ns.
    pub tau: f64,
    pub tau_sigma: f64,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub baseline: f64,
    pub baseline_sigma: f64,
    pub stats: FitStats,
}

impl LifetimeFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.baseline + self.amplitude * (-t / self.tau).exp()
    }

    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "model": "lifetime",
            "tau_ns": self.tau,
            "tau_sigma_ns": self.tau_sigma,
            "amplitude_counts": self.amplitude,
            "amplitude_sigma_counts": self.amplitude_sigma,
            "baseline_counts": self.baseline,
            "baseline_sigma_counts": self.baseline_sigma,
            "chi2_reduced": self.stats.chi2_reduced,
            "converged": self.stats.converged,
            "iterations": self.stats.iterations,
        })
    }
}

/// Fits baseline + A·e^{−t/τ} to the t ≥ 0 part of a peak-aligned trace.
pub fn fit_lifetime(trace: &[(f64, f64, f64)]) -> Result<LifetimeFit, PhotophysicsError> {
    let decay: Vec<&(f64, f64, f64)> = trace.iter().filter(|p| p.0 >= 0.0).collect();
    if decay.len() < MIN_DECAY_POINTS {
        return Err(PhotophysicsError::TooFewPoints { need: MIN_DECAY_POINTS, got: decay.len() });
    }
    let x: Vec<f64> = decay.iter().map(|p| p.0).collect();
    let y: Vec<f64> = decay.iter().map(|p| p.1).collect();
    let w = weights(&decay.iter().map(|p| p.2).collect::<Vec<_>>());
    if y.iter().all(|v| *v == 0.0) {
        return Err(PhotophysicsError::AllZeroIntensity);
    }

    // baseline from the latest tenth, τ from a log-linear regression above it
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let tail = (x.len() / 10).max(1);
    let b0 = order[x.len() - tail..].iter().map(|&i| y[i]).sum::<f64>() / tail as f64;
    let (mut lx, mut ly, mut lw) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..x.len() {
        let d = y[i] - b0;
        if d > 0.0 {
            lx.push(x[i]);
            ly.push(d.ln());
            lw.push((w[i] * d).powi(2));
        }
    }
    let tspan = x.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (a0, tau0) = match linear_regression(&lx, &ly, &lw) {
        Some((c0, c1)) if c1 < 0.0 => (c0.exp(), -1.0 / c1),
        _ => (y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - b0, tspan / 3.0),
    };
    let problem = CurveProblem {
        x: &x,
        y: &y,
        w: &w,
        n_params: 3,
        f: |p: &[f64], t: f64| p[2] + p[1] * (-t / p[0].exp()).exp(),
    };
    let r = run(&problem, &[tau0.ln(), a0, b0], x.len());
    let tau = r.params[0].exp();
    let sd = transformed_sigmas(&r, &[tau, 1.0, 1.0]);
    let fit = LifetimeFit {
        tau,
        tau_sigma: sd[0],
        amplitude: r.params[1],
        amplitude_sigma: sd[1],
        baseline: r.params[2],
        baseline_sigma: sd[2],
        stats: FitStats::from_result(&r, x.len(), 3),
    };
    if !fit.stats.converged {
        return Err(PhotophysicsError::NonConvergence(Box::new(PartialFit::Lifetime(fit))));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_exponential() {
        let pts: Vec<_> = (-10..200)
            .map(|i| {
                let t = i as f64 * 0.05;
                let c = if t < 0.0 { 20.0 } else { 20.0 + 1e4 * (-t / 1.74).exp() };
                (t, c, c.sqrt())
            })
            .collect();
        let f = fit_lifetime(&pts).unwrap();
        assert!((f.tau / 1.74 - 1.0).abs() < 1e-6);
        assert!((f.evaluate(f.tau) - (f.amplitude / std::f64::consts::E + f.baseline)).abs() < 1e-9);
    }

    #[test]
    fn too_few_decay_points() {
        let pts: Vec<_> = (-10..5).map(|i| (i as f64, 1.0, 1.0)).collect();
        assert!(matches!(fit_lifetime(&pts), Err(PhotophysicsError::TooFewPoints { .. })));
    }
}
