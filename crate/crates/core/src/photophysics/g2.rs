use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{run, weights, CurveProblem, FitStats, PartialFit, PhotophysicsError};
use crate::numeric::{erfc, erfcx, median};

const MIN_BINS: usize = 7;
const ASYMPTOTE_TOLERANCE: f64 = 0.2;
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Options {
    /// Gaussian timing-jitter FWHM in ns; the model is convolved with it.
    pub irf_fwhm_ns: Option<f64>,
    /// Fit a normalization factor instead of assuming an asymptote of 1.
    pub normalize: bool,
    /// Drop bins with |τ| below one bin width; only applies without an IRF.
    pub exclude_center: bool,
}

impl Default for G2Options {
    fn default() -> Self {
        Self { irf_fwhm_ns: None, normalize: false, exclude_center: true }
    }
}

/// e^{−|τ|/τ₀} convolved with a unit-area Gaussian of standard deviation σ.
fn convolved_exp(tau: f64, tau0: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (-tau.abs() / tau0).exp();
    }
    let half = |t: f64| {
        let z = (sigma / tau0 - t / sigma) / std::f64::consts::SQRT_2;
        if z >= 0.0 {
            (-0.5 * (t / sigma).powi(2)).exp() * erfcx(z)
        } else {
            (0.5 * (sigma / tau0).powi(2) - t / tau0).exp() * erfc(z)
        }
    };
    0.5 * (half(tau) + half(-tau))
}

/// norm·[1 − α·(e^{−|τ|/τ₀} ⊗ IRF)](τ); `irf_fwhm` ≤ 0 gives the bare model.
pub fn g2_model(tau: f64, alpha: f64, tau0: f64, irf_fwhm: f64, norm: f64) -> f64 {
    norm * (1.0 - alpha * convolved_exp(tau, tau0, irf_fwhm.max(0.0) / FWHM_PER_SIGMA))
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Fit {
    pub alpha: f64,
    pub alpha_sigma: f64,
    /// ns.
    pub tau0: f64,
    pub tau0_sigma: f64,
    pub norm: f64,
    pub norm_sigma: f64,
    /// Dip of the fitted model as measured (IRF-convolved when an IRF is set).
    pub g2_zero_raw: f64,
    /// 1 − α when an IRF was deconvolved.
    pub g2_zero_irf: Option<f64>,
    /// 1σ of 1 − α.
    pub g2_zero_sigma: f64,
    pub irf_fwhm_ns: Option<f64>,
    pub n_bins_used: usize,
    pub stats: FitStats,
}

impl G2Fit {
    /// Fitted model including normalization and IRF.
    pub fn evaluate(&self, tau: f64) -> f64 {
        g2_model(tau, self.alpha, self.tau0, self.irf_fwhm_ns.unwrap_or(0.0), self.norm)
    }

    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "model": "g2",
            "alpha": self.alpha,
            "alpha_sigma": self.alpha_sigma,
            "tau0_ns": self.tau0,
            "tau0_sigma_ns": self.tau0_sigma,
            "norm": self.norm,
            "norm_sigma": self.norm_sigma,
            "g2_zero_raw": self.g2_zero_raw,
            "g2_zero_irf": self.g2_zero_irf,
            "g2_zero_sigma": self.g2_zero_sigma,
            "irf_fwhm_ns": self.irf_fwhm_ns,
            "n_bins_used": self.n_bins_used,
            "chi2_reduced": self.stats.chi2_reduced,
            "converged": self.stats.converged,
            "iterations": self.stats.iterations,
        })
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits 1 − α·e^{−|τ|/τ₀} to a coincidence histogram of (τ ns, g², σ).
pub fn fit_g2(histogram: &[(f64, f64, f64)], options: &G2Options) -> Result<G2Fit, PhotophysicsError> {
    if histogram.len() < MIN_BINS {
        return Err(PhotophysicsError::TooFewPoints { need: MIN_BINS, got: histogram.len() });
    }
    let irf = match options.irf_fwhm_ns {
        Some(f) if !(f > 0.0) => return Err(PhotophysicsError::NonPositiveInput(format!("irf_fwhm_ns = {f}"))),
        other => other,
    };
    let mut taus: Vec<f64> = histogram.iter().map(|h| h.0).collect();
    taus.sort_by(f64::total_cmp);
    let diffs: Vec<f64> = taus.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    if diffs.is_empty() {
        return Err(PhotophysicsError::InvalidInput("histogram has no distinct delays".into()));
    }
    let bin = median(&diffs);

    // asymptote from the outermost fifth of |τ|
    let tmax = histogram.iter().map(|h| h.0.abs()).fold(0.0, f64::max);
    let outer: Vec<f64> = histogram.iter().filter(|h| h.0.abs() >= 0.8 * tmax).map(|h| h.1).collect();
    let asymptote = outer.iter().sum::<f64>() / outer.len() as f64;
    if !options.normalize && (asymptote - 1.0).abs() > ASYMPTOTE_TOLERANCE {
        return Err(PhotophysicsError::UnnormalizedHistogram { asymptote });
    }

    let used: Vec<&(f64, f64, f64)> = histogram
        .iter()
        .filter(|h| irf.is_some() || !options.exclude_center || h.0.abs() >= bin * (1.0 - 1e-9))
        .collect();
    if used.len() < MIN_BINS {
        return Err(PhotophysicsError::TooFewPoints { need: MIN_BINS, got: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|h| h.0).collect();
    let y: Vec<f64> = used.iter().map(|h| h.1).collect();
    let w = weights(&used.iter().map(|h| h.2).collect::<Vec<_>>());

    let norm0 = if options.normalize { asymptote.max(f64::MIN_POSITIVE) } else { 1.0 };
    let gmin = histogram.iter().map(|h| h.1).fold(f64::INFINITY, f64::min) / norm0;
    let alpha0 = (1.0 - gmin).clamp(0.05, 0.95);
    // first moment of the dip estimates τ₀
    let (mut m0, mut m1) = (0.0, 0.0);
    for h in histogram {
        let d = (1.0 - h.1 / norm0).max(0.0);
        m0 += d;
        m1 += d * h.0.abs();
    }
    let tau_init = if m0 > 0.0 { (m1 / m0).max(0.5 * bin) } else { bin };

    let irf_fwhm = irf.unwrap_or(0.0);
    let normalize = options.normalize;
    let problem = CurveProblem {
        x: &x,
        y: &y,
        w: &w,
        n_params: if normalize { 3 } else { 2 },
        f: move |p: &[f64], t: f64| {
            let norm = if normalize { p[2].exp() } else { 1.0 };
            g2_model(t, logistic(p[0]), p[1].exp(), irf_fwhm, norm)
        },
    };
    let mut start = vec![(alpha0 / (1.0 - alpha0)).ln(), tau_init.ln()];
    if normalize {
        start.push(norm0.ln());
    }
    let n_params = start.len();
    let r = run(&problem, &start, x.len());

    let alpha = logistic(r.params[0]);
    let tau0 = r.params[1].exp();
    let norm = if normalize { r.params[2].exp() } else { 1.0 };
    let cov = |i: usize| r.covariance[(i, i)].max(0.0).sqrt();
    let da = alpha * (1.0 - alpha);
    let alpha_sigma = cov(0) * da;
    let tau0_sigma = cov(1) * tau0;
    let norm_sigma = if normalize { cov(2) * norm } else { 0.0 };

    let (g2_zero_raw, g2_zero_irf) = match irf {
        Some(f) => (1.0 - alpha * convolved_exp(0.0, tau0, f / FWHM_PER_SIGMA), Some(1.0 - alpha)),
        None => (1.0 - alpha, None),
    };

    let fit = G2Fit {
        alpha,
        alpha_sigma,
        tau0,
        tau0_sigma,
        norm,
        norm_sigma,
        g2_zero_raw,
        g2_zero_irf,
        g2_zero_sigma: alpha_sigma,
        irf_fwhm_ns: irf,
        n_bins_used: x.len(),
        stats: FitStats::from_result(&r, x.len(), n_params),
    };
    if !fit.stats.converged {
        return Err(PhotophysicsError::NonConvergence(Box::new(PartialFit::G2(fit))));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taus() -> Vec<f64> {
        (-40..=40).map(|i| i as f64 * 0.25).collect()
    }

    /// Direct quadrature of the convolution integral.
    fn convolved_oracle(tau: f64, tau0: f64, sigma: f64) -> f64 {
        let n = 200_000;
        let (lo, hi) = (-12.0 * sigma, 12.0 * sigma);
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let u = lo + (i as f64 + 0.5) * h;
                (-(tau - u).abs() / tau0).exp() * (-0.5 * (u / sigma).powi(2)).exp()
            })
            .sum::<f64>()
            * h
            / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &(tau, tau0, sigma) in &[(0.0, 1.0, 0.3), (0.7, 1.0, 0.3), (-2.0, 0.5, 0.8), (5.0, 2.0, 0.05), (0.0, 0.3, 3.0)] {
            let a = convolved_exp(tau, tau0, sigma);
            let b = convolved_oracle(tau, tau0, sigma);
            assert!((a - b).abs() < 1e-8, "{tau} {tau0} {sigma}: {a} vs {b}");
        }
    }

    #[test]
    fn exact_model_dip() {
        let h: Vec<_> = taus().into_iter().map(|t| (t, g2_model(t, 0.77, 1.2, 0.0, 1.0), 0.01)).collect();
        let f = fit_g2(&h, &G2Options::default()).unwrap();
        assert!((f.g2_zero_raw - 0.23).abs() < 1e-6);
        assert!((f.evaluate(1e4) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn irf_deconvolution() {
        let h: Vec<_> = taus().into_iter().map(|t| (t, g2_model(t, 0.82, 1.5, 0.5, 1.0), 0.01)).collect();
        let opts = G2Options { irf_fwhm_ns: Some(0.5), ..G2Options::default() };
        let f = fit_g2(&h, &opts).unwrap();
        assert!((f.g2_zero_irf.unwrap() - 0.18).abs() < 1e-6);
        assert!(f.g2_zero_raw > 0.18);
    }

    #[test]
    fn unnormalized_histogram() {
        let h: Vec<_> = taus().into_iter().map(|t| (t, 3.0 * g2_model(t, 0.6, 1.0, 0.0, 1.0), 0.03)).collect();
        assert!(matches!(fit_g2(&h, &G2Options::default()), Err(PhotophysicsError::UnnormalizedHistogram { .. })));
        let f = fit_g2(&h, &G2Options { normalize: true, ..G2Options::default() }).unwrap();
        assert!((f.norm - 3.0).abs() < 1e-6 && (f.alpha - 0.6).abs() < 1e-6);
    }
}
