//! Damped Gauss–Newton (Levenberg–Marquardt) least squares.
//!
//! Problems supply weighted residuals r_i = (model_i − data_i)/σ_i and their
//! Jacobian; the solver minimizes Σ r_i². Covariances are taken from the
//! normal matrix JᵀJ at the optimum via a scaled pseudo-inverse, so exactly
//! degenerate directions (gauge freedoms, parameters with no influence) get
//! zero variance instead of poisoning the rest of the matrix.

use nalgebra::{DMatrix, DVector};

/// A weighted nonlinear least-squares problem.
pub trait Problem {
    fn n_params(&self) -> usize;

    /// Weighted residuals at `p`.
    fn residuals(&self, p: &[f64]) -> Vec<f64>;

    /// Jacobian of [`Problem::residuals`], rows = residuals. The default uses
    /// [`finite_difference_jacobian`].
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        finite_difference_jacobian(|q| self.residuals(q), p)
    }

    /// Hook applied to every trial point, e.g. to fix a gauge freedom.
    fn normalize(&self, _p: &mut [f64]) {}

    /// Hook that may shorten a proposed step before it is evaluated.
    fn limit_step(&self, _p: &[f64], _step: &mut DVector<f64>) {}
}

/// Fourth-order central-difference Jacobian (five-point stencil) with a step
/// relative to each parameter.
pub fn finite_difference_jacobian<F>(f: F, p: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let r0 = f(p);
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    let mut q = p.to_vec();
    let eval = |q: &mut Vec<f64>, k: usize, x: f64| {
        q[k] = x;
        f(q)
    };
    for k in 0..p.len() {
        let h = 1e-3 * p[k].abs().max(1e-3);
        let rp = eval(&mut q, k, p[k] + h);
        let rm = eval(&mut q, k, p[k] - h);
        let rp2 = eval(&mut q, k, p[k] + 2.0 * h);
        let rm2 = eval(&mut q, k, p[k] - 2.0 * h);
        q[k] = p[k];
        for i in 0..r0.len() {
            jac[(i, k)] = (8.0 * (rp[i] - rm[i]) - (rp2[i] - rm2[i])) / (12.0 * h);
        }
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when the actual and predicted relative cost decrease of an accepted
    /// step both fall below this.
    pub rel_cost_tol: f64,
    /// Stop when ‖δ‖ < step_tol·(‖p‖ + step_tol).
    pub step_tol: f64,
    pub initial_damping: f64,
    /// Lower bound on the cost used as the denominator of the relative
    /// decrease. Setting it to the residual count makes changes far below one
    /// unit of χ² count as converged when the data are noiseless.
    pub cost_floor: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { max_iterations: 500, rel_cost_tol: 1e-10, step_tol: 1e-12, initial_damping: 1e-3, cost_floor: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RelativeCost,
    SmallStep,
    ZeroCost,
    /// Damping grew without finding a downhill step: a numerical minimum.
    DampingLimit,
    MaxIterations,
    NonFiniteStart,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations | Termination::NonFiniteStart)
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Σ r² at the optimum.
    pub cost: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Covariance of the internal parameters, (JᵀJ)⁺.
    pub covariance: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
}

impl LmResult {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }

    /// χ² per degree of freedom.
    pub fn chi2_reduced(&self) -> f64 {
        let dof = self.residuals.len().saturating_sub(self.params.len()).max(1);
        self.cost / dof as f64
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Runs Levenberg–Marquardt from `start`.
pub fn minimize<P: Problem + ?Sized>(problem: &P, start: &[f64], cfg: &LmConfig) -> LmResult {
    let n = problem.n_params();
    let mut p = start.to_vec();
    problem.normalize(&mut p);
    let mut r = problem.residuals(&p);
    let mut cost = sum_sq(&r);
    let mut lambda = cfg.initial_damping;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut termination = if cost.is_finite() { Termination::MaxIterations } else { Termination::NonFiniteStart };

    if cost.is_finite() {
        'outer: while iterations < cfg.max_iterations {
            iterations += 1;
            if cost == 0.0 {
                termination = Termination::ZeroCost;
                break;
            }
            let jac = problem.jacobian(&p);
            let jtj = jac.tr_mul(&jac);
            let grad = jac.tr_mul(&DVector::from_column_slice(&r));
            let diag: Vec<f64> = (0..n).map(|k| jtj[(k, k)]).collect();
            let diag_max = diag.iter().cloned().fold(0.0, f64::max).max(1e-300);

            loop {
                let mut a = jtj.clone();
                for k in 0..n {
                    a[(k, k)] += lambda * diag[k].max(1e-12 * diag_max);
                }
                let mut step = match a.cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => {
                        lambda *= nu;
                        nu *= 2.0;
                        if lambda > 1e20 {
                            termination = Termination::DampingLimit;
                            break 'outer;
                        }
                        continue;
                    }
                };
                problem.limit_step(&p, &mut step);
                let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                problem.normalize(&mut trial);
                let r_trial = problem.residuals(&trial);
                let cost_trial = sum_sq(&r_trial);
                let step_norm = step.norm();
                let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();

                if cost_trial.is_finite() && cost_trial < cost {
                    let predicted = -(2.0 * step.dot(&grad) + (&jtj * &step).dot(&step));
                    let rho = if predicted > 0.0 { (cost - cost_trial) / predicted } else { 0.0 };
                    lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                    nu = 2.0;
                    let denom = cost.max(cfg.cost_floor);
                    let rel = (cost - cost_trial) / denom;
                    let predicted_rel = predicted / denom;
                    p = trial;
                    r = r_trial;
                    cost = cost_trial;
                    if rel < cfg.rel_cost_tol && predicted_rel < cfg.rel_cost_tol {
                        termination = Termination::RelativeCost;
                        break 'outer;
                    }
                    if step_norm < cfg.step_tol * (p_norm + cfg.step_tol) {
                        termination = Termination::SmallStep;
                        break 'outer;
                    }
                    break;
                }
                if step_norm < cfg.step_tol * (p_norm + cfg.step_tol) {
                    termination = Termination::SmallStep;
                    break 'outer;
                }
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e20 {
                    termination = Termination::DampingLimit;
                    break 'outer;
                }
            }
        }
    }

    let jacobian = problem.jacobian(&p);
    let covariance = pseudo_inverse_normal(&jacobian);
    LmResult { params: p, cost, residuals: r, iterations, termination, covariance, jacobian }
}

/// (JᵀJ)⁺ computed on the column-equilibrated matrix.
pub fn pseudo_inverse_normal(jac: &DMatrix<f64>) -> DMatrix<f64> {
    let n = jac.ncols();
    let jtj = jac.tr_mul(jac);
    let scale: Vec<f64> = (0..n)
        .map(|k| {
            let d = jtj[(k, k)];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut scaled = jtj.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-11 * smax;
    let pinv = match svd.pseudo_inverse(cutoff) {
        Ok(m) => m,
        Err(_) => DMatrix::zeros(n, n),
    };
    let mut cov = pinv;
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] *= scale[i] * scale[j];
        }
    }
    // symmetrize against rounding
    let t = cov.transpose();
    (cov + t) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ExpDecay {
        t: Vec<f64>,
        y: Vec<f64>,
        s: Vec<f64>,
    }

    impl Problem for ExpDecay {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64]) -> Vec<f64> {
            self.t
                .iter()
                .zip(&self.y)
                .zip(&self.s)
                .map(|((t, y), s)| (p[0] * (-t / p[1]).exp() - y) / s)
                .collect()
        }
    }

    #[test]
    fn recovers_exponential() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-t / 1.7).exp()).collect();
        let prob = ExpDecay { s: vec![0.01; 50], t, y };
        let res = minimize(&prob, &[1.0, 0.5], &LmConfig::default());
        assert!(res.converged());
        assert!((res.params[0] - 3.0).abs() < 1e-8);
        assert!((res.params[1] - 1.7).abs() < 1e-8);
    }

    #[test]
    fn linear_model_covariance_matches_closed_form() {
        // y = a + b x with unit sigmas: cov = (XᵀX)⁻¹
        struct Line(Vec<f64>, Vec<f64>);
        impl Problem for Line {
            fn n_params(&self) -> usize {
                2
            }
            fn residuals(&self, p: &[f64]) -> Vec<f64> {
                self.0.iter().zip(&self.1).map(|(x, y)| p[0] + p[1] * x - y).collect()
            }
        }
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 + 2.0 * x + if (*x as i32) % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let res = minimize(&Line(x.clone(), y), &[0.0, 0.0], &LmConfig::default());
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let det = n * sxx - sx * sx;
        assert!((res.covariance[(0, 0)] - sxx / det).abs() < 1e-10);
        assert!((res.covariance[(1, 1)] - n / det).abs() < 1e-10);
        assert!((res.covariance[(0, 1)] + sx / det).abs() < 1e-10);
    }

    #[test]
    fn degenerate_direction_gets_zero_variance_not_nan() {
        // model depends only on p0 + p1
        struct Sum;
        impl Problem for Sum {
            fn n_params(&self) -> usize {
                3
            }
            fn residuals(&self, p: &[f64]) -> Vec<f64> {
                (0..5).map(|i| p[0] + p[1] + p[2] * i as f64 - (2.0 + i as f64)).collect()
            }
        }
        let res = minimize(&Sum, &[0.0, 0.0, 0.0], &LmConfig::default());
        assert!(res.converged());
        assert!(res.covariance.iter().all(|v| v.is_finite()));
        // the estimable combination p0 + p1 has the ordinary variance
        let var_sum = res.covariance[(0, 0)] + res.covariance[(1, 1)] + 2.0 * res.covariance[(0, 1)];
        // closed form for intercept of a 5-point unit-weight line: Σx²/(nΣx² − (Σx)²) = 30/50
        assert!((var_sum - 0.6).abs() < 1e-8);
    }
}
