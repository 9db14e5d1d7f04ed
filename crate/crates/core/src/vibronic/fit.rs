//! Weighted least-squares inversion of the vibronic model.
//!
//! Internal parameters are the ZPL shift δ = E_ZPL − e_zpl_hint, ln Γ (when
//! free), v with S_HR = v², a linear amplitude a, and u_k with S(E_k) = u_k².
//! The data lineshape carries an arbitrary overall scale, so the model fitted
//! is a·L(ΔE). The psf scale is not identifiable (I₁ is normalized), which the
//! fit removes by rescaling u to Σu² = N after every step; reported psf values
//! are scaled so that ∫S(E)dE = S_HR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::distribution::{
    auto_n_max, poisson_weights, Distribution, NMax, OnePhononBasis, DEFAULT_OVERSAMPLE, DEFAULT_TAIL_TOLERANCE,
    N_MAX_CAP,
};
use super::model::{dot_window, kernel_row, ModelNumerics, VibronicModel, VibronicParams};
use super::profile::{ZplProfile, ZplShape};
use super::psf::{PhononSpectralFunction, DEFAULT_DELTA_E, DEFAULT_E_MAX};
use super::VibronicError;
use crate::lsq::{self, LmConfig, Problem};
use crate::numeric::trapz;
use crate::spectra::Lineshape;

/// Smallest factor a square-root parameter may be scaled by in one step.
const MIN_SHRINK: f64 = 0.1;

/// Fit settings. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub delta_e_ev: f64,
    pub e_max_ev: f64,
    pub zpl_shape: ZplShape,
    pub n_max: NMax,
    /// Hold Γ_ZPL at this FWHM (eV) instead of fitting it.
    pub gamma_fixed_ev: Option<f64>,
    /// Half-width, in units of the initial Γ, of the window whose share of the
    /// total area seeds S_HR = −ln(share).
    pub zpl_window_fwhm: f64,
    /// Weight λ of the first-difference penalty λΣ(S_{i+1} − S_i)² on the
    /// psf in its internal normalization (mean value one).
    pub smoothness_lambda: f64,
    pub oversample: usize,
    pub zpl_support_ev: Option<f64>,
    pub tail_tolerance: f64,
    pub max_iterations: usize,
    pub rel_cost_tol: f64,
    pub step_tol: f64,
    pub e_zpl_init_ev: Option<f64>,
    pub gamma_init_ev: Option<f64>,
    pub s_hr_init: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            delta_e_ev: DEFAULT_DELTA_E,
            e_max_ev: DEFAULT_E_MAX,
            zpl_shape: ZplShape::Lorentzian,
            n_max: NMax::Auto,
            gamma_fixed_ev: None,
            zpl_window_fwhm: 3.0,
            smoothness_lambda: 0.0,
            oversample: DEFAULT_OVERSAMPLE,
            zpl_support_ev: None,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            max_iterations: 500,
            rel_cost_tol: 1e-10,
            step_tol: 1e-12,
            e_zpl_init_ev: None,
            gamma_init_ev: None,
            s_hr_init: None,
        }
    }
}

impl FitConfig {
    pub fn numerics(&self) -> ModelNumerics {
        ModelNumerics {
            oversample: self.oversample,
            zpl_support_ev: self.zpl_support_ev,
            tail_tolerance: self.tail_tolerance,
        }
    }

    fn lm(&self, n_data: usize) -> LmConfig {
        LmConfig {
            max_iterations: self.max_iterations,
            rel_cost_tol: self.rel_cost_tol,
            step_tol: self.step_tol,
            cost_floor: n_data as f64,
            ..LmConfig::default()
        }
    }

    fn validate(&self) -> Result<(), VibronicError> {
        PhononSpectralFunction::uniform(self.delta_e_ev, self.e_max_ev)?;
        if self.oversample == 0 {
            return Err(VibronicError::InvalidParameter("oversample must be ≥ 1".into()));
        }
        if let Some(g) = self.gamma_fixed_ev {
            if !(g > 0.0) {
                return Err(VibronicError::InvalidParameter(format!("gamma_fixed_ev must be > 0, got {g}")));
            }
        }
        if !(self.zpl_window_fwhm > 0.0) {
            return Err(VibronicError::InvalidParameter("zpl_window_fwhm must be > 0".into()));
        }
        if !(self.smoothness_lambda >= 0.0) {
            return Err(VibronicError::InvalidParameter("smoothness_lambda must be ≥ 0".into()));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(VibronicError::InvalidParameter("tail_tolerance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Starting point derived from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub e_zpl: f64,
    pub gamma: f64,
    pub s_hr: f64,
}

/// E_ZPL at the data maximum, Γ from the local FWHM and S_HR from the share of
/// the area inside ±k·Γ of the peak.
pub fn initial_guess(data: &Lineshape, config: &FitConfig) -> InitialGuess {
    let x = &data.delta_e;
    let y = &data.density;
    let ip = (0..y.len()).fold(0, |best, i| if y[i] > y[best] { i } else { best });
    let peak = y[ip];
    let half = 0.5 * peak;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = ip;
        for i in range {
            if y[i] <= half {
                let t = (y[prev] - half) / (y[prev] - y[i]);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..ip).rev());
    let right = crossing(&mut (ip + 1..y.len()));
    let min_spacing = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (x[ip] - l),
        (None, Some(r)) => 2.0 * (r - x[ip]),
        (None, None) => 4.0 * min_spacing,
    };
    let gamma = config
        .gamma_fixed_ev
        .or(config.gamma_init_ev)
        .unwrap_or_else(|| fwhm.max(min_spacing));
    let e_zpl = config.e_zpl_init_ev.unwrap_or(data.e_zpl_hint - x[ip]);
    let s_hr = config.s_hr_init.unwrap_or_else(|| {
        let total = trapz(x, y);
        let w = config.zpl_window_fwhm * gamma;
        let (lo, hi) = (x[ip] - w, x[ip] + w);
        let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= lo && x[i] <= hi).collect();
        let inner = if idx.len() >= 2 {
            let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            trapz(&xs, &ys)
        } else {
            peak * 2.0 * w
        };
        let share = if total > 0.0 { inner / total } else { 1.0 };
        (-share.clamp(1e-4, 1.0).ln()).clamp(0.02, 8.0)
    });
    InitialGuess { e_zpl, gamma, s_hr }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    shift: usize,
    gamma: Option<usize>,
    v: usize,
    amp: usize,
    u0: usize,
    n_nodes: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.u0 + self.n_nodes
    }
}

/// Everything derived from one parameter vector.
struct State {
    shift: f64,
    gamma: f64,
    amp: f64,
    v: f64,
    s_hr: f64,
    u: Vec<f64>,
    s: Vec<f64>,
    z: f64,
    profile: ZplProfile,
    weights: Vec<f64>,
    /// I₁..I_{n_max}.
    orders: Vec<Distribution>,
    /// Σ wₙIₙ on the lattice (offset = −n_max·half).
    total: Vec<f64>,
    offset: i64,
}

/// Weighted residuals of a·L(ΔE + δ) against a data lineshape, with an analytic Jacobian.
pub struct VibronicObjective {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    hint: f64,
    delta_e: f64,
    e_max: f64,
    shape: ZplShape,
    support: f64,
    n_max: usize,
    gamma_fixed: Option<f64>,
    sqrt_lambda: f64,
    basis: OnePhononBasis,
    layout: Layout,
}

impl VibronicObjective {
    /// Builds the objective with a fixed phonon-order count `n_max` (≥ 1).
    pub fn new(data: &Lineshape, config: &FitConfig, t_k: f64, n_max: usize) -> Result<Self, VibronicError> {
        config.validate()?;
        if !(t_k > 0.0) {
            return Err(VibronicError::NonPositiveTemperature(t_k));
        }
        let psf = PhononSpectralFunction::uniform(config.delta_e_ev, config.e_max_ev)?;
        let basis = OnePhononBasis::new(&psf, t_k, config.oversample)?;
        let n_nodes = psf.len();
        let gamma_idx = if config.gamma_fixed_ev.is_some() { None } else { Some(1) };
        let v = if gamma_idx.is_some() { 2 } else { 1 };
        let layout = Layout { shift: 0, gamma: gamma_idx, v, amp: v + 1, u0: v + 2, n_nodes };
        let positive: Vec<f64> = data.sigma.iter().cloned().filter(|s| *s > 0.0).collect();
        let floor = positive.iter().cloned().fold(f64::INFINITY, f64::min);
        let w = data
            .sigma
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else if floor.is_finite() { 1.0 / floor } else { 1.0 })
            .collect();
        Ok(Self {
            x: data.delta_e.clone(),
            y: data.density.clone(),
            w,
            hint: data.e_zpl_hint,
            delta_e: config.delta_e_ev,
            e_max: config.e_max_ev,
            shape: config.zpl_shape,
            support: config.zpl_support_ev.unwrap_or(config.e_max_ev),
            n_max: n_max.clamp(1, N_MAX_CAP),
            gamma_fixed: config.gamma_fixed_ev,
            sqrt_lambda: config.smoothness_lambda.sqrt(),
            basis,
            layout,
        })
    }

    pub fn n_data(&self) -> usize {
        self.x.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn n_penalty(&self) -> usize {
        if self.sqrt_lambda > 0.0 {
            self.layout.n_nodes - 1
        } else {
            0
        }
    }

    /// Internal parameter vector for physical values; `psf` values are used up to scale.
    pub fn pack(&self, e_zpl: f64, gamma: f64, s_hr: f64, amplitude: f64, psf: &[f64]) -> Vec<f64> {
        let l = self.layout;
        let mut p = vec![0.0; l.len()];
        p[l.shift] = e_zpl - self.hint;
        if let Some(g) = l.gamma {
            p[g] = gamma.ln();
        }
        p[l.v] = s_hr.max(0.0).sqrt();
        p[l.amp] = amplitude;
        for (k, s) in psf.iter().enumerate() {
            p[l.u0 + k] = s.max(0.0).sqrt();
        }
        self.normalize(&mut p);
        p
    }

    /// Parameter names in internal order.
    pub fn parameter_names(&self) -> Vec<String> {
        let l = self.layout;
        let mut names = vec!["e_zpl_shift_ev".to_string()];
        if l.gamma.is_some() {
            names.push("ln_gamma_zpl".into());
        }
        names.push("sqrt_s_hr".into());
        names.push("amplitude".into());
        names.extend((0..l.n_nodes).map(|k| format!("sqrt_psf_{k}")));
        names
    }

    fn state(&self, p: &[f64]) -> State {
        let l = self.layout;
        let shift = p[l.shift];
        let gamma = match l.gamma {
            Some(g) => p[g].exp(),
            None => self.gamma_fixed.unwrap_or(1e-3),
        };
        let v = p[l.v];
        let s_hr = v * v;
        let u = p[l.u0..l.u0 + l.n_nodes].to_vec();
        let s: Vec<f64> = u.iter().map(|a| a * a).collect();
        let z = self.basis.normalizer(&s);
        let half = self.basis.half;
        let step = self.basis.step;
        let raw = self.basis.assemble(&s);
        let i1 = Distribution::new(step, -half, raw.iter().map(|r| r / z).collect())
            .unwrap_or_else(|_| Distribution::zeros(step, -half, raw.len()));
        let mut orders = Vec::with_capacity(self.n_max);
        orders.push(i1);
        for _ in 1..self.n_max {
            let next = orders[0].convolve(orders.last().expect("non-empty")).expect("common lattice");
            orders.push(next);
        }
        let weights = poisson_weights(s_hr, self.n_max);
        let offset = -(self.n_max as i64) * half;
        let len = (2 * self.n_max as i64 * half + 1) as usize;
        let mut total = vec![0.0; len];
        for (d, wn) in orders.iter().zip(&weights[1..]) {
            let shift_idx = (d.offset() - offset) as usize;
            for (t, v) in total[shift_idx..].iter_mut().zip(d.values()) {
                *t += wn * v;
            }
        }
        State {
            shift,
            gamma,
            amp: p[l.amp],
            v,
            s_hr,
            u,
            s,
            z,
            profile: ZplProfile::new(self.shape, gamma, self.support),
            weights,
            orders,
            total,
            offset,
        }
    }

    fn lattice_bounds(&self, st: &State) -> (i64, i64) {
        (st.offset, st.offset + st.total.len() as i64 - 1)
    }

    fn model_at(&self, st: &State, x: f64) -> f64 {
        let (j_min, j_max) = self.lattice_bounds(st);
        let row = kernel_row(&st.profile, self.basis.step, x, j_min, j_max, false);
        st.weights[0] * st.profile.pdf(x) + row.dot(st.offset, &st.total)
    }

    /// Unscaled model L(ΔE_data + δ) at the data points.
    fn model(&self, st: &State) -> Vec<f64> {
        self.x.iter().map(|&xi| self.model_at(st, xi + st.shift)).collect()
    }

    fn penalty(&self, st: &State, out: &mut Vec<f64>) {
        if self.sqrt_lambda > 0.0 {
            for k in 0..self.layout.n_nodes - 1 {
                out.push(self.sqrt_lambda * (st.s[k + 1] - st.s[k]));
            }
        }
    }

    /// Physical psf values scaled so that ∫S(E)dE = S_HR.
    fn reported_psf(&self, st: &State) -> Vec<f64> {
        let q = self.psf_integral(&st.s);
        st.s.iter().map(|s| if q > 0.0 { st.s_hr * s / q } else { 0.0 }).collect()
    }

    fn psf_integral(&self, s: &[f64]) -> f64 {
        let psf = PhononSpectralFunction::uniform(self.delta_e, self.e_max).expect("validated grid");
        s.iter().enumerate().map(|(k, v)| v * psf.basis_integral(k)).sum()
    }

    /// Jacobian of (physical parameters) with respect to internal parameters;
    /// physical order: e_zpl, [gamma], s_hr, amplitude, psf values.
    fn physical_transform(&self, st: &State) -> DMatrix<f64> {
        let l = self.layout;
        let n_int = l.len();
        let n_phys = n_int;
        let mut t = DMatrix::zeros(n_phys, n_int);
        t[(l.shift, l.shift)] = 1.0;
        if let Some(g) = l.gamma {
            t[(g, g)] = st.gamma;
        }
        t[(l.v, l.v)] = 2.0 * st.v;
        t[(l.amp, l.amp)] = 1.0;
        let psf = PhononSpectralFunction::uniform(self.delta_e, self.e_max).expect("validated grid");
        let c: Vec<f64> = (0..l.n_nodes).map(|k| psf.basis_integral(k)).collect();
        let q: f64 = st.s.iter().zip(&c).map(|(a, b)| a * b).sum();
        if q > 0.0 {
            let v2 = st.s_hr;
            for k in 0..l.n_nodes {
                let row = l.u0 + k;
                t[(row, l.v)] = 2.0 * st.v * st.s[k] / q;
                for m in 0..l.n_nodes {
                    let mut d = -v2 * st.s[k] * c[m] * 2.0 * st.u[m] / (q * q);
                    if m == k {
                        d += v2 * 2.0 * st.u[k] / q;
                    }
                    t[(row, l.u0 + m)] = d;
                }
            }
        }
        t
    }
}

impl Problem for VibronicObjective {
    fn n_params(&self) -> usize {
        self.layout.len()
    }

    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        let st = self.state(p);
        let m = self.model(&st);
        let mut r: Vec<f64> = m
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((mi, yi), wi)| (st.amp * mi - yi) * wi)
            .collect();
        self.penalty(&st, &mut r);
        r
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let l = self.layout;
        let st = self.state(p);
        let step = self.basis.step;
        let half = self.basis.half;
        let n_max = self.n_max;
        let len = st.total.len();

        // ∂P/∂S = Σₙ (wₙ₋₁ − wₙ)·Iₙ
        let mut dp_ds = vec![0.0; len];
        for (n, d) in st.orders.iter().enumerate() {
            let coef = st.weights[n] - st.weights[n + 1];
            let shift_idx = (d.offset() - st.offset) as usize;
            for (t, v) in dp_ds[shift_idx..].iter_mut().zip(d.values()) {
                *t += coef * v;
            }
        }

        // G = Σₙ n·wₙ·Iₙ₋₁ with I₀ the lattice delta, so that ∂P = G ⊗ ∂I₁
        let g_off = -((n_max as i64) - 1) * half;
        let g_len = (2 * (n_max as i64 - 1) * half + 1) as usize;
        let mut g = vec![0.0; g_len];
        g[(-g_off) as usize] += st.weights[1] / step;
        for n in 2..=n_max {
            let d = &st.orders[n - 2];
            let coef = n as f64 * st.weights[n];
            let shift_idx = (d.offset() - g_off) as usize;
            for (t, v) in g[shift_idx..].iter_mut().zip(d.values()) {
                *t += coef * v;
            }
        }
        let g_dist = Distribution::new(step, g_off, g).expect("finite");
        let g_i1 = g_dist.convolve(&st.orders[0]).expect("common lattice").embedded(st.offset, len);

        // ∂P/∂s_k = (G ⊗ term_k − mass_k·G ⊗ I₁)/Z, one dense vector per node
        let mut dp_dsk: Vec<Vec<f64>> = Vec::with_capacity(l.n_nodes);
        for k in 0..l.n_nodes {
            let mut col: Vec<f64> = g_i1.iter().map(|v| -self.basis.node_mass[k] * v).collect();
            for &(m, val) in &self.basis.node_terms[k] {
                let a = val * step;
                let base = (g_off + m - st.offset) as usize;
                for (o, gv) in col[base..base + g_len].iter_mut().zip(g_dist.values()) {
                    *o += a * gv;
                }
            }
            for c in col.iter_mut() {
                *c /= st.z;
            }
            dp_dsk.push(col);
        }

        let n_rows = self.x.len() + self.n_penalty();
        let mut jac = DMatrix::zeros(n_rows, l.len());
        let (j_min, j_max) = self.lattice_bounds(&st);
        let ds_dgamma = self.shape.scale_per_fwhm();
        let w0 = st.weights[0];
        for (i, (&xi, &wi)) in self.x.iter().zip(&self.w).enumerate() {
            let x = xi + st.shift;
            let row = kernel_row(&st.profile, step, x, j_min, j_max, true);
            let pdf = st.profile.pdf(x);
            let m = w0 * pdf + row.dot(st.offset, &st.total);
            let aw = st.amp * wi;
            let dm_dx = w0 * st.profile.pdf_x(x) + dot_window(row.first, &row.kx, st.offset, &st.total);
            jac[(i, l.shift)] = aw * dm_dx;
            if let Some(gi) = l.gamma {
                let dm_dscale = w0 * st.profile.pdf_s(x) + dot_window(row.first, &row.ks, st.offset, &st.total);
                jac[(i, gi)] = aw * dm_dscale * ds_dgamma * st.gamma;
            }
            let dm_ds = -w0 * pdf + row.dot(st.offset, &dp_ds);
            jac[(i, l.v)] = aw * dm_ds * 2.0 * st.v;
            jac[(i, l.amp)] = wi * m;
            for k in 0..l.n_nodes {
                if st.u[k] == 0.0 {
                    continue;
                }
                jac[(i, l.u0 + k)] = aw * row.dot(st.offset, &dp_dsk[k]) * 2.0 * st.u[k];
            }
        }
        if self.sqrt_lambda > 0.0 {
            let base = self.x.len();
            for k in 0..l.n_nodes - 1 {
                jac[(base + k, l.u0 + k)] = -self.sqrt_lambda * 2.0 * st.u[k];
                jac[(base + k, l.u0 + k + 1)] = self.sqrt_lambda * 2.0 * st.u[k + 1];
            }
        }
        jac
    }

    /// Square-root parameters may shrink by at most a fixed factor per step
    /// instead of jumping through zero.
    fn limit_step(&self, p: &[f64], step: &mut DVector<f64>) {
        let l = self.layout;
        for k in std::iter::once(l.v).chain(l.u0..l.u0 + l.n_nodes) {
            let floor = MIN_SHRINK * p[k];
            if p[k] > 0.0 && p[k] + step[k] < floor {
                step[k] = floor - p[k];
            }
        }
    }

    fn normalize(&self, p: &mut [f64]) {
        let l = self.layout;
        let u = &mut p[l.u0..l.u0 + l.n_nodes];
        let norm2: f64 = u.iter().map(|a| a * a).sum();
        if norm2 > 0.0 && norm2.is_finite() {
            let f = (l.n_nodes as f64 / norm2).sqrt();
            u.iter_mut().for_each(|a| *a = a.abs() * f);
        } else {
            u.iter_mut().for_each(|a| *a = 1.0);
        }
        p[l.v] = p[l.v].abs();
    }
}

/// One n-phonon term of the fitted decomposition, evaluated at the data points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhononComponent {
    pub n: usize,
    /// e^{−S}Sⁿ/n!.
    pub weight: f64,
    /// a·e^{−S}Sⁿ/n!·(I₀ ⊗ Iₙ) at each data ΔE, so components sum to the model.
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VibronicFit {
    pub params: VibronicParams,
    /// Overall scale of the data relative to the unit-area model.
    pub amplitude: f64,
    /// Names of the rows/columns of `covariance`.
    pub parameter_names: Vec<String>,
    /// Covariance over the free physical parameters.
    pub covariance: DMatrix<f64>,
    pub e_zpl_sigma: f64,
    pub gamma_zpl_sigma: Option<f64>,
    pub s_hr_sigma: f64,
    pub amplitude_sigma: f64,
    pub psf_sigma: Vec<f64>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    /// Data ΔE axis as supplied (relative to the data's e_zpl_hint).
    pub delta_e: Vec<f64>,
    pub data: Vec<f64>,
    pub data_sigma: Vec<f64>,
    /// a·L at each data point.
    pub model: Vec<f64>,
    /// Weighted residuals (model − data)/σ.
    pub residuals: Vec<f64>,
    pub zpl_weight: f64,
    /// a·e^{−S}·I₀ at each data point.
    pub zpl_component: Vec<f64>,
    pub n_phonon_components: Vec<PhononComponent>,
    pub converged: bool,
    pub iterations: usize,
    pub termination: String,
}

impl VibronicFit {
    /// Sum of ZPL and phonon-order weights.
    pub fn weight_closure(&self) -> f64 {
        self.zpl_weight + self.n_phonon_components.iter().map(|c| c.weight).sum::<f64>()
    }

    /// Machine-readable summary with unit-suffixed keys.
    pub fn report_json(&self) -> serde_json::Value {
        let psf = &self.params.psf;
        json!({
            "e_zpl_ev": self.params.e_zpl,
            "e_zpl_sigma_ev": self.e_zpl_sigma,
            "gamma_zpl_ev": self.params.gamma_zpl,
            "gamma_zpl_sigma_ev": self.gamma_zpl_sigma,
            "gamma_zpl_fixed": self.gamma_zpl_sigma.is_none(),
            "s_hr": self.params.s_hr,
            "s_hr_sigma": self.s_hr_sigma,
            "temperature_k": self.params.temperature,
            "zpl_shape": self.params.zpl_shape.as_str(),
            "amplitude": self.amplitude,
            "amplitude_sigma": self.amplitude_sigma,
            "chi2": self.chi2,
            "chi2_reduced": self.chi2_reduced,
            "n_points": self.delta_e.len(),
            "psf": {
                "e_ev": psf.energies(),
                "value": psf.values(),
                "sigma": self.psf_sigma,
                "delta_e_ev": psf.delta_e(),
                "e_max_ev": psf.e_max(),
            },
            "zpl_weight": self.zpl_weight,
            "n_phonon": self.n_phonon_components.iter().map(|c| json!({"n": c.n, "weight": c.weight})).collect::<Vec<_>>(),
            "n_max": self.n_phonon_components.len(),
            "parameter_names": self.parameter_names,
            "covariance": (0..self.covariance.nrows())
                .map(|i| (0..self.covariance.ncols()).map(|j| self.covariance[(i, j)]).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "converged": self.converged,
            "iterations": self.iterations,
            "termination": self.termination,
        })
    }
}

/// Fits the vibronic model to `data` at temperature `t_k`.
///
/// The phonon-order count is held fixed during the optimization so the
/// objective is smooth; with automatic truncation it is chosen from a
/// generous bound on S_HR and enlarged (followed by a refit) if the optimum
/// needs more orders.
pub fn fit_vibronic(data: &Lineshape, config: &FitConfig, t_k: f64) -> Result<VibronicFit, VibronicError> {
    config.validate()?;
    if !(t_k > 0.0) {
        return Err(VibronicError::NonPositiveTemperature(t_k));
    }
    let guess = initial_guess(data, config);
    let peak_de = data.e_zpl_hint - guess.e_zpl;
    let lo = data.delta_e[0];
    let hi = *data.delta_e.last().expect("non-empty");
    if lo > peak_de - 3.0 * guess.gamma || hi < peak_de + config.e_max_ev {
        return Err(VibronicError::DegenerateData(format!(
            "data must cover ΔE ∈ [{:.6}, {:.6}] eV around the peak, got [{lo:.6}, {hi:.6}]",
            peak_de - 3.0 * guess.gamma,
            peak_de + config.e_max_ev
        )));
    }

    let mut n_max = match config.n_max {
        NMax::Fixed(n) => n.clamp(1, N_MAX_CAP),
        NMax::Auto => auto_n_max(1.5 * guess.s_hr + 1.0, config.tail_tolerance).clamp(1, N_MAX_CAP),
    };
    let uniform = vec![1.0; PhononSpectralFunction::uniform(config.delta_e_ev, config.e_max_ev)?.len()];
    let mut start: Option<Vec<f64>> = None;
    loop {
        let obj = VibronicObjective::new(data, config, t_k, n_max)?;
        if obj.n_data() < obj.n_params() {
            return Err(VibronicError::DegenerateData(format!(
                "{} data points for {} free parameters",
                obj.n_data(),
                obj.n_params()
            )));
        }
        let p0 = match &start {
            Some(p) => p.clone(),
            None => {
                let mut p = obj.pack(guess.e_zpl, guess.gamma, guess.s_hr, 1.0, &uniform);
                let st = obj.state(&p);
                let m = obj.model(&st);
                let num: f64 = m.iter().zip(&data.density).zip(&obj.w).map(|((a, b), w)| a * b * w * w).sum();
                let den: f64 = m.iter().zip(&obj.w).map(|(a, w)| a * a * w * w).sum();
                p[obj.layout.amp] = if den > 0.0 { num / den } else { 1.0 };
                p
            }
        };
        let result = lsq::minimize(&obj, &p0, &config.lm(obj.n_data()));
        let st = obj.state(&result.params);
        let needed = auto_n_max(st.s_hr, config.tail_tolerance);
        if config.n_max == NMax::Auto && needed > n_max && n_max < N_MAX_CAP {
            n_max = (needed + 1).min(N_MAX_CAP);
            start = Some(result.params);
            continue;
        }
        let fit = assemble_fit(&obj, data, config, t_k, &result, st)?;
        if !fit.converged {
            return Err(VibronicError::NonConvergence(Box::new(fit)));
        }
        return Ok(fit);
    }
}

fn assemble_fit(
    obj: &VibronicObjective,
    data: &Lineshape,
    config: &FitConfig,
    t_k: f64,
    result: &lsq::LmResult,
    st: State,
) -> Result<VibronicFit, VibronicError> {
    let l = obj.layout;
    let psf_values = obj.reported_psf(&st);
    let psf = PhononSpectralFunction::new(config.delta_e_ev, config.e_max_ev, psf_values)?;
    let params = VibronicParams {
        e_zpl: obj.hint + st.shift,
        gamma_zpl: st.gamma,
        s_hr: st.s_hr,
        psf,
        temperature: t_k,
        zpl_shape: config.zpl_shape,
        n_max: NMax::Fixed(obj.n_max),
    };
    let t = obj.physical_transform(&st);
    let cov = &t * &result.covariance * t.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
    let mut names = vec!["e_zpl_ev".to_string()];
    if l.gamma.is_some() {
        names.push("gamma_zpl_ev".into());
    }
    names.push("s_hr".into());
    names.push("amplitude".into());
    names.extend((0..l.n_nodes).map(|k| format!("psf_{k}")));

    let model_unit = obj.model(&st);
    let model: Vec<f64> = model_unit.iter().map(|m| st.amp * m).collect();
    let n_data = obj.n_data();
    let residuals = result.residuals[..n_data].to_vec();
    let chi2: f64 = residuals.iter().map(|r| r * r).sum();
    // one parameter combination (the psf scale) is a pure gauge
    let dof = n_data.saturating_sub(obj.n_params() - 1).max(1);

    let xs: Vec<f64> = data.delta_e.iter().map(|x| x + st.shift).collect();
    let zpl_component = xs.iter().map(|&x| st.amp * st.weights[0] * st.profile.pdf(x)).collect();
    let n_phonon_components = st
        .orders
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let n = i + 1;
            let weight = st.weights[n];
            let j_min = d.offset();
            let j_max = d.offset() + d.len() as i64 - 1;
            let spectrum = xs
                .iter()
                .map(|&x| {
                    let row = kernel_row(&st.profile, d.step(), x, j_min, j_max, false);
                    st.amp * weight * row.dot(d.offset(), d.values())
                })
                .collect();
            PhononComponent { n, weight, spectrum }
        })
        .collect();

    Ok(VibronicFit {
        params,
        amplitude: st.amp,
        parameter_names: names,
        e_zpl_sigma: sd(l.shift),
        gamma_zpl_sigma: l.gamma.map(sd),
        s_hr_sigma: sd(l.v),
        amplitude_sigma: sd(l.amp),
        psf_sigma: (0..l.n_nodes).map(|k| sd(l.u0 + k)).collect(),
        covariance: cov,
        chi2,
        chi2_reduced: chi2 / dof as f64,
        delta_e: data.delta_e.clone(),
        data: data.density.clone(),
        data_sigma: data.sigma.clone(),
        model,
        residuals,
        zpl_weight: st.weights[0],
        zpl_component,
        n_phonon_components,
        converged: result.converged(),
        iterations: result.iterations,
        termination: format!("{:?}", result.termination),
    })
}

/// Forward model of a fit's parameters with the numerics it was fitted with.
pub fn fitted_model(fit: &VibronicFit, config: &FitConfig) -> Result<VibronicModel, VibronicError> {
    VibronicModel::new(&fit.params, &config.numerics())
}
