//! Forward model L(ΔE) = e^{−S}I₀(ΔE) + (I₀ ⊗ I_PSB)(ΔE).
//!
//! The sideband density lives on a uniform lattice and is treated as the
//! piecewise-linear interpolant of its lattice values. Its convolution with
//! the ZPL profile is then exact: every lattice hat integrates against I₀ in
//! closed form through the profile's second antiderivative, so evaluation at
//! arbitrary (nonuniform) ΔE points needs no resampling.

use serde::{Deserialize, Serialize};

use super::distribution::{psb_with, NMax, OnePhononBasis, Psb, DEFAULT_OVERSAMPLE, DEFAULT_TAIL_TOLERANCE};
use super::profile::{ZplProfile, ZplShape};
use super::psf::PhononSpectralFunction;
use super::VibronicError;
use crate::spectra::Lineshape;

/// Discretization settings shared by the forward model and the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelNumerics {
    /// Lattice points per psf grid step.
    pub oversample: usize,
    /// Half-width of the ZPL profile support in eV; `None` uses e_max.
    pub zpl_support_ev: Option<f64>,
    /// Poisson tail mass left out by automatic n_max.
    pub tail_tolerance: f64,
}

impl Default for ModelNumerics {
    fn default() -> Self {
        Self { oversample: DEFAULT_OVERSAMPLE, zpl_support_ev: None, tail_tolerance: DEFAULT_TAIL_TOLERANCE }
    }
}

impl ModelNumerics {
    pub(crate) fn support(&self, psf: &PhononSpectralFunction) -> f64 {
        self.zpl_support_ev.unwrap_or(psf.e_max())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibronicParams {
    /// eV.
    pub e_zpl: f64,
    /// ZPL FWHM in eV.
    pub gamma_zpl: f64,
    pub s_hr: f64,
    pub psf: PhononSpectralFunction,
    /// Kelvin.
    pub temperature: f64,
    pub zpl_shape: ZplShape,
    pub n_max: NMax,
}

impl VibronicParams {
    pub fn validate(&self) -> Result<(), VibronicError> {
        if !(self.gamma_zpl > 0.0) || !self.gamma_zpl.is_finite() {
            return Err(VibronicError::InvalidParameter(format!("gamma_zpl must be > 0, got {}", self.gamma_zpl)));
        }
        if !(self.s_hr >= 0.0) || !self.s_hr.is_finite() {
            return Err(VibronicError::NegativeHuangRhys(self.s_hr));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(VibronicError::NonPositiveTemperature(self.temperature));
        }
        if !self.e_zpl.is_finite() {
            return Err(VibronicError::InvalidParameter("e_zpl must be finite".into()));
        }
        Ok(())
    }
}

/// Convolution kernel of one data point against the sideband lattice:
/// `k[j]` = ∫ I₀(x − y)·hat_j(y) dy for lattice cells j = `first`..`first + k.len()`.
pub(crate) struct KernelRow {
    pub first: i64,
    pub k: Vec<f64>,
    /// ∂k/∂x.
    pub kx: Vec<f64>,
    /// ∂k/∂s for the profile scale s.
    pub ks: Vec<f64>,
}

impl KernelRow {
    pub fn dot(&self, offset: i64, values: &[f64]) -> f64 {
        dot_window(self.first, &self.k, offset, values)
    }
}

pub(crate) fn dot_window(first: i64, row: &[f64], offset: i64, values: &[f64]) -> f64 {
    let lo = first.max(offset);
    let hi = (first + row.len() as i64).min(offset + values.len() as i64);
    let mut acc = 0.0;
    for j in lo..hi {
        acc += row[(j - first) as usize] * values[(j - offset) as usize];
    }
    acc
}

/// Kernel row for point `x` restricted to lattice cells [j_min, j_max].
pub(crate) fn kernel_row(profile: &ZplProfile, step: f64, x: f64, j_min: i64, j_max: i64, derivs: bool) -> KernelRow {
    let reach = profile.support() + step;
    let j_lo = (((x - reach) / step).floor() as i64).max(j_min);
    let j_hi = (((x + reach) / step).ceil() as i64).min(j_max);
    if j_hi < j_lo {
        return KernelRow { first: j_lo, k: Vec::new(), kx: Vec::new(), ks: Vec::new() };
    }
    let n = (j_hi - j_lo + 1) as usize;
    // lattice points m = j_lo − 1 ..= j_hi + 1
    let pts: Vec<_> = (0..n + 2).map(|i| profile.eval(x - (j_lo - 1 + i as i64) as f64 * step, derivs)).collect();
    let inv = 1.0 / step;
    let k = (0..n).map(|i| (pts[i].f2 - 2.0 * pts[i + 1].f2 + pts[i + 2].f2) * inv).collect();
    let (kx, ks) = if derivs {
        (
            (0..n).map(|i| (pts[i].f - 2.0 * pts[i + 1].f + pts[i + 2].f) * inv).collect(),
            (0..n).map(|i| (pts[i].f2_s - 2.0 * pts[i + 1].f2_s + pts[i + 2].f2_s) * inv).collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    KernelRow { first: j_lo, k, kx, ks }
}

/// A forward model with its sideband expansion precomputed.
#[derive(Debug, Clone)]
pub struct VibronicModel {
    params: VibronicParams,
    numerics: ModelNumerics,
    profile: ZplProfile,
    psb: Psb,
    normalization_a: f64,
}

impl VibronicModel {
    pub fn new(params: &VibronicParams, numerics: &ModelNumerics) -> Result<Self, VibronicError> {
        params.validate()?;
        if numerics.oversample == 0 {
            return Err(VibronicError::InvalidParameter("oversample must be ≥ 1".into()));
        }
        let support = numerics.support(&params.psf);
        if !(support > 0.0) {
            return Err(VibronicError::InvalidParameter("ZPL support must be positive".into()));
        }
        let profile = ZplProfile::new(params.zpl_shape, params.gamma_zpl, support);
        let basis = OnePhononBasis::new(&params.psf, params.temperature, numerics.oversample)?;
        let (psb, normalization_a) = if params.s_hr == 0.0 && params.psf.is_all_zero() {
            let i1 = super::distribution::Distribution::zeros(basis.step, -basis.half, basis.len());
            (psb_with(&i1, 0.0, NMax::Fixed(0), numerics.tail_tolerance)?, 0.0)
        } else {
            let one = super::distribution::one_phonon_with(&params.psf, params.temperature, numerics.oversample)?;
            (psb_with(&one.distribution, params.s_hr, params.n_max, numerics.tail_tolerance)?, one.normalization_a)
        };
        Ok(Self { params: params.clone(), numerics: *numerics, profile, psb, normalization_a })
    }

    pub fn params(&self) -> &VibronicParams {
        &self.params
    }

    pub fn numerics(&self) -> &ModelNumerics {
        &self.numerics
    }

    pub fn psb(&self) -> &Psb {
        &self.psb
    }

    pub fn profile(&self) -> &ZplProfile {
        &self.profile
    }

    /// The psf normalization constant A of I₁.
    pub fn normalization_a(&self) -> f64 {
        self.normalization_a
    }

    pub fn n_max(&self) -> usize {
        self.psb.n_max
    }

    pub fn step(&self) -> f64 {
        self.psb.total.step()
    }

    /// L at ZPL-relative energies ΔE = E_ZPL − E.
    pub fn evaluate(&self, delta_e: &[f64]) -> Vec<f64> {
        delta_e.iter().map(|&x| self.zpl_component_at(x) + self.lattice_component_at(&self.psb.total, x)).collect()
    }

    /// Weighted zero-phonon part e^{−S}I₀(ΔE).
    pub fn zpl_component_at(&self, x: f64) -> f64 {
        self.psb.zpl_weight * self.profile.pdf(x)
    }

    /// Weighted n-phonon part e^{−S}Sⁿ/n!·(I₀ ⊗ Iₙ)(ΔE) for n ≥ 1.
    pub fn order_component(&self, n: usize, delta_e: &[f64]) -> Vec<f64> {
        if n == 0 {
            return delta_e.iter().map(|&x| self.zpl_component_at(x)).collect();
        }
        match self.psb.components.get(n - 1) {
            Some(d) => {
                let w = self.psb.weights[n - 1];
                delta_e.iter().map(|&x| w * self.lattice_component_at(d, x)).collect()
            }
            None => vec![0.0; delta_e.len()],
        }
    }

    fn lattice_component_at(&self, d: &super::distribution::Distribution, x: f64) -> f64 {
        let j_min = d.offset();
        let j_max = d.offset() + d.len() as i64 - 1;
        let row = kernel_row(&self.profile, d.step(), x, j_min, j_max, false);
        row.dot(d.offset(), d.values())
    }

    /// Uniform ΔE grid covering [−5Γ − e_max, n_max·e_max + 5Γ], widened where
    /// needed to hold the full support of the model. Returns (first index, count,
    /// subdivision r) with ΔE = index·step/r.
    fn grid_layout(&self) -> (i64, usize, i64) {
        let g = self.params.gamma_zpl;
        let e_max = self.params.psf.e_max();
        let support = self.profile.support();
        let step = self.step();
        let r = ((step / (g / 8.0)).ceil() as i64).max(2);
        let dx = step / r as f64;
        let total = &self.psb.total;
        let peak = total.values().iter().cloned().fold(0.0, f64::max);
        let mut lo = -5.0 * g - e_max;
        let mut hi = self.n_max() as f64 * e_max + 5.0 * g;
        lo = lo.min(-support);
        hi = hi.max(support);
        if peak > 0.0 {
            let cut = 1e-14 * peak;
            if let Some(j) = total.values().iter().position(|v| *v > cut) {
                lo = lo.min(total.energy(j) - support);
            }
            if let Some(j) = total.values().iter().rposition(|v| *v > cut) {
                hi = hi.max(total.energy(j) + support);
            }
        }
        let i_lo = (lo / dx).floor() as i64;
        let i_hi = (hi / dx).ceil() as i64;
        (i_lo, (i_hi - i_lo + 1) as usize, r)
    }

    /// The uniform grid used by [`VibronicModel::lineshape`].
    pub fn default_grid(&self) -> Vec<f64> {
        let (i_lo, n, r) = self.grid_layout();
        let dx = self.step() / r as f64;
        (0..n).map(|i| (i_lo + i as i64) as f64 * dx).collect()
    }

    /// The model tabulated on [`VibronicModel::default_grid`].
    pub fn lineshape(&self) -> Result<Lineshape, VibronicError> {
        let (i_lo, n, r) = self.grid_layout();
        let step = self.step();
        let dx = step / r as f64;
        let grid: Vec<f64> = (0..n).map(|i| (i_lo + i as i64) as f64 * dx).collect();
        // F2 at every multiple of dx the kernel can touch
        let reach = ((self.profile.support() / dx).ceil() as i64) + 2 * r + 2;
        let table: Vec<f64> = (-reach..=reach).map(|k| self.profile.second_antiderivative(k as f64 * dx)).collect();
        let total = &self.psb.total;
        let (off, vals) = (total.offset(), total.values());
        let j_max = off + vals.len() as i64 - 1;
        let inv = 1.0 / step;
        let density = grid
            .iter()
            .enumerate()
            .map(|(idx, &x)| {
                let i = i_lo + idx as i64;
                let j_lo = ((i - reach + r) as f64 / r as f64).ceil() as i64;
                let j_hi = ((i + reach - r) as f64 / r as f64).floor() as i64;
                let mut acc = 0.0;
                for j in j_lo.max(off)..=j_hi.min(j_max) {
                    let p = vals[(j - off) as usize];
                    if p == 0.0 {
                        continue;
                    }
                    let k = i - j * r + reach;
                    let kern = (table[(k + r) as usize] - 2.0 * table[k as usize] + table[(k - r) as usize]) * inv;
                    acc += p * kern;
                }
                self.zpl_component_at(x) + acc
            })
            .collect();
        let sigma = vec![0.0; grid.len()];
        Lineshape::new(grid, density, sigma, self.params.e_zpl).map_err(VibronicError::from)
    }
}

/// L(ΔE) for `params` on a uniform grid, using default numerics.
pub fn forward_lineshape(params: &VibronicParams) -> Result<Lineshape, VibronicError> {
    VibronicModel::new(params, &ModelNumerics::default())?.lineshape()
}

pub fn forward_lineshape_with(params: &VibronicParams, numerics: &ModelNumerics) -> Result<Lineshape, VibronicError> {
    VibronicModel::new(params, numerics)?.lineshape()
}
