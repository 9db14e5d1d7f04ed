//! The discretized one-phonon spectral function S(E).

use super::VibronicError;

/// Default grid step δE in eV.
pub const DEFAULT_DELTA_E: f64 = 0.002;
/// Default maximum phonon energy in eV.
pub const DEFAULT_E_MAX: f64 = 0.200;

/// S(E) sampled at E_i = (i + ½)δE for i = 0..N−1 with N = e_max/δE.
///
/// Between samples S is linearly interpolated; it is pinned to zero at E = 0
/// and at E = e_max so the function has compact support on [0, e_max].
#[derive(Debug, Clone, PartialEq)]
pub struct PhononSpectralFunction {
    delta_e: f64,
    e_max: f64,
    values: Vec<f64>,
}

impl PhononSpectralFunction {
    pub fn new(delta_e: f64, e_max: f64, values: Vec<f64>) -> Result<Self, VibronicError> {
        let n = grid_count(delta_e, e_max)?;
        if values.len() != n {
            return Err(VibronicError::InvalidGrid(format!(
                "expected {n} spectral-function values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(VibronicError::InvalidGrid("spectral-function values must be finite and ≥ 0".into()));
        }
        Ok(Self { delta_e, e_max, values })
    }

    /// Uniform S(E_i) = 1.
    pub fn uniform(delta_e: f64, e_max: f64) -> Result<Self, VibronicError> {
        let n = grid_count(delta_e, e_max)?;
        Self::new(delta_e, e_max, vec![1.0; n])
    }

    /// Samples `f` at the grid energies (negative values clamp to zero).
    pub fn from_fn<F: Fn(f64) -> f64>(delta_e: f64, e_max: f64, f: F) -> Result<Self, VibronicError> {
        let n = grid_count(delta_e, e_max)?;
        let values = (0..n).map(|i| f((i as f64 + 0.5) * delta_e).max(0.0)).collect();
        Self::new(delta_e, e_max, values)
    }

    /// A single nonzero grid value at the node closest to `e_mode`.
    pub fn single_mode(delta_e: f64, e_max: f64, e_mode: f64) -> Result<Self, VibronicError> {
        let n = grid_count(delta_e, e_max)?;
        let k = ((e_mode / delta_e - 0.5).round().max(0.0) as usize).min(n - 1);
        let mut values = vec![0.0; n];
        values[k] = 1.0;
        Self::new(delta_e, e_max, values)
    }

    pub fn delta_e(&self) -> f64 {
        self.delta_e
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node energies E_i.
    pub fn energies(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.delta_e
    }

    /// Interpolated S(E); zero outside (0, e_max).
    pub fn value_at(&self, e: f64) -> f64 {
        (0..self.len()).map(|k| self.values[k] * self.basis(k, e)).sum()
    }

    /// Hat function of node `k` at energy `e`, including the zero anchors.
    pub fn basis(&self, k: usize, e: f64) -> f64 {
        let center = self.node(k);
        let left = if k == 0 { 0.0 } else { self.node(k - 1) };
        let right = if k + 1 == self.len() { self.e_max } else { self.node(k + 1) };
        if e <= left || e >= right {
            return 0.0;
        }
        if e <= center {
            (e - left) / (center - left)
        } else {
            (right - e) / (right - center)
        }
    }

    /// Trapezoidal ∫S(E)dE over [0, e_max] of the piecewise-linear interpolant.
    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(k, v)| v * self.basis_integral(k)).sum()
    }

    /// ∫ of the hat of node `k`.
    pub fn basis_integral(&self, k: usize) -> f64 {
        let left = if k == 0 { 0.0 } else { self.node(k - 1) };
        let right = if k + 1 == self.len() { self.e_max } else { self.node(k + 1) };
        0.5 * (right - left)
    }

    /// Copy rescaled so that ∫S(E)dE = `target`.
    pub fn scaled_to_integral(&self, target: f64) -> Self {
        let total = self.integral();
        let f = if total > 0.0 { target / total } else { 0.0 };
        Self { delta_e: self.delta_e, e_max: self.e_max, values: self.values.iter().map(|v| v * f).collect() }
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

fn grid_count(delta_e: f64, e_max: f64) -> Result<usize, VibronicError> {
    if !(delta_e > 0.0 && e_max > 0.0) {
        return Err(VibronicError::InvalidGrid("δE and e_max must be positive".into()));
    }
    let ratio = e_max / delta_e;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 4.0 {
        return Err(VibronicError::InvalidGrid(format!(
            "e_max/δE must be an integer ≥ 4, got {ratio}"
        )));
    }
    Ok(n as usize)
}
