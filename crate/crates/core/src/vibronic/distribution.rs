//! Phonon distributions on a uniform ΔE lattice and their convolution powers.

use serde::{Deserialize, Serialize};

use super::bose::occupation;
use super::psf::PhononSpectralFunction;
use super::VibronicError;

/// Default number of lattice steps per psf grid step.
pub const DEFAULT_OVERSAMPLE: usize = 2;
/// Default Poisson tail tolerance for automatic n_max.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;
/// Hard cap on the number of phonon orders.
pub const N_MAX_CAP: usize = 20;

/// A density sampled at x_j = (offset + j)·step, j = 0..len.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    step: f64,
    offset: i64,
    values: Vec<f64>,
}

impl Distribution {
    pub fn new(step: f64, offset: i64, values: Vec<f64>) -> Result<Self, VibronicError> {
        if !(step > 0.0) || values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(VibronicError::InvalidGrid("distribution needs a positive step and finite values".into()));
        }
        Ok(Self { step, offset, values })
    }

    /// Discrete delta of unit mass at ΔE = 0.
    pub fn delta(step: f64) -> Self {
        Self { step, offset: 0, values: vec![1.0 / step] }
    }

    pub(crate) fn zeros(step: f64, offset: i64, len: usize) -> Self {
        Self { step, offset, values: vec![0.0; len] }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self, j: usize) -> f64 {
        (self.offset + j as i64) as f64 * self.step
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.energy(j)).collect()
    }

    /// Value at lattice index `m` (x = m·step); zero outside the stored range.
    pub fn at_index(&self, m: i64) -> f64 {
        let j = m - self.offset;
        if j < 0 || j >= self.values.len() as i64 {
            0.0
        } else {
            self.values[j as usize]
        }
    }

    /// Trapezoidal integral over the stored range.
    pub fn integral(&self) -> f64 {
        let v = &self.values;
        if v.len() == 1 {
            return v[0] * self.step;
        }
        let inner: f64 = v.iter().sum();
        (inner - 0.5 * (v[0] + v[v.len() - 1])) * self.step
    }

    /// Plain Riemann sum Σ vⱼ·step; equals `integral` when both ends vanish.
    pub fn sum_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step
    }

    /// Mass on ΔE < 0.
    pub fn negative_mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(j, _)| self.offset + (*j as i64) < 0)
            .map(|(_, v)| *v)
            .sum::<f64>()
            * self.step
    }

    /// Discrete convolution Σ a_i b_{k−i} · step on the common lattice.
    pub fn convolve(&self, other: &Distribution) -> Result<Distribution, VibronicError> {
        if (self.step - other.step).abs() > 1e-12 * self.step {
            return Err(VibronicError::InvalidGrid("convolution needs equal lattice steps".into()));
        }
        let mut out = vec![0.0; self.len() + other.len() - 1];
        for (i, &a) in self.values.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let a = a * self.step;
            for (o, &b) in out[i..].iter_mut().zip(other.values.iter()) {
                *o += a * b;
            }
        }
        Ok(Distribution { step: self.step, offset: self.offset + other.offset, values: out })
    }

    /// Values re-indexed onto [offset, offset + len), zero-filled.
    pub(crate) fn embedded(&self, offset: i64, len: usize) -> Vec<f64> {
        (0..len).map(|j| self.at_index(offset + j as i64)).collect()
    }
}

/// Lattice step used when expanding `psf` with `oversample` points per δE.
pub fn lattice_step(psf: &PhononSpectralFunction, oversample: usize) -> f64 {
    psf.delta_e() / oversample.max(1) as f64
}

/// Unnormalized one-phonon weights B(x)·S(|x|) on the symmetric lattice, plus the
/// per-node basis contributions used for derivatives.
pub(crate) struct OnePhononBasis {
    pub step: f64,
    pub half: i64,
    /// (lattice index, value) for every node's hat times the Bose branch factor.
    pub node_terms: Vec<Vec<(i64, f64)>>,
    /// Lattice mass of each node's term: Σ value·step.
    pub node_mass: Vec<f64>,
}

impl OnePhononBasis {
    pub fn new(psf: &PhononSpectralFunction, t_k: f64, oversample: usize) -> Result<Self, VibronicError> {
        if !(t_k > 0.0) {
            return Err(VibronicError::NonPositiveTemperature(t_k));
        }
        let step = lattice_step(psf, oversample);
        let half = (psf.e_max() / step).round() as i64;
        let kt = crate::constants::K_B_EV_PER_K * t_k;
        let e0 = psf.node(0);
        let mut node_terms = Vec::with_capacity(psf.len());
        let mut node_mass = Vec::with_capacity(psf.len());
        for k in 0..psf.len() {
            let left = if k == 0 { 0.0 } else { psf.node(k - 1) };
            let right = if k + 1 == psf.len() { psf.e_max() } else { psf.node(k + 1) };
            let m_lo = (left / step).floor() as i64;
            let m_hi = ((right / step).ceil() as i64).min(half);
            let mut terms = Vec::new();
            for m in m_lo.max(1)..=m_hi {
                let e = m as f64 * step;
                let b = psf.basis(k, e);
                if b == 0.0 {
                    continue;
                }
                let n = occupation(e, t_k);
                terms.push((m, b * (n + 1.0)));
                if n > 0.0 {
                    terms.push((-m, b * n));
                }
            }
            if k == 0 {
                // limit of (n(E)+1)·S(E) and n(E)·S(E) as E → 0 with S(E) ≈ s₀E/E₀
                terms.push((0, kt / e0));
            }
            let mass = terms.iter().map(|(_, v)| v).sum::<f64>() * step;
            node_terms.push(terms);
            node_mass.push(mass);
        }
        Ok(Self { step, half, node_terms, node_mass })
    }

    pub fn len(&self) -> usize {
        (2 * self.half + 1) as usize
    }

    /// Unnormalized J(x) = Σ_k s_k·term_k(x) on the symmetric lattice.
    pub fn assemble(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, terms) in self.node_terms.iter().enumerate() {
            if s[k] == 0.0 {
                continue;
            }
            for &(m, v) in terms {
                out[(m + self.half) as usize] += s[k] * v;
            }
        }
        out
    }

    pub fn normalizer(&self, s: &[f64]) -> f64 {
        s.iter().zip(&self.node_mass).map(|(a, b)| a * b).sum()
    }
}

/// One-phonon distribution I₁ together with its normalization constant A.
#[derive(Debug, Clone)]
pub struct OnePhonon {
    pub distribution: Distribution,
    pub normalization_a: f64,
}

/// I₁(E) = A[n(E,T)+1]S(E) for E > 0 and A·n(|E|,T)S(|E|) for E < 0, with A set so the
/// lattice integral is exactly one.
pub fn one_phonon(psf: &PhononSpectralFunction, t_k: f64) -> Result<OnePhonon, VibronicError> {
    one_phonon_with(psf, t_k, DEFAULT_OVERSAMPLE)
}

pub fn one_phonon_with(psf: &PhononSpectralFunction, t_k: f64, oversample: usize) -> Result<OnePhonon, VibronicError> {
    if psf.is_all_zero() {
        return Err(VibronicError::EmptySpectralFunction);
    }
    let basis = OnePhononBasis::new(psf, t_k, oversample)?;
    let z = basis.normalizer(psf.values());
    if !(z > 0.0) || !z.is_finite() {
        return Err(VibronicError::EmptySpectralFunction);
    }
    let a = 1.0 / z;
    let values = basis.assemble(psf.values()).into_iter().map(|v| v * a).collect();
    Ok(OnePhonon { distribution: Distribution::new(basis.step, -basis.half, values)?, normalization_a: a })
}

/// Iₙ = I₁ ⊗ Iₙ₋₁ with I₁ itself for n = 1.
pub fn n_phonon(i1: &Distribution, n: usize) -> Result<Distribution, VibronicError> {
    if n == 0 {
        return Err(VibronicError::InvalidOrder(0));
    }
    let mut out = i1.clone();
    for _ in 1..n {
        out = i1.convolve(&out)?;
    }
    Ok(out)
}

/// Phonon-order truncation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NMax {
    Auto,
    Fixed(usize),
}

impl Default for NMax {
    fn default() -> Self {
        NMax::Auto
    }
}

impl std::fmt::Display for NMax {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NMax::Auto => f.write_str("auto"),
            NMax::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for NMax {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(NMax::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(NMax::Fixed(n)),
            _ => Err(format!("n_max must be 'auto' or a positive integer, got '{s}'")),
        }
    }
}

impl Serialize for NMax {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            NMax::Auto => ser.serialize_str("auto"),
            NMax::Fixed(n) => ser.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for NMax {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(n) if n >= 1 => Ok(NMax::Fixed(n as usize)),
            Repr::Num(n) => Err(serde::de::Error::custom(format!("n_max must be ≥ 1, got {n}"))),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Poisson weights e^{−S}Sⁿ/n! for n = 0..=n_max.
pub fn poisson_weights(s_hr: f64, n_max: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_max + 1);
    let mut term = (-s_hr).exp();
    w.push(term);
    for n in 1..=n_max {
        term *= s_hr / n as f64;
        w.push(term);
    }
    w
}

/// Smallest n with cumulative Poisson weight ≥ 1 − `tail`, capped at `N_MAX_CAP`.
pub fn auto_n_max(s_hr: f64, tail: f64) -> usize {
    let w = poisson_weights(s_hr, N_MAX_CAP);
    let mut cum = 0.0;
    for (n, wn) in w.iter().enumerate() {
        cum += wn;
        if cum >= 1.0 - tail {
            return n;
        }
    }
    N_MAX_CAP
}

pub fn resolve_n_max(s_hr: f64, n_max: NMax, tail: f64) -> usize {
    match n_max {
        NMax::Auto => auto_n_max(s_hr, tail),
        NMax::Fixed(n) => n.min(N_MAX_CAP),
    }
}

/// Phonon-sideband expansion: ZPL weight, per-order weights and densities, and their sum.
#[derive(Debug, Clone)]
pub struct Psb {
    pub s_hr: f64,
    pub n_max: usize,
    pub zpl_weight: f64,
    /// e^{−S}Sⁿ/n! for n = 1..=n_max.
    pub weights: Vec<f64>,
    /// Iₙ for n = 1..=n_max.
    pub components: Vec<Distribution>,
    /// I_PSB = Σ weightₙ·Iₙ on the lattice spanning ±n_max·e_max.
    pub total: Distribution,
}

impl Psb {
    pub fn closure(&self) -> f64 {
        self.zpl_weight + self.weights.iter().sum::<f64>()
    }
}

pub fn psb(i1: &Distribution, s_hr: f64, n_max: NMax) -> Result<Psb, VibronicError> {
    psb_with(i1, s_hr, n_max, DEFAULT_TAIL_TOLERANCE)
}

pub fn psb_with(i1: &Distribution, s_hr: f64, n_max: NMax, tail: f64) -> Result<Psb, VibronicError> {
    if !(s_hr >= 0.0) || !s_hr.is_finite() {
        return Err(VibronicError::NegativeHuangRhys(s_hr));
    }
    let n_max = resolve_n_max(s_hr, n_max, tail);
    let w = poisson_weights(s_hr, n_max);
    let mut components = Vec::with_capacity(n_max);
    if n_max >= 1 {
        components.push(i1.clone());
        for _ in 2..=n_max {
            let next = i1.convolve(components.last().expect("non-empty"))?;
            components.push(next);
        }
    }
    let (offset, len) = match components.last() {
        Some(d) => (d.offset(), d.len()),
        None => (i1.offset(), i1.len()),
    };
    let mut total = Distribution::zeros(i1.step(), offset, len);
    for (c, wn) in components.iter().zip(&w[1..]) {
        let shift = (c.offset() - offset) as usize;
        for (t, v) in total.values_mut()[shift..].iter_mut().zip(c.values()) {
            *t += wn * v;
        }
    }
    Ok(Psb { s_hr, n_max, zpl_weight: w[0], weights: w[1..].to_vec(), components, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::K_B_EV_PER_K;

    fn bumps() -> PhononSpectralFunction {
        PhononSpectralFunction::from_fn(0.002, 0.2, |e| {
            (-((e - 0.05) / 0.01f64).powi(2)).exp() + 0.6 * (-((e - 0.165) / 0.006f64).powi(2)).exp()
        })
        .unwrap()
    }

    #[test]
    fn one_phonon_normalized() {
        let i1 = one_phonon(&bumps(), 4.0).unwrap();
        assert!((i1.distribution.integral() - 1.0).abs() < 1e-12);
        assert_eq!(i1.distribution.values()[0], 0.0);
        assert_eq!(*i1.distribution.values().last().unwrap(), 0.0);
    }

    #[test]
    fn empty_psf_rejected() {
        let psf = PhononSpectralFunction::new(0.05, 0.2, vec![0.0; 4]).unwrap();
        assert!(matches!(one_phonon(&psf, 4.0), Err(VibronicError::EmptySpectralFunction)));
    }

    #[test]
    fn optical_mode_has_no_absorption_at_4k() {
        let psf = PhononSpectralFunction::single_mode(0.002, 0.2, 0.16).unwrap();
        let i1 = one_phonon(&psf, 4.0).unwrap().distribution;
        assert!(i1.negative_mass() < 1e-60);
        assert!((i1.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detailed_balance_at_lattice_points() {
        let t = 30.0;
        let i1 = one_phonon(&bumps(), t).unwrap().distribution;
        let half = -i1.offset();
        for m in 1..=half {
            let p = i1.at_index(m);
            if p > 0.0 {
                let e = m as f64 * i1.step();
                let ratio = i1.at_index(-m) / p;
                let oracle = (-e / (K_B_EV_PER_K * t)).exp();
                assert!((ratio - oracle).abs() <= 1e-12 * oracle.max(1e-300), "m={m}");
            }
        }
    }

    #[test]
    fn delta_convolution_shifts() {
        let d = Distribution::new(0.001, 0, vec![0.0, 0.0, 1000.0]).unwrap();
        let i2 = n_phonon(&d, 2).unwrap();
        let peak = i2.values().iter().cloned().fold(0.0, f64::max);
        let j = i2.values().iter().position(|v| *v == peak).unwrap();
        assert!((i2.energy(j) - 0.004).abs() < 1e-15);
        assert!((i2.sum_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boxcar_convolution_is_triangle() {
        // boxcar of 10 cells with height 1/(10 h) starting at index 5
        let h = 0.001;
        let d = Distribution::new(h, 5, vec![100.0; 10]).unwrap();
        let i2 = n_phonon(&d, 2).unwrap();
        assert_eq!(i2.offset(), 10);
        assert_eq!(i2.len(), 19);
        // triangle peaked at index 10 + 9 = a + b in lattice units
        let peak = i2.values()[9];
        for (j, v) in i2.values().iter().enumerate() {
            let oracle = (10 - (j as i64 - 9).abs()) as f64 * 100.0 * 100.0 * h;
            assert!((v - oracle).abs() < 1e-9);
            assert!(*v <= peak);
        }
    }

    #[test]
    fn poisson_degenerate_case() {
        let i1 = one_phonon(&bumps(), 4.0).unwrap().distribution;
        let p = psb(&i1, 0.0, NMax::Auto).unwrap();
        assert_eq!(p.zpl_weight, 1.0);
        assert_eq!(p.n_max, 0);
        assert!(p.total.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zpl_weight_matches_exponential() {
        let i1 = one_phonon(&bumps(), 4.0).unwrap().distribution;
        let p = psb(&i1, 2.14, NMax::Auto).unwrap();
        assert!((p.zpl_weight - (-2.14f64).exp()).abs() < 1e-15);
        assert!((p.zpl_weight - 0.117655).abs() < 1e-6);
    }

    #[test]
    fn closure_mass_oracle() {
        let i1 = one_phonon(&bumps(), 4.0).unwrap().distribution;
        for s in [0.5, 1.0, 3.0] {
            let p = psb(&i1, s, NMax::Auto).unwrap();
            // Poisson mass up to n_max, accumulated independently
            let mut cum = 0.0;
            let mut fact = 1.0;
            for n in 0..=p.n_max {
                if n > 0 {
                    fact *= n as f64;
                }
                cum += (-s as f64).exp() * s.powi(n as i32) / fact;
            }
            let total = p.zpl_weight + p.total.integral();
            assert!((total - cum).abs() < 1e-9);
            assert!(total >= 1.0 - 1e-6 && total <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn auto_n_max_is_minimal() {
        for s in [0.1, 0.72, 2.14, 5.0] {
            let n = auto_n_max(s, 1e-6);
            let w = poisson_weights(s, n);
            let cum: f64 = w.iter().sum();
            assert!(cum >= 1.0 - 1e-6);
            if n > 0 {
                assert!(cum - w[n] < 1.0 - 1e-6);
            }
        }
        assert_eq!(auto_n_max(50.0, 1e-6), N_MAX_CAP);
    }

    #[test]
    fn absorption_mass_grows_with_temperature() {
        let psf = bumps();
        let mut last = 0.0;
        for t in [2.0, 4.0, 10.0, 40.0, 100.0, 300.0] {
            let m = one_phonon(&psf, t).unwrap().distribution.negative_mass();
            assert!(m >= last);
            last = m;
        }
    }
}
