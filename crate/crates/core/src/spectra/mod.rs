//! Spectrum containers and the conversions that take detector counts to the
//! E³-normalized lineshape consumed by the vibronic model.
//!
//! The chain for a measured spectrum is
//! [`calibrate`] → optional [`rebin`] → [`to_energy`] → [`to_lineshape`].
//! Each step is a pure function returning a new value.

mod convert;
mod io;
mod rebin;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::numeric::{interp_linear, trapz};
use crate::table::TableError;

pub use convert::{calibrate, to_energy, to_lineshape, to_wavelength, uncalibrate};
pub use io::{lineshape_to_table, read_spectrum, spectrum_from_table, spectrum_to_table, write_spectrum};
pub use rebin::{equal_count_edges, rebin, DEFAULT_COUNTS_PER_BIN};

/// Minimum number of bins a [`Spectrum`] must hold.
pub const MIN_BINS: usize = 8;

/// Metadata key set by [`calibrate`].
pub const CALIBRATED_KEY: &str = "calibrated";

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("spectrum needs at least {MIN_BINS} bins, got {0}")]
    TooFewBins(usize),
    #[error("axis is not strictly monotonic at bin {0}")]
    NonMonotonicAxis(usize),
    #[error("negative or non-finite sigma at bin {0}")]
    NegativeSigma(usize),
    #[error("non-finite axis value or intensity at bin {0}")]
    NonFinite(usize),
    #[error("operation requires a {expected} axis, spectrum has {found}")]
    WrongAxisKind { expected: AxisKind, found: AxisKind },
    #[error("efficiency curve does not cover axis value {0}")]
    AxisNotCovered(f64),
    #[error("spectrum is already calibrated")]
    AlreadyCalibrated,
    #[error("spectrum is not calibrated")]
    NotCalibrated,
    #[error("non-positive wavelength {0} nm")]
    NonPositiveWavelength(f64),
    #[error("zero or negative photon energy {0} eV")]
    ZeroEnergyBin(f64),
    #[error("rebin edges outside source range [{lo}, {hi}]")]
    EdgesOutOfRange { lo: f64, hi: f64 },
    #[error("rebin edges must be strictly increasing and at least two")]
    NonMonotonicEdges,
    #[error("invalid efficiency curve: {0}")]
    InvalidCurve(String),
    #[error("invalid lineshape: {0}")]
    InvalidLineshape(String),
    #[error("bad metadata value for '{key}': {value}")]
    BadMetadata { key: String, value: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxisKind {
    WavelengthNm,
    EnergyEv,
}

impl AxisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisKind::WavelengthNm => "wavelength_nm",
            AxisKind::EnergyEv => "energy_eV",
        }
    }
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisKind {
    type Err = SpectrumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "wavelength_nm" => Ok(AxisKind::WavelengthNm),
            "energy_eV" | "energy_ev" => Ok(AxisKind::EnergyEv),
            other => Err(SpectrumError::BadMetadata {
                key: "axis_kind".into(),
                value: other.into(),
            }),
        }
    }
}

/// One spectral sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub axis: f64,
    pub intensity: f64,
    pub sigma: f64,
}

impl Bin {
    pub fn new(axis: f64, intensity: f64, sigma: f64) -> Self {
        Self { axis, intensity, sigma }
    }

    /// Bin with the Poisson floor `sqrt(max(counts, 1))` as uncertainty.
    pub fn poisson(axis: f64, intensity: f64) -> Self {
        Self { axis, intensity, sigma: poisson_sigma(intensity) }
    }
}

/// Default uncertainty for a count value when none is supplied.
pub fn poisson_sigma(counts: f64) -> f64 {
    counts.max(1.0).sqrt()
}

/// A measured intensity trace on a wavelength or energy axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axis_kind: AxisKind,
    bins: Vec<Bin>,
    pub metadata: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(axis_kind: AxisKind, bins: Vec<Bin>) -> Result<Self, SpectrumError> {
        Self::with_metadata(axis_kind, bins, BTreeMap::new())
    }

    pub fn with_metadata(
        axis_kind: AxisKind,
        bins: Vec<Bin>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, SpectrumError> {
        if bins.len() < MIN_BINS {
            return Err(SpectrumError::TooFewBins(bins.len()));
        }
        for (i, b) in bins.iter().enumerate() {
            if !b.axis.is_finite() || !b.intensity.is_finite() {
                return Err(SpectrumError::NonFinite(i));
            }
            if !(b.sigma >= 0.0) || !b.sigma.is_finite() {
                return Err(SpectrumError::NegativeSigma(i));
            }
        }
        let ascending = bins[1].axis > bins[0].axis;
        for i in 1..bins.len() {
            let step = bins[i].axis - bins[i - 1].axis;
            if (ascending && step <= 0.0) || (!ascending && step >= 0.0) {
                return Err(SpectrumError::NonMonotonicAxis(i));
            }
        }
        Ok(Self { axis_kind, bins, metadata })
    }

    /// Builds a spectrum from parallel arrays; missing sigmas use the Poisson floor.
    pub fn from_arrays(
        axis_kind: AxisKind,
        axis: &[f64],
        intensity: &[f64],
        sigma: Option<&[f64]>,
    ) -> Result<Self, SpectrumError> {
        let bins = axis
            .iter()
            .zip(intensity)
            .enumerate()
            .map(|(i, (&a, &y))| match sigma {
                Some(s) => Bin::new(a, y, s[i]),
                None => Bin::poisson(a, y),
            })
            .collect();
        Self::new(axis_kind, bins)
    }

    pub fn axis_kind(&self) -> AxisKind {
        self.axis_kind
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn axis(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.axis).collect()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.intensity).collect()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.sigma).collect()
    }

    pub fn is_ascending(&self) -> bool {
        self.bins[1].axis > self.bins[0].axis
    }

    /// (min, max) of the axis.
    pub fn axis_range(&self) -> (f64, f64) {
        let a = self.bins[0].axis;
        let b = self.bins[self.bins.len() - 1].axis;
        (a.min(b), a.max(b))
    }

    /// Trapezoidal integral of intensity over the axis (sign-normalized so a
    /// positive spectrum integrates positive regardless of axis ordering).
    pub fn integral(&self) -> f64 {
        trapz(&self.axis(), &self.intensity()).abs()
    }

    /// Sum of bin contents.
    pub fn total_counts(&self) -> f64 {
        self.bins.iter().map(|b| b.intensity).sum()
    }

    /// Bin edges inferred from the centers, in ascending axis order: interior
    /// edges at midpoints, outer edges half a spacing beyond the end centers.
    pub fn bin_edges(&self) -> Vec<f64> {
        let mut centers = self.axis();
        if !self.is_ascending() {
            centers.reverse();
        }
        let n = centers.len();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(centers[0] - 0.5 * (centers[1] - centers[0]));
        for w in centers.windows(2) {
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(centers[n - 1] + 0.5 * (centers[n - 1] - centers[n - 2]));
        edges
    }

    pub fn metadata_f64(&self, key: &str) -> Result<Option<f64>, SpectrumError> {
        match self.metadata.get(key) {
            None => Ok(None),
            Some(v) => v.trim().parse::<f64>().map(Some).map_err(|_| SpectrumError::BadMetadata {
                key: key.to_string(),
                value: v.clone(),
            }),
        }
    }

    pub fn temperature_k(&self) -> Result<Option<f64>, SpectrumError> {
        self.metadata_f64("temperature_K")
    }

    pub fn is_calibrated(&self) -> bool {
        self.metadata.get(CALIBRATED_KEY).map(|v| v == "true").unwrap_or(false)
    }

    /// Copy with bins in ascending axis order.
    pub fn sorted_ascending(&self) -> Spectrum {
        let mut out = self.clone();
        if !out.is_ascending() {
            out.bins.reverse();
        }
        out
    }

    pub(crate) fn replace_bins(&self, axis_kind: AxisKind, bins: Vec<Bin>) -> Result<Spectrum, SpectrumError> {
        Spectrum::with_metadata(axis_kind, bins, self.metadata.clone())
    }
}

/// The E³-normalized, ZPL-relative lineshape L(ΔE), ΔE = E_ZPL − E.
#[derive(Debug, Clone, PartialEq)]
pub struct Lineshape {
    /// ΔE in eV, ascending.
    pub delta_e: Vec<f64>,
    /// Density per eV.
    pub density: Vec<f64>,
    /// Density uncertainty per bin.
    pub sigma: Vec<f64>,
    /// Energy reference the ΔE axis was built from, in eV.
    pub e_zpl_hint: f64,
}

impl Lineshape {
    pub fn new(
        delta_e: Vec<f64>,
        density: Vec<f64>,
        sigma: Vec<f64>,
        e_zpl_hint: f64,
    ) -> Result<Self, SpectrumError> {
        let n = delta_e.len();
        if density.len() != n || sigma.len() != n {
            return Err(SpectrumError::InvalidLineshape("array lengths differ".into()));
        }
        if n < 2 {
            return Err(SpectrumError::InvalidLineshape("fewer than two points".into()));
        }
        if delta_e.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectrumError::InvalidLineshape("ΔE axis not strictly ascending".into()));
        }
        if density.iter().chain(&delta_e).any(|v| !v.is_finite()) {
            return Err(SpectrumError::InvalidLineshape("non-finite value".into()));
        }
        if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(SpectrumError::InvalidLineshape("negative or non-finite sigma".into()));
        }
        let integral = trapz(&delta_e, &density);
        if !(integral.is_finite() && integral > 0.0) {
            return Err(SpectrumError::InvalidLineshape(format!(
                "integral over window must be positive, got {integral}"
            )));
        }
        Ok(Self { delta_e, density, sigma, e_zpl_hint })
    }

    pub fn len(&self) -> usize {
        self.delta_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_e.is_empty()
    }

    pub fn integral(&self) -> f64 {
        trapz(&self.delta_e, &self.density)
    }

    /// Photon energies E = E_hint − ΔE for each point.
    pub fn energies(&self) -> Vec<f64> {
        self.delta_e.iter().map(|d| self.e_zpl_hint - d).collect()
    }

    /// Restricts the lineshape to `lo ≤ ΔE ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Lineshape, SpectrumError> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.delta_e[i] >= lo && self.delta_e[i] <= hi).collect();
        Lineshape::new(
            keep.iter().map(|&i| self.delta_e[i]).collect(),
            keep.iter().map(|&i| self.density[i]).collect(),
            keep.iter().map(|&i| self.sigma[i]).collect(),
            self.e_zpl_hint,
        )
    }
}

/// Relative detection efficiency versus wavelength, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCurve {
    wavelength_nm: Vec<f64>,
    efficiency: Vec<f64>,
}

impl EfficiencyCurve {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, SpectrumError> {
        if samples.len() < 2 {
            return Err(SpectrumError::InvalidCurve("need at least two samples".into()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(SpectrumError::InvalidCurve("wavelengths must be strictly increasing".into()));
        }
        if samples.iter().any(|s| !(s.1 > 0.0) || !s.1.is_finite()) {
            return Err(SpectrumError::InvalidCurve("efficiency must be strictly positive".into()));
        }
        let (wavelength_nm, efficiency) = samples.into_iter().unzip();
        Ok(Self { wavelength_nm, efficiency })
    }

    /// Constant efficiency over a range.
    pub fn flat(lo_nm: f64, hi_nm: f64, value: f64) -> Result<Self, SpectrumError> {
        Self::new(vec![(lo_nm, value), (hi_nm, value)])
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelength_nm[0], self.wavelength_nm[self.wavelength_nm.len() - 1])
    }

    /// Interpolated efficiency, `None` outside the sampled range.
    pub fn at(&self, lambda_nm: f64) -> Option<f64> {
        interp_linear(&self.wavelength_nm, &self.efficiency, lambda_nm)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavelength_nm.iter().copied().zip(self.efficiency.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<Bin> {
        (0..n).map(|i| Bin::new(800.0 + i as f64, 10.0, 1.0)).collect()
    }

    #[test]
    fn rejects_short_or_non_monotonic() {
        assert!(matches!(
            Spectrum::new(AxisKind::WavelengthNm, ramp(7)),
            Err(SpectrumError::TooFewBins(7))
        ));
        let mut bins = ramp(10);
        bins[5].axis = bins[4].axis;
        assert!(matches!(
            Spectrum::new(AxisKind::WavelengthNm, bins),
            Err(SpectrumError::NonMonotonicAxis(5))
        ));
    }

    #[test]
    fn rejects_negative_sigma_and_nan() {
        let mut bins = ramp(10);
        bins[2].sigma = -1.0;
        assert!(matches!(Spectrum::new(AxisKind::WavelengthNm, bins), Err(SpectrumError::NegativeSigma(2))));
        let mut bins = ramp(10);
        bins[3].intensity = f64::NAN;
        assert!(matches!(Spectrum::new(AxisKind::WavelengthNm, bins), Err(SpectrumError::NonFinite(3))));
    }

    #[test]
    fn descending_axis_accepted() {
        let mut bins = ramp(10);
        bins.reverse();
        let s = Spectrum::new(AxisKind::WavelengthNm, bins).unwrap();
        assert!(!s.is_ascending());
        assert_eq!(s.bin_edges()[0], 799.5);
    }

    #[test]
    fn poisson_floor_default() {
        let s = Spectrum::from_arrays(
            AxisKind::EnergyEv,
            &(0..8).map(|i| 1.0 + i as f64 * 0.01).collect::<Vec<_>>(),
            &[0.0, 0.5, 1.0, 4.0, 9.0, 16.0, 100.0, 2.0],
            None,
        )
        .unwrap();
        let sig = s.sigma();
        assert_eq!(&sig[..7], &[1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 10.0]);
    }

    #[test]
    fn efficiency_curve_validation() {
        assert!(EfficiencyCurve::new(vec![(700.0, 1.0), (800.0, 0.0)]).is_err());
        assert!(EfficiencyCurve::new(vec![(800.0, 1.0), (700.0, 1.0)]).is_err());
        let c = EfficiencyCurve::new(vec![(700.0, 1.0), (800.0, 0.5)]).unwrap();
        assert_eq!(c.at(750.0), Some(0.75));
        assert_eq!(c.at(801.0), None);
    }

    #[test]
    fn lineshape_requires_positive_integral() {
        assert!(Lineshape::new(vec![0.0, 1.0], vec![-1.0, -1.0], vec![0.1, 0.1], 1.5).is_err());
        assert!(Lineshape::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.1, 0.1], 1.5).is_ok());
    }
}
