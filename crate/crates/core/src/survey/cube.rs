use super::SurveyError;
use crate::spectra::{AxisKind, Spectrum};

/// Intensity per (y, x, λ), stored row-major with λ fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralCube {
    nx: usize,
    ny: usize,
    wavelengths: Vec<f64>,
    data: Vec<f64>,
    pub pixel_pitch_um: Option<f64>,
}

impl HyperspectralCube {
    pub fn new(nx: usize, ny: usize, wavelengths: Vec<f64>, data: Vec<f64>) -> Result<Self, SurveyError> {
        if nx == 0 || ny == 0 || wavelengths.is_empty() {
            return Err(SurveyError::EmptyCube);
        }
        if let Some(i) = (1..wavelengths.len()).find(|&i| !(wavelengths[i] > wavelengths[i - 1])) {
            return Err(SurveyError::InvalidCube(format!("wavelengths not strictly increasing at index {i}")));
        }
        if wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(SurveyError::InvalidCube("non-finite wavelength".into()));
        }
        let expected = nx * ny * wavelengths.len();
        if data.len() != expected {
            return Err(SurveyError::InvalidCube(format!("expected {expected} values, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SurveyError::InvalidCube(format!("value {} at flat index {i} is negative or non-finite", data[i])));
        }
        Ok(Self { nx, ny, wavelengths, data, pixel_pitch_um: None })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_wavelengths(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let nl = self.wavelengths.len();
        let start = (y * self.nx + x) * nl;
        &self.data[start..start + nl]
    }

    /// Spectrum of one pixel with Poisson σ.
    pub fn pixel_spectrum(&self, y: usize, x: usize) -> Result<Spectrum, SurveyError> {
        let mut s = Spectrum::from_arrays(AxisKind::WavelengthNm, &self.wavelengths, self.pixel(y, x), None)?;
        s.metadata.insert("axis_kind".into(), AxisKind::WavelengthNm.as_str().into());
        s.metadata.insert("pixel_x".into(), x.to_string());
        s.metadata.insert("pixel_y".into(), y.to_string());
        Ok(s)
    }

    /// Cube shifted by (dy, dx) pixels with wraparound.
    pub fn rolled(&self, dy: isize, dx: isize) -> Self {
        let nl = self.wavelengths.len();
        let mut data = vec![0.0; self.data.len()];
        for y in 0..self.ny {
            for x in 0..self.nx {
                let ty = (y as isize + dy).rem_euclid(self.ny as isize) as usize;
                let tx = (x as isize + dx).rem_euclid(self.nx as isize) as usize;
                let dst = (ty * self.nx + tx) * nl;
                data[dst..dst + nl].copy_from_slice(self.pixel(y, x));
            }
        }
        Self { data, ..self.clone() }
    }
}
