//! Unit-area zero-phonon-line profiles and their integrals against piecewise-linear densities.
//!
//! Profiles are truncated to a finite support |x| ≤ W and renormalized, so a
//! Lorentzian keeps unit area on any window that contains the support.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};

use crate::numeric::erf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZplShape {
    #[default]
    Lorentzian,
    Gaussian,
}

impl ZplShape {
    pub fn as_str(self) -> &'static str {
        match self {
            ZplShape::Lorentzian => "lorentzian",
            ZplShape::Gaussian => "gaussian",
        }
    }

    /// Scale parameter s for a given FWHM (half width for a Lorentzian, σ for a Gaussian).
    pub fn scale_per_fwhm(self) -> f64 {
        match self {
            ZplShape::Lorentzian => 0.5,
            ZplShape::Gaussian => 1.0 / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt()),
        }
    }

    /// Standard CDF offset g(t) with g(0) = 0, g(∞) = ½.
    fn g(self, t: f64) -> f64 {
        match self {
            ZplShape::Lorentzian => t.atan() * FRAC_1_PI,
            ZplShape::Gaussian => 0.5 * erf(t / SQRT_2),
        }
    }

    /// Standard density g′(t).
    fn g1(self, t: f64) -> f64 {
        match self {
            ZplShape::Lorentzian => FRAC_1_PI / (1.0 + t * t),
            ZplShape::Gaussian => (-0.5 * t * t).exp() / (2.0 * PI).sqrt(),
        }
    }

    fn g2(self, t: f64) -> f64 {
        match self {
            ZplShape::Lorentzian => -2.0 * t * FRAC_1_PI / (1.0 + t * t).powi(2),
            ZplShape::Gaussian => -t * self.g1(t),
        }
    }

    /// Antiderivative of g, even in t.
    fn big_g(self, t: f64) -> f64 {
        match self {
            ZplShape::Lorentzian => (t * t.atan() - t.hypot(1.0).ln()) * FRAC_1_PI,
            ZplShape::Gaussian => t * self.g(t) + self.g1(t),
        }
    }

    /// G(t) − t·g(t), the scale derivative of s·G(x/s).
    fn big_h(self, t: f64) -> f64 {
        match self {
            ZplShape::Lorentzian => -(t.hypot(1.0)).ln() * FRAC_1_PI,
            ZplShape::Gaussian => self.g1(t),
        }
    }
}

impl std::fmt::Display for ZplShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ZplShape {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lorentzian" => Ok(ZplShape::Lorentzian),
            "gaussian" => Ok(ZplShape::Gaussian),
            other => Err(format!("unknown ZPL shape '{other}'")),
        }
    }
}

/// Values returned by [`ZplProfile::eval`]: F2 is the second antiderivative, F the
/// CDF, and `*_s` their derivatives with respect to the scale parameter.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ProfilePoint {
    pub f2: f64,
    pub f: f64,
    pub f2_s: f64,
}

/// Truncated, renormalized ZPL profile with scale s and support half-width W.
#[derive(Debug, Clone, Copy)]
pub struct ZplProfile {
    shape: ZplShape,
    scale: f64,
    support: f64,
    w: f64,
    gw: f64,
    g1w: f64,
    norm: f64,
    norm_s: f64,
    big_gw: f64,
    big_hw: f64,
}

impl ZplProfile {
    pub fn new(shape: ZplShape, fwhm: f64, support: f64) -> Self {
        let scale = fwhm * shape.scale_per_fwhm();
        let w = support / scale;
        let gw = shape.g(w);
        let g1w = shape.g1(w);
        let norm = 2.0 * gw;
        Self {
            shape,
            scale,
            support,
            w,
            gw,
            g1w,
            norm,
            norm_s: -2.0 * g1w * w / scale,
            big_gw: shape.big_g(w),
            big_hw: shape.big_h(w),
        }
    }

    pub fn shape(&self) -> ZplShape {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// Unit-area density at x.
    pub fn pdf(&self, x: f64) -> f64 {
        if x.abs() > self.support {
            return 0.0;
        }
        self.shape.g1(x / self.scale) / (self.scale * self.norm)
    }

    /// ∂pdf/∂x.
    pub fn pdf_x(&self, x: f64) -> f64 {
        if x.abs() > self.support {
            return 0.0;
        }
        self.shape.g2(x / self.scale) / (self.scale * self.scale * self.norm)
    }

    /// ∂pdf/∂s.
    pub fn pdf_s(&self, x: f64) -> f64 {
        if x.abs() > self.support {
            return 0.0;
        }
        let s = self.scale;
        let t = x / s;
        let g1 = self.shape.g1(t);
        let g2 = self.shape.g2(t);
        -g2 * t / (s * s * self.norm) - g1 / (s * s * self.norm) - g1 * self.norm_s / (s * self.norm * self.norm)
    }

    /// CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.support {
            0.0
        } else if x >= self.support {
            1.0
        } else {
            (self.shape.g(x / self.scale) + self.gw) / self.norm
        }
    }

    /// Second antiderivative F2(x) = ∫_{−∞}^{x} CDF.
    pub fn second_antiderivative(&self, x: f64) -> f64 {
        self.eval(x, false).f2
    }

    pub(crate) fn eval(&self, x: f64, derivs: bool) -> ProfilePoint {
        if x <= -self.support {
            return ProfilePoint::default();
        }
        if x >= self.support {
            return ProfilePoint { f2: x, f: 1.0, f2_s: 0.0 };
        }
        let s = self.scale;
        let t = x / s;
        let numer = s * (self.shape.big_g(t) - self.big_gw) + self.gw * (x + self.support);
        let f2 = numer / self.norm;
        if !derivs {
            return ProfilePoint { f2, f: 0.0, f2_s: 0.0 };
        }
        let gt = self.shape.g(t);
        let f = (gt + self.gw) / self.norm;
        let numer_s = self.shape.big_h(t) - self.big_hw - self.g1w * (self.w / s) * (x + self.support);
        let f2_s = (numer_s - f2 * self.norm_s) / self.norm;
        ProfilePoint { f2, f, f2_s }
    }
}
