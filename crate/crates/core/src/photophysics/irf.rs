use serde::{Deserialize, Serialize};

use super::PhotophysicsError;

/// Default spectrometer response FWHM, 44.0 μeV.
pub const DEFAULT_IRF_FWHM_EV: f64 = 44.0e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrfMethod {
    /// Widths add linearly (Lorentzian ⊗ Lorentzian).
    #[default]
    Linear,
    /// Widths add in quadrature (Gaussian ⊗ Gaussian).
    Quadrature,
}

impl IrfMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IrfMethod::Linear => "linear",
            IrfMethod::Quadrature => "quadrature",
        }
    }
}

impl std::str::FromStr for IrfMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(IrfMethod::Linear),
            "quadrature" => Ok(IrfMethod::Quadrature),
            other => Err(format!("unknown IRF method '{other}'")),
        }
    }
}

/// Removes the instrument response from a measured FWHM.
pub fn correct_irf(fwhm_raw: f64, irf_fwhm: f64, method: IrfMethod) -> Result<f64, PhotophysicsError> {
    if !(irf_fwhm > 0.0) {
        return Err(PhotophysicsError::NonPositiveInput(format!("irf_fwhm = {irf_fwhm}")));
    }
    if !(fwhm_raw > irf_fwhm) {
        return Err(PhotophysicsError::IrfExceedsRaw { raw: fwhm_raw, irf: irf_fwhm });
    }
    Ok(match method {
        IrfMethod::Linear => fwhm_raw - irf_fwhm,
        IrfMethod::Quadrature => ((fwhm_raw - irf_fwhm) * (fwhm_raw + irf_fwhm)).sqrt(),
    })
}

/// Broadens an intrinsic FWHM by the instrument response.
pub fn add_irf(fwhm: f64, irf_fwhm: f64, method: IrfMethod) -> f64 {
    match method {
        IrfMethod::Linear => fwhm + irf_fwhm,
        IrfMethod::Quadrature => fwhm.hypot(irf_fwhm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn to_tenth_uev(ev: f64) -> f64 {
        (ev * 1e7).round() / 10.0
    }

    #[test]
    fn linear_pairs() {
        for (raw, corrected) in [(148.0, 104.0), (279.0, 235.0), (55.1, 11.1)] {
            let c = correct_irf(raw * 1e-6, DEFAULT_IRF_FWHM_EV, IrfMethod::Linear).unwrap();
            assert_eq!(to_tenth_uev(c), corrected);
        }
    }

    #[test]
    fn quadrature_triangle() {
        assert!((correct_irf(5.0, 4.0, IrfMethod::Quadrature).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_irf_wider_than_raw() {
        assert!(matches!(correct_irf(40e-6, 44e-6, IrfMethod::Linear), Err(PhotophysicsError::IrfExceedsRaw { .. })));
        assert!(matches!(correct_irf(1.0, 0.0, IrfMethod::Linear), Err(PhotophysicsError::NonPositiveInput(_))));
    }

    proptest! {
        #[test]
        fn correction_inverts_broadening(w in 1e-6f64..1e-3, irf in 1e-6f64..1e-3) {
            for m in [IrfMethod::Linear, IrfMethod::Quadrature] {
                let back = correct_irf(add_irf(w, irf, m), irf, m).unwrap();
                prop_assert!((back - w).abs() <= 1e-9 * w.max(irf));
            }
        }
    }
}
