use super::VibronicError;
use crate::constants::K_B_EV_PER_K;

/// Bose–Einstein occupation n(E, T) = 1/(exp(E/k_B T) − 1).
pub fn bose_einstein(e_ev: f64, t_k: f64) -> Result<f64, VibronicError> {
    if !(e_ev > 0.0) {
        return Err(VibronicError::NonPositiveEnergy(e_ev));
    }
    if !(t_k > 0.0) {
        return Err(VibronicError::NonPositiveTemperature(t_k));
    }
    Ok(occupation(e_ev, t_k))
}

/// Unchecked occupation; `e_ev`, `t_k` > 0.
#[inline]
pub(crate) fn occupation(e_ev: f64, t_k: f64) -> f64 {
    1.0 / (e_ev / (K_B_EV_PER_K * t_k)).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_one_at_ln2() {
        let t = 12.0;
        let e = K_B_EV_PER_K * t * std::f64::consts::LN_2;
        assert!((bose_einstein(e, t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deep_suppression_for_optical_phonon_at_4k() {
        assert!(bose_einstein(0.160, 4.0).unwrap() < 1e-200);
    }

    #[test]
    fn low_energy_mode_at_4k() {
        // direct evaluation, 1/(exp(0.001/(k_B·4)) − 1)
        let oracle = 1.0 / ((0.001f64 / (8.617333e-5 * 4.0)).exp() - 1.0);
        let n = bose_einstein(0.001, 4.0).unwrap();
        assert!((n - oracle).abs() < 1e-5);
        assert!((n - 0.058158).abs() < 1e-5);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        assert!(matches!(bose_einstein(0.0, 4.0), Err(VibronicError::NonPositiveEnergy(_))));
        assert!(matches!(bose_einstein(0.01, -1.0), Err(VibronicError::NonPositiveTemperature(_))));
    }
}
