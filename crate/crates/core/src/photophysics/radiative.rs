use super::PhotophysicsError;
use crate::constants::{C_M_PER_S, ELEMENTARY_CHARGE_C, EPS0_F_PER_M, HBAR_J_S};

const ANGSTROM_M: f64 = 1e-10;

/// τ_rad·n·E³·μ² in ns·eV³·(e·Å)².
pub fn radiative_prefactor() -> f64 {
    let e = ELEMENTARY_CHARGE_C;
    let num = 3.0 * std::f64::consts::PI * EPS0_F_PER_M * HBAR_J_S.powi(4) * C_M_PER_S.powi(3);
    // E in J = eV·e; μ in C·m = (e·Å)·e·1e-10
    num / (e.powi(3) * (e * ANGSTROM_M).powi(2)) * 1e9
}

/// Spontaneous-emission lifetime τ_rad = 3πε₀ħ⁴c³/(n·E³·μ²) in ns,
/// for `e_zpl` in eV and `mu` in e·Å.
pub fn radiative_lifetime(e_zpl: f64, mu: f64, n_d: f64) -> Result<f64, PhotophysicsError> {
    for (name, v) in [("e_zpl", e_zpl), ("mu", mu), ("n_d", n_d)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(PhotophysicsError::NonPositiveInput(format!("{name} = {v}")));
        }
    }
    Ok(radiative_prefactor() / (n_d * e_zpl.powi(3) * mu * mu))
}
