//! Fixed CODATA-2018 constants in the unit systems used throughout the crate.

/// Physical constants. The values are fixed and never configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck constant, eV·s.
    pub h: f64,
    /// Speed of light, nm/s.
    pub c: f64,
    /// Boltzmann constant, eV/K.
    pub k_b: f64,
    /// Reduced Planck constant, eV·s.
    pub hbar: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Conversion factor from a dipole moment in e·Å to C·m.
    pub e_angstrom_to_coulomb_metre: f64,
}

/// h·c in eV·nm.
pub const HC_EV_NM: f64 = 1239.841_98;
/// Boltzmann constant in eV/K.
pub const K_B_EV_PER_K: f64 = 8.617_333_262e-5;
/// Elementary charge in C (also J per eV).
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;
/// Reduced Planck constant in J·s.
pub const HBAR_J_S: f64 = 1.054_571_817e-34;
/// Speed of light in m/s.
pub const C_M_PER_S: f64 = 299_792_458.0;
/// Vacuum permittivity in F/m.
pub const EPS0_F_PER_M: f64 = 8.854_187_812_8e-12;

/// The constants used by every module.
pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    h: 4.135_667_696e-15,
    c: 2.997_924_58e17,
    k_b: K_B_EV_PER_K,
    hbar: 6.582_119_569e-16,
    eps0: EPS0_F_PER_M,
    e_angstrom_to_coulomb_metre: ELEMENTARY_CHARGE_C * 1e-10,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA_2018
    }
}

/// Photon energy in eV for a vacuum wavelength in nm.
#[inline]
pub fn wavelength_nm_to_ev(lambda_nm: f64) -> f64 {
    HC_EV_NM / lambda_nm
}

/// Vacuum wavelength in nm for a photon energy in eV.
#[inline]
pub fn ev_to_wavelength_nm(e_ev: f64) -> f64 {
    HC_EV_NM / e_ev
}
