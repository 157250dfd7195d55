//! Physical constants and unit conversions.
//!
//! Internal units: time in picoseconds, energy in eV (line parameters) or
//! µeV (linewidths), length in nm, field in V/nm.

/// Reduced Planck constant in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;

/// Planck constant in µeV·ns.
pub const PLANCK_UEV_NS: f64 = 4.135_667_696;

/// Planck constant in µeV·ps.
pub const PLANCK_UEV_PS: f64 = PLANCK_UEV_NS * 1.0e3;

/// Speed of light in mm/ps.
pub const SPEED_OF_LIGHT_MM_PER_PS: f64 = 0.299_792_458;

/// hc in eV·nm, for photon energy ↔ vacuum wavelength.
pub const HC_EV_NM: f64 = 1_239.841_984;

/// e / (4π ε₀) in V·nm (equivalently e²/(4π ε₀) in eV·nm).
pub const COULOMB_V_NM: f64 = 1.439_964_548;

/// ħ² / (2 m₀) in eV·nm².
pub const HBAR2_OVER_2M0_EV_NM2: f64 = 0.038_099_821_2;

/// First zero of the Airy function Ai.
pub const AIRY_A1: f64 = -2.338_107_410_459_767;

/// Ratio FWHM / σ of a Gaussian, 2·√(2 ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Field conversion: 1 V/nm = 10⁴ kV/cm.
pub const KV_PER_CM_PER_V_PER_NM: f64 = 1.0e4;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

pub fn sigma_to_fwhm(sigma: f64) -> f64 {
    sigma * FWHM_PER_SIGMA
}

/// Energy FWHM in µeV to frequency FWHM in 1/ps.
pub fn uev_to_per_ps(energy_uev: f64) -> f64 {
    energy_uev / PLANCK_UEV_PS
}

/// Frequency in 1/ps to energy in µeV.
pub fn per_ps_to_uev(freq_per_ps: f64) -> f64 {
    freq_per_ps * PLANCK_UEV_PS
}

/// Vacuum wavelength (nm) of a photon with the given energy (eV).
pub fn wavelength_nm(energy_ev: f64) -> f64 {
    HC_EV_NM / energy_ev
}

pub fn v_per_nm_to_kv_per_cm(field: f64) -> f64 {
    field * KV_PER_CM_PER_V_PER_NM
}

pub fn kv_per_cm_to_v_per_nm(field: f64) -> f64 {
    field / KV_PER_CM_PER_V_PER_NM
}
