//! Unit conversions and physical constants.
//!
//! All internal quantities are SI: angular frequencies in rad/s, times in
//! seconds, lengths in metres. Configuration files and reports use the bench
//! units of the lab (nm, ps, km, MHz); the helpers here perform the
//! conversions at those boundaries so the physics code never mixes unit
//! systems.

use std::f64::consts::PI;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const TWO_PI: f64 = 2.0 * PI;

/// Angular frequency (rad/s) of a vacuum wavelength given in nm.
pub fn omega_from_wavelength_nm(lambda_nm: f64) -> f64 {
    TWO_PI * SPEED_OF_LIGHT / (lambda_nm * 1e-9)
}

/// Vacuum wavelength in nm of an angular frequency (rad/s).
pub fn wavelength_nm_from_omega(omega: f64) -> f64 {
    TWO_PI * SPEED_OF_LIGHT / omega * 1e9
}

/// Vacuum wavelength in metres of an angular frequency (rad/s).
pub fn wavelength_m_from_omega(omega: f64) -> f64 {
    TWO_PI * SPEED_OF_LIGHT / omega
}

/// Angular frequency (rad/s) from an ordinary frequency in Hz.
pub fn omega_from_hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Ordinary frequency in Hz from an angular frequency (rad/s).
pub fn hz_from_omega(omega: f64) -> f64 {
    omega / TWO_PI
}

pub fn seconds_from_ps(t_ps: f64) -> f64 {
    t_ps * 1e-12
}

pub fn ps_from_seconds(t_s: f64) -> f64 {
    t_s * 1e12
}

/// Width of a wavelength interval `d_lambda_nm` centred at `lambda_nm`,
/// expressed as an angular frequency width (rad/s). First-order conversion,
/// adequate for intervals much narrower than the carrier wavelength.
pub fn omega_width_from_nm(d_lambda_nm: f64, lambda_nm: f64) -> f64 {
    TWO_PI * SPEED_OF_LIGHT * d_lambda_nm / (lambda_nm * lambda_nm) * 1e9
}
