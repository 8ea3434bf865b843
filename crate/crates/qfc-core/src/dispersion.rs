//! Chromatic dispersion of fiber segments.
//!
//! A segment is described the way a datasheet does it: a dispersion parameter
//! `D` (ps/nm/km) at a reference wavelength, an optional dispersion slope
//! (ps/nm^2/km), an optional flat group delay per length, and a length. The
//! group delay at angular frequency `omega` is the polynomial in wavelength
//!
//! ```text
//! tau_g(omega) = L * [ beta1 + D (lambda - lambda_ref)
//!                      + (S/2) (lambda - lambda_ref)^2 ],   lambda = 2 pi c / omega
//! ```
//!
//! and the spectral phase is its exact antiderivative in `omega`, anchored to
//! zero at the reference frequency. Keeping the integral closed-form (terms
//! in `omega`, `ln omega`, `1/omega`) means group delays recovered by
//! differentiating the phase agree with `tau_g` to machine precision rather
//! than to quadrature error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::units::{self, SPEED_OF_LIGHT, TWO_PI};

/// Wavelength half-window around the reference inside which the polynomial
/// dispersion model is trusted.
pub const VALID_WINDOW_NM: f64 = 100.0;

/// Dispersion of one fiber segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    /// Reference wavelength for the Taylor expansion, nm.
    pub reference_wavelength_nm: f64,
    /// Dispersion parameter `D` at the reference wavelength, ps/(nm km).
    pub dispersion_ps_nm_km: f64,
    /// Dispersion slope `S` at the reference wavelength, ps/(nm^2 km).
    #[serde(default)]
    pub slope_ps_nm2_km: f64,
    /// Wavelength-independent group delay per length, ps/km.
    #[serde(default)]
    pub group_delay_ps_km: f64,
    /// Physical length, km.
    pub length_km: f64,
}

impl DispersionSpec {
    /// Validates the fields, reporting failures against `pointer` in config
    /// errors.
    pub fn validate(&self, pointer: &str) -> Result<()> {
        let fields = [
            ("reference_wavelength_nm", self.reference_wavelength_nm),
            ("dispersion_ps_nm_km", self.dispersion_ps_nm_km),
            ("slope_ps_nm2_km", self.slope_ps_nm2_km),
            ("group_delay_ps_km", self.group_delay_ps_km),
            ("length_km", self.length_km),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::config(
                    format!("{pointer}/{name}"),
                    format!("must be finite, got {v}"),
                ));
            }
        }
        if self.reference_wavelength_nm <= 0.0 {
            return Err(Error::config(
                format!("{pointer}/reference_wavelength_nm"),
                "must be positive",
            ));
        }
        if self.length_km < 0.0 {
            return Err(Error::config(
                format!("{pointer}/length_km"),
                format!("must be nonnegative, got {}", self.length_km),
            ));
        }
        Ok(())
    }

    fn length_m(&self) -> f64 {
        self.length_km * 1e3
    }

    /// `D` in SI units, s/m^2.
    fn d_si(&self) -> f64 {
        self.dispersion_ps_nm_km * 1e-6
    }

    /// Slope in SI units, s/m^3.
    fn s_si(&self) -> f64 {
        self.slope_ps_nm2_km * 1e3
    }

    /// `beta1` in SI units, s/m.
    fn beta1_si(&self) -> f64 {
        self.group_delay_ps_km * 1e-15
    }

    fn omega_ref(&self) -> f64 {
        units::omega_from_wavelength_nm(self.reference_wavelength_nm)
    }

    /// Group delay in seconds at angular frequency `omega` (rad/s).
    pub fn group_delay_s(&self, omega: f64) -> f64 {
        let lambda = units::wavelength_m_from_omega(omega);
        let dl = lambda - self.reference_wavelength_nm * 1e-9;
        self.length_m() * (self.beta1_si() + self.d_si() * dl + 0.5 * self.s_si() * dl * dl)
    }

    /// Spectral phase in radians at `omega`, the exact antiderivative of
    /// [`Self::group_delay_s`] with `phase(omega_ref) = 0`.
    pub fn phase(&self, omega: f64) -> f64 {
        self.phase_raw(omega) - self.phase_raw(self.omega_ref())
    }

    fn phase_raw(&self, omega: f64) -> f64 {
        let big = TWO_PI * SPEED_OF_LIGHT;
        let lr = self.reference_wavelength_nm * 1e-9;
        let b1 = self.beta1_si();
        let d = self.d_si();
        let s = self.s_si();
        // Antiderivatives in omega of the three wavelength powers:
        //   (lambda - lr)^0 -> omega
        //   (lambda - lr)^1 -> big ln(omega) - lr omega
        //   (lambda - lr)^2 -> -big^2/omega - 2 big lr ln(omega) + lr^2 omega
        self.length_m()
            * (b1 * omega
                + d * (big * omega.ln() - lr * omega)
                + 0.5 * s * (-big * big / omega - 2.0 * big * lr * omega.ln() + lr * lr * omega))
    }

    /// Phase at every point of `grid`.
    pub fn phase_profile(&self, grid: &FrequencyGrid) -> Vec<f64> {
        (0..grid.count()).map(|k| self.phase(grid.omega(k))).collect()
    }

    /// Local group-delay slope `d tau_g / d lambda` in ps/nm at a wavelength.
    pub fn delay_slope_ps_per_nm(&self, lambda_nm: f64) -> f64 {
        self.length_km
            * (self.dispersion_ps_nm_km
                + self.slope_ps_nm2_km * (lambda_nm - self.reference_wavelength_nm))
    }

    /// Checks that every point of `grid` lies within the trusted wavelength
    /// window around the reference.
    pub fn check_applicable(&self, grid: &FrequencyGrid) -> Result<()> {
        for k in [0, grid.count() - 1] {
            let lambda = grid.wavelength_nm(k);
            let dl = (lambda - self.reference_wavelength_nm).abs();
            if dl > VALID_WINDOW_NM {
                return Err(Error::Precondition(format!(
                    "grid point at {lambda:.2} nm is {dl:.1} nm from the dispersion reference \
                     {:.2} nm, outside the trusted {VALID_WINDOW_NM:.0} nm window",
                    self.reference_wavelength_nm
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn smf_1p9km() -> DispersionSpec {
        DispersionSpec {
            reference_wavelength_nm: 1550.0,
            dispersion_ps_nm_km: 18.0,
            slope_ps_nm2_km: 0.0,
            group_delay_ps_km: 0.0,
            length_km: 1.9,
        }
    }

    #[test]
    fn delay_slope_is_d_times_length() {
        let spec = smf_1p9km();
        assert_relative_eq!(spec.delay_slope_ps_per_nm(1556.0), 34.2, max_relative = 1e-12);
        // Without slope the group delay is exactly linear in wavelength.
        let t0 = spec.group_delay_s(units::omega_from_wavelength_nm(1551.0));
        let t1 = spec.group_delay_s(units::omega_from_wavelength_nm(1561.0));
        assert_relative_eq!((t1 - t0) * 1e12 / 10.0, 34.2, max_relative = 1e-9);
    }

    #[test]
    fn phase_is_anchored_at_reference() {
        let spec = smf_1p9km();
        assert_eq!(spec.phase(units::omega_from_wavelength_nm(1550.0)), 0.0);
    }

    #[test]
    fn phase_derivative_matches_group_delay() {
        let spec = DispersionSpec {
            slope_ps_nm2_km: 0.06,
            group_delay_ps_km: 4.9e6,
            ..smf_1p9km()
        };
        let h = units::omega_from_hz(2.8e8);
        for nm in [1551.0, 1556.5, 1562.0] {
            let w = units::omega_from_wavelength_nm(nm);
            let fd = (spec.phase(w + h) - spec.phase(w - h)) / (2.0 * h);
            assert_relative_eq!(fd, spec.group_delay_s(w), max_relative = 1e-6);
        }
    }

    #[test]
    fn phase_is_additive_in_length() {
        let full = smf_1p9km();
        let half = DispersionSpec {
            length_km: 0.95,
            ..full.clone()
        };
        for nm in [1551.0, 1557.9, 1562.0] {
            let w = units::omega_from_wavelength_nm(nm);
            assert_relative_eq!(
                2.0 * half.phase(w),
                full.phase(w),
                max_relative = 1e-12,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn flat_delay_gives_linear_phase() {
        let spec = DispersionSpec {
            reference_wavelength_nm: 1550.0,
            dispersion_ps_nm_km: 0.0,
            slope_ps_nm2_km: 0.0,
            group_delay_ps_km: 1.0e6,
            length_km: 2.0,
        };
        let w0 = spec.omega_ref();
        // Total delay: 2 km * 1e6 ps/km = 2 us.
        for dw in [1.0e9, -3.0e10, 7.0e11] {
            assert_relative_eq!(
                spec.phase(w0 + dw),
                2.0e-6 * dw,
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn slope_term_bends_the_delay() {
        let spec = DispersionSpec {
            slope_ps_nm2_km: 0.058,
            ..smf_1p9km()
        };
        let expected = 1.9 * (18.0 + 0.058 * 10.0);
        assert_relative_eq!(
            spec.delay_slope_ps_per_nm(1560.0),
            expected,
            max_relative = 1e-12
        );
        let w = units::omega_from_wavelength_nm(1560.0);
        let h = units::omega_from_hz(1.0e9);
        let fd_slope_ps_per_rad =
            (spec.group_delay_s(w + h) - spec.group_delay_s(w - h)) / (2.0 * h);
        // Convert d tau/d omega to d tau/d lambda for the check.
        let lam = 1560.0e-9;
        let domega_dlambda = -TWO_PI * SPEED_OF_LIGHT / (lam * lam);
        let fd_ps_per_nm = fd_slope_ps_per_rad * domega_dlambda * 1e12 * 1e-9;
        assert_relative_eq!(fd_ps_per_nm, expected, max_relative = 1e-4);
    }

    #[test]
    fn applicability_window_is_enforced() {
        let spec = smf_1p9km();
        let near = FrequencyGrid::from_wavelength_nm(1556.5, 80.0e6, 1024).unwrap();
        assert!(spec.check_applicable(&near).is_ok());
        let far = FrequencyGrid::from_wavelength_nm(925.0, 13.7e9, 256).unwrap();
        assert!(spec.check_applicable(&far).is_err());
    }

    #[test]
    fn rejects_negative_length() {
        let spec = DispersionSpec {
            length_km: -1.0,
            ..smf_1p9km()
        };
        match spec.validate("/chain/pre") {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/chain/pre/length_km"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
