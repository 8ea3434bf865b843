//! Gaussian pump envelopes with linear chirp.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

const LN2: f64 = std::f64::consts::LN_2;

/// One pump pulse: a Gaussian envelope with an optional linear chirp,
///
/// ```text
/// A(t) = amplitude * exp(-2 ln2 (t - t0)^2 / T^2) * exp(i chirp (t - t0)^2)
/// ```
///
/// with `T` the intensity FWHM. Internally this is
/// `amplitude * exp(-Gamma (t - t0)^2)` with the complex rate
/// `Gamma = 2 ln2 / T^2 - i chirp`, which keeps Fourier transforms and pump
/// products closed-form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpEnvelope {
    /// Carrier wavelength, nm.
    pub center_wavelength_nm: f64,
    /// Intensity FWHM, ps.
    pub duration_fwhm_ps: f64,
    /// Linear chirp coefficient, rad/ps^2.
    #[serde(default)]
    pub chirp_rad_ps2: f64,
    /// Peak field amplitude, arbitrary units.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Arrival time of the envelope peak at z = 0, ps.
    #[serde(default)]
    pub delay_ps: f64,
}

fn one() -> f64 {
    1.0
}

impl PumpEnvelope {
    /// Transform-limited pulse with the given intensity FWHM.
    pub fn transform_limited(center_wavelength_nm: f64, duration_fwhm_ps: f64) -> Self {
        PumpEnvelope {
            center_wavelength_nm,
            duration_fwhm_ps,
            chirp_rad_ps2: 0.0,
            amplitude: 1.0,
            delay_ps: 0.0,
        }
    }

    /// Chirped pulse obtained by dispersively stretching a transform-limited
    /// pulse of FWHM `t0_fwhm_ps` by `|stretch| >= 1`, the way a fiber
    /// stretcher does it: the spectral magnitude is exactly preserved while
    /// the duration grows to `|stretch| * t0_fwhm_ps`. The sign of `stretch`
    /// sets the chirp sign.
    pub fn stretched(
        center_wavelength_nm: f64,
        t0_fwhm_ps: f64,
        stretch: f64,
    ) -> Result<Self> {
        let s = stretch.abs();
        if !(s >= 1.0) || !stretch.is_finite() {
            return Err(Error::Precondition(format!(
                "stretch factor must satisfy |stretch| >= 1, got {stretch}"
            )));
        }
        let a0 = 2.0 * LN2 / (t0_fwhm_ps * t0_fwhm_ps);
        Ok(PumpEnvelope {
            center_wavelength_nm,
            duration_fwhm_ps: t0_fwhm_ps * s,
            chirp_rad_ps2: stretch.signum() * (a0 / (s * s)) * (s * s - 1.0).sqrt(),
            // Stretching conserves pulse energy: the peak drops as the
            // duration grows, leaving the spectral magnitude untouched.
            amplitude: 1.0 / s.sqrt(),
            delay_ps: 0.0,
        })
    }

    pub fn validate(&self, pointer: &str) -> Result<()> {
        for (name, v) in [
            ("center_wavelength_nm", self.center_wavelength_nm),
            ("duration_fwhm_ps", self.duration_fwhm_ps),
            ("chirp_rad_ps2", self.chirp_rad_ps2),
            ("amplitude", self.amplitude),
            ("delay_ps", self.delay_ps),
        ] {
            if !v.is_finite() {
                return Err(Error::config(
                    format!("{pointer}/{name}"),
                    format!("must be finite, got {v}"),
                ));
            }
        }
        if self.center_wavelength_nm <= 0.0 {
            return Err(Error::config(
                format!("{pointer}/center_wavelength_nm"),
                "must be positive",
            ));
        }
        if self.duration_fwhm_ps <= 0.0 {
            return Err(Error::config(
                format!("{pointer}/duration_fwhm_ps"),
                "must be positive",
            ));
        }
        if self.amplitude < 0.0 {
            return Err(Error::config(
                format!("{pointer}/amplitude"),
                "must be nonnegative",
            ));
        }
        Ok(())
    }

    pub fn omega_center(&self) -> f64 {
        units::omega_from_wavelength_nm(self.center_wavelength_nm)
    }

    /// Complex Gaussian rate `Gamma = a - i c` in 1/s^2.
    pub fn gamma(&self) -> C64 {
        let t = units::seconds_from_ps(self.duration_fwhm_ps);
        C64::new(2.0 * LN2 / (t * t), -self.chirp_rad_ps2 * 1e24)
    }

    pub fn delay_s(&self) -> f64 {
        units::seconds_from_ps(self.delay_ps)
    }

    /// Envelope value at time `t` (seconds), measured at z = 0.
    pub fn amplitude_at(&self, t: f64) -> C64 {
        let s = t - self.delay_s();
        (self.gamma() * (-s * s)).exp() * self.amplitude
    }

    /// Analytic spectrum `Integral A(t) exp(i nu t) dt` at envelope
    /// frequency `nu` (rad/s relative to the carrier).
    pub fn spectrum(&self, nu: f64) -> C64 {
        let g = self.gamma();
        let nu = C64::new(0.0, nu);
        (C64::new(std::f64::consts::PI, 0.0) / g).sqrt()
            * (nu * nu / (4.0 * g) + nu * self.delay_s()).exp()
            * self.amplitude
    }

    /// FWHM of the spectral intensity `|spectrum|^2`, rad/s. Chirp widens the
    /// time-bandwidth product but [`Self::stretched`] leaves this invariant.
    pub fn spectral_fwhm(&self) -> f64 {
        let g = self.gamma();
        2.0 * (2.0 * LN2 * g.norm_sqr() / g.re).sqrt()
    }
}
