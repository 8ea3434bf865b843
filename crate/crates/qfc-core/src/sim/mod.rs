//! Converter models for Bragg-scattering four-wave mixing.
//!
//! Two strong pumps p (near-infrared, annihilated on conversion) and q
//! (telecom, created on conversion) couple a telecom input band to a
//! near-infrared output band. In a frame where z is position along the device
//! and t is local time, the signal envelopes a (input band) and b (output
//! band) obey
//!
//! ```text
//! d b / d z =  i kappa M(z, t) a
//! d a / d z =  i kappa M*(z, t) b
//! M(z, t) = P(t - tau_p(z)) Q*(t - tau_q(z))
//! ```
//!
//! where P and Q are the pump envelopes, sliding with their group slownesses
//! `tau_x(z) = delay_x + s_x z`. The coupled pair conserves `|a|^2 + |b|^2`
//! pointwise in t, so the exact dynamics are unitary; pump depletion, loss,
//! and Raman scattering are outside the model.
//!
//! Three generators produce the discrete Green's function:
//!
//! * [`closed_form::gaussian_pump_greens`]: analytic first-order kernel,
//!   valid for weak coupling with no walkoff or intra-device dispersion.
//!   Cheap enough for very fine input grids.
//! * [`born::born_oracle_greens`]: first-order z-quadrature that does handle
//!   walkoff and dispersion. Slow but independent of the split-step code
//!   paths, which makes it the cross-check of choice.
//! * [`split_step::split_step_greens`]: full propagation, exactly unitary by
//!   construction, valid at any coupling strength.

pub mod born;
pub mod chain;
pub mod closed_form;
pub mod pump;
pub mod split_step;
pub mod two_band;

pub use chain::{chain_greens, ChainOperator, ClosedFormChain, ConverterChain, GeneratorChoice};
pub use closed_form::gaussian_pump_greens;
pub use born::born_oracle_greens;
pub use pump::PumpEnvelope;
pub use split_step::split_step_greens;
pub use two_band::TwoBandGreens;

use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionSpec;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::units;

/// Parameters of one Bragg-scattering converter.
///
/// Walkoff fields are group slownesses relative to a common co-moving frame;
/// only their differences matter physically (a common offset is an overall
/// delay). The optional per-band [`DispersionSpec`]s add intra-device phase
/// curvature on top of the linear walkoff and must describe the same length
/// as the device itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsfwmSpec {
    /// Near-infrared pump, annihilated when a photon converts upward.
    pub pump_p: PumpEnvelope,
    /// Telecom pump, created when a photon converts upward.
    pub pump_q: PumpEnvelope,
    /// Coupling strength: rotation rate in rad per metre per unit pump
    /// product amplitude.
    pub coupling_rad_m: f64,
    /// Device length in metres.
    pub length_m: f64,
    /// Overrides the Bragg shift (Hz, ordinary frequency). When absent the
    /// shift is the pump carrier separation.
    #[serde(default)]
    pub shift_override_hz: Option<f64>,
    /// Group slowness of pump p, ps/m.
    #[serde(default)]
    pub pump_p_walkoff_ps_m: f64,
    /// Group slowness of pump q, ps/m.
    #[serde(default)]
    pub pump_q_walkoff_ps_m: f64,
    /// Group slowness of the telecom signal band, ps/m.
    #[serde(default)]
    pub in_band_walkoff_ps_m: f64,
    /// Group slowness of the near-infrared signal band, ps/m.
    #[serde(default)]
    pub out_band_walkoff_ps_m: f64,
    /// Intra-device dispersion of the telecom band.
    #[serde(default)]
    pub in_band_dispersion: Option<DispersionSpec>,
    /// Intra-device dispersion of the near-infrared band.
    #[serde(default)]
    pub out_band_dispersion: Option<DispersionSpec>,
}

impl BsfwmSpec {
    pub fn validate(&self, pointer: &str) -> Result<()> {
        self.pump_p.validate(&format!("{pointer}/pump_p"))?;
        self.pump_q.validate(&format!("{pointer}/pump_q"))?;
        if !self.coupling_rad_m.is_finite() || self.coupling_rad_m < 0.0 {
            return Err(Error::config(
                format!("{pointer}/coupling_rad_m"),
                format!("must be finite and nonnegative, got {}", self.coupling_rad_m),
            ));
        }
        if !self.length_m.is_finite() || self.length_m <= 0.0 {
            return Err(Error::config(
                format!("{pointer}/length_m"),
                format!("must be positive, got {}", self.length_m),
            ));
        }
        for (name, v) in [
            ("pump_p_walkoff_ps_m", self.pump_p_walkoff_ps_m),
            ("pump_q_walkoff_ps_m", self.pump_q_walkoff_ps_m),
            ("in_band_walkoff_ps_m", self.in_band_walkoff_ps_m),
            ("out_band_walkoff_ps_m", self.out_band_walkoff_ps_m),
        ] {
            if !v.is_finite() {
                return Err(Error::config(
                    format!("{pointer}/{name}"),
                    format!("must be finite, got {v}"),
                ));
            }
        }
        if let Some(shift) = self.shift_override_hz {
            if !shift.is_finite() {
                return Err(Error::config(
                    format!("{pointer}/shift_override_hz"),
                    "must be finite",
                ));
            }
        }
        for (name, disp) in [
            ("in_band_dispersion", &self.in_band_dispersion),
            ("out_band_dispersion", &self.out_band_dispersion),
        ] {
            if let Some(d) = disp {
                d.validate(&format!("{pointer}/{name}"))?;
                let dl = (d.length_km * 1e3 - self.length_m).abs();
                if dl > 1e-9 * self.length_m.max(1.0) {
                    return Err(Error::config(
                        format!("{pointer}/{name}/length_km"),
                        format!(
                            "intra-device dispersion must cover the device length \
                             ({} m), got {} m",
                            self.length_m,
                            d.length_km * 1e3
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Bragg shift in rad/s: the pump carrier separation, unless overridden.
    pub fn bragg_shift(&self) -> f64 {
        match self.shift_override_hz {
            Some(hz) => units::omega_from_hz(hz),
            None => self.pump_p.omega_center() - self.pump_q.omega_center(),
        }
    }

    /// Detuning between the Bragg shift and the grid center separation:
    /// a converted envelope lands offset by this much on the output grid.
    pub fn residual_detuning(&self, in_grid: &FrequencyGrid, out_grid: &FrequencyGrid) -> f64 {
        self.bragg_shift() - (out_grid.center() - in_grid.center())
    }

    /// True when nothing moves or disperses inside the device, the regime of
    /// the closed-form kernel.
    pub fn is_drift_free(&self) -> bool {
        self.pump_p_walkoff_ps_m == 0.0
            && self.pump_q_walkoff_ps_m == 0.0
            && self.in_band_walkoff_ps_m == 0.0
            && self.out_band_walkoff_ps_m == 0.0
            && self.in_band_dispersion.is_none()
            && self.out_band_dispersion.is_none()
    }
}

/// Per-metre envelope phase rate of one band at offset `nu` from its center:
/// the band walkoff term plus any distributed dispersion phase.
pub(crate) fn band_phase_rate(
    walkoff_ps_m: f64,
    dispersion: Option<&crate::dispersion::DispersionSpec>,
    length_m: f64,
    omega: f64,
    nu: f64,
) -> f64 {
    let mut rate = walkoff_ps_m * 1e-12 * nu;
    if let Some(d) = dispersion {
        rate += d.phase(omega) / length_m;
    }
    rate
}
