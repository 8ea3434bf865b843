//! Closed-form first-order kernel for drift-free converters.
//!
//! When nothing walks off or disperses inside the device, the coupling
//! `M(t) = P(t) Q*(t)` is z-independent and first-order perturbation theory
//! gives the converted block directly:
//!
//! ```text
//! G(omega_out, omega_in) = (i kappa L / 2 pi) Mtil(omega_out - omega_in - shift)
//! Mtil(w) = Integral M(t) exp(i w t) dt
//! ```
//!
//! Both pumps are Gaussians (possibly chirped, possibly delayed), so `Mtil`
//! is a complex Gaussian integral with a closed form. Evaluating one matrix
//! column costs one complex exponential per output point, which is what makes
//! very fine input grids affordable.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::sim::two_band::TwoBandGreens;
use crate::sim::BsfwmSpec;

/// Largest first-order rotation angle accepted by the closed-form generator;
/// beyond this the neglected pump-depletion-free higher orders exceed the
/// few-percent level (max conversion about `sin^2` of this, 5%).
pub const FIRST_ORDER_MAX_ANGLE: f64 = 0.2236;

/// Spectrum of the pump product at position `z`:
/// `Integral P(t - tau_p(z)) Q*(t - tau_q(z)) exp(i w t) dt`.
///
/// With `Gamma_p = a_p - i c_p` and the conjugated `Gamma_q* = a_q + i c_q`,
/// completing the square gives
/// `amp sqrt(pi / A) exp(B^2 / 4A - C)` with `A = Gamma_p + Gamma_q*`,
/// `B = 2 (Gamma_p tau_p + Gamma_q* tau_q) + i w`, and
/// `C = Gamma_p tau_p^2 + Gamma_q* tau_q^2`.
pub fn pump_product_spectrum(spec: &BsfwmSpec, z: f64, w: f64) -> C64 {
    let gp = spec.pump_p.gamma();
    let gq = spec.pump_q.gamma().conj();
    let tau_p = spec.pump_p.delay_s() + spec.pump_p_walkoff_ps_m * 1e-12 * z;
    let tau_q = spec.pump_q.delay_s() + spec.pump_q_walkoff_ps_m * 1e-12 * z;
    let a = gp + gq;
    let b = 2.0 * (gp * tau_p + gq * tau_q) + C64::new(0.0, w);
    let c = gp * (tau_p * tau_p) + gq * (tau_q * tau_q);
    let amp = spec.pump_p.amplitude * spec.pump_q.amplitude;
    (C64::new(std::f64::consts::PI, 0.0) / a).sqrt() * (b * b / (4.0 * a) - c).exp() * amp
}

/// Peak magnitude of the pump product over time, used for the first-order
/// validity estimate. The product of two Gaussians peaks at the
/// rate-weighted mean of their centers.
fn peak_product_magnitude(spec: &BsfwmSpec, z: f64) -> f64 {
    let ap = spec.pump_p.gamma().re;
    let aq = spec.pump_q.gamma().re;
    let tau_p = spec.pump_p.delay_s() + spec.pump_p_walkoff_ps_m * 1e-12 * z;
    let tau_q = spec.pump_q.delay_s() + spec.pump_q_walkoff_ps_m * 1e-12 * z;
    let dt = tau_p - tau_q;
    let amp = spec.pump_p.amplitude * spec.pump_q.amplitude;
    amp * (-(ap * aq / (ap + aq)) * dt * dt).exp()
}

/// Checks that first-order theory is adequate: the worst-case rotation angle
/// `kappa |M|_max L` must stay below [`FIRST_ORDER_MAX_ANGLE`].
pub fn check_first_order(spec: &BsfwmSpec) -> Result<()> {
    let angle = spec.coupling_rad_m * peak_product_magnitude(spec, 0.0) * spec.length_m;
    if angle > FIRST_ORDER_MAX_ANGLE {
        return Err(Error::Precondition(format!(
            "peak rotation angle {angle:.3} rad exceeds the first-order limit \
             {FIRST_ORDER_MAX_ANGLE}; use the split-step model for strong coupling"
        )));
    }
    Ok(())
}

/// Converted-block entry of the closed-form kernel at absolute frequencies
/// `omega_out`, `omega_in`.
pub fn kernel_value(spec: &BsfwmSpec, omega_out: f64, omega_in: f64) -> C64 {
    let w = omega_out - omega_in - spec.bragg_shift();
    C64::new(0.0, spec.coupling_rad_m * spec.length_m / crate::units::TWO_PI)
        * pump_product_spectrum(spec, 0.0, w)
}

/// Closed-form two-band Green's function of a drift-free converter.
///
/// Fails if the device has walkoff or intra-device dispersion (the kernel
/// would be wrong) or if the coupling is strong enough that first order is
/// not trustworthy.
pub fn gaussian_pump_greens(
    spec: &BsfwmSpec,
    in_grid: &FrequencyGrid,
    out_grid: &FrequencyGrid,
) -> Result<TwoBandGreens> {
    if !spec.is_drift_free() {
        return Err(Error::Precondition(
            "closed-form kernel requires zero walkoff and no intra-device dispersion; \
             use born_oracle_greens or split_step_greens"
                .into(),
        ));
    }
    check_first_order(spec)?;
    let shift = spec.bragg_shift();
    let scale = C64::new(0.0, spec.coupling_rad_m * spec.length_m / crate::units::TWO_PI);
    let conv = Array2::from_shape_fn((out_grid.count(), in_grid.count()), |(k, j)| {
        scale * pump_product_spectrum(spec, 0.0, out_grid.omega(k) - in_grid.omega(j) - shift)
    });
    TwoBandGreens::first_order(in_grid.clone(), out_grid.clone(), conv)
}
