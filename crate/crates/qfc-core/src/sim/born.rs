//! First-order z-quadrature with walkoff and intra-device dispersion.
//!
//! The first Born approximation of the coupled-mode equations keeps the
//! input wave undepleted and accumulates the converted amplitude along z,
//! with each band propagating freely before and after the conversion point:
//!
//! ```text
//! G(k, j) = (i kappa / 2 pi) Integral_0^L dz
//!             exp(i theta_out(k) (L - z)) Mtil_z(w_kj) exp(i theta_in(j) z)
//! ```
//!
//! where `theta_band(nu)` is the per-metre envelope phase rate of the band
//! (walkoff plus intra-device dispersion, carrier terms dropped as gauge) and
//! `Mtil_z` is the pump-product spectrum at position z. The z integral is a
//! composite Simpson rule; the integrand is a product of Gaussians in z, so
//! the rule converges at fourth order and a few hundred nodes reach well
//! beyond the percent level this oracle is used at.
//!
//! This generator exists as an independent cross-check for the split-step
//! engine and is written for clarity over speed; use it on modest grids. The
//! result is first order, so it is intentionally not unitary: defects are
//! second order in the coupling.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::greens::GreensFunction;
use crate::grid::FrequencyGrid;
use crate::sim::closed_form::pump_product_spectrum;
use crate::sim::{band_phase_rate, BsfwmSpec};

/// First-order Green's function (converted block only) by direct quadrature.
///
/// `z_nodes` must be odd and at least 3 (Simpson rule).
pub fn born_oracle_greens(
    spec: &BsfwmSpec,
    in_grid: &FrequencyGrid,
    out_grid: &FrequencyGrid,
    z_nodes: usize,
) -> Result<GreensFunction> {
    if z_nodes < 3 || z_nodes % 2 == 0 {
        return Err(Error::Precondition(format!(
            "Simpson quadrature needs an odd node count >= 3, got {z_nodes}"
        )));
    }
    let l = spec.length_m;
    let h = l / (z_nodes - 1) as f64;
    let zs: Vec<f64> = (0..z_nodes).map(|i| i as f64 * h).collect();
    let weights: Vec<f64> = (0..z_nodes)
        .map(|i| {
            let w = if i == 0 || i == z_nodes - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect();

    let ni = in_grid.count();
    let no = out_grid.count();
    let shift = spec.bragg_shift();

    let theta_in: Vec<f64> = (0..ni)
        .map(|j| {
            band_phase_rate(
                spec.in_band_walkoff_ps_m,
                spec.in_band_dispersion.as_ref(),
                l,
                in_grid.omega(j),
                in_grid.omega(j) - in_grid.center(),
            )
        })
        .collect();
    let theta_out: Vec<f64> = (0..no)
        .map(|k| {
            band_phase_rate(
                spec.out_band_walkoff_ps_m,
                spec.out_band_dispersion.as_ref(),
                l,
                out_grid.omega(k),
                out_grid.omega(k) - out_grid.center(),
            )
        })
        .collect();

    // On equal-spacing grids the frequency difference w only takes
    // ni + no - 1 distinct values, so the pump spectrum is evaluated on that
    // difference lattice instead of per matrix entry.
    let equal_spacing =
        (in_grid.spacing() - out_grid.spacing()).abs() <= 1e-12 * in_grid.spacing();
    let mtil: Vec<Vec<C64>> = if equal_spacing {
        let base = out_grid.omega(0) - in_grid.omega(ni - 1) - shift;
        let d = in_grid.spacing();
        zs.iter()
            .map(|&z| {
                (0..ni + no - 1)
                    .map(|idx| pump_product_spectrum(spec, z, base + idx as f64 * d))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };

    let scale = C64::new(0.0, spec.coupling_rad_m / crate::units::TWO_PI);
    let mut values = Array2::zeros((no, ni));
    for j in 0..ni {
        let exp_in: Vec<C64> = zs
            .iter()
            .map(|&z| C64::from_polar(1.0, theta_in[j] * z))
            .collect();
        for k in 0..no {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &z) in zs.iter().enumerate() {
                let m = if equal_spacing {
                    mtil[i][k + (ni - 1 - j)]
                } else {
                    let w = out_grid.omega(k) - in_grid.omega(j) - shift;
                    pump_product_spectrum(spec, z, w)
                };
                let out_ph = C64::from_polar(weights[i], theta_out[k] * (l - z));
                acc += out_ph * m * exp_in[i];
            }
            values[[k, j]] = scale * acc;
        }
    }
    GreensFunction::new(out_grid.clone(), in_grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::closed_form::gaussian_pump_greens;
    use crate::sim::pump::PumpEnvelope;
    use crate::units;
    

    fn base_spec() -> BsfwmSpec {
        BsfwmSpec {
            pump_p: PumpEnvelope::transform_limited(923.4, 8.0),
            pump_q: PumpEnvelope::transform_limited(1557.9, 14.0),
            coupling_rad_m: 0.004,
            length_m: 20.0,
            shift_override_hz: None,
            pump_p_walkoff_ps_m: 0.0,
            pump_q_walkoff_ps_m: 0.0,
            in_band_walkoff_ps_m: 0.0,
            out_band_walkoff_ps_m: 0.0,
            in_band_dispersion: None,
            out_band_dispersion: None,
        }
    }

    fn grids(n: usize) -> (FrequencyGrid, FrequencyGrid) {
        let gi = FrequencyGrid::from_wavelength_nm(1556.5, 20.0e9, n).unwrap();
        let out_center = gi.center() + base_spec().bragg_shift();
        let go = FrequencyGrid::new(out_center, units::omega_from_hz(20.0e9), n).unwrap();
        (gi, go)
    }

    fn rel_l2(a: &GreensFunction, b: &GreensFunction) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in a.values().iter().zip(b.values().iter()) {
            num += (x - y).norm_sqr();
            den += y.norm_sqr();
        }
        (num / den).sqrt()
    }

    #[test]
    fn drift_free_case_reduces_to_closed_form() {
        let spec = base_spec();
        let (gi, go) = grids(48);
        let born = born_oracle_greens(&spec, &gi, &go, 11).unwrap();
        let exact = gaussian_pump_greens(&spec, &gi, &go).unwrap().converted();
        assert!(rel_l2(&born, &exact) < 1e-12);
    }

    #[test]
    fn equal_band_walkoff_has_closed_form() {
        // With both signal bands sliding at the same rate s and the pumps
        // pinned, the z integral is elementary:
        //   G = closed_form * exp(i s nu_out L) * exp(i s (nu_in - nu_out) L / 2)
        //       * sinc(s (nu_in - nu_out) L / 2)
        let mut spec = base_spec();
        let s = 0.35e-12;
        spec.in_band_walkoff_ps_m = 0.35;
        spec.out_band_walkoff_ps_m = 0.35;
        let (gi, go) = grids(40);
        let born = born_oracle_greens(&spec, &gi, &go, 401).unwrap();
        let mut plain = base_spec();
        plain.coupling_rad_m = spec.coupling_rad_m;
        let base = gaussian_pump_greens(&plain, &gi, &go).unwrap().converted();
        let l = spec.length_m;
        for k in (0..40).step_by(7) {
            for j in (0..40).step_by(7) {
                let nu_o = go.omega(k) - go.center();
                let nu_i = gi.omega(j) - gi.center();
                let x = 0.5 * s * (nu_i - nu_o) * l;
                let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
                let expected = base.values()[[k, j]]
                    * C64::from_polar(1.0, s * nu_o * l + x)
                    * sinc;
                let got = born.values()[[k, j]];
                let scale = base.max_abs();
                assert!(
                    (got - expected).norm() / scale < 1e-9,
                    "mismatch at ({k},{j}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn quadrature_converges_with_node_count() {
        let mut spec = base_spec();
        spec.pump_p_walkoff_ps_m = 1.2;
        spec.pump_p.delay_ps = -12.0;
        spec.in_band_walkoff_ps_m = 0.3;
        let (gi, go) = grids(24);
        let fine = born_oracle_greens(&spec, &gi, &go, 801).unwrap();
        let coarse = born_oracle_greens(&spec, &gi, &go, 101).unwrap();
        let mid = born_oracle_greens(&spec, &gi, &go, 401).unwrap();
        let e_coarse = rel_l2(&coarse, &fine);
        let e_mid = rel_l2(&mid, &fine);
        assert!(e_mid < e_coarse);
        assert!(e_mid < 1e-8, "401-node error {e_mid}");
    }

    #[test]
    fn rejects_even_node_counts() {
        let spec = base_spec();
        let (gi, go) = grids(8);
        assert!(born_oracle_greens(&spec, &gi, &go, 100).is_err());
        assert!(born_oracle_greens(&spec, &gi, &go, 1).is_err());
    }

    #[test]
    fn detuning_shifts_the_kernel_ridge() {
        let mut spec = base_spec();
        let (gi, go) = grids(64);
        let delta = 6.0 * gi.spacing();
        spec.shift_override_hz = Some(units::hz_from_omega(spec.bragg_shift() + delta));
        let g = born_oracle_greens(&spec, &gi, &go, 11).unwrap();
        // The kernel peaks where omega_out - omega_in equals the shift, so
        // the maximum of column j sits 6 bins above the matched row.
        let j = 20;
        let (kmax, _) = g
            .column(j)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(k, v)| (k, v.norm()))
            .unwrap();
        // Matched row for zero detuning: same index offset as the input.
        assert_eq!(kmax, j + 6);
    }
}
