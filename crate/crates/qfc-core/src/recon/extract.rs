//! Sideband extraction: projects each delay trace onto the fringe model.
//!
//! Every (center, output) cell of a sweep traces `I(tau) = A + 2 Re(B
//! e^{i shear tau})` over the probe delay. The complex sideband `B` carries
//! the interference product `G+ conj(G-)` and the offset `A` the summed tone
//! intensities, both scaled by `amplitude^2 / 2`.
//!
//! The projection is an exact-frequency inner product with `e^{i shear tau}`
//! at the known shear, never a nearest-bin spectrum lookup. On a finite
//! window the three model components are not quite orthogonal, so the raw
//! projections are corrected through the model's Gram matrix; the result is
//! the least-squares fit, which recovers noiseless model data exactly on any
//! delay schedule, uniform or not, and reduces to the plain projection when
//! the window holds an integer number of beat periods.

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::sweep::DelaySweepDataset;

/// Precomputed least-squares projector for one delay schedule and shear.
///
/// Solves for `(A, Re B, Im B)` in `I_n = A + 2 Re B cos(shear tau_n) -
/// 2 Im B sin(shear tau_n)` via the normal equations; the inverse Gram
/// matrix is formed once and reused across every trace of a sweep.
#[derive(Debug, Clone)]
pub struct FringeProjector {
    /// 3 x n_delays map from samples to `(A, Re B, Im B)`.
    weights: Array2<f64>,
}

impl FringeProjector {
    pub fn new(shear: f64, delays_s: &[f64]) -> Result<Self> {
        if delays_s.len() < 3 {
            return Err(Error::Numeric(format!(
                "fringe fit needs at least 3 delays, got {}",
                delays_s.len()
            )));
        }
        if !(shear > 0.0) {
            return Err(Error::Precondition(format!(
                "fringe fit needs a positive shear, got {shear}"
            )));
        }
        let n = delays_s.len();
        let mut design = Array2::zeros((n, 3));
        for (i, &tau) in delays_s.iter().enumerate() {
            let ph = shear * tau;
            design[[i, 0]] = 1.0;
            design[[i, 1]] = 2.0 * ph.cos();
            design[[i, 2]] = -2.0 * ph.sin();
        }
        let mut gram = nalgebra::Matrix3::<f64>::zeros();
        for a in 0..3 {
            for b in 0..3 {
                gram[(a, b)] = (0..n).map(|i| design[[i, a]] * design[[i, b]]).sum();
            }
        }
        let inv = gram.try_inverse().ok_or_else(|| {
            Error::Numeric(
                "delay schedule cannot separate the fringe sideband; \
                 it needs three distinct fringe phases per beat period"
                    .into(),
            )
        })?;
        let residual = (gram * inv - nalgebra::Matrix3::identity()).abs().max();
        if residual > 1e-6 {
            return Err(Error::Numeric(format!(
                "delay schedule is too degenerate for a stable fringe fit \
                 (conditioning residual {residual:.2e})"
            )));
        }
        let mut weights = Array2::zeros((3, n));
        for r in 0..3 {
            for i in 0..n {
                weights[[r, i]] =
                    (0..3).map(|c| inv[(r, c)] * design[[i, c]]).sum::<f64>();
            }
        }
        Ok(FringeProjector { weights })
    }

    /// Fits one delay trace, returning the offset `A` and sideband `B`.
    pub fn project(&self, trace: ArrayView1<'_, f64>) -> (f64, C64) {
        let mut beta = [0.0f64; 3];
        for (r, b) in beta.iter_mut().enumerate() {
            *b = trace
                .iter()
                .enumerate()
                .map(|(i, &y)| self.weights[[r, i]] * y)
                .sum();
        }
        (beta[0], C64::new(beta[1], beta[2]))
    }
}

/// Interference products extracted from a sweep: the complex sideband
/// `G+ conj(G-)` and the summed tone intensities `|G+|^2 + |G-|^2`, both
/// indexed `[center, output]`.
#[derive(Debug, Clone)]
pub struct SidebandMap {
    out_grid: FrequencyGrid,
    centers: Vec<f64>,
    shear: f64,
    coefficients: Array2<C64>,
    dc: Array2<f64>,
}

impl SidebandMap {
    /// Wraps extracted maps, checking shapes and the interference bound
    /// `|B| <= dc/2` up to `slack` (absolute, in dc units), which holds for
    /// any pair of tone responses and is only loosened by noise.
    pub fn new(
        out_grid: FrequencyGrid,
        centers: Vec<f64>,
        shear: f64,
        coefficients: Array2<C64>,
        dc: Array2<f64>,
        slack: f64,
    ) -> Result<Self> {
        let want = (centers.len(), out_grid.count());
        if coefficients.dim() != want || dc.dim() != want {
            return Err(Error::GridMismatch(format!(
                "sideband maps have shapes {:?} and {:?}, metadata implies {:?}",
                coefficients.dim(),
                dc.dim(),
                want
            )));
        }
        for (cell, coef) in coefficients.indexed_iter() {
            if coef.norm() > 0.5 * dc[cell] + slack {
                return Err(Error::Consistency(format!(
                    "sideband magnitude {:.3e} exceeds half the dc level {:.3e} \
                     at center {}, output {}; the fringe model does not fit",
                    coef.norm(),
                    dc[cell],
                    cell.0,
                    cell.1
                )));
            }
        }
        Ok(SidebandMap { out_grid, centers, shear, coefficients, dc })
    }

    pub fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    /// Probe center frequencies, rad/s.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn shear(&self) -> f64 {
        self.shear
    }

    /// Complex sidebands `[center, output]`.
    pub fn coefficients(&self) -> &Array2<C64> {
        &self.coefficients
    }

    /// Summed tone intensities `[center, output]`.
    pub fn dc(&self) -> &Array2<f64> {
        &self.dc
    }

    /// Largest sideband magnitude over the whole map.
    pub fn peak_coefficient(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest dc level over the whole map.
    pub fn peak_dc(&self) -> f64 {
        self.dc.iter().fold(0.0f64, |m, &v| m.max(v))
    }
}

/// Extracts the sideband and dc maps from a sweep by least-squares fringe
/// projection of every delay trace. Exact for noiseless data on any delay
/// schedule with at least three distinct fringe phases.
pub fn extract_sideband(ds: &DelaySweepDataset) -> Result<SidebandMap> {
    let projector = FringeProjector::new(ds.shear(), ds.delays_s())?;
    let n_centers = ds.centers().len();
    let n_out = ds.out_grid().count();
    let mut coefficients = Array2::zeros((n_centers, n_out));
    let mut dc = Array2::zeros((n_centers, n_out));
    let scale = 2.0 / (ds.amplitude() * ds.amplitude());
    for c in 0..n_centers {
        let slab = ds.intensity(c);
        for k in 0..n_out {
            let (a, b) = projector.project(slab.row(k));
            dc[[c, k]] = scale * a;
            coefficients[[c, k]] = b.scale(scale);
        }
    }
    // Noise moves both maps; widen the interference bound accordingly.
    let slack = ds
        .noise()
        .map(|n| {
            let per_shot = n.additive_sigma + n.multiplicative_sigma;
            6.0 * per_shot / (ds.detector().averages as f64).sqrt()
        })
        .unwrap_or(0.0);
    let peak = dc.iter().fold(0.0f64, |m, &v| m.max(v));
    SidebandMap::new(
        ds.out_grid().clone(),
        ds.centers().to_vec(),
        ds.shear(),
        coefficients,
        dc,
        (1e-9 + slack) * peak.max(1e-300),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{interference_products, plan_centers};
    use crate::sim::{gaussian_pump_greens, BsfwmSpec, PumpEnvelope};
    use crate::sweep::{synthesize_sweep, DelaySweepDataset, DetectorSpec, SweepPlan};
    use crate::units;
    use approx::assert_relative_eq;
    use ndarray::Array1;

    fn operator_and_plan() -> (crate::greens::GreensFunction, SweepPlan) {
        let spec = BsfwmSpec {
            pump_p: PumpEnvelope::transform_limited(923.4, 35.0),
            pump_q: PumpEnvelope::transform_limited(1557.9, 60.0),
            coupling_rad_m: 0.004,
            length_m: 20.0,
            shift_override_hz: None,
            pump_p_walkoff_ps_m: 0.0,
            pump_q_walkoff_ps_m: 0.0,
            in_band_walkoff_ps_m: 0.0,
            out_band_walkoff_ps_m: 0.0,
            in_band_dispersion: None,
            out_band_dispersion: None,
        };
        let gi = FrequencyGrid::from_wavelength_nm(1556.5, 2.0e9, 128).unwrap();
        let go = FrequencyGrid::new(
            gi.center() + spec.bragg_shift(),
            units::omega_from_hz(2.0e9),
            128,
        )
        .unwrap();
        let op = gaussian_pump_greens(&spec, &gi, &go).unwrap().converted();
        // The window deliberately holds a non-integer number of beat
        // periods (0.28 per step, 2.52 total, like the canonical schedule);
        // the Gram correction must absorb the resulting leakage exactly.
        let plan = SweepPlan {
            probes: plan_centers(&gi, gi.omega(40), gi.omega(88), 4, units::omega_from_hz(8.0e9))
                .unwrap(),
            delays_s: (0..9).map(|i| units::seconds_from_ps(35.0 * i as f64)).collect(),
            amplitude: 1.3,
        };
        (op, plan)
    }

    #[test]
    fn noiseless_extraction_is_exact_on_a_non_integer_window() {
        let (op, plan) = operator_and_plan();
        let shear = plan.probes[0].shear();
        let period_ps = units::ps_from_seconds(std::f64::consts::TAU / shear);
        let window_ps = 9.0 * 35.0;
        assert!((window_ps / period_ps).fract() > 0.05);

        let ds = synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "t").unwrap();
        let sb = extract_sideband(&ds).unwrap();
        let scale = sb.peak_coefficient();
        for (c, probe) in plan.probes.iter().enumerate() {
            let (dc, cross) = interference_products(
                op.column(probe.plus_index()),
                op.column(probe.minus_index()),
            )
            .unwrap();
            for k in 0..op.out_grid().count() {
                assert!(
                    (sb.coefficients()[[c, k]] - cross[k]).norm() <= 1e-12 * scale,
                    "sideband off at ({c}, {k})"
                );
                assert!((sb.dc()[[c, k]] - dc[k]).abs() <= 1e-12 * sb.peak_dc());
            }
        }
    }

    #[test]
    fn a_delay_origin_offset_rotates_the_sideband() {
        // Data taken at tau + delta but booked as tau: the fit sees every
        // fringe advanced by the same phase, so the whole sideband map picks
        // up exp(i shear delta). This pins the sign convention end to end.
        let (op, plan) = operator_and_plan();
        let mut shifted_plan = plan.clone();
        let delta = units::seconds_from_ps(137.0);
        for t in &mut shifted_plan.delays_s {
            *t += delta;
        }
        let ds =
            synthesize_sweep(&op, &shifted_plan, &DetectorSpec::default(), None, "t").unwrap();
        let booked = DelaySweepDataset::new(
            ds.label().to_string(),
            ds.out_grid().clone(),
            ds.centers().to_vec(),
            ds.shear(),
            plan.delays_s.clone(),
            ds.amplitude(),
            ds.detector().clone(),
            None,
            ds.data().clone(),
        )
        .unwrap();
        let honest = synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "t").unwrap();
        let sb = extract_sideband(&honest).unwrap();
        let sb2 = extract_sideband(&booked).unwrap();
        let rot = C64::from_polar(1.0, ds.shear() * delta);
        let scale = sb.peak_coefficient();
        for (a, b) in sb2.coefficients().iter().zip(sb.coefficients().iter()) {
            assert!((a - b * rot).norm() <= 1e-9 * scale, "{a} vs {}", b * rot);
        }
    }

    #[test]
    fn orthogonal_harmonics_project_to_zero() {
        // Eight samples per beat period over one period: the fundamental and
        // its second harmonic are exactly orthogonal, so projecting a pure
        // fundamental fringe at twice the shear finds nothing.
        let shear = units::omega_from_hz(560.0e6);
        let delays: Vec<f64> = (0..8)
            .map(|i| i as f64 * std::f64::consts::TAU / shear / 8.0)
            .collect();
        let trace: Array1<f64> = delays
            .iter()
            .map(|&t| 5.0 + 2.0 * (shear * t + 0.3).cos())
            .collect();
        let fundamental = FringeProjector::new(shear, &delays).unwrap();
        let (a, b) = fundamental.project(trace.view());
        assert_relative_eq!(a, 5.0, max_relative = 1e-12);
        assert_relative_eq!(b.norm(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.arg(), 0.3, max_relative = 1e-12);

        let second = FringeProjector::new(2.0 * shear, &delays).unwrap();
        let (_, b2) = second.project(trace.view());
        assert!(b2.norm() < 1e-10 * b.norm());
    }

    #[test]
    fn degenerate_delay_schedules_are_rejected() {
        let shear = units::omega_from_hz(560.0e6);
        assert!(FringeProjector::new(shear, &[0.0, 1e-9]).is_err());
        assert!(FringeProjector::new(shear, &[1e-9; 5]).is_err());
        // Two samples per period: the sine quadrature vanishes everywhere.
        let period = std::f64::consts::TAU / shear;
        let nyquist: Vec<f64> = (0..6).map(|i| i as f64 * period / 2.0).collect();
        assert!(FringeProjector::new(shear, &nyquist).is_err());
    }

    #[test]
    fn interference_bound_violations_are_flagged() {
        let go = FrequencyGrid::from_wavelength_nm(925.0, 2.0e9, 4).unwrap();
        let centers = vec![1.0e15, 1.0002e15];
        let mut coefficients = Array2::zeros((2, 4));
        let dc = Array2::from_elem((2, 4), 1.0);
        coefficients[[1, 2]] = C64::new(0.7, 0.0);
        assert!(SidebandMap::new(go.clone(), centers.clone(), 1.0e9, coefficients.clone(), dc.clone(), 1e-9).is_err());
        coefficients[[1, 2]] = C64::new(0.5, 0.0);
        assert!(SidebandMap::new(go, centers, 1.0e9, coefficients, dc, 1e-9).is_ok());
    }
}
