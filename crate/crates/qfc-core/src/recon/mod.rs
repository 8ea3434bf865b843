//! Kernel reconstruction from two-tone delay sweeps.
//!
//! The pipeline inverts the sweep one stage at a time, each stage a
//! separately testable function:
//!
//! 1. [`resample_uniform`]: optionally refit irregular delay schedules onto
//!    a uniform, finer one.
//! 2. [`extract_sideband`]: least-squares fringe fit per (center, output)
//!    cell, giving the beat-note coefficient `G(+) conj(G(-))` and the dc
//!    level `|G(+)|^2 + |G(-)|^2`.
//! 3. [`phase_differences`]: mask weak cells, take the sideband argument,
//!    and unwrap it along the center axis.
//! 4. [`group_delay_map`] and [`fit_delay_slope`]: phase differences over
//!    the shear are group delays; their weighted band averages against
//!    center wavelength give the dispersion slope.
//! 5. [`integrate_phase`]: trapezoid-integrate the differences into a
//!    spectral phase (zero-mean per output row) and attach magnitudes.
//!
//! [`reconstruct`] chains all five with the configured options and collects
//! the warnings the stages produce.

pub mod extract;
pub mod group_delay;
pub mod integrate;
pub mod phase;
pub mod resample;

pub use extract::{extract_sideband, FringeProjector, SidebandMap};
pub use group_delay::{fit_delay_slope, group_delay_map, GroupDelayMap, SlopeFit};
pub use integrate::{integrate_phase, quadratic_split, MagnitudeMethod, ReconstructedGreens};
pub use phase::{phase_differences, PhaseDifferenceMap, WavelengthMask};
pub use resample::resample_uniform;

use crate::error::{Error, Result};
use crate::sweep::DelaySweepDataset;

/// Fraction of `dc/2` the strongest sideband must reach. A correct shear
/// puts the beat note at the projected frequency and this ratio near one;
/// a wrong shear leaves only leakage.
const MIN_SIDEBAND_POWER_RATIO: f64 = 0.2;

fn default_threshold() -> f64 {
    0.02
}

fn default_resample() -> usize {
    1
}

/// Reconstruction options, deserializable from configuration files.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconSpec {
    /// Per-output-row relative magnitude threshold for the phase mask.
    #[serde(default = "default_threshold")]
    pub threshold_rel: f64,
    /// Delay-axis refinement factor; 1 leaves the schedule alone.
    #[serde(default = "default_resample")]
    pub resample_factor: usize,
    /// How to fill `|G|` from the sweep observables.
    #[serde(default)]
    pub magnitude_method: MagnitudeMethod,
    /// Wavelength windows to exclude, e.g. pump leakage lines.
    #[serde(default)]
    pub mask: WavelengthMask,
}

impl Default for ReconSpec {
    fn default() -> Self {
        ReconSpec {
            threshold_rel: default_threshold(),
            resample_factor: default_resample(),
            magnitude_method: MagnitudeMethod::default(),
            mask: WavelengthMask::default(),
        }
    }
}

impl ReconSpec {
    /// Validates field ranges; `pointer` prefixes error locations.
    pub fn validate(&self, pointer: &str) -> Result<()> {
        if !(self.threshold_rel > 0.0 && self.threshold_rel < 1.0) {
            return Err(Error::config(
                format!("{pointer}/threshold_rel"),
                "must lie strictly between 0 and 1",
            ));
        }
        if self.resample_factor == 0 {
            return Err(Error::config(
                format!("{pointer}/resample_factor"),
                "must be at least 1",
            ));
        }
        self.mask.validate(&format!("{pointer}/mask"))?;
        Ok(())
    }
}

/// Everything the reconstruction pipeline produces, kept per stage so
/// downstream consumers can pick the level they need.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Fringe-fit output: sideband coefficients and dc levels.
    pub sideband: SidebandMap,
    /// Masked, unwrapped phase differences.
    pub phases: PhaseDifferenceMap,
    /// Group delays and band statistics.
    pub delays: GroupDelayMap,
    /// Dispersion slope fit, when enough bands carried signal.
    pub slope: Option<SlopeFit>,
    /// The integrated kernel estimate.
    pub greens: ReconstructedGreens,
    /// Everything worth telling the operator, aggregated over stages.
    pub warnings: Vec<String>,
}

/// Runs the full reconstruction chain on a delay sweep.
pub fn reconstruct(dataset: &DelaySweepDataset, spec: &ReconSpec) -> Result<Reconstruction> {
    spec.validate("/recon")?;
    let mut warnings = Vec::new();

    let resampled;
    let dataset = if spec.resample_factor > 1 {
        resampled = resample_uniform(dataset, spec.resample_factor)?;
        &resampled
    } else {
        dataset
    };

    let sideband = extract_sideband(dataset)?;
    let peak_ratio = sideband.peak_coefficient() / (0.5 * sideband.peak_dc()).max(1e-300);
    if peak_ratio < MIN_SIDEBAND_POWER_RATIO {
        return Err(Error::Consistency(format!(
            "strongest sideband carries only {:.1}% of the local dc level; \
             the beat note is not at the projected frequency, so the shear \
             metadata is likely wrong",
            100.0 * peak_ratio
        )));
    }

    let phases = phase_differences(&sideband, spec.threshold_rel, &spec.mask)?;
    if !phases.invalid_rows().is_empty() {
        warnings.push(format!(
            "{} output rows have no masked-in cells and carry no phase",
            phases.invalid_rows().len()
        ));
    }

    let delays = group_delay_map(&phases);
    let slope = match fit_delay_slope(&delays) {
        Ok(fit) => Some(fit),
        Err(err) => {
            warnings.push(format!("dispersion slope fit skipped: {err}"));
            None
        }
    };

    let greens = integrate_phase(&phases, &sideband, spec.magnitude_method)?;
    warnings.extend(greens.warnings().iter().cloned());

    Ok(Reconstruction {
        sideband,
        phases,
        delays,
        slope,
        greens,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use crate::probe::{plan_centers, SnappedProbe};
    use crate::sim::{BsfwmSpec, ClosedFormChain, ConverterChain, PumpEnvelope};
    use crate::sweep::{synthesize_sweep, DetectorSpec, SweepPlan};
    use crate::units;

    fn test_operator() -> (ClosedFormChain, FrequencyGrid, FrequencyGrid) {
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
        let gi = FrequencyGrid::from_wavelength_nm(1556.5, 1.0e9, 512).unwrap();
        let shift = spec.bragg_shift();
        let go = FrequencyGrid::new(gi.center() + shift, units::omega_from_hz(4.0e9), 96).unwrap();
        let chain = ConverterChain::bare(spec);
        (ClosedFormChain::new(&chain, &gi, &go).unwrap(), gi, go)
    }

    fn test_sweep(delay_ps_per_step: f64) -> DelaySweepDataset {
        let (op, gi, _) = test_operator();
        let shear = units::omega_from_hz(8.0e9);
        let probes = plan_centers(&gi, gi.omega(100), gi.omega(400), 13, shear).unwrap();
        let delays_s: Vec<f64> = (0..9)
            .map(|i| units::seconds_from_ps(i as f64 * delay_ps_per_step))
            .collect();
        let plan = SweepPlan {
            probes,
            delays_s,
            amplitude: 1.0,
        };
        synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "test").unwrap()
    }

    #[test]
    fn full_chain_runs_and_reports_each_stage() {
        let ds = test_sweep(35.0);
        let recon = reconstruct(&ds, &ReconSpec::default()).unwrap();
        assert_eq!(recon.sideband.coefficients().dim(), (13, 96));
        assert_eq!(recon.greens.phase().dim(), (96, 13));
        assert!(recon.slope.is_some());
        assert!(recon.greens.mask().iter().any(|&m| m));
        // Unchirped drift-free pumps give a flat spectral phase.
        for ((k, c), &p) in recon.greens.phase().indexed_iter() {
            if recon.greens.mask()[[k, c]] {
                assert!(p.abs() < 1e-6, "phase [{k},{c}] = {p}");
            }
        }
    }

    #[test]
    fn wrong_shear_metadata_is_caught() {
        let (op, gi, _) = test_operator();
        let shear = units::omega_from_hz(8.0e9);
        let probes = plan_centers(&gi, gi.omega(100), gi.omega(400), 13, shear).unwrap();
        // Long schedule: eleven beat periods, so projecting at the wrong
        // frequency averages the real fringe away decisively.
        let delays_s: Vec<f64> = (0..40)
            .map(|i| units::seconds_from_ps(i as f64 * 35.0))
            .collect();
        let plan = SweepPlan {
            probes,
            delays_s,
            amplitude: 1.0,
        };
        let ds = synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "test").unwrap();
        // Rebuild the dataset claiming a shear 3.7x the real one: the
        // fringe fit then projects at a frequency where there is no beat.
        let wrong = DelaySweepDataset::new(
            ds.label().to_string(),
            ds.out_grid().clone(),
            ds.centers().to_vec(),
            3.7 * ds.shear(),
            ds.delays_s().to_vec(),
            ds.amplitude(),
            ds.detector().clone(),
            None,
            ds.data().clone(),
        )
        .unwrap();
        match reconstruct(&wrong, &ReconSpec::default()) {
            Err(Error::Consistency(msg)) => assert!(msg.contains("shear")),
            other => panic!("expected a consistency error, got {other:?}"),
        }
    }

    #[test]
    fn spec_validation_rejects_bad_fields() {
        let mut spec = ReconSpec::default();
        spec.threshold_rel = 0.0;
        assert!(spec.validate("/recon").is_err());
        let mut spec = ReconSpec::default();
        spec.resample_factor = 0;
        assert!(spec.validate("/recon").is_err());
    }

    #[test]
    fn recon_spec_round_trips_through_json() {
        let spec = ReconSpec {
            threshold_rel: 0.05,
            resample_factor: 2,
            magnitude_method: MagnitudeMethod::GeometricMean,
            mask: WavelengthMask::default(),
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: ReconSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.threshold_rel, spec.threshold_rel);
        assert_eq!(back.resample_factor, spec.resample_factor);
        assert_eq!(back.magnitude_method, spec.magnitude_method);
        let empty: ReconSpec = serde_json::from_str("{}").unwrap();
        assert_eq!(empty.threshold_rel, 0.02);
        assert_eq!(empty.resample_factor, 1);
    }

    #[test]
    fn gauge_phases_on_output_rows_are_invisible() {
        let (op, gi, _) = test_operator();
        let shear = units::omega_from_hz(8.0e9);
        let probes = plan_centers(&gi, gi.omega(120), gi.omega(380), 9, shear).unwrap();
        let delays_s: Vec<f64> = (0..9)
            .map(|i| units::seconds_from_ps(i as f64 * 35.0))
            .collect();
        let plan = SweepPlan {
            probes: probes.clone(),
            delays_s: delays_s.clone(),
            amplitude: 1.0,
        };
        let clean = synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "plain").unwrap();

        // Multiply every output row by an arbitrary unit phase.
        let mut dense = crate::greens::GreensOperator::to_dense(&op).unwrap();
        for (k, mut row) in dense.values_mut().rows_mut().into_iter().enumerate() {
            let chi = num_complex::Complex64::from_polar(1.0, (k as f64 * 0.7).sin() * 2.0);
            for v in row.iter_mut() {
                *v *= chi;
            }
        }
        let plan2 = SweepPlan {
            probes,
            delays_s,
            amplitude: 1.0,
        };
        let gauged = synthesize_sweep(&dense, &plan2, &DetectorSpec::default(), None, "chi").unwrap();

        let a = reconstruct(&clean, &ReconSpec::default()).unwrap();
        let b = reconstruct(&gauged, &ReconSpec::default()).unwrap();
        // The sideband product cancels the row phase algebraically; only
        // floating-point rounding of the synthesis survives.
        assert_eq!(a.greens.mask(), b.greens.mask());
        for (x, y) in a.greens.phase().iter().zip(b.greens.phase().iter()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        for (x, y) in a.greens.magnitude().iter().zip(b.greens.magnitude().iter()) {
            approx::assert_relative_eq!(*x, *y, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn probes_snap_onto_the_test_grid() {
        // Guard the fixture itself: shear 8 GHz on a 1 GHz grid is 8 steps.
        let (_, gi, _) = test_operator();
        let p = SnappedProbe::snap(&gi, gi.omega(100), units::omega_from_hz(8.0e9)).unwrap();
        assert_eq!(p.plus_index() - p.minus_index(), 8);
    }
}
