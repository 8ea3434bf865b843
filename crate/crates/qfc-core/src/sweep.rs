//! Delay-sweep synthesis: turns a converter model into the raw data a
//! two-tone measurement would record.
//!
//! For every probe center the two tone responses are read off the operator,
//! combined into fringe intensities over a list of probe delays, smeared by
//! the spectrometer resolution, and optionally degraded with shot-to-shot
//! noise. The result is an intensity tensor indexed by probe center, output
//! frequency, and delay, which is all the reconstruction stage gets to see.
//!
//! Noise is keyed by cell: each (center, output, delay, average) tuple seeds
//! its own stream cipher, so a dataset is bit-reproducible for a given seed
//! no matter how the loops are ordered or parallelized.

use ndarray::{Array1, Array3, ArrayView1, ArrayView2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::GreensOperator;
use crate::grid::FrequencyGrid;
use crate::probe::{interference_products, SnappedProbe};
use crate::units;

/// Spectrometer model: Gaussian resolution and how many shots are averaged
/// per stored sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// Resolution bandwidth as an intensity FWHM in nm. Zero disables
    /// smoothing.
    #[serde(default)]
    pub osa_fwhm_nm: f64,
    /// Number of noisy shots averaged into each stored sample.
    #[serde(default = "one")]
    pub averages: u32,
}

fn one() -> u32 {
    1
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec { osa_fwhm_nm: 0.0, averages: 1 }
    }
}

impl DetectorSpec {
    pub fn validate(&self, pointer: &str) -> Result<()> {
        if !self.osa_fwhm_nm.is_finite() || self.osa_fwhm_nm < 0.0 {
            return Err(Error::config(
                format!("{pointer}/osa_fwhm_nm"),
                "resolution bandwidth must be finite and non-negative",
            ));
        }
        if self.averages == 0 {
            return Err(Error::config(
                format!("{pointer}/averages"),
                "at least one shot per sample",
            ));
        }
        Ok(())
    }
}

/// Shot noise model. Each shot sees `I (1 + sm g1) + sa P g2` with
/// independent standard normals `g1, g2` and `P` the peak of the clean
/// dataset, clamped at zero before averaging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Additive noise, relative to the dataset peak.
    #[serde(default)]
    pub additive_sigma: f64,
    /// Multiplicative noise, relative to each sample.
    #[serde(default)]
    pub multiplicative_sigma: f64,
    /// Noise seed. Resolved against the run-level seed before synthesis;
    /// absent means "use that seed".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl NoiseSpec {
    pub fn validate(&self, pointer: &str) -> Result<()> {
        for (field, v) in [
            ("additive_sigma", self.additive_sigma),
            ("multiplicative_sigma", self.multiplicative_sigma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(
                    format!("{pointer}/{field}"),
                    "noise level must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    /// True when either noise level is nonzero.
    pub fn is_active(&self) -> bool {
        self.additive_sigma > 0.0 || self.multiplicative_sigma > 0.0
    }
}

/// What to measure: which probes, which delays, and how hard to drive.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub probes: Vec<SnappedProbe>,
    pub delays_s: Vec<f64>,
    pub amplitude: f64,
}

impl SweepPlan {
    fn validate(&self, in_grid: &FrequencyGrid) -> Result<()> {
        if self.probes.is_empty() || self.delays_s.is_empty() {
            return Err(Error::Precondition(
                "a sweep needs at least one probe and one delay".into(),
            ));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Precondition(format!(
                "probe amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        let m = self.probes[0].plus_index() - self.probes[0].minus_index();
        for p in &self.probes {
            if p.plus_index() - p.minus_index() != m {
                return Err(Error::Precondition(
                    "all probes in one sweep must share the same snapped shear".into(),
                ));
            }
            if p.plus_index() >= in_grid.count() {
                return Err(Error::Precondition(format!(
                    "probe at {:.3} nm lies outside the operator's input grid",
                    p.center_wavelength_nm()
                )));
            }
        }
        if self.delays_s.iter().any(|t| !t.is_finite()) {
            return Err(Error::Precondition("probe delays must be finite".into()));
        }
        Ok(())
    }
}

/// Synthetic measurement record: everything the reconstruction stage is
/// allowed to know about a sweep.
#[derive(Clone, Debug)]
pub struct DelaySweepDataset {
    label: String,
    out_grid: FrequencyGrid,
    centers: Vec<f64>,
    shear: f64,
    delays_s: Vec<f64>,
    amplitude: f64,
    detector: DetectorSpec,
    noise: Option<NoiseSpec>,
    /// Intensities indexed `[center, output, delay]`.
    data: Array3<f64>,
}

impl DelaySweepDataset {
    /// Wraps the pieces of a recorded sweep, checking shape consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: String,
        out_grid: FrequencyGrid,
        centers: Vec<f64>,
        shear: f64,
        delays_s: Vec<f64>,
        amplitude: f64,
        detector: DetectorSpec,
        noise: Option<NoiseSpec>,
        data: Array3<f64>,
    ) -> Result<Self> {
        let want = (centers.len(), out_grid.count(), delays_s.len());
        if data.dim() != want {
            return Err(Error::GridMismatch(format!(
                "sweep tensor has shape {:?}, metadata implies {:?}",
                data.dim(),
                want
            )));
        }
        if centers.is_empty() || delays_s.is_empty() {
            return Err(Error::Precondition(
                "a sweep dataset needs at least one center and one delay".into(),
            ));
        }
        if !(shear > 0.0) {
            return Err(Error::Precondition(format!(
                "sweep shear must be positive, got {shear}"
            )));
        }
        Ok(DelaySweepDataset {
            label,
            out_grid,
            centers,
            shear,
            delays_s,
            amplitude,
            detector,
            noise,
            data,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    /// Probe center frequencies, rad/s, in sweep order.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Tone separation shared by every probe, rad/s.
    pub fn shear(&self) -> f64 {
        self.shear
    }

    pub fn delays_s(&self) -> &[f64] {
        &self.delays_s
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn detector(&self) -> &DetectorSpec {
        &self.detector
    }

    pub fn noise(&self) -> Option<&NoiseSpec> {
        self.noise.as_ref()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Intensity slab `[output, delay]` for one probe center.
    pub fn intensity(&self, center_index: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(ndarray::Axis(0), center_index)
    }
}

/// Smears an intensity spectrum with a Gaussian of the given FWHM (nm,
/// converted at the grid center). Each source sample spreads over the
/// in-range part of its window with renormalized weights, so the total
/// power is conserved even at the grid edges.
pub fn smooth_intensity(
    values: ArrayView1<'_, f64>,
    grid: &FrequencyGrid,
    fwhm_nm: f64,
) -> Array1<f64> {
    let fwhm =
        units::omega_width_from_nm(fwhm_nm, units::wavelength_nm_from_omega(grid.center()));
    let sigma_bins = fwhm / (8.0 * std::f64::consts::LN_2).sqrt() / grid.spacing();
    if !(sigma_bins > 0.0) {
        return values.to_owned();
    }
    let half = (6.0 * sigma_bins).ceil() as i64;
    let n = values.len() as i64;
    let mut out = Array1::zeros(values.len());
    for (s, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let lo = (s as i64 - half).max(0);
        let hi = (s as i64 + half).min(n - 1);
        let mut weights = Vec::with_capacity((hi - lo + 1) as usize);
        let mut total = 0.0;
        for d in lo..=hi {
            let x = (d - s as i64) as f64 / sigma_bins;
            let w = (-0.5 * x * x).exp();
            weights.push(w);
            total += w;
        }
        for (w, d) in weights.into_iter().zip(lo..=hi) {
            out[d as usize] += v * w / total;
        }
    }
    out
}

fn cell_rng(seed: u64, center: usize, out: usize, delay: usize, avg: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(b"qfcsweep");
    key[8..16].copy_from_slice(&seed.to_le_bytes());
    key[16..20].copy_from_slice(&(center as u32).to_le_bytes());
    key[20..24].copy_from_slice(&(out as u32).to_le_bytes());
    key[24..28].copy_from_slice(&(delay as u32).to_le_bytes());
    key[28..32].copy_from_slice(&avg.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn noisy_sample(
    clean: f64,
    peak: f64,
    noise: &NoiseSpec,
    detector: &DetectorSpec,
    seed: u64,
    cell: (usize, usize, usize),
) -> f64 {
    let mut acc = 0.0;
    for avg in 0..detector.averages {
        let mut rng = cell_rng(seed, cell.0, cell.1, cell.2, avg);
        let g1: f64 = StandardNormal.sample(&mut rng);
        let g2: f64 = StandardNormal.sample(&mut rng);
        let shot = clean * (1.0 + noise.multiplicative_sigma * g1)
            + noise.additive_sigma * peak * g2;
        acc += shot.max(0.0);
    }
    acc / detector.averages as f64
}

/// Runs the full measurement model against an operator: probe columns,
/// fringe formation, spectrometer smoothing, then noise.
pub fn synthesize_sweep(
    op: &(impl GreensOperator + ?Sized),
    plan: &SweepPlan,
    detector: &DetectorSpec,
    noise: Option<&NoiseSpec>,
    label: &str,
) -> Result<DelaySweepDataset> {
    plan.validate(op.in_grid())?;
    detector.validate("/detector")?;
    if let Some(n) = noise {
        n.validate("/noise")?;
    }

    let n_out = op.out_grid().count();
    let n_del = plan.delays_s.len();
    let half_a2 = 0.5 * plan.amplitude * plan.amplitude;
    let mut data = Array3::zeros((plan.probes.len(), n_out, n_del));

    for (c, probe) in plan.probes.iter().enumerate() {
        let cols = op.columns_at(&[probe.plus_index(), probe.minus_index()])?;
        let (dc, cross) = interference_products(cols.column(0), cols.column(1))?;
        for (d, &tau) in plan.delays_s.iter().enumerate() {
            let rot = C64::from_polar(1.0, probe.shear() * tau);
            let fringe = ndarray::Zip::from(&dc)
                .and(&cross)
                .map_collect(|i0, it| half_a2 * (i0 + 2.0 * (it * rot).re));
            let fringe = if detector.osa_fwhm_nm > 0.0 {
                smooth_intensity(fringe.view(), op.out_grid(), detector.osa_fwhm_nm)
            } else {
                fringe
            };
            data.slice_mut(ndarray::s![c, .., d]).assign(&fringe);
        }
    }

    if let Some(noise) = noise.filter(|n| n.is_active()) {
        let peak = data.iter().fold(0.0f64, |m, &v| m.max(v));
        let seed = noise.seed.unwrap_or(0);
        for (cell, v) in data.indexed_iter_mut() {
            *v = noisy_sample(*v, peak, noise, detector, seed, cell);
        }
    }

    DelaySweepDataset::new(
        label.to_owned(),
        op.out_grid().clone(),
        plan.probes.iter().map(|p| p.center()).collect(),
        plan.probes[0].shear(),
        plan.delays_s.clone(),
        plan.amplitude,
        detector.clone(),
        noise.filter(|n| n.is_active()).cloned(),
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{fringe_intensity, plan_centers};
    use crate::sim::{gaussian_pump_greens, BsfwmSpec, PumpEnvelope};
    use approx::assert_relative_eq;

    fn small_operator() -> crate::greens::GreensFunction {
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
        gaussian_pump_greens(&spec, &gi, &go).unwrap().converted()
    }

    fn small_plan(op: &crate::greens::GreensFunction) -> SweepPlan {
        let gi = op.in_grid();
        SweepPlan {
            probes: plan_centers(gi, gi.omega(30), gi.omega(90), 5, units::omega_from_hz(8.0e9))
                .unwrap(),
            delays_s: (0..6).map(|i| units::seconds_from_ps(300.0 * i as f64)).collect(),
            amplitude: 1.5,
        }
    }

    #[test]
    fn noiseless_sweep_reproduces_direct_fringes() {
        let op = small_operator();
        let plan = small_plan(&op);
        let ds = synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "clean").unwrap();
        assert_eq!(ds.data().dim(), (5, 128, 6));
        for (c, probe) in plan.probes.iter().enumerate() {
            for (d, &tau) in plan.delays_s.iter().enumerate() {
                let want = fringe_intensity(
                    op.column(probe.plus_index()),
                    op.column(probe.minus_index()),
                    probe.shear(),
                    plan.amplitude,
                    tau,
                )
                .unwrap();
                for k in 0..128 {
                    assert_eq!(ds.data()[[c, k, d]], want[k]);
                }
            }
        }
    }

    #[test]
    fn smoothing_conserves_power_and_sets_the_width() {
        let grid = FrequencyGrid::from_wavelength_nm(925.0, 2.0e9, 257).unwrap();
        let mut spike = Array1::zeros(257);
        spike[128] = 3.0;
        spike[0] = 1.0;
        let fwhm_nm = 0.05;
        let out = smooth_intensity(spike.view(), &grid, fwhm_nm);
        assert_relative_eq!(out.sum(), spike.sum(), max_relative = 1e-12);
        assert!(out[128] < 3.0);

        // Width of the smoothed interior spike matches the resolution.
        let half_max = out[128] / 2.0;
        let above: Vec<usize> =
            (0..257).filter(|&k| k > 60 && k < 200 && out[k] >= half_max).collect();
        let width_bins = (*above.last().unwrap() - above[0]) as f64;
        let fwhm_bins = units::omega_width_from_nm(fwhm_nm, 925.0) / grid.spacing();
        assert!(
            (width_bins - fwhm_bins).abs() <= 2.0,
            "width {width_bins} bins vs resolution {fwhm_bins}"
        );
    }

    #[test]
    fn smoothing_is_identity_at_zero_bandwidth() {
        let grid = FrequencyGrid::from_wavelength_nm(925.0, 2.0e9, 64).unwrap();
        let vals: Array1<f64> = (0..64).map(|k| (k as f64).sin().abs()).collect();
        let out = smooth_intensity(vals.view(), &grid, 0.0);
        assert_eq!(out, vals);
    }

    #[test]
    fn noise_is_reproducible_and_seed_keyed() {
        let op = small_operator();
        let plan = small_plan(&op);
        let det = DetectorSpec { osa_fwhm_nm: 0.05, averages: 2 };
        let noise = NoiseSpec {
            additive_sigma: 0.01,
            multiplicative_sigma: 0.02,
            seed: Some(7),
        };
        let a = synthesize_sweep(&op, &plan, &det, Some(&noise), "a").unwrap();
        let b = synthesize_sweep(&op, &plan, &det, Some(&noise), "b").unwrap();
        assert_eq!(a.data(), b.data());

        let reseeded = NoiseSpec { seed: Some(8), ..noise.clone() };
        let c = synthesize_sweep(&op, &plan, &det, Some(&reseeded), "c").unwrap();
        assert_ne!(a.data(), c.data());
        assert!(c.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn averaging_narrows_the_noise_distribution() {
        let op = small_operator();
        let plan = small_plan(&op);
        let noise = NoiseSpec {
            additive_sigma: 0.05,
            multiplicative_sigma: 0.0,
            seed: Some(3),
        };
        let clean =
            synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "clean").unwrap();
        let peak = clean.data().iter().fold(0.0f64, |m, &v| m.max(v));
        // Restrict to bright cells, where the zero clamp never fires and the
        // residual is pure averaged noise.
        let spread = |averages: u32| {
            let det = DetectorSpec { osa_fwhm_nm: 0.0, averages };
            let noisy = synthesize_sweep(&op, &plan, &det, Some(&noise), "n").unwrap();
            let mut sum = 0.0;
            let mut count = 0usize;
            for (cell, &v) in noisy.data().indexed_iter() {
                let truth = clean.data()[cell];
                if truth >= 0.2 * peak {
                    sum += (v - truth) * (v - truth);
                    count += 1;
                }
            }
            (sum / count as f64).sqrt()
        };
        let one = spread(1);
        let sixteen = spread(16);
        // RMS error on those cells drops like 1/sqrt(averages).
        assert!(
            sixteen < 0.35 * one,
            "averaging 16 shots left rms {sixteen} vs single-shot {one}"
        );
    }

    #[test]
    fn inconsistent_plans_are_rejected() {
        let op = small_operator();
        let gi = op.in_grid().clone();
        let mut plan = small_plan(&op);
        plan.delays_s.clear();
        assert!(synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "x").is_err());

        let mut plan = small_plan(&op);
        plan.probes[2] =
            crate::probe::SnappedProbe::snap(&gi, gi.omega(60), units::omega_from_hz(12.0e9))
                .unwrap();
        assert!(synthesize_sweep(&op, &plan, &DetectorSpec::default(), None, "x").is_err());

        let det = DetectorSpec { osa_fwhm_nm: 0.05, averages: 0 };
        let plan = small_plan(&op);
        assert!(synthesize_sweep(&op, &plan, &det, None, "x").is_err());
    }
}
