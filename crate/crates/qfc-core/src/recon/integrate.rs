//! Phase integration: from phase differences to the reconstructed kernel.
//!
//! Dividing the unwrapped phase differences by the shear gives samples of
//! the kernel's input-frequency phase derivative; integrating them across
//! the probe centers (trapezoid rule, per output row, per contiguous run)
//! recovers the spectral phase up to one constant per run. The constant per
//! output row is fixed by making each row's masked-in mean zero, the gauge
//! convention for the output-side phase this measurement can never see.
//!
//! Magnitudes come from the same sweep: either `sqrt(dc/2)`, the average
//! tone intensity, or the geometric mean of the two tone magnitudes, which
//! is the sideband magnitude's square root. Both are second-order accurate
//! at the probe center; the overall scale is arbitrary either way.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::greens::GreensFunction;
use crate::grid::FrequencyGrid;
use crate::recon::extract::SidebandMap;
use crate::recon::phase::PhaseDifferenceMap;

/// How to fill `|G|` from the sweep observables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeMethod {
    /// `sqrt(dc/2)`: r.m.s. of the two tone responses.
    #[default]
    SqrtHalfDc,
    /// `sqrt(|sideband|)`: geometric mean of the two tone responses.
    GeometricMean,
}

/// Splits the summed tone intensity into the two individual tone
/// intensities using the sideband magnitude: the pair solves `x + y = dc`,
/// `x * y = |sideband|^2`. Returns `(larger, smaller)`; which tone is which
/// cannot be told from one cell alone.
pub fn quadratic_split(dc: f64, sideband_mag: f64) -> (f64, f64) {
    let disc = (dc * dc - 4.0 * sideband_mag * sideband_mag).max(0.0).sqrt();
    (0.5 * (dc + disc), 0.5 * (dc - disc))
}

/// The reconstructed kernel on the (output, probe-center) grid.
#[derive(Clone, Debug)]
pub struct ReconstructedGreens {
    out_grid: FrequencyGrid,
    centers: FrequencyGrid,
    shear: f64,
    magnitude: Array2<f64>,
    phase: Array2<f64>,
    group_delay_ps: Array2<f64>,
    mask: Array2<bool>,
    magnitude_method: MagnitudeMethod,
    warnings: Vec<String>,
}

impl ReconstructedGreens {
    /// Wraps reconstruction results, enforcing shapes, non-negative
    /// magnitudes, and the per-row zero-mean phase gauge.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        out_grid: FrequencyGrid,
        centers: FrequencyGrid,
        shear: f64,
        magnitude: Array2<f64>,
        phase: Array2<f64>,
        group_delay_ps: Array2<f64>,
        mask: Array2<bool>,
        magnitude_method: MagnitudeMethod,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let want = (out_grid.count(), centers.count());
        for (name, dim) in [
            ("magnitude", magnitude.dim()),
            ("phase", phase.dim()),
            ("group_delay", group_delay_ps.dim()),
            ("mask", mask.dim()),
        ] {
            if dim != want {
                return Err(Error::GridMismatch(format!(
                    "{name} matrix has shape {dim:?}, grids imply {want:?}"
                )));
            }
        }
        if magnitude.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Numeric(
                "reconstructed magnitudes must be finite and non-negative".into(),
            ));
        }
        for (k, row) in phase.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for (c, &p) in row.iter().enumerate() {
                if mask[[k, c]] {
                    sum += p;
                    n += 1;
                }
            }
            if n > 0 && (sum / n as f64).abs() > 1e-9 {
                return Err(Error::Numeric(format!(
                    "phase row {k} violates the zero-mean gauge (mean {:.3e})",
                    sum / n as f64
                )));
            }
        }
        Ok(ReconstructedGreens {
            out_grid,
            centers,
            shear,
            magnitude,
            phase,
            group_delay_ps,
            mask,
            magnitude_method,
            warnings,
        })
    }

    pub fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    /// Probe-center grid playing the role of the input axis.
    pub fn centers(&self) -> &FrequencyGrid {
        &self.centers
    }

    pub fn shear(&self) -> f64 {
        self.shear
    }

    /// `|G|` up to one global scale, indexed `[output, center]`.
    pub fn magnitude(&self) -> &Array2<f64> {
        &self.magnitude
    }

    /// Spectral phase (rad), zero-mean per output row over the mask; zero
    /// outside the mask.
    pub fn phase(&self) -> &Array2<f64> {
        &self.phase
    }

    /// Group delays in ps, zero outside the mask.
    pub fn group_delay_ps(&self) -> &Array2<f64> {
        &self.group_delay_ps
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn magnitude_method(&self) -> MagnitudeMethod {
        self.magnitude_method
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Complex kernel `magnitude * exp(i phase)` as a dense operator on the
    /// (output, center) grids. Outside the mask the phase is zero by
    /// convention.
    pub fn complex_greens(&self) -> Result<GreensFunction> {
        let values = ndarray::Zip::from(&self.magnitude)
            .and(&self.phase)
            .map_collect(|&m, &p| C64::from_polar(m, p));
        GreensFunction::new(self.out_grid.clone(), self.centers.clone(), values)
    }
}

/// Largest relative deviation of the probe centers from a uniform grid.
fn center_grid(centers: &[f64]) -> Result<FrequencyGrid> {
    let n = centers.len();
    if n < 2 {
        return Err(Error::Precondition(
            "phase integration needs at least two probe centers".into(),
        ));
    }
    let spacing = (centers[n - 1] - centers[0]) / (n - 1) as f64;
    if !(spacing > 0.0) {
        return Err(Error::Precondition(
            "probe centers must be strictly increasing".into(),
        ));
    }
    let grid = FrequencyGrid::new(0.5 * (centers[0] + centers[n - 1]), spacing, n)?;
    for (k, &w) in centers.iter().enumerate() {
        if (w - grid.omega(k)).abs() > 1e-6 * spacing {
            return Err(Error::Precondition(format!(
                "probe centers are not uniform (center {k} deviates by \
                 {:.3e} of the spacing); resample the sweep first",
                (w - grid.omega(k)).abs() / spacing
            )));
        }
    }
    Ok(grid)
}

/// Integrates phase differences into a spectral phase and fills magnitudes,
/// producing the reconstructed kernel.
pub fn integrate_phase(
    pd: &PhaseDifferenceMap,
    sb: &SidebandMap,
    method: MagnitudeMethod,
) -> Result<ReconstructedGreens> {
    pd.out_grid().require_same(sb.out_grid(), "phase map vs sideband map output grids")?;
    if pd.centers() != sb.centers() {
        return Err(Error::GridMismatch(
            "phase map and sideband map disagree on probe centers".into(),
        ));
    }
    let centers = center_grid(pd.centers())?;
    let mut warnings = Vec::new();
    if centers.spacing() > pd.shear() {
        warnings.push(format!(
            "probe centers are spaced {:.3e} rad/s apart but the shear is \
             {:.3e} rad/s; phase structure between centers is invisible and \
             the trapezoid integration assumes the group delay varies slowly",
            centers.spacing(),
            pd.shear()
        ));
    }
    if !pd.multi_run_rows().is_empty() {
        warnings.push(format!(
            "{} output rows have gaps in their masked support; phase \
             offsets between their runs are not determined",
            pd.multi_run_rows().len()
        ));
    }

    let (n_out, n_cen) = pd.delta_phi().dim();
    let d_omega = centers.spacing();
    let inv_shear = 1.0 / pd.shear();
    let mut phase = Array2::zeros((n_out, n_cen));
    for k in 0..n_out {
        for run in pd.runs(k) {
            let mut acc = 0.0;
            let mut prev = pd.delta_phi()[[k, run.start]] * inv_shear;
            for c in run.clone() {
                if c > run.start {
                    let g = pd.delta_phi()[[k, c]] * inv_shear;
                    acc += 0.5 * (prev + g) * d_omega;
                    prev = g;
                }
                phase[[k, c]] = acc;
            }
        }
        // Gauge: remove the row's masked-in mean.
        let mut sum = 0.0;
        let mut n = 0usize;
        for c in 0..n_cen {
            if pd.mask()[[k, c]] {
                sum += phase[[k, c]];
                n += 1;
            }
        }
        if n > 0 {
            let mean = sum / n as f64;
            for c in 0..n_cen {
                if pd.mask()[[k, c]] {
                    phase[[k, c]] -= mean;
                } else {
                    phase[[k, c]] = 0.0;
                }
            }
        }
    }

    let mut magnitude = Array2::zeros((n_out, n_cen));
    for k in 0..n_out {
        for c in 0..n_cen {
            magnitude[[k, c]] = match method {
                MagnitudeMethod::SqrtHalfDc => (0.5 * sb.dc()[[c, k]]).max(0.0).sqrt(),
                MagnitudeMethod::GeometricMean => sb.coefficients()[[c, k]].norm().sqrt(),
            };
        }
    }

    let to_ps = 1e12 * inv_shear;
    let mut group_delay_ps = Array2::zeros((n_out, n_cen));
    for ((k, c), &dphi) in pd.delta_phi().indexed_iter() {
        if pd.mask()[[k, c]] {
            group_delay_ps[[k, c]] = dphi * to_ps;
        }
    }

    ReconstructedGreens::new(
        pd.out_grid().clone(),
        centers,
        pd.shear(),
        magnitude,
        phase,
        group_delay_ps,
        pd.mask().clone(),
        method,
        warnings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::phase::{phase_differences, WavelengthMask};
    use crate::units;
    use approx::assert_relative_eq;
    use ndarray::Array2;

    /// Sideband map encoding a quadratic spectral phase `q (w - w0)^2 / 2`
    /// over the centers, like a chirped kernel.
    fn quadratic_map(q: f64, n_out: usize, n_cen: usize) -> SidebandMap {
        let go = FrequencyGrid::from_wavelength_nm(925.0, 20.0e9, n_out).unwrap();
        let gi = FrequencyGrid::from_wavelength_nm(1556.5, 30.0e9, n_cen).unwrap();
        let shear = units::omega_from_hz(560.0e6);
        let mut coefficients = Array2::zeros((n_cen, n_out));
        let mut dc = Array2::zeros((n_cen, n_out));
        for c in 0..n_cen {
            let nu = gi.omega(c) - gi.center();
            // Difference of the true phase at the two tones. Equal tone
            // magnitudes `mag` give sideband `mag^2` and dc `2 mag^2`.
            let dphi = 0.5 * q * ((nu + 0.5 * shear).powi(2) - (nu - 0.5 * shear).powi(2));
            for k in 0..n_out {
                let x = (c as f64 - n_cen as f64 / 2.0) / (n_cen as f64 / 3.0);
                let mag = (-x * x).exp();
                coefficients[[c, k]] = C64::from_polar(mag * mag, dphi);
                dc[[c, k]] = 2.0 * mag * mag;
            }
        }
        SidebandMap::new(go, gi.omegas(), shear, coefficients, dc, 1e-9).unwrap()
    }

    #[test]
    fn quadratic_phase_integrates_back() {
        // Small enough that every phase difference stays inside the
        // principal branch; large enough that the integral reaches ~0.7 rad.
        let q = 1.0e-22;
        let sb = quadratic_map(q, 6, 41);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let rg = integrate_phase(&pd, &sb, MagnitudeMethod::SqrtHalfDc).unwrap();

        // Compare to the true quadratic phase with the same per-row gauge.
        let centers = rg.centers();
        for k in 0..6 {
            let truth: Vec<f64> = (0..41)
                .map(|c| 0.5 * q * (centers.omega(c) - centers.center()).powi(2))
                .collect();
            let masked: Vec<usize> = (0..41).filter(|&c| rg.mask()[[k, c]]).collect();
            assert!(masked.len() > 10);
            let mean = masked.iter().map(|&c| truth[c]).sum::<f64>() / masked.len() as f64;
            for &c in &masked {
                // The trapezoid rule is exact on the linear phase
                // difference of a quadratic phase.
                assert!(
                    (rg.phase()[[k, c]] - (truth[c] - mean)).abs() < 1e-9,
                    "row {k} center {c}: {} vs {}",
                    rg.phase()[[k, c]],
                    truth[c] - mean
                );
            }
        }
    }

    #[test]
    fn magnitude_methods_agree_on_equal_tones() {
        // dc = 2 mag^2 and |sideband| = mag^2 in the synthetic map, exactly
        // the equal-tone case where both estimates coincide.
        let sb = quadratic_map(0.0, 4, 21);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let a = integrate_phase(&pd, &sb, MagnitudeMethod::SqrtHalfDc).unwrap();
        let b = integrate_phase(&pd, &sb, MagnitudeMethod::GeometricMean).unwrap();
        for (x, y) in a.magnitude().iter().zip(b.magnitude().iter()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12, epsilon = 1e-15);
        }
        let (hi, lo) = quadratic_split(2.0, 1.0);
        assert_relative_eq!(hi, 1.0);
        assert_relative_eq!(lo, 1.0);
        let (hi, lo) = quadratic_split(5.0, 2.0);
        assert_relative_eq!(hi, 4.0, max_relative = 1e-12);
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_differences_integrate_to_zero() {
        let sb = quadratic_map(0.0, 3, 15);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let rg = integrate_phase(&pd, &sb, MagnitudeMethod::SqrtHalfDc).unwrap();
        for v in rg.phase() {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn non_uniform_centers_are_rejected() {
        let sb = quadratic_map(0.0, 3, 15);
        let mut centers = sb.centers().to_vec();
        centers[7] += 0.4 * (centers[8] - centers[7]);
        let skewed = SidebandMap::new(
            sb.out_grid().clone(),
            centers,
            sb.shear(),
            sb.coefficients().clone(),
            sb.dc().clone(),
            1e-9,
        )
        .unwrap();
        let pd = phase_differences(&skewed, 0.02, &WavelengthMask::default()).unwrap();
        let err = integrate_phase(&pd, &skewed, MagnitudeMethod::SqrtHalfDc).unwrap_err();
        assert!(err.to_string().contains("not uniform"));
    }

    #[test]
    fn wide_center_spacing_is_flagged_not_fatal() {
        let sb = quadratic_map(0.0, 3, 15);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let rg = integrate_phase(&pd, &sb, MagnitudeMethod::SqrtHalfDc).unwrap();
        // 30 GHz center spacing vs 560 MHz shear: flagged.
        assert!(rg.warnings().iter().any(|w| w.contains("shear")));
    }
}
