//! Phase differences: the argument of the sideband map, masked and
//! unwrapped.
//!
//! The sideband argument at one probe center measures the kernel's phase
//! difference between the two tone frequencies. It is only meaningful where
//! the sideband rises above the noise floor, so each output row is
//! thresholded against its own peak, pump-contaminated wavelength windows
//! are cut out, and the remaining cells are unwrapped along the probe-center
//! axis. Unwrapping runs independently within each contiguous masked-in run;
//! rows that fall apart into several runs keep an undetermined phase offset
//! between runs and are flagged rather than stitched.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::recon::extract::SidebandMap;
use crate::units;

/// Wavelength windows (nm) to exclude from the reconstruction, on the probe
/// (input) side and the converted (output) side.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavelengthMask {
    /// Excluded probe-center windows, each `[lo_nm, hi_nm]`.
    #[serde(default)]
    pub in_nm: Vec<[f64; 2]>,
    /// Excluded output windows, each `[lo_nm, hi_nm]`.
    #[serde(default)]
    pub out_nm: Vec<[f64; 2]>,
}

impl WavelengthMask {
    pub fn validate(&self, pointer: &str) -> Result<()> {
        for (name, windows) in [("in_nm", &self.in_nm), ("out_nm", &self.out_nm)] {
            for (i, w) in windows.iter().enumerate() {
                if !w[0].is_finite() || !w[1].is_finite() || w[0] >= w[1] {
                    return Err(Error::config(
                        format!("{pointer}/{name}/{i}"),
                        format!("window must be [lo, hi] with lo < hi, got [{}, {}]", w[0], w[1]),
                    ));
                }
            }
        }
        Ok(())
    }

    fn excludes(windows: &[[f64; 2]], lambda_nm: f64) -> bool {
        windows.iter().any(|w| lambda_nm >= w[0] && lambda_nm <= w[1])
    }
}

/// Masked, unwrapped phase differences indexed `[output, center]`, together
/// with the sideband magnitudes used as statistical weights downstream.
#[derive(Clone, Debug)]
pub struct PhaseDifferenceMap {
    out_grid: FrequencyGrid,
    centers: Vec<f64>,
    shear: f64,
    delta_phi: Array2<f64>,
    magnitude: Array2<f64>,
    mask: Array2<bool>,
    multi_run_rows: Vec<usize>,
    invalid_rows: Vec<usize>,
}

impl PhaseDifferenceMap {
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

    /// Unwrapped phase differences (rad), zero outside the mask.
    pub fn delta_phi(&self) -> &Array2<f64> {
        &self.delta_phi
    }

    /// Sideband magnitudes, zero outside the mask.
    pub fn magnitude(&self) -> &Array2<f64> {
        &self.magnitude
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Rows whose masked-in support splits into several runs, leaving
    /// inter-run phase offsets undetermined.
    pub fn multi_run_rows(&self) -> &[usize] {
        &self.multi_run_rows
    }

    /// Rows with no masked-in cell at all.
    pub fn invalid_rows(&self) -> &[usize] {
        &self.invalid_rows
    }

    /// Contiguous masked-in center runs of one output row, as `start..end`
    /// index ranges.
    pub fn runs(&self, row: usize) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let n = self.centers.len();
        let mut c = 0;
        while c < n {
            if self.mask[[row, c]] {
                let start = c;
                while c < n && self.mask[[row, c]] {
                    c += 1;
                }
                runs.push(start..c);
            } else {
                c += 1;
            }
        }
        runs
    }
}

/// Thresholds, masks, and unwraps the sideband argument. `threshold` is
/// relative to each output row's own peak magnitude.
pub fn phase_differences(
    sb: &SidebandMap,
    threshold: f64,
    mask: &WavelengthMask,
) -> Result<PhaseDifferenceMap> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Precondition(format!(
            "mask threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let n_out = sb.out_grid().count();
    let n_cen = sb.centers().len();
    let center_excluded: Vec<bool> = sb
        .centers()
        .iter()
        .map(|&w| WavelengthMask::excludes(&mask.in_nm, units::wavelength_nm_from_omega(w)))
        .collect();

    let mut delta_phi = Array2::zeros((n_out, n_cen));
    let mut magnitude = Array2::zeros((n_out, n_cen));
    let mut keep = Array2::from_elem((n_out, n_cen), false);
    let mut multi_run_rows = Vec::new();
    let mut invalid_rows = Vec::new();

    for k in 0..n_out {
        let lambda_out = units::wavelength_nm_from_omega(sb.out_grid().omega(k));
        let row_excluded = WavelengthMask::excludes(&mask.out_nm, lambda_out);
        let row_max = (0..n_cen)
            .map(|c| sb.coefficients()[[c, k]].norm())
            .fold(0.0f64, f64::max);
        let mut runs = 0usize;
        let mut in_run = false;
        for c in 0..n_cen {
            let mag = sb.coefficients()[[c, k]].norm();
            let ok = !row_excluded
                && !center_excluded[c]
                && row_max > 0.0
                && mag >= threshold * row_max;
            keep[[k, c]] = ok;
            if ok {
                magnitude[[k, c]] = mag;
                if !in_run {
                    runs += 1;
                    in_run = true;
                }
            } else {
                in_run = false;
            }
        }
        if runs == 0 {
            invalid_rows.push(k);
        } else if runs > 1 {
            multi_run_rows.push(k);
        }

        // Unwrap each contiguous run along the center axis.
        let mut c = 0;
        while c < n_cen {
            if !keep[[k, c]] {
                c += 1;
                continue;
            }
            let start = c;
            while c < n_cen && keep[[k, c]] {
                c += 1;
            }
            let mut prev = sb.coefficients()[[start, k]].arg();
            delta_phi[[k, start]] = prev;
            for cc in start + 1..c {
                let raw = sb.coefficients()[[cc, k]].arg();
                let jump = (raw - prev) / std::f64::consts::TAU;
                let unwrapped = raw - std::f64::consts::TAU * jump.round();
                delta_phi[[k, cc]] = unwrapped;
                prev = unwrapped;
            }
        }
    }

    Ok(PhaseDifferenceMap {
        out_grid: sb.out_grid().clone(),
        centers: sb.centers().to_vec(),
        shear: sb.shear(),
        delta_phi,
        magnitude,
        mask: keep,
        multi_run_rows,
        invalid_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use num_complex::Complex64 as C64;

    /// Synthetic sideband map: Gaussian ridge over centers in every row,
    /// with a per-cell phase supplied by `phase(row, center)`.
    fn synthetic_map(
        n_out: usize,
        n_cen: usize,
        phase: impl Fn(usize, usize) -> f64,
    ) -> SidebandMap {
        let go = FrequencyGrid::from_wavelength_nm(925.0, 20.0e9, n_out).unwrap();
        let gi = FrequencyGrid::from_wavelength_nm(1556.5, 40.0e9, n_cen).unwrap();
        let centers = gi.omegas();
        let mut coefficients = Array2::zeros((n_cen, n_out));
        let mut dc = Array2::zeros((n_cen, n_out));
        for c in 0..n_cen {
            for k in 0..n_out {
                let x = (c as f64 - n_cen as f64 / 2.0) / (n_cen as f64 / 4.0);
                let mag = (-x * x).exp();
                coefficients[[c, k]] = C64::from_polar(mag, phase(k, c));
                dc[[c, k]] = 2.0 * mag;
            }
        }
        SidebandMap::new(go, centers, units::omega_from_hz(560.0e6), coefficients, dc, 1e-9)
            .unwrap()
    }

    #[test]
    fn flat_phase_stays_zero_and_weak_cells_drop_out() {
        let sb = synthetic_map(4, 33, |_, _| 0.0);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let mut kept = 0;
        for k in 0..4 {
            for c in 0..33 {
                if pd.mask()[[k, c]] {
                    kept += 1;
                    assert_eq!(pd.delta_phi()[[k, c]], 0.0);
                    assert!(pd.magnitude()[[k, c]] >= 0.02);
                } else {
                    assert_eq!(pd.delta_phi()[[k, c]], 0.0);
                    assert_eq!(pd.magnitude()[[k, c]], 0.0);
                }
            }
        }
        assert!(kept > 0);
        // The Gaussian ridge tails fall under 2% of the row peak.
        assert!(kept < 4 * 33);
        assert!(pd.invalid_rows().is_empty());
        assert!(pd.multi_run_rows().is_empty());
    }

    #[test]
    fn steep_ramps_unwrap_without_jumps() {
        // Raw arguments wrap every few samples; increments stay below pi.
        let ramp = 0.8 * std::f64::consts::PI;
        let sb = synthetic_map(3, 41, |_, c| ramp * c as f64);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        for k in 0..3 {
            for run in pd.runs(k) {
                let base = run.start;
                for c in run {
                    let want = ramp * (c - base) as f64 + pd.delta_phi()[[k, base]];
                    assert!(
                        (pd.delta_phi()[[k, c]] - want).abs() < 1e-9,
                        "row {k} center {c}"
                    );
                }
            }
        }
    }

    #[test]
    fn wavelength_windows_cut_rows_and_columns() {
        let sb = synthetic_map(8, 33, |_, _| 0.3);
        let lambda_out_3 = units::wavelength_nm_from_omega(sb.out_grid().omega(3));
        let lambda_in_mid = units::wavelength_nm_from_omega(sb.centers()[16]);
        let mask = WavelengthMask {
            in_nm: vec![[lambda_in_mid - 1e-4, lambda_in_mid + 1e-4]],
            out_nm: vec![[lambda_out_3 - 1e-4, lambda_out_3 + 1e-4]],
        };
        let pd = phase_differences(&sb, 0.02, &mask).unwrap();
        assert!((0..33).all(|c| !pd.mask()[[3, c]]));
        assert!((0..8).all(|k| !pd.mask()[[k, 16]]));
        assert!(pd.invalid_rows().contains(&3));
        // Cutting the ridge center splits every remaining row in two runs.
        assert!(pd.multi_run_rows().contains(&0));
        assert_eq!(pd.runs(0).len(), 2);
    }

    #[test]
    fn bad_thresholds_are_rejected() {
        let sb = synthetic_map(2, 9, |_, _| 0.0);
        assert!(phase_differences(&sb, 0.0, &WavelengthMask::default()).is_err());
        assert!(phase_differences(&sb, 1.0, &WavelengthMask::default()).is_err());
        let mask = WavelengthMask { in_nm: vec![[2.0, 1.0]], out_nm: vec![] };
        assert!(mask.validate("/recon/mask").is_err());
    }
}
