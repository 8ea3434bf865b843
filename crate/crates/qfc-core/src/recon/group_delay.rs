//! Group-delay maps and the dispersion-slope fit.
//!
//! Dividing the unwrapped phase difference by the shear turns each masked
//! cell into a group-delay estimate for its probe center. Per center, the
//! estimates across the output band are combined into a sideband-weighted
//! average with an r.m.s. spread; fitting a line through those averages
//! against probe wavelength yields the dispersion slope in ps/nm, the number
//! the delay-sweep experiment is designed to recover.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::recon::phase::PhaseDifferenceMap;
use crate::units;

/// Group delays per masked cell plus per-center band statistics.
#[derive(Clone, Debug)]
pub struct GroupDelayMap {
    out_grid: FrequencyGrid,
    centers: Vec<f64>,
    tau_ps: Array2<f64>,
    mask: Array2<bool>,
    band_average_ps: Vec<f64>,
    band_rms_ps: Vec<f64>,
}

impl GroupDelayMap {
    pub fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    /// Probe center frequencies, rad/s.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Group delays in ps, indexed `[output, center]`, zero outside the mask.
    pub fn tau_ps(&self) -> &Array2<f64> {
        &self.tau_ps
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Per-center weighted average over the output band; NaN where a center
    /// has no masked-in cell.
    pub fn band_average_ps(&self) -> &[f64] {
        &self.band_average_ps
    }

    /// Weighted r.m.s. spread around each center's band average.
    pub fn band_rms_ps(&self) -> &[f64] {
        &self.band_rms_ps
    }
}

/// Converts phase differences to group delays and band statistics. Band
/// averages weight each cell by its squared sideband magnitude, so output
/// rows with little conversion contribute essentially nothing.
pub fn group_delay_map(pd: &PhaseDifferenceMap) -> GroupDelayMap {
    let (n_out, n_cen) = pd.delta_phi().dim();
    let to_ps = 1e12 / pd.shear();
    let mut tau_ps = Array2::zeros((n_out, n_cen));
    for ((k, c), &dphi) in pd.delta_phi().indexed_iter() {
        if pd.mask()[[k, c]] {
            tau_ps[[k, c]] = dphi * to_ps;
        }
    }
    let mut band_average_ps = Vec::with_capacity(n_cen);
    let mut band_rms_ps = Vec::with_capacity(n_cen);
    for c in 0..n_cen {
        let mut wsum = 0.0;
        let mut mean = 0.0;
        for k in 0..n_out {
            if pd.mask()[[k, c]] {
                let w = pd.magnitude()[[k, c]].powi(2);
                wsum += w;
                mean += w * tau_ps[[k, c]];
            }
        }
        if wsum > 0.0 {
            mean /= wsum;
            let mut var = 0.0;
            for k in 0..n_out {
                if pd.mask()[[k, c]] {
                    let w = pd.magnitude()[[k, c]].powi(2);
                    var += w * (tau_ps[[k, c]] - mean).powi(2);
                }
            }
            band_average_ps.push(mean);
            band_rms_ps.push((var / wsum).sqrt());
        } else {
            band_average_ps.push(f64::NAN);
            band_rms_ps.push(f64::NAN);
        }
    }
    GroupDelayMap {
        out_grid: pd.out_grid().clone(),
        centers: pd.centers().to_vec(),
        tau_ps,
        mask: pd.mask().clone(),
        band_average_ps,
        band_rms_ps,
    }
}

/// Unweighted least-squares line through the band-averaged group delays
/// against probe wavelength.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SlopeFit {
    /// Fitted dispersion slope, ps/nm.
    pub slope_ps_per_nm: f64,
    /// Standard error of the slope, ps/nm.
    pub slope_stderr_ps_per_nm: f64,
    /// Fitted delay at the mean probe wavelength, ps.
    pub mean_delay_ps: f64,
    /// Mean probe wavelength of the fit, nm.
    pub mean_wavelength_nm: f64,
    /// R.m.s. deviation of the band averages from the line, ps.
    pub rms_residual_ps: f64,
    /// Number of centers entering the fit.
    pub points: usize,
}

impl SlopeFit {
    /// Fitted delay at an arbitrary wavelength.
    pub fn delay_at_nm(&self, lambda_nm: f64) -> f64 {
        self.mean_delay_ps + self.slope_ps_per_nm * (lambda_nm - self.mean_wavelength_nm)
    }
}

/// Fits the dispersion slope from a group-delay map's band averages.
pub fn fit_delay_slope(map: &GroupDelayMap) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = map
        .centers()
        .iter()
        .zip(map.band_average_ps())
        .filter(|(_, t)| t.is_finite())
        .map(|(&w, &t)| (units::wavelength_nm_from_omega(w), t))
        .collect();
    let n = points.len();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "slope fit needs at least 3 centers with signal, got {n}"
        )));
    }
    let xm = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx = points.iter().map(|p| (p.0 - xm).powi(2)).sum::<f64>();
    if sxx <= 0.0 {
        return Err(Error::Numeric(
            "probe centers are degenerate in wavelength; no slope is defined".into(),
        ));
    }
    let sxy = points.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum::<f64>();
    let slope = sxy / sxx;
    let ss_res = points
        .iter()
        .map(|p| (p.1 - ym - slope * (p.0 - xm)).powi(2))
        .sum::<f64>();
    let dof = (n - 2).max(1) as f64;
    Ok(SlopeFit {
        slope_ps_per_nm: slope,
        slope_stderr_ps_per_nm: (ss_res / dof / sxx).sqrt(),
        mean_delay_ps: ym,
        mean_wavelength_nm: xm,
        rms_residual_ps: (ss_res / n as f64).sqrt(),
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::extract::SidebandMap;
    use crate::recon::phase::{phase_differences, WavelengthMask};
    use num_complex::Complex64 as C64;

    /// Sideband map whose phase encodes a group delay linear in probe
    /// wavelength, like a dispersive fiber in front of the converter.
    fn dispersive_map(slope_ps_per_nm: f64, n_out: usize, n_cen: usize) -> SidebandMap {
        let go = FrequencyGrid::from_wavelength_nm(925.0, 20.0e9, n_out).unwrap();
        let gi = FrequencyGrid::from_wavelength_nm(1556.5, 60.0e9, n_cen).unwrap();
        let shear = units::omega_from_hz(560.0e6);
        let lambda_ref = units::wavelength_nm_from_omega(gi.center());
        let mut coefficients = ndarray::Array2::zeros((n_cen, n_out));
        let mut dc = ndarray::Array2::zeros((n_cen, n_out));
        for c in 0..n_cen {
            let lambda = units::wavelength_nm_from_omega(gi.omega(c));
            let tau_s = slope_ps_per_nm * (lambda - lambda_ref) * 1e-12;
            for k in 0..n_out {
                let x = (k as f64 - n_out as f64 / 2.0) / (n_out as f64 / 4.0);
                let mag = (-x * x).exp();
                coefficients[[c, k]] = C64::from_polar(mag, shear * tau_s);
                dc[[c, k]] = 2.0 * mag;
            }
        }
        SidebandMap::new(go, gi.omegas(), shear, coefficients, dc, 1e-9).unwrap()
    }

    #[test]
    fn linear_delay_fits_back_to_its_slope() {
        let sb = dispersive_map(34.2, 32, 23);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let map = group_delay_map(&pd);
        let fit = fit_delay_slope(&map).unwrap();
        assert_eq!(fit.points, 23);
        assert!((fit.slope_ps_per_nm - 34.2).abs() < 1e-6 * 34.2, "slope {}", fit.slope_ps_per_nm);
        assert!(fit.rms_residual_ps < 1e-9);
        assert!(fit.slope_stderr_ps_per_nm < 1e-9);
        // Every center shares one delay across the band, so spreads vanish.
        for (avg, rms) in map.band_average_ps().iter().zip(map.band_rms_ps()) {
            assert!(avg.is_finite());
            assert!(*rms < 1e-9);
        }
    }

    #[test]
    fn weighting_shields_the_average_from_weak_rows() {
        // Start from a clean constant-delay map, then poison a weak row
        // with a wild phase; the weighted band average must barely move.
        let sb = dispersive_map(0.0, 16, 9);
        let shear = sb.shear();
        let mut coefficients = sb.coefficients().clone();
        let weak_row = 15;
        for c in 0..9 {
            coefficients[[c, weak_row]] = C64::from_polar(
                0.03 * coefficients[[c, 7]].norm().max(1e-6),
                2.0,
            );
        }
        let poisoned = SidebandMap::new(
            sb.out_grid().clone(),
            sb.centers().to_vec(),
            shear,
            coefficients,
            sb.dc().clone(),
            1e-9,
        )
        .unwrap();
        let pd = phase_differences(&poisoned, 0.02, &WavelengthMask::default()).unwrap();
        let map = group_delay_map(&pd);
        let poisoned_tau = 2.0 / shear * 1e12;
        for avg in map.band_average_ps() {
            assert!(avg.abs() < 0.005 * poisoned_tau, "average {avg} dragged by weak row");
        }
    }

    #[test]
    fn too_few_centers_fail_the_fit() {
        let sb = dispersive_map(10.0, 8, 2);
        let pd = phase_differences(&sb, 0.02, &WavelengthMask::default()).unwrap();
        let map = group_delay_map(&pd);
        assert!(fit_delay_slope(&map).is_err());
    }
}
