//! Schmidt-mode analysis and gauge-invariant kernel comparison.
//!
//! The Schmidt decomposition diagonalizes a converter: the kernel splits
//! into orthonormal input/output mode pairs, each converted independently
//! with efficiency `sigma^2`. Because `G[k, j]` is an amplitude density,
//! the matrix that gets the SVD is the quadrature-weighted
//! `G * sqrt(spacing_out * spacing_in)`; its singular vectors divided by
//! `sqrt(spacing)` are the modes, unit-normalized under the grid
//! quadrature.
//!
//! Comparing a reconstructed kernel against a reference has to respect what
//! the measurement cannot see: one arbitrary phase per output frequency and
//! one global magnitude scale. [`compare_gauge_invariant`] quotients both
//! out before scoring.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::greens::{apply, GreensFunction, SpectralMode};
use crate::grid::FrequencyGrid;
use crate::recon::{ReconstructedGreens, SlopeFit};
use crate::units;

/// Schmidt decomposition of a Green's function: `G[k, j] = sum_i sigma_i
/// u_i[k] conj(v_i[j])` with orthonormal mode families.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    singular_values: Vec<f64>,
    output_modes: Vec<SpectralMode>,
    input_modes: Vec<SpectralMode>,
}

impl SchmidtDecomposition {
    /// Singular values in descending order.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Output (converted-band) modes, unit-normalized on their grid.
    pub fn output_modes(&self) -> &[SpectralMode] {
        &self.output_modes
    }

    /// Input modes, unit-normalized on their grid.
    pub fn input_modes(&self) -> &[SpectralMode] {
        &self.input_modes
    }

    pub fn mode_count(&self) -> usize {
        self.singular_values.len()
    }

    /// Largest achievable conversion efficiency over all normalized input
    /// modes: the leading `sigma^2`.
    pub fn max_efficiency(&self) -> f64 {
        self.singular_values.first().map_or(0.0, |s| s * s)
    }

    /// Effective mode count `(sum sigma^2)^2 / sum sigma^4`: one for a
    /// separable kernel, the full dimension for a flat spectrum.
    pub fn schmidt_number(&self) -> f64 {
        let s2: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let s4: f64 = self.singular_values.iter().map(|s| s.powi(4)).sum();
        if s4 == 0.0 {
            0.0
        } else {
            s2 * s2 / s4
        }
    }
}

/// Computes the Schmidt decomposition of a dense kernel.
///
/// Mode phases follow one convention: the largest-magnitude component of
/// each output mode is real and positive, with the matching input mode
/// rotated oppositely so the expansion is unchanged.
pub fn schmidt(g: &GreensFunction) -> Result<SchmidtDecomposition> {
    let (m, n) = g.values().dim();
    let weight = (g.out_grid().spacing() * g.in_grid().spacing()).sqrt();
    let mat = nalgebra::DMatrix::from_fn(m, n, |k, j| g.values()[[k, j]] * weight);
    let svd = mat.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not produce V^H".into()))?;
    let r = svd.singular_values.len();

    // Defensive descending sort; the backend usually returns it sorted.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let sqrt_do = g.out_grid().spacing().sqrt();
    let sqrt_di = g.in_grid().spacing().sqrt();
    let mut singular_values = Vec::with_capacity(r);
    let mut output_modes = Vec::with_capacity(r);
    let mut input_modes = Vec::with_capacity(r);
    for &i in &order {
        singular_values.push(svd.singular_values[i]);
        let mut u_i: Array1<C64> = Array1::from_iter((0..m).map(|k| u[(k, i)] / sqrt_do));
        let mut v_i: Array1<C64> = Array1::from_iter((0..n).map(|j| v_t[(i, j)].conj() / sqrt_di));
        let kmax = u_i
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let rot = C64::from_polar(1.0, -u_i[kmax].arg());
        u_i.mapv_inplace(|a| a * rot);
        v_i.mapv_inplace(|a| a * rot);
        output_modes.push(SpectralMode::new(g.out_grid().clone(), u_i)?);
        input_modes.push(SpectralMode::new(g.in_grid().clone(), v_i)?);
    }
    Ok(SchmidtDecomposition {
        singular_values,
        output_modes,
        input_modes,
    })
}

/// A spectral mode carried to the time domain.
#[derive(Clone, Debug)]
pub struct TimeDomainMode {
    times_s: Vec<f64>,
    amplitudes: Array1<C64>,
}

impl TimeDomainMode {
    /// Sample times in seconds, centred on zero.
    pub fn times_s(&self) -> &[f64] {
        &self.times_s
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    /// Quadrature of `|f(t)|^2` over the window.
    pub fn norm_sq(&self) -> f64 {
        let dt = if self.times_s.len() > 1 {
            self.times_s[1] - self.times_s[0]
        } else {
            0.0
        };
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dt
    }

    /// Intensity FWHM in ps by linear interpolation around the peak, or
    /// `None` when the envelope never falls to half maximum inside the
    /// window.
    pub fn intensity_fwhm_ps(&self) -> Option<f64> {
        let intensity: Vec<f64> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let (kpeak, &peak) = intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        if peak <= 0.0 {
            return None;
        }
        let half = 0.5 * peak;
        let crossing = |a: usize, b: usize| {
            let (ia, ib) = (intensity[a], intensity[b]);
            let f = (half - ia) / (ib - ia);
            self.times_s[a] + f * (self.times_s[b] - self.times_s[a])
        };
        let left = (1..=kpeak)
            .rev()
            .find(|&k| intensity[k - 1] < half && intensity[k] >= half)
            .map(|k| crossing(k - 1, k))?;
        let right = (kpeak..intensity.len() - 1)
            .find(|&k| intensity[k] >= half && intensity[k + 1] < half)
            .map(|k| crossing(k + 1, k))?;
        Some(units::ps_from_seconds(right - left))
    }
}

/// Evaluates a spectral mode's time envelope relative to the grid's centre
/// frequency: `f(t) = spacing / sqrt(2 pi) * sum_j f_j exp(-i nu_j t)` on
/// the conjugate time lattice. The discrete quadrature conserves the norm
/// exactly. Direct evaluation, quadratic in the grid size; meant for
/// analysis-sized grids.
pub fn time_domain_mode(mode: &SpectralMode) -> TimeDomainMode {
    let grid = mode.grid();
    let n = grid.count();
    let d_omega = grid.spacing();
    let dt = units::TWO_PI / (n as f64 * d_omega);
    let mid = (n as f64 - 1.0) / 2.0;
    let times_s: Vec<f64> = (0..n).map(|i| (i as f64 - mid) * dt).collect();
    let scale = d_omega / (units::TWO_PI).sqrt();
    let amplitudes = Array1::from_iter(times_s.iter().map(|&t| {
        let mut acc = C64::new(0.0, 0.0);
        for (j, &f) in mode.amplitudes().iter().enumerate() {
            let nu = (j as f64 - mid) * d_omega;
            acc += f * C64::from_polar(1.0, -nu * t);
        }
        acc * scale
    }));
    TimeDomainMode { times_s, amplitudes }
}

/// Scores of a reconstruction against a reference kernel, all insensitive
/// to the per-output-frequency phase and the global magnitude scale the
/// measurement cannot determine.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ComparisonMetrics {
    /// RMS phase error (rad) over the masked support after removing each
    /// contiguous run's mean difference.
    pub phase_rmse_rad: f64,
    /// Pearson correlation of reconstructed and reference magnitudes over
    /// the mask.
    pub magnitude_correlation: f64,
    /// Relative L2 magnitude error over the mask after the best global
    /// scale.
    pub magnitude_rel_error: f64,
    /// The fitted global scale `s` minimizing `|s m_recon - m_truth|`.
    pub magnitude_scale: f64,
    /// Reconstructed minus reference dispersion slope, when the
    /// reconstruction carried a slope fit.
    pub slope_error_ps_per_nm: Option<f64>,
    /// Reference dispersion slope from finite differences of the reference
    /// phase, band-averaged like the reconstruction.
    pub truth_slope_ps_per_nm: f64,
    /// Per-test-mode efficiency differences, relative to the largest
    /// reference test efficiency.
    pub efficiency_rel_errors: Vec<f64>,
    /// Masked cells entering the phase and magnitude scores.
    pub compared_cells: usize,
}

fn grids_close(a: &FrequencyGrid, b: &FrequencyGrid) -> bool {
    a.count() == b.count()
        && (a.spacing() - b.spacing()).abs() <= 1e-9 * a.spacing()
        && (a.center() - b.center()).abs() <= 1e-6 * a.spacing()
}

/// Contiguous `true` runs of one mask row.
fn mask_runs(row: ndarray::ArrayView1<'_, bool>) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (c, &m) in row.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(c),
            (false, Some(s)) => {
                runs.push(s..c);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..row.len());
    }
    runs
}

/// Band-averaged group delays of a reference kernel on the masked support,
/// fitted against centre wavelength exactly like the reconstruction's
/// slope. Returns the slope in ps/nm.
fn truth_slope(truth: &GreensFunction, mask: &Array2<bool>) -> Result<f64> {
    let (n_out, n_cen) = truth.values().dim();
    let d_omega = truth.in_grid().spacing();
    let mut tau_num = vec![0.0; n_cen];
    let mut tau_den = vec![0.0; n_cen];
    for k in 0..n_out {
        for run in mask_runs(mask.row(k)) {
            if run.len() < 3 {
                continue;
            }
            // Unwrapped phase along the run, then centred differences.
            let mut phases = Vec::with_capacity(run.len());
            let mut prev = truth.values()[[k, run.start]].arg();
            for c in run.clone() {
                let raw = truth.values()[[k, c]].arg();
                let unwrapped = raw - units::TWO_PI * ((raw - prev) / units::TWO_PI).round();
                phases.push(unwrapped);
                prev = unwrapped;
            }
            for (idx, c) in run.clone().enumerate().skip(1) {
                if idx + 1 >= phases.len() {
                    continue;
                }
                let tau = (phases[idx + 1] - phases[idx - 1]) / (2.0 * d_omega);
                let w = truth.values()[[k, c]].norm_sqr();
                tau_num[c] += w * tau;
                tau_den[c] += w;
            }
        }
    }
    let points: Vec<(f64, f64)> = (0..n_cen)
        .filter(|&c| tau_den[c] > 0.0)
        .map(|c| {
            (
                units::wavelength_nm_from_omega(truth.in_grid().omega(c)),
                1e12 * tau_num[c] / tau_den[c],
            )
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::Precondition(
            "reference kernel leaves fewer than three centres with a group delay".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Numeric(
            "reference centres do not span a wavelength range".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Deterministic complex test modes with a Gaussian envelope, normalized on
/// `grid`.
fn test_modes(grid: &FrequencyGrid, count: usize, seed: u64) -> Result<Vec<SpectralMode>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = grid.spacing() * grid.count() as f64;
    (0..count)
        .map(|_| {
            let amps = Array1::from_iter((0..grid.count()).map(|j| {
                let x = (grid.omega(j) - grid.center()) / (0.25 * span);
                let g1: f64 = StandardNormal.sample(&mut rng);
                let g2: f64 = StandardNormal.sample(&mut rng);
                C64::new(g1, g2) * (-x * x).exp()
            }));
            SpectralMode::normalized(grid.clone(), amps)
        })
        .collect()
}

/// Scores a reconstruction against a reference kernel sampled on the same
/// (output, probe-center) grids.
///
/// `test_mode_count` sets how many random input modes probe the efficiency
/// agreement; the reference must live exactly on the reconstruction's
/// grids, so sample it at the probe centres first when grids differ.
pub fn compare_gauge_invariant(
    recon: &ReconstructedGreens,
    slope: Option<&SlopeFit>,
    truth: &GreensFunction,
    test_mode_count: usize,
) -> Result<ComparisonMetrics> {
    if !grids_close(recon.out_grid(), truth.out_grid())
        || !grids_close(recon.centers(), truth.in_grid())
    {
        return Err(Error::GridMismatch(
            "reference kernel does not live on the reconstruction's grids; \
             sample it at the probe centres first"
                .into(),
        ));
    }

    // Phase: per contiguous masked run, remove the mean difference (one
    // unknown constant per run) and accumulate residuals.
    let (n_out, _) = recon.phase().dim();
    let mut ss = 0.0;
    let mut compared_cells = 0usize;
    for k in 0..n_out {
        for run in mask_runs(recon.mask().row(k)) {
            let mut truth_phase = Vec::with_capacity(run.len());
            let mut prev = truth.values()[[k, run.start]].arg();
            for c in run.clone() {
                let raw = truth.values()[[k, c]].arg();
                let unwrapped = raw - units::TWO_PI * ((raw - prev) / units::TWO_PI).round();
                truth_phase.push(unwrapped);
                prev = unwrapped;
            }
            let diffs: Vec<f64> = run
                .clone()
                .enumerate()
                .map(|(idx, c)| recon.phase()[[k, c]] - truth_phase[idx])
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            ss += diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>();
            compared_cells += diffs.len();
        }
    }
    if compared_cells == 0 {
        return Err(Error::Precondition(
            "reconstruction mask is empty; nothing to compare".into(),
        ));
    }
    let phase_rmse_rad = (ss / compared_cells as f64).sqrt();

    // Magnitude: Pearson correlation and best-scale relative error over the
    // mask.
    let mut sum_r = 0.0;
    let mut sum_t = 0.0;
    let mut sum_rr = 0.0;
    let mut sum_tt = 0.0;
    let mut sum_rt = 0.0;
    for ((k, c), &masked) in recon.mask().indexed_iter() {
        if !masked {
            continue;
        }
        let r = recon.magnitude()[[k, c]];
        let t = truth.values()[[k, c]].norm();
        sum_r += r;
        sum_t += t;
        sum_rr += r * r;
        sum_tt += t * t;
        sum_rt += r * t;
    }
    let nf = compared_cells as f64;
    let cov = sum_rt - sum_r * sum_t / nf;
    let var_r = sum_rr - sum_r * sum_r / nf;
    let var_t = sum_tt - sum_t * sum_t / nf;
    let magnitude_correlation = if var_r > 0.0 && var_t > 0.0 {
        cov / (var_r * var_t).sqrt()
    } else {
        0.0
    };
    let magnitude_scale = if sum_rr > 0.0 { sum_rt / sum_rr } else { 0.0 };
    let magnitude_rel_error = if sum_tt > 0.0 {
        ((magnitude_scale.powi(2) * sum_rr - 2.0 * magnitude_scale * sum_rt + sum_tt) / sum_tt)
            .max(0.0)
            .sqrt()
    } else {
        0.0
    };

    let truth_slope_ps_per_nm = truth_slope(truth, recon.mask())?;
    let slope_error_ps_per_nm = slope.map(|s| s.slope_ps_per_nm - truth_slope_ps_per_nm);

    // Efficiency agreement on deterministic test modes, with the
    // reconstruction scaled onto the reference.
    let mut recon_kernel = recon.complex_greens()?;
    recon_kernel
        .values_mut()
        .mapv_inplace(|v| v * magnitude_scale);
    let modes = test_modes(truth.in_grid(), test_mode_count, 0x51d)?;
    let mut eta_truth = Vec::with_capacity(modes.len());
    let mut eta_recon = Vec::with_capacity(modes.len());
    for f in &modes {
        eta_truth.push(crate::greens::conversion_efficiency(truth, f, None)?);
        eta_recon.push(crate::greens::conversion_efficiency(&recon_kernel, f, None)?);
    }
    let eta_ref = eta_truth.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let efficiency_rel_errors = eta_truth
        .iter()
        .zip(&eta_recon)
        .map(|(t, r)| (t - r).abs() / eta_ref)
        .collect();

    Ok(ComparisonMetrics {
        phase_rmse_rad,
        magnitude_correlation,
        magnitude_rel_error,
        magnitude_scale,
        slope_error_ps_per_nm,
        truth_slope_ps_per_nm,
        efficiency_rel_errors,
        compared_cells,
    })
}
