//! Delay-axis resampling onto a uniform, finer grid.
//!
//! Uniform sweeps are refined by zero-padded discrete-Fourier interpolation,
//! which is exact for delay traces band-limited to the recorded window.
//! Sweeps with jittered or irregular delays are first fitted to the fringe
//! model at the known shear and then re-sampled from the fit, since Fourier
//! interpolation has no meaning on a non-uniform axis.

use ndarray::{Array1, Array3};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::recon::extract::FringeProjector;
use crate::sweep::DelaySweepDataset;

/// Relative delay-step spread below which a schedule counts as uniform.
const UNIFORMITY_TOL: f64 = 1e-9;

fn mean_step(delays: &[f64]) -> f64 {
    (delays[delays.len() - 1] - delays[0]) / (delays.len() - 1) as f64
}

fn is_uniform(delays: &[f64]) -> bool {
    let step = mean_step(delays);
    delays
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= UNIFORMITY_TOL * step.abs())
}

/// Interpolates a real trace onto `factor` times as many samples by zero
/// padding its discrete spectrum. Values at the original samples are
/// preserved exactly; the window is treated as periodic.
fn fourier_refine(trace: &[f64], factor: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = trace.len();
    let nf = n * factor;
    let mut spectrum: Vec<C64> = trace.iter().map(|&v| C64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let mut padded = vec![C64::new(0.0, 0.0); nf];
    for (k, &v) in spectrum.iter().enumerate() {
        // Signed bin frequency; the Nyquist bin of an even-length input is
        // split between +n/2 and -n/2 to keep the interpolant real.
        if n % 2 == 0 && k == n / 2 {
            padded[n / 2] = v * 0.5;
            padded[nf - n / 2] = v * 0.5;
        } else if k <= n / 2 {
            padded[k] = v;
        } else {
            padded[nf - (n - k)] = v;
        }
    }
    planner.plan_fft_inverse(nf).process(&mut padded);
    padded.iter().map(|v| v.re / n as f64).collect()
}

/// Resamples a sweep onto uniform delays with `factor` times the original
/// density. Uniform sweeps use exact Fourier interpolation over the periodic
/// window (`n * factor` delays); irregular sweeps are refitted to the fringe
/// model and resampled over their span (`(n-1) * factor + 1` delays).
pub fn resample_uniform(ds: &DelaySweepDataset, factor: usize) -> Result<DelaySweepDataset> {
    if factor < 1 {
        return Err(Error::Precondition("resample factor must be at least 1".into()));
    }
    let delays = ds.delays_s();
    if delays.len() < 2 {
        return Err(Error::Precondition(
            "resampling needs at least two delays".into(),
        ));
    }
    let step = mean_step(delays);
    if !(step > 0.0) {
        return Err(Error::Precondition(
            "resampling needs strictly increasing delays".into(),
        ));
    }
    let period = std::f64::consts::TAU / ds.shear();
    let window = delays[delays.len() - 1] - delays[0] + step;
    if window < period * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "sweep window {:.3} ns covers less than one beat period {:.3} ns",
            window * 1e9,
            period * 1e9
        )));
    }
    let uniform = is_uniform(delays);
    if uniform && factor == 1 {
        return Ok(ds.clone());
    }

    let n = delays.len();
    let (new_delays, mut data) = if uniform {
        let nf = n * factor;
        let new: Vec<f64> = (0..nf).map(|m| delays[0] + m as f64 * step / factor as f64).collect();
        (new, Array3::zeros((ds.centers().len(), ds.out_grid().count(), nf)))
    } else {
        let nf = (n - 1) * factor + 1;
        let fine = step / factor as f64;
        let new: Vec<f64> = (0..nf).map(|m| delays[0] + m as f64 * fine).collect();
        (new, Array3::zeros((ds.centers().len(), ds.out_grid().count(), nf)))
    };

    let mut planner = FftPlanner::new();
    let projector = if uniform {
        None
    } else {
        Some(FringeProjector::new(ds.shear(), delays)?)
    };
    for c in 0..ds.centers().len() {
        let slab = ds.intensity(c);
        for k in 0..ds.out_grid().count() {
            let trace = slab.row(k);
            let refined: Vec<f64> = match &projector {
                None => {
                    let samples: Vec<f64> = trace.iter().copied().collect();
                    fourier_refine(&samples, factor, &mut planner)
                }
                Some(p) => {
                    let (a, b) = p.project(trace);
                    new_delays
                        .iter()
                        .map(|&t| a + 2.0 * (b * C64::from_polar(1.0, ds.shear() * t)).re)
                        .collect()
                }
            };
            data.slice_mut(ndarray::s![c, k, ..])
                .assign(&Array1::from_vec(refined));
        }
    }

    DelaySweepDataset::new(
        ds.label().to_owned(),
        ds.out_grid().clone(),
        ds.centers().to_vec(),
        ds.shear(),
        new_delays,
        ds.amplitude(),
        ds.detector().clone(),
        ds.noise().cloned(),
        data,
    )
}
