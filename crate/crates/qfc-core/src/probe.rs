//! Two-tone probes: bichromatic inputs that interrogate the converter.
//!
//! A probe is a pair of monochromatic tones at `omega0 +/- shear/2` with a
//! relative delay `tau`. Both tones convert through the device; on the output
//! side their responses overlap and beat, and the detected intensity at each
//! output frequency carries a fringe in `tau`:
//!
//! ```text
//! I(omega_out, tau) = (a^2 / 2) (I0 + 2 Re(Itil exp(i shear tau)))
//! I0   = |G+|^2 + |G-|^2
//! Itil = G+ conj(G-),   G+- = G(omega_out, omega0 +/- shear/2)
//! ```
//!
//! The fringe phase `arg Itil` measures the phase difference of the kernel
//! between the two input frequencies, which is what makes the Green's
//! function's input-side phase structure recoverable from intensities alone.
//!
//! Tones are snapped onto the input grid so that `G+-` are exact grid
//! columns: the shear becomes a whole number of grid steps and every probe
//! center in a plan sits on one shared integer lattice, keeping the center
//! spacing exactly uniform.

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::units;

/// A two-tone probe snapped onto an input grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SnappedProbe {
    minus_index: usize,
    plus_index: usize,
    center: f64,
    shear: f64,
}

impl SnappedProbe {
    /// Snaps the requested center and shear onto `grid`. The shear becomes
    /// `max(1, round(shear / spacing))` grid steps; the center moves by at
    /// most half a step.
    pub fn snap(grid: &FrequencyGrid, center: f64, shear: f64) -> Result<Self> {
        if !center.is_finite() || !(shear > 0.0) || !shear.is_finite() {
            return Err(Error::Precondition(format!(
                "probe needs a finite center and positive shear, got {center}, {shear}"
            )));
        }
        let d = grid.spacing();
        let m = (shear / d).round().max(1.0) as usize;
        let minus = (center - 0.5 * m as f64 * d - grid.first()) / d;
        let minus = minus.round();
        if minus < 0.0 || minus + m as f64 > (grid.count() - 1) as f64 {
            return Err(Error::Precondition(format!(
                "probe at {:.3} nm with shear {:.1} MHz does not fit the input grid",
                units::wavelength_nm_from_omega(center),
                units::hz_from_omega(shear) / 1e6,
            )));
        }
        let minus = minus as usize;
        Ok(Self::from_indices(grid, minus, minus + m))
    }

    fn from_indices(grid: &FrequencyGrid, minus_index: usize, plus_index: usize) -> Self {
        let shear = (plus_index - minus_index) as f64 * grid.spacing();
        SnappedProbe {
            minus_index,
            plus_index,
            center: grid.omega(minus_index) + 0.5 * shear,
            shear,
        }
    }

    /// Grid index of the lower tone.
    pub fn minus_index(&self) -> usize {
        self.minus_index
    }

    /// Grid index of the upper tone.
    pub fn plus_index(&self) -> usize {
        self.plus_index
    }

    /// Midpoint of the two tones, rad/s. Sits half a grid step off the grid
    /// when the snapped shear is an odd number of steps.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn center_wavelength_nm(&self) -> f64 {
        units::wavelength_nm_from_omega(self.center)
    }

    /// Actual tone separation after snapping, rad/s.
    pub fn shear(&self) -> f64 {
        self.shear
    }
}

/// Plans `count` probes with centers spanning `[start, stop]` (rad/s),
/// snapped to one integer lattice so consecutive centers are separated by
/// exactly the same number of grid steps and all shears are identical.
pub fn plan_centers(
    grid: &FrequencyGrid,
    start: f64,
    stop: f64,
    count: usize,
    shear: f64,
) -> Result<Vec<SnappedProbe>> {
    if count == 0 {
        return Err(Error::Precondition("a probe plan needs at least one center".into()));
    }
    if !(start < stop) && count > 1 {
        return Err(Error::Precondition(format!(
            "probe span needs start < stop, got {start} .. {stop}"
        )));
    }
    let first = SnappedProbe::snap(grid, start, shear)?;
    if count == 1 {
        return Ok(vec![first]);
    }
    let d = grid.spacing();
    let m = first.plus_index() - first.minus_index();
    let step_idx = (((stop - start) / (count - 1) as f64) / d).round().max(1.0) as usize;
    let mut probes = Vec::with_capacity(count);
    for i in 0..count {
        let minus = first.minus_index() + i * step_idx;
        if minus + m > grid.count() - 1 {
            return Err(Error::Precondition(format!(
                "probe plan runs off the input grid at center {} of {count}",
                i + 1
            )));
        }
        probes.push(SnappedProbe::from_indices(grid, minus, minus + m));
    }
    Ok(probes)
}

/// DC and interference parts of the two-tone output: `I0 = |G+|^2 + |G-|^2`
/// and `Itil = G+ conj(G-)` per output frequency.
pub fn interference_products(
    g_plus: ArrayView1<'_, C64>,
    g_minus: ArrayView1<'_, C64>,
) -> Result<(Array1<f64>, Array1<C64>)> {
    if g_plus.len() != g_minus.len() {
        return Err(Error::GridMismatch(format!(
            "tone responses differ in length: {} vs {}",
            g_plus.len(),
            g_minus.len()
        )));
    }
    let dc = ndarray::Zip::from(&g_plus)
        .and(&g_minus)
        .map_collect(|p, m| p.norm_sqr() + m.norm_sqr());
    let cross = ndarray::Zip::from(&g_plus)
        .and(&g_minus)
        .map_collect(|p, m| p * m.conj());
    Ok((dc, cross))
}

/// Detected intensity on the output grid for one probe delay.
pub fn fringe_intensity(
    g_plus: ArrayView1<'_, C64>,
    g_minus: ArrayView1<'_, C64>,
    shear: f64,
    amplitude: f64,
    delay_s: f64,
) -> Result<Array1<f64>> {
    let (dc, cross) = interference_products(g_plus, g_minus)?;
    let rot = C64::from_polar(1.0, shear * delay_s);
    let half_a2 = 0.5 * amplitude * amplitude;
    Ok(ndarray::Zip::from(&dc)
        .and(&cross)
        .map_collect(|i0, it| half_a2 * (i0 + 2.0 * (it * rot).re)))
}
