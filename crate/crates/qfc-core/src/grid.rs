//! Uniform angular-frequency grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Uniformly spaced grid of angular frequencies.
///
/// Point `k` sits at `center + (k - (count - 1)/2) * spacing`, so the grid is
/// symmetric about `center` (for even counts the center falls between the two
/// middle points). All frequencies must be positive so every point has a
/// well-defined vacuum wavelength; the wavelength view runs opposite to the
/// frequency view and is strictly decreasing with `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct FrequencyGrid {
    center: f64,
    spacing: f64,
    count: usize,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawGrid {
    center_rad_s: f64,
    spacing_rad_s: f64,
    count: usize,
}

impl From<FrequencyGrid> for RawGrid {
    fn from(g: FrequencyGrid) -> Self {
        RawGrid {
            center_rad_s: g.center,
            spacing_rad_s: g.spacing,
            count: g.count,
        }
    }
}

impl TryFrom<RawGrid> for FrequencyGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        FrequencyGrid::new(raw.center_rad_s, raw.spacing_rad_s, raw.count)
    }
}

impl FrequencyGrid {
    /// Builds a grid centred at `center` rad/s with `count` points separated
    /// by `spacing` rad/s. Fails unless `spacing > 0`, `count >= 2`, and the
    /// lowest point is still a positive frequency.
    pub fn new(center: f64, spacing: f64, count: usize) -> Result<Self> {
        if !center.is_finite() || !spacing.is_finite() {
            return Err(Error::Precondition("grid parameters must be finite".into()));
        }
        if spacing <= 0.0 {
            return Err(Error::Precondition(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        if count < 2 {
            return Err(Error::Precondition(format!(
                "grid needs at least 2 points, got {count}"
            )));
        }
        let lowest = center - 0.5 * (count - 1) as f64 * spacing;
        if lowest <= 0.0 {
            return Err(Error::Precondition(format!(
                "grid extends to non-positive frequency {lowest:.3e} rad/s"
            )));
        }
        Ok(FrequencyGrid {
            center,
            spacing,
            count,
        })
    }

    /// Grid centred on a vacuum wavelength in nm, spacing given in Hz.
    pub fn from_wavelength_nm(center_nm: f64, spacing_hz: f64, count: usize) -> Result<Self> {
        FrequencyGrid::new(
            units::omega_from_wavelength_nm(center_nm),
            units::omega_from_hz(spacing_hz),
            count,
        )
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Angular frequency of point `k`.
    pub fn omega(&self, k: usize) -> f64 {
        debug_assert!(k < self.count);
        self.center + self.offset(k)
    }

    /// Offset of point `k` from the grid center, in rad/s.
    pub fn offset(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.count - 1) as f64) * self.spacing
    }

    /// All angular frequencies in index order (ascending).
    pub fn omegas(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.omega(k)).collect()
    }

    /// Vacuum wavelength in nm of point `k`.
    pub fn wavelength_nm(&self, k: usize) -> f64 {
        units::wavelength_nm_from_omega(self.omega(k))
    }

    /// All wavelengths in index order (descending).
    pub fn wavelengths_nm(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.wavelength_nm(k)).collect()
    }

    pub fn first(&self) -> f64 {
        self.omega(0)
    }

    pub fn last(&self) -> f64 {
        self.omega(self.count - 1)
    }

    /// Full extent `last - first` in rad/s.
    pub fn span(&self) -> f64 {
        (self.count - 1) as f64 * self.spacing
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.first() && omega <= self.last()
    }

    /// Index of the grid point nearest to `omega`, clamped to the grid.
    pub fn nearest_index(&self, omega: f64) -> usize {
        let raw = (omega - self.first()) / self.spacing;
        raw.round().clamp(0.0, (self.count - 1) as f64) as usize
    }

    /// Fractional index of `omega` (0 at the first point). Useful for
    /// interpolation and snapping diagnostics.
    pub fn fractional_index(&self, omega: f64) -> f64 {
        (omega - self.first()) / self.spacing
    }

    /// Checks bitwise equality with another grid, reporting a descriptive
    /// error on mismatch. Used wherever an operation requires two objects to
    /// share a grid.
    pub fn require_same(&self, other: &FrequencyGrid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {self:?} vs {other:?}"
            )))
        }
    }
}
