//! Discrete Green's functions and spectral modes.
//!
//! A converter is described by its frequency-domain Green's function
//! `G(omega_out, omega_in)`: the output field is
//!
//! ```text
//! a_out(omega_out) = Integral d omega_in  G(omega_out, omega_in) a_in(omega_in)
//! ```
//!
//! On grids this becomes `out_k = sum_j G[k, j] f_j spacing_in`, so `G[k, j]`
//! is an amplitude density, not a plain matrix element. The associated
//! discrete operator `U[k, j] = G[k, j] sqrt(spacing_out * spacing_in)` is the
//! one that should be unitary (or a block of a unitary) for a lossless
//! converter.
//!
//! Sign conventions used throughout the crate: spectral envelopes evolve as
//! `exp(-i nu t)`, a time delay `T` multiplies the spectrum by
//! `exp(+i omega T)`, and group delay is `+d phi / d omega`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Complex spectral amplitude sampled on a [`FrequencyGrid`].
///
/// A mode is normalized when `sum_j |f_j|^2 spacing = 1`, the grid quadrature
/// of the continuum condition `Integral |f|^2 d omega = 1`.
#[derive(Clone, Debug)]
pub struct SpectralMode {
    grid: FrequencyGrid,
    amplitudes: Array1<C64>,
}

impl SpectralMode {
    /// Wraps amplitudes without normalizing. Fails on length mismatch or
    /// non-finite entries.
    pub fn new(grid: FrequencyGrid, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != grid.count() {
            return Err(Error::GridMismatch(format!(
                "mode has {} amplitudes on a {}-point grid",
                amplitudes.len(),
                grid.count()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Numeric("mode amplitudes must be finite".into()));
        }
        Ok(SpectralMode { grid, amplitudes })
    }

    /// Wraps amplitudes and rescales them to unit norm. Fails on an all-zero
    /// input.
    pub fn normalized(grid: FrequencyGrid, amplitudes: Array1<C64>) -> Result<Self> {
        let mut mode = SpectralMode::new(grid, amplitudes)?;
        let n = mode.norm_sq().sqrt();
        if n == 0.0 {
            return Err(Error::Precondition(
                "cannot normalize an all-zero mode".into(),
            ));
        }
        mode.amplitudes.mapv_inplace(|a| a / n);
        Ok(mode)
    }

    /// Gaussian mode centred at `omega0` with the given intensity FWHM,
    /// normalized on the grid.
    pub fn gaussian(grid: FrequencyGrid, omega0: f64, fwhm: f64) -> Result<Self> {
        let rate = 2.0 * std::f64::consts::LN_2 / (fwhm * fwhm);
        let amps = Array1::from_iter(
            (0..grid.count()).map(|k| {
                let d = grid.omega(k) - omega0;
                C64::new((-rate * d * d).exp(), 0.0)
            }),
        );
        SpectralMode::normalized(grid, amps)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> ArrayView1<'_, C64> {
        self.amplitudes.view()
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array1<C64> {
        &mut self.amplitudes
    }

    /// Grid quadrature of `|f|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    /// Checks `|norm_sq - 1| <= tol`.
    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }
}

/// Closed frequency interval used for band-limited efficiencies.
#[derive(Clone, Copy, Debug)]
pub struct FrequencyBand {
    pub lo: f64,
    pub hi: f64,
}

impl FrequencyBand {
    pub fn new(lo: f64, hi: f64) -> Self {
        FrequencyBand { lo, hi }
    }

    /// Band covering a wavelength interval given in nm.
    pub fn from_wavelength_nm(lo_nm: f64, hi_nm: f64) -> Self {
        let a = crate::units::omega_from_wavelength_nm(lo_nm);
        let b = crate::units::omega_from_wavelength_nm(hi_nm);
        FrequencyBand {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.lo && omega <= self.hi
    }
}

/// Discrete Green's function between an input and an output grid.
///
/// `values[[k, j]]` is the amplitude density coupling input point `j` to
/// output point `k`.
#[derive(Clone, Debug)]
pub struct GreensFunction {
    out_grid: FrequencyGrid,
    in_grid: FrequencyGrid,
    values: Array2<C64>,
}

impl GreensFunction {
    pub fn new(out_grid: FrequencyGrid, in_grid: FrequencyGrid, values: Array2<C64>) -> Result<Self> {
        if values.dim() != (out_grid.count(), in_grid.count()) {
            return Err(Error::GridMismatch(format!(
                "values shape {:?} does not match grids ({} out, {} in)",
                values.dim(),
                out_grid.count(),
                in_grid.count()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("Green's function entries must be finite".into()));
        }
        Ok(GreensFunction {
            out_grid,
            in_grid,
            values,
        })
    }

    /// Builds the matrix by evaluating `f(omega_out, omega_in)` on the grid
    /// product.
    pub fn from_fn(
        out_grid: FrequencyGrid,
        in_grid: FrequencyGrid,
        f: impl Fn(f64, f64) -> C64,
    ) -> Result<Self> {
        let values = Array2::from_shape_fn((out_grid.count(), in_grid.count()), |(k, j)| {
            f(out_grid.omega(k), in_grid.omega(j))
        });
        GreensFunction::new(out_grid, in_grid, values)
    }

    /// Identity kernel on `grid`: the discrete representation of
    /// `delta(omega_out - omega_in)`, with density `1/spacing` on the
    /// diagonal.
    pub fn identity(grid: FrequencyGrid) -> Self {
        let n = grid.count();
        let inv = 1.0 / grid.spacing();
        let mut values = Array2::zeros((n, n));
        for k in 0..n {
            values[[k, k]] = C64::new(inv, 0.0);
        }
        GreensFunction {
            out_grid: grid.clone(),
            in_grid: grid,
            values,
        }
    }

    /// Pure time delay on `grid`: diagonal kernel `exp(i omega T)/spacing`,
    /// with `delay` in seconds.
    pub fn pure_delay(grid: FrequencyGrid, delay: f64) -> Self {
        let n = grid.count();
        let inv = 1.0 / grid.spacing();
        let mut values = Array2::zeros((n, n));
        for k in 0..n {
            values[[k, k]] = C64::from_polar(inv, grid.omega(k) * delay);
        }
        GreensFunction {
            out_grid: grid.clone(),
            in_grid: grid,
            values,
        }
    }

    pub fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    pub fn in_grid(&self) -> &FrequencyGrid {
        &self.in_grid
    }

    pub fn values(&self) -> ArrayView2<'_, C64> {
        self.values.view()
    }

    pub fn values_mut(&mut self) -> &mut Array2<C64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<C64> {
        self.values
    }

    /// Column `j`: the response to a spectral impulse at input point `j`.
    pub fn column(&self, j: usize) -> ArrayView1<'_, C64> {
        self.values.column(j)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Multiplies each output row by `exp(i chi(omega_out))`. This is the
    /// gauge transformation that two-tone interferometry is blind to.
    pub fn apply_output_phase(&mut self, chi: impl Fn(f64) -> f64) {
        for (k, mut row) in self.values.rows_mut().into_iter().enumerate() {
            let ph = C64::from_polar(1.0, chi(self.out_grid.omega(k)));
            row.mapv_inplace(|v| v * ph);
        }
    }

    /// Multiplies each input column by `exp(i phi(omega_in))`, the effect of
    /// a dispersive element placed before the converter.
    pub fn apply_input_phase(&mut self, phi: impl Fn(f64) -> f64) {
        for (j, mut col) in self.values.columns_mut().into_iter().enumerate() {
            let ph = C64::from_polar(1.0, phi(self.in_grid.omega(j)));
            col.mapv_inplace(|v| v * ph);
        }
    }
}

/// Anything that can produce Green's-function columns on demand.
///
/// Dense [`GreensFunction`] matrices implement this trivially; lazy
/// closed-form kernels implement it without materializing the full matrix,
/// which keeps fine input grids (tens of thousands of points) cheap when only
/// a few probe columns are needed.
pub trait GreensOperator {
    fn out_grid(&self) -> &FrequencyGrid;
    fn in_grid(&self) -> &FrequencyGrid;

    /// Amplitude-density column for input point `j`.
    fn column(&self, j: usize) -> Array1<C64>;

    /// Materializes the full dense matrix.
    fn to_dense(&self) -> Result<GreensFunction> {
        let (m, n) = (self.out_grid().count(), self.in_grid().count());
        let mut values = Array2::zeros((m, n));
        for j in 0..n {
            values.column_mut(j).assign(&self.column(j));
        }
        GreensFunction::new(self.out_grid().clone(), self.in_grid().clone(), values)
    }

    /// Dense matrix restricted to a subset of input columns. `indices` must
    /// be valid for the input grid; the returned matrix keeps the output grid
    /// and is indexed by position within `indices`.
    fn columns_at(&self, indices: &[usize]) -> Result<Array2<C64>> {
        let m = self.out_grid().count();
        let mut values = Array2::zeros((m, indices.len()));
        for (pos, &j) in indices.iter().enumerate() {
            if j >= self.in_grid().count() {
                return Err(Error::Precondition(format!(
                    "column index {j} outside {}-point input grid",
                    self.in_grid().count()
                )));
            }
            values.column_mut(pos).assign(&self.column(j));
        }
        Ok(values)
    }
}

impl GreensOperator for GreensFunction {
    fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    fn in_grid(&self) -> &FrequencyGrid {
        &self.in_grid
    }

    fn column(&self, j: usize) -> Array1<C64> {
        self.values.column(j).to_owned()
    }

    fn to_dense(&self) -> Result<GreensFunction> {
        Ok(self.clone())
    }
}

/// Applies a Green's function to an input mode:
/// `out_k = sum_j G[k, j] f_j spacing_in`.
///
/// The mode must live on the Green's function's input grid (exact field
/// equality); the result lives on the output grid and is generally not
/// normalized, since `|out|^2` integrates to the conversion efficiency.
pub fn apply(g: &GreensFunction, f: &SpectralMode) -> Result<SpectralMode> {
    g.in_grid.require_same(f.grid(), "apply: mode grid vs input grid")?;
    let out = g.values.dot(&f.amplitudes) * C64::new(g.in_grid.spacing(), 0.0);
    SpectralMode::new(g.out_grid.clone(), out)
}

/// Conversion efficiency of a normalized input mode: the fraction of input
/// power emerging inside `band` (or anywhere on the output grid when `band`
/// is `None`).
///
/// The input must be normalized to `1e-6`; a band that misses the whole
/// output grid gives efficiency zero.
pub fn conversion_efficiency(
    g: &GreensFunction,
    f: &SpectralMode,
    band: Option<FrequencyBand>,
) -> Result<f64> {
    if !f.is_normalized(1e-6) {
        return Err(Error::Precondition(format!(
            "input mode must be normalized (norm^2 = {:.6e})",
            f.norm_sq()
        )));
    }
    let out = apply(g, f)?;
    let d = g.out_grid.spacing();
    let total = out
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| match band {
            Some(b) => b.contains(g.out_grid.omega(*k)),
            None => true,
        })
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        * d;
    Ok(total)
}
