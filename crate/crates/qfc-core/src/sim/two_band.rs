//! Two-band Green's functions.
//!
//! A converter couples two bands, so its full scattering description is a
//! 2 x 2 block structure: transmission within each band plus conversion in
//! both directions. Tomography only sees the converted block, but unitarity
//! is a statement about the whole structure, so the blocks are kept together.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::greens::GreensFunction;
use crate::grid::FrequencyGrid;

/// Block Green's function of a two-band converter.
///
/// Block shapes, with `n_in` telecom and `n_out` near-infrared points:
///
/// * `in_to_in`:  `[n_in,  n_in]`, telecom transmission
/// * `in_to_out`: `[n_out, n_in]`, upward conversion (what tomography probes)
/// * `out_to_in`: `[n_in,  n_out]`, downward conversion
/// * `out_to_out`:`[n_out, n_out]`, near-infrared transmission
///
/// All blocks are amplitude densities in the same sense as
/// [`GreensFunction`].
#[derive(Clone, Debug)]
pub struct TwoBandGreens {
    in_grid: FrequencyGrid,
    out_grid: FrequencyGrid,
    in_to_in: Array2<C64>,
    in_to_out: Array2<C64>,
    out_to_in: Array2<C64>,
    out_to_out: Array2<C64>,
}

impl TwoBandGreens {
    pub fn new(
        in_grid: FrequencyGrid,
        out_grid: FrequencyGrid,
        in_to_in: Array2<C64>,
        in_to_out: Array2<C64>,
        out_to_in: Array2<C64>,
        out_to_out: Array2<C64>,
    ) -> Result<Self> {
        let (ni, no) = (in_grid.count(), out_grid.count());
        let shapes = [
            ("in_to_in", in_to_in.dim(), (ni, ni)),
            ("in_to_out", in_to_out.dim(), (no, ni)),
            ("out_to_in", out_to_in.dim(), (ni, no)),
            ("out_to_out", out_to_out.dim(), (no, no)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::GridMismatch(format!(
                    "{name} block has shape {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(TwoBandGreens {
            in_grid,
            out_grid,
            in_to_in,
            in_to_out,
            out_to_in,
            out_to_out,
        })
    }

    /// Builds the first-order structure around a converted block: identity
    /// transmission and the Hermitian mirror `out_to_in[j, k] =
    /// -conj(in_to_out[k, j])` that makes `I + (coupling terms)` unitary to
    /// first order.
    pub fn first_order(
        in_grid: FrequencyGrid,
        out_grid: FrequencyGrid,
        in_to_out: Array2<C64>,
    ) -> Result<Self> {
        let ni = in_grid.count();
        let no = out_grid.count();
        let mut out_to_in = Array2::zeros((ni, no));
        for j in 0..ni {
            for k in 0..no {
                out_to_in[[j, k]] = -in_to_out[[k, j]].conj();
            }
        }
        let eye_in = GreensFunction::identity(in_grid.clone()).into_values();
        let eye_out = GreensFunction::identity(out_grid.clone()).into_values();
        TwoBandGreens::new(in_grid, out_grid, eye_in, in_to_out, out_to_in, eye_out)
    }

    pub fn in_grid(&self) -> &FrequencyGrid {
        &self.in_grid
    }

    pub fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    pub fn in_to_out(&self) -> &Array2<C64> {
        &self.in_to_out
    }

    pub fn in_to_in(&self) -> &Array2<C64> {
        &self.in_to_in
    }

    pub fn out_to_in(&self) -> &Array2<C64> {
        &self.out_to_in
    }

    pub fn out_to_out(&self) -> &Array2<C64> {
        &self.out_to_out
    }

    /// The converted block as a standalone [`GreensFunction`].
    pub fn converted(&self) -> GreensFunction {
        GreensFunction::new(
            self.out_grid.clone(),
            self.in_grid.clone(),
            self.in_to_out.clone(),
        )
        .expect("block shape already validated")
    }

    pub fn into_converted(self) -> GreensFunction {
        GreensFunction::new(self.out_grid.clone(), self.in_grid.clone(), self.in_to_out)
            .expect("block shape already validated")
    }

    /// Multiplies the telecom input columns by `exp(i phi(omega_in))`, the
    /// effect of a dispersive element before the converter on the input path.
    pub fn apply_input_phase(&mut self, phi: impl Fn(f64) -> f64) {
        let phases: Vec<C64> = (0..self.in_grid.count())
            .map(|j| C64::from_polar(1.0, phi(self.in_grid.omega(j))))
            .collect();
        for (j, ph) in phases.iter().enumerate() {
            self.in_to_in.column_mut(j).mapv_inplace(|v| v * ph);
            self.in_to_out.column_mut(j).mapv_inplace(|v| v * ph);
        }
    }

    /// Multiplies the near-infrared output rows by `exp(i phi(omega_out))`,
    /// the effect of a dispersive element after the converter on the output
    /// path.
    pub fn apply_output_phase(&mut self, phi: impl Fn(f64) -> f64) {
        let phases: Vec<C64> = (0..self.out_grid.count())
            .map(|k| C64::from_polar(1.0, phi(self.out_grid.omega(k))))
            .collect();
        for (k, ph) in phases.iter().enumerate() {
            self.in_to_out.row_mut(k).mapv_inplace(|v| v * ph);
            self.out_to_out.row_mut(k).mapv_inplace(|v| v * ph);
        }
    }

    /// Assembles the quadrature-weighted scattering matrix
    /// `U[row, col] = G_block[row, col] sqrt(spacing_row * spacing_col)`,
    /// ordered telecom block first.
    pub fn assembled_unitary(&self) -> Array2<C64> {
        let ni = self.in_grid.count();
        let no = self.out_grid.count();
        let di = self.in_grid.spacing();
        let do_ = self.out_grid.spacing();
        let n = ni + no;
        let mut u = Array2::zeros((n, n));
        let w = |a: f64, b: f64| C64::new((a * b).sqrt(), 0.0);
        for r in 0..ni {
            for c in 0..ni {
                u[[r, c]] = self.in_to_in[[r, c]] * w(di, di);
            }
            for c in 0..no {
                u[[r, ni + c]] = self.out_to_in[[r, c]] * w(di, do_);
            }
        }
        for r in 0..no {
            for c in 0..ni {
                u[[ni + r, c]] = self.in_to_out[[r, c]] * w(do_, di);
            }
            for c in 0..no {
                u[[ni + r, ni + c]] = self.out_to_out[[r, c]] * w(do_, do_);
            }
        }
        u
    }

    /// Largest entry of `|U* U - I|`: zero for an exactly unitary converter.
    pub fn unitarity_defect(&self) -> f64 {
        let u = self.assembled_unitary();
        let n = u.nrows();
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += u[[k, r]].conj() * u[[k, c]];
                }
                if r == c {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}
