//! Simulation and reconstruction toolkit for quantum frequency converters.
//!
//! A frequency converter driven by Bragg-scattering four-wave mixing maps an
//! input spectral amplitude to an output one through a complex Green's
//! function `G(omega_out, omega_in)`. This crate simulates such converters
//! (closed-form, first-order, and full split-step models), synthesizes the
//! two-tone heterodyne measurements used to characterize them in the lab, and
//! reconstructs the Green's function's magnitude, spectral phase, and group
//! delay from those measurements.
//!
//! The main layers, bottom to top:
//!
//! * [`grid`], [`greens`], [`dispersion`]: frequency grids, discrete Green's
//!   functions, spectral modes, and fiber dispersion.
//! * [`sim`]: pump envelopes and the three converter models.
//! * [`probe`], [`sweep`]: two-tone probes, delay sweeps, detector effects,
//!   and synthetic noise.
//! * [`recon`]: sideband extraction, phase differences, group delays, and
//!   phase integration.
//! * [`modes`]: Schmidt decompositions and temporal mode profiles.
//! * [`io`], [`pipeline`]: file formats, experiment configs, and the
//!   end-to-end orchestration used by the command-line tools.

pub mod dispersion;
pub mod error;
pub mod greens;
pub mod grid;
pub mod modes;
pub mod probe;
pub mod recon;
pub mod sim;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use greens::{
    apply, conversion_efficiency, FrequencyBand, GreensFunction, GreensOperator, SpectralMode,
};
pub use grid::FrequencyGrid;
