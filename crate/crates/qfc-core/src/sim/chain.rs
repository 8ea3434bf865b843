//! A converter with dispersive leads: optional fiber before the device on
//! the telecom side and after it on the converted side.
//!
//! Lead fibers are linear and lossless, so they contribute pure spectral
//! phases: the chained response is `exp(i chi_post) G exp(i phi_pre)` applied
//! row- and column-wise. The closed-form generator stays lazy because its
//! kernel is cheap per entry; dense generators materialize once and take the
//! phases in place.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionSpec;
use crate::error::{Error, Result};
use crate::greens::{GreensFunction, GreensOperator};
use crate::grid::FrequencyGrid;
use crate::sim::born::born_oracle_greens;
use crate::sim::closed_form::{check_first_order, kernel_value};
use crate::sim::split_step::split_step_greens;
use crate::sim::BsfwmSpec;

/// Which propagation engine builds the device response.
///
/// In config files this is a tagged object: `{"kind": "closed_form"}`,
/// `{"kind": "born", "z_nodes": 201}`, `{"kind": "split_step", "dz_m": 0.05}`.
/// Fields that do not belong to the named kind are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerator", into = "RawGenerator")]
pub enum GeneratorChoice {
    /// Analytic kernel, valid for drift-free devices at low conversion.
    ClosedForm,
    /// First-order z-quadrature with walkoff and dispersion inside the device.
    Born { z_nodes: usize },
    /// Full coupled propagation, exactly unitary.
    SplitStep { dz_m: f64 },
}

impl Default for GeneratorChoice {
    fn default() -> Self {
        GeneratorChoice::ClosedForm
    }
}

impl GeneratorChoice {
    pub fn validate(&self, pointer: &str) -> Result<()> {
        match self {
            GeneratorChoice::ClosedForm => Ok(()),
            GeneratorChoice::Born { z_nodes } => {
                if *z_nodes < 3 || z_nodes % 2 == 0 {
                    Err(Error::config(
                        format!("{pointer}/z_nodes"),
                        format!("needs an odd value >= 3, got {z_nodes}"),
                    ))
                } else {
                    Ok(())
                }
            }
            GeneratorChoice::SplitStep { dz_m } => {
                if !(*dz_m > 0.0) || !dz_m.is_finite() {
                    Err(Error::config(
                        format!("{pointer}/dz_m"),
                        format!("needs a positive step, got {dz_m}"),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dz_m: Option<f64>,
}

impl TryFrom<RawGenerator> for GeneratorChoice {
    type Error = String;

    fn try_from(raw: RawGenerator) -> std::result::Result<Self, String> {
        let no_field = |name: &str, present: bool| {
            if present {
                Err(format!("{name} does not apply to generator kind {:?}", raw.kind))
            } else {
                Ok(())
            }
        };
        match raw.kind.as_str() {
            "closed_form" => {
                no_field("z_nodes", raw.z_nodes.is_some())?;
                no_field("dz_m", raw.dz_m.is_some())?;
                Ok(GeneratorChoice::ClosedForm)
            }
            "born" => {
                no_field("dz_m", raw.dz_m.is_some())?;
                Ok(GeneratorChoice::Born {
                    z_nodes: raw.z_nodes.unwrap_or(201),
                })
            }
            "split_step" => {
                no_field("z_nodes", raw.z_nodes.is_some())?;
                let dz_m = raw
                    .dz_m
                    .ok_or_else(|| "split_step needs dz_m".to_string())?;
                Ok(GeneratorChoice::SplitStep { dz_m })
            }
            other => Err(format!(
                "unknown generator kind {other:?}, expected closed_form, born, or split_step"
            )),
        }
    }
}

impl From<GeneratorChoice> for RawGenerator {
    fn from(value: GeneratorChoice) -> Self {
        match value {
            GeneratorChoice::ClosedForm => RawGenerator {
                kind: "closed_form".into(),
                z_nodes: None,
                dz_m: None,
            },
            GeneratorChoice::Born { z_nodes } => RawGenerator {
                kind: "born".into(),
                z_nodes: Some(z_nodes),
                dz_m: None,
            },
            GeneratorChoice::SplitStep { dz_m } => RawGenerator {
                kind: "split_step".into(),
                z_nodes: None,
                dz_m: Some(dz_m),
            },
        }
    }
}

/// Pre fiber, active device, post fiber.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterChain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<DispersionSpec>,
    pub active: BsfwmSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<DispersionSpec>,
}

impl ConverterChain {
    /// A chain that is just the device.
    pub fn bare(active: BsfwmSpec) -> Self {
        ConverterChain {
            pre: None,
            active,
            post: None,
        }
    }

    pub fn validate(&self, pointer: &str) -> Result<()> {
        if let Some(d) = &self.pre {
            d.validate(&format!("{pointer}/pre"))?;
        }
        self.active.validate(&format!("{pointer}/active"))?;
        if let Some(d) = &self.post {
            d.validate(&format!("{pointer}/post"))?;
        }
        Ok(())
    }

    /// Checks that each lead's dispersion model covers the grid it acts on.
    pub fn check_applicable(
        &self,
        in_grid: &FrequencyGrid,
        out_grid: &FrequencyGrid,
    ) -> Result<()> {
        if let Some(d) = &self.pre {
            d.check_applicable(in_grid)?;
        }
        if let Some(d) = &self.post {
            d.check_applicable(out_grid)?;
        }
        Ok(())
    }
}

/// Lazy chained response built on the closed-form kernel: columns are
/// evaluated on demand, so a dense in-grid costs nothing until asked for.
pub struct ClosedFormChain {
    spec: BsfwmSpec,
    pre: Option<DispersionSpec>,
    in_grid: FrequencyGrid,
    out_grid: FrequencyGrid,
    pre_phase: Vec<C64>,
    post_phase: Vec<C64>,
}

impl ClosedFormChain {
    pub fn new(
        chain: &ConverterChain,
        in_grid: &FrequencyGrid,
        out_grid: &FrequencyGrid,
    ) -> Result<Self> {
        if !chain.active.is_drift_free() {
            return Err(Error::Precondition(
                "closed-form generator needs a drift-free device; \
                 use born or split_step when walkoff or dispersion act inside it"
                    .into(),
            ));
        }
        check_first_order(&chain.active)?;
        chain.check_applicable(in_grid, out_grid)?;
        let pre_phase = match &chain.pre {
            Some(d) => in_grid
                .omegas()
                .into_iter()
                .map(|w| C64::from_polar(1.0, d.phase(w)))
                .collect(),
            None => vec![C64::new(1.0, 0.0); in_grid.count()],
        };
        let post_phase = match &chain.post {
            Some(d) => out_grid
                .omegas()
                .into_iter()
                .map(|w| C64::from_polar(1.0, d.phase(w)))
                .collect(),
            None => vec![C64::new(1.0, 0.0); out_grid.count()],
        };
        Ok(ClosedFormChain {
            spec: chain.active.clone(),
            pre: chain.pre.clone(),
            in_grid: in_grid.clone(),
            out_grid: out_grid.clone(),
            pre_phase,
            post_phase,
        })
    }

    /// Response column for an arbitrary input frequency, not necessarily a
    /// grid point. Exact for this generator, including the pre-fiber phase.
    pub fn column_at_omega(&self, omega_in: f64) -> Array1<C64> {
        let pre = match &self.pre {
            Some(d) => C64::from_polar(1.0, d.phase(omega_in)),
            None => C64::new(1.0, 0.0),
        };
        Array1::from_iter(self.out_grid.omegas().into_iter().zip(&self.post_phase).map(
            |(omega_out, post)| kernel_value(&self.spec, omega_out, omega_in) * pre * post,
        ))
    }
}

impl GreensOperator for ClosedFormChain {
    fn out_grid(&self) -> &FrequencyGrid {
        &self.out_grid
    }

    fn in_grid(&self) -> &FrequencyGrid {
        &self.in_grid
    }

    fn column(&self, j: usize) -> Array1<C64> {
        let pre = self.pre_phase[j];
        let omega_in = self.in_grid.omega(j);
        Array1::from_iter(self.out_grid.omegas().into_iter().zip(&self.post_phase).map(
            |(omega_out, post)| kernel_value(&self.spec, omega_out, omega_in) * pre * post,
        ))
    }
}

/// Chained response from any generator, lazy where possible.
pub enum ChainOperator {
    Lazy(ClosedFormChain),
    Dense(GreensFunction),
}

impl ChainOperator {
    /// Response column at an arbitrary input frequency: exact for the lazy
    /// closed form, nearest grid column for dense generators.
    pub fn column_at_omega(&self, omega_in: f64) -> Array1<C64> {
        match self {
            ChainOperator::Lazy(c) => c.column_at_omega(omega_in),
            ChainOperator::Dense(g) => {
                GreensOperator::column(g, g.in_grid().nearest_index(omega_in))
            }
        }
    }
}

impl GreensOperator for ChainOperator {
    fn out_grid(&self) -> &FrequencyGrid {
        match self {
            ChainOperator::Lazy(c) => c.out_grid(),
            ChainOperator::Dense(g) => GreensOperator::out_grid(g),
        }
    }

    fn in_grid(&self) -> &FrequencyGrid {
        match self {
            ChainOperator::Lazy(c) => c.in_grid(),
            ChainOperator::Dense(g) => GreensOperator::in_grid(g),
        }
    }

    fn column(&self, j: usize) -> Array1<C64> {
        match self {
            ChainOperator::Lazy(c) => c.column(j),
            ChainOperator::Dense(g) => GreensOperator::column(g, j),
        }
    }

    fn to_dense(&self) -> Result<GreensFunction> {
        match self {
            ChainOperator::Lazy(c) => c.to_dense(),
            ChainOperator::Dense(g) => Ok(g.clone()),
        }
    }
}

/// Builds the chained converted-band response on the given grids.
pub fn chain_greens(
    chain: &ConverterChain,
    generator: &GeneratorChoice,
    in_grid: &FrequencyGrid,
    out_grid: &FrequencyGrid,
) -> Result<ChainOperator> {
    match generator {
        GeneratorChoice::ClosedForm => Ok(ChainOperator::Lazy(ClosedFormChain::new(
            chain, in_grid, out_grid,
        )?)),
        GeneratorChoice::Born { z_nodes } => {
            chain.check_applicable(in_grid, out_grid)?;
            let mut g = born_oracle_greens(&chain.active, in_grid, out_grid, *z_nodes)?;
            apply_leads(&mut g, chain);
            Ok(ChainOperator::Dense(g))
        }
        GeneratorChoice::SplitStep { dz_m } => {
            chain.check_applicable(in_grid, out_grid)?;
            let mut g =
                split_step_greens(&chain.active, in_grid, out_grid, *dz_m)?.into_converted();
            apply_leads(&mut g, chain);
            Ok(ChainOperator::Dense(g))
        }
    }
}

fn apply_leads(g: &mut GreensFunction, chain: &ConverterChain) {
    if let Some(d) = &chain.pre {
        g.apply_input_phase(|w| d.phase(w));
    }
    if let Some(d) = &chain.post {
        g.apply_output_phase(|w| d.phase(w));
    }
}
