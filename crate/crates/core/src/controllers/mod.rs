//! Per-step steering strategies. Every controller maps the current fleet and
//! fields to one desired [`Direction`] per agent.

mod hedac;
mod lawnmower;
mod rhc;
mod smc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{GridSpec, ScalarField};
use crate::heat::HedacParams;
use crate::motion::{AgentState, Direction};
use crate::sensing::{CoverageField, OccurrenceField};

pub use hedac::{hedac_directions, HedacController};
pub use lawnmower::{Lane, LawnmowerController, LawnmowerParams, Orientation};
pub use rhc::{RhcController, RhcParams};
pub use smc::{goal_density, SmcController, SmcParams, SpectralBasis};

/// Read-only view of the simulation handed to a controller each step.
#[derive(Debug, Clone, Copy)]
pub struct ControlContext<'a> {
    pub agents: &'a [AgentState],
    pub occurrence: &'a OccurrenceField,
    pub coverage: &'a CoverageField,
    pub time: f64,
    pub dt: f64,
    pub step: usize,
}

impl ControlContext<'_> {
    pub fn grid(&self) -> &GridSpec {
        self.occurrence.spec()
    }
}

pub trait Controller: Send {
    fn name(&self) -> &'static str;

    fn directions(&mut self, ctx: &ControlContext<'_>) -> Result<Vec<Direction>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerName {
    Hedac,
    Lawnmower,
    Smc,
    Rhc,
}

impl ControllerName {
    pub const ALL: [ControllerName; 4] = [
        ControllerName::Lawnmower,
        ControllerName::Smc,
        ControllerName::Rhc,
        ControllerName::Hedac,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerName::Hedac => "hedac",
            ControllerName::Lawnmower => "lawnmower",
            ControllerName::Smc => "smc",
            ControllerName::Rhc => "rhc",
        }
    }
}

impl std::fmt::Display for ControllerName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hedac" => Ok(ControllerName::Hedac),
            "lawnmower" => Ok(ControllerName::Lawnmower),
            "smc" => Ok(ControllerName::Smc),
            "rhc" => Ok(ControllerName::Rhc),
            other => Err(format!("unknown controller `{other}`")),
        }
    }
}

/// A controller together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerKind {
    Hedac(HedacParams),
    Lawnmower(LawnmowerParams),
    Smc(SmcParams),
    Rhc(RhcParams),
}

impl ControllerKind {
    pub fn name(&self) -> ControllerName {
        match self {
            ControllerKind::Hedac(_) => ControllerName::Hedac,
            ControllerKind::Lawnmower(_) => ControllerName::Lawnmower,
            ControllerKind::Smc(_) => ControllerName::Smc,
            ControllerKind::Rhc(_) => ControllerName::Rhc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControllerKind::Hedac(p) => p.validate(),
            ControllerKind::Lawnmower(p) => p.validate(),
            ControllerKind::Smc(p) => p.validate(),
            ControllerKind::Rhc(p) => p.validate(),
        }
    }

    /// Builds a fresh controller for one run. `seed` perturbs stochastic
    /// controllers so that Monte-Carlo runs differ.
    pub fn instantiate(&self, prior: &ScalarField, fleet: &[AgentState], dt: f64, seed: u64) -> Result<Box<dyn Controller>> {
        self.validate()?;
        Ok(match self {
            ControllerKind::Hedac(p) => Box::new(HedacController::new(prior.spec(), p)?),
            ControllerKind::Lawnmower(p) => Box::new(LawnmowerController::new(p, prior, fleet, dt)?),
            ControllerKind::Smc(p) => Box::new(SmcController::new(p, prior)?),
            ControllerKind::Rhc(p) => {
                let mut p = p.clone();
                p.rng_seed ^= seed;
                Box::new(RhcController::new(p, fleet.len())?)
            }
        })
    }
}
