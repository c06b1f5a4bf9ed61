use crate::error::Result;
use crate::field::GridSpec;
use crate::heat::{direction_at, HeatSolver, HedacParams, PotentialField};
use crate::motion::{AgentState, Direction};
use crate::sensing::OccurrenceField;

use super::{ControlContext, Controller};

/// Solves the potential sourced by the undetected-target density and returns
/// the normalized potential gradient at each agent.
pub fn hedac_directions(
    agents: &[AgentState],
    occurrence: &OccurrenceField,
    solver: &HeatSolver,
    prev: Option<&PotentialField>,
) -> Result<(Vec<Direction>, PotentialField)> {
    let u = solver.solve(&occurrence.current, prev)?;
    let dirs = agents
        .iter()
        .map(|a| direction_at(&u.field, occurrence.spec().clamp(a.z)))
        .collect::<Result<Vec<_>>>()?;
    Ok((dirs, u))
}

#[derive(Debug)]
pub struct HedacController {
    solver: HeatSolver,
    potential: Option<PotentialField>,
}

impl HedacController {
    pub fn new(spec: &GridSpec, params: &HedacParams) -> Result<Self> {
        Ok(HedacController {
            solver: HeatSolver::new(spec, params)?,
            potential: None,
        })
    }

    /// Potential from the most recent step.
    pub fn potential(&self) -> Option<&PotentialField> {
        self.potential.as_ref()
    }
}

impl Controller for HedacController {
    fn name(&self) -> &'static str {
        "hedac"
    }

    fn directions(&mut self, ctx: &ControlContext<'_>) -> Result<Vec<Direction>> {
        let (dirs, u) = hedac_directions(ctx.agents, ctx.occurrence, &self.solver, self.potential.as_ref())?;
        self.potential = Some(u);
        Ok(dirs)
    }
}
