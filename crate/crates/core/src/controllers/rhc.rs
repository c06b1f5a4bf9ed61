//! Receding-horizon control: particle swarm search over per-step turn rates,
//! scored by the predicted undetected-target probability at the horizon.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, Vec2};
use crate::motion::{enforce_boundary, wrap_angle, AgentState, Direction};
use crate::sensing::{stamp_one, NodeRect, OccurrenceField};

use super::{ControlContext, Controller};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhcParams {
    #[serde(default = "default_horizon")]
    pub horizon_steps: usize,
    #[serde(default = "default_swarm")]
    pub swarm_size: usize,
    #[serde(default = "default_iters")]
    pub pso_iters: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_pull")]
    pub cognitive: f64,
    #[serde(default = "default_pull")]
    pub social: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Upper bound on `agents * horizon_steps`.
    #[serde(default = "default_max_dims")]
    pub max_dims: usize,
}

fn default_horizon() -> usize {
    10
}
fn default_swarm() -> usize {
    40
}
fn default_iters() -> usize {
    30
}
fn default_inertia() -> f64 {
    0.7
}
fn default_pull() -> f64 {
    1.5
}
fn default_max_dims() -> usize {
    400
}

impl Default for RhcParams {
    fn default() -> Self {
        RhcParams {
            horizon_steps: default_horizon(),
            swarm_size: default_swarm(),
            pso_iters: default_iters(),
            inertia: default_inertia(),
            cognitive: default_pull(),
            social: default_pull(),
            rng_seed: 0,
            max_dims: default_max_dims(),
        }
    }
}

impl RhcParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 {
            return Err(Error::config("rhc.horizon_steps", "must be at least 1"));
        }
        if self.swarm_size == 0 {
            return Err(Error::config("rhc.swarm_size", "must be at least 1"));
        }
        for (k, v) in [("rhc.inertia", self.inertia), ("rhc.cognitive", self.cognitive), ("rhc.social", self.social)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(k, "must be non-negative"));
            }
        }
        Ok(())
    }

    fn check_dims(&self, n_agents: usize) -> Result<()> {
        let dims = n_agents * self.horizon_steps;
        if dims > self.max_dims {
            return Err(Error::config(
                "rhc.horizon_steps",
                format!("{dims} decision variables exceed the cap of {}", self.max_dims),
            ));
        }
        Ok(())
    }
}

/// Turn-rate bound used to scale normalized plan entries.
fn turn_bound(a: &AgentState, dt: f64) -> f64 {
    a.omega_max.min(PI / dt)
}

/// Reusable exposure buffer for rollouts; only touched nodes are nonzero.
struct Scratch {
    delta: ScalarField,
    rects: Vec<NodeRect>,
}

impl Scratch {
    fn new(spec: GridSpec) -> Self {
        Scratch {
            delta: ScalarField::zeros(spec),
            rects: Vec::new(),
        }
    }

    /// Rolls out `plan` (agent-major, entries in [-1, 1]) and returns
    /// `sum m (1 - exp(-dc)) dA` over touched nodes. Leaves the buffer zeroed.
    fn gain(&mut self, agents: &[AgentState], plan: &[f64], horizon: usize, dt: f64, m: &ScalarField) -> f64 {
        let spec = *m.spec();
        for (a, turns) in agents.iter().zip(plan.chunks(horizon)) {
            let mut s = *a;
            let bound = turn_bound(a, dt);
            for &u in turns {
                s.theta = wrap_angle(s.theta + u * bound * dt);
                s.z += Vec2::from_angle(s.theta) * (s.v * dt);
                s = enforce_boundary(&s, &spec);
                if let Some(r) = stamp_one(&mut self.delta, s.z, s.theta, &s.sensor, dt) {
                    self.rects.push(r);
                }
            }
        }
        let mv = m.values();
        let dv = self.delta.values_mut();
        let mut total = 0.0;
        for r in self.rects.drain(..) {
            for j in r.j0..=r.j1 {
                let row = j * spec.nx;
                for k in row + r.i0..=row + r.i1 {
                    let d = dv[k];
                    if d > 0.0 {
                        total -= mv[k] * (-d).exp_m1();
                        dv[k] = 0.0;
                    }
                }
            }
        }
        total * spec.cell_area()
    }
}

pub struct RhcController {
    params: RhcParams,
    scratch: Option<Scratch>,
    /// Best plan from the previous step, used to seed one particle.
    previous: Option<Vec<f64>>,
}

impl std::fmt::Debug for RhcController {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RhcController").field("params", &self.params).finish()
    }
}

impl RhcController {
    pub fn new(params: RhcParams, n_agents: usize) -> Result<Self> {
        params.validate()?;
        params.check_dims(n_agents)?;
        Ok(RhcController {
            params,
            scratch: None,
            previous: None,
        })
    }

    /// Predicted `E` at the end of the horizon for a normalized plan.
    pub fn predicted_presence(&mut self, agents: &[AgentState], occurrence: &OccurrenceField, plan: &[f64], dt: f64) -> f64 {
        let e_now = occurrence.current.sum() * occurrence.spec().cell_area();
        let scratch = self.scratch_for(occurrence.spec());
        e_now - scratch.gain(agents, plan, plan.len() / agents.len().max(1), dt, &occurrence.current)
    }

    fn scratch_for(&mut self, spec: &GridSpec) -> &mut Scratch {
        if self.scratch.as_ref().map(|s| s.delta.spec() != spec).unwrap_or(true) {
            self.scratch = Some(Scratch::new(*spec));
        }
        self.scratch.as_mut().expect("just set")
    }

    /// Runs the swarm and returns the best normalized plan.
    pub fn plan(&mut self, ctx: &ControlContext<'_>) -> Result<Vec<f64>> {
        self.params.check_dims(ctx.agents.len())?;
        let p = self.params.clone();
        let h = p.horizon_steps;
        let dims = ctx.agents.len() * h;
        if dims == 0 {
            return Ok(Vec::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
        rng.set_stream(ctx.step as u64);

        let mut pos: Vec<Vec<f64>> = (0..p.swarm_size)
            .map(|_| (0..dims).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        if let Some(prev) = self.previous.as_ref().filter(|v| v.len() == dims) {
            // shift the previous best plan by one step
            let seed = &mut pos[0];
            for (a, row) in seed.chunks_mut(h).enumerate() {
                let old = &prev[a * h..(a + 1) * h];
                row[..h - 1].copy_from_slice(&old[1..]);
                row[h - 1] = old[h - 1];
            }
        }
        let mut vel: Vec<Vec<f64>> = (0..p.swarm_size)
            .map(|_| (0..dims).map(|_| rng.gen_range(-0.5..=0.5)).collect())
            .collect();

        let m = &ctx.occurrence.current;
        let scratch = self.scratch_for(ctx.grid());
        let mut fitness = |x: &[f64]| -scratch.gain(ctx.agents, x, h, ctx.dt, m);

        let mut best_pos = pos.clone();
        let mut best_fit: Vec<f64> = pos.iter().map(|x| fitness(x)).collect();
        let mut g = argmin(&best_fit);
        for _ in 0..p.pso_iters {
            for k in 0..p.swarm_size {
                for d in 0..dims {
                    let r1: f64 = rng.gen();
                    let r2: f64 = rng.gen();
                    let v = p.inertia * vel[k][d]
                        + p.cognitive * r1 * (best_pos[k][d] - pos[k][d])
                        + p.social * r2 * (best_pos[g][d] - pos[k][d]);
                    vel[k][d] = v.clamp(-1.0, 1.0);
                    pos[k][d] = (pos[k][d] + vel[k][d]).clamp(-1.0, 1.0);
                }
                let f = fitness(&pos[k]);
                if f < best_fit[k] {
                    best_fit[k] = f;
                    best_pos[k].copy_from_slice(&pos[k]);
                }
            }
            g = argmin(&best_fit);
        }
        let best = best_pos.swap_remove(g);
        self.previous = Some(best.clone());
        Ok(best)
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty swarm")
}

impl Controller for RhcController {
    fn name(&self) -> &'static str {
        "rhc"
    }

    fn directions(&mut self, ctx: &ControlContext<'_>) -> Result<Vec<Direction>> {
        let plan = self.plan(ctx)?;
        let h = self.params.horizon_steps;
        Ok(ctx
            .agents
            .iter()
            .enumerate()
            .map(|(a, s)| {
                let theta = s.theta + plan[a * h] * turn_bound(s, ctx.dt) * ctx.dt;
                Direction::Heading(Vec2::from_angle(theta))
            })
            .collect())
    }
}
