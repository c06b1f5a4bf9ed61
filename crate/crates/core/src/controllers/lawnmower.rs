//! Boustrophedon coverage: parallel lanes over the prior's support, split into
//! contiguous blocks, one block per agent, swept back and forth indefinitely.
//! The return sweep flies lanes shifted by half a spacing, so two sweeps leave
//! no gaps between lanes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, Vec2};
use crate::motion::{AgentState, Direction, MotionModel};

use super::{ControlContext, Controller};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawnmowerParams {
    /// Distance between lanes; defaults to the fleet's mean sensor effective width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_spacing: Option<f64>,
    #[serde(default)]
    pub orientation: Orientation,
    /// Nodes with `m0 >= support_fraction * max(m0)` define the area to sweep.
    #[serde(default = "default_support_fraction")]
    pub support_fraction: f64,
}

fn default_support_fraction() -> f64 {
    0.01
}

impl Default for LawnmowerParams {
    fn default() -> Self {
        LawnmowerParams {
            lane_spacing: None,
            orientation: Orientation::default(),
            support_fraction: default_support_fraction(),
        }
    }
}

impl LawnmowerParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.lane_spacing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config("lawnmower.lane_spacing", "must be positive"));
            }
        }
        if !(self.support_fraction >= 0.0 && self.support_fraction < 1.0) {
            return Err(Error::config("lawnmower.support_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One straight lane, traversed from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lane {
    pub start: Vec2,
    pub end: Vec2,
}

impl Lane {
    fn reversed(self) -> Lane {
        Lane {
            start: self.end,
            end: self.start,
        }
    }
}

#[derive(Debug, Clone)]
struct Track {
    /// Alternating-direction lane sequence of one sweep.
    lanes: Vec<Lane>,
    /// Cross-lane offset of the return sweep.
    shift: Vec2,
    /// Domain extent; shifted lanes are clamped into it.
    bounds: Vec2,
    /// Position in the traversal: `0..n` forward, `n..2n` back on shifted lanes.
    cursor: usize,
    lookahead: f64,
}

impl Track {
    fn period(&self) -> usize {
        2 * self.lanes.len()
    }

    fn current(&self) -> Lane {
        let n = self.lanes.len();
        let c = self.cursor % self.period();
        if c < n {
            return self.lanes[c];
        }
        let l = self.lanes[2 * n - 1 - c].reversed();
        let clamp = |p: Vec2| Vec2::new(p.x.clamp(0.0, self.bounds.x), p.y.clamp(0.0, self.bounds.y));
        Lane {
            start: clamp(l.start + self.shift),
            end: clamp(l.end + self.shift),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LawnmowerController {
    lanes: Vec<Lane>,
    tracks: Vec<Option<Track>>,
}

impl LawnmowerController {
    pub fn new(params: &LawnmowerParams, prior: &ScalarField, fleet: &[AgentState], dt: f64) -> Result<Self> {
        params.validate()?;
        let spacing = match params.lane_spacing {
            Some(s) => s,
            None if fleet.is_empty() => 1.0,
            None => fleet.iter().map(|a| a.sensor.effective_width()).sum::<f64>() / fleet.len() as f64,
        };
        let lanes = plan_lanes(prior, spacing, params.orientation, params.support_fraction)?;
        let g = *prior.spec();
        let shift = match params.orientation {
            Orientation::Horizontal => Vec2::new(0.0, 0.5 * spacing),
            Orientation::Vertical => Vec2::new(0.5 * spacing, 0.0),
        };
        let blocks = partition(lanes.len(), fleet.len());
        let tracks = fleet
            .iter()
            .zip(blocks)
            .map(|(agent, block)| {
                if block.is_empty() {
                    return None;
                }
                let mut seq: Vec<Lane> = block
                    .clone()
                    .enumerate()
                    .map(|(k, l)| if k % 2 == 0 { lanes[l] } else { lanes[l].reversed() })
                    .collect();
                // start from whichever corner of the block is nearest
                let first = seq[0];
                let last = *seq.last().expect("non-empty block");
                let corners = [
                    ((first.start - agent.z).norm(), false, false),
                    ((first.end - agent.z).norm(), true, false),
                    ((last.end - agent.z).norm(), false, true),
                    ((last.start - agent.z).norm(), true, true),
                ];
                let (_, flip_dir, flip_order) = corners
                    .into_iter()
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("four corners");
                if flip_order {
                    seq.reverse();
                }
                if flip_dir != flip_order {
                    for l in seq.iter_mut() {
                        *l = l.reversed();
                    }
                }
                let lookahead = match agent.model {
                    MotionModel::Dubins => (2.0 * agent.r_turn).max(0.5 * spacing),
                    MotionModel::Kinematic => (0.5 * spacing).max(2.0 * agent.v * dt),
                };
                Some(Track {
                    lanes: seq,
                    shift,
                    bounds: Vec2::new(g.width, g.height),
                    cursor: 0,
                    lookahead,
                })
            })
            .collect();
        Ok(LawnmowerController { lanes, tracks })
    }

    /// All lanes in sweep order, before partitioning.
    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    /// Lanes assigned to each agent, as indices into [`LawnmowerController::lanes`].
    pub fn assignment(&self) -> Vec<Vec<usize>> {
        self.tracks
            .iter()
            .map(|t| match t {
                None => Vec::new(),
                Some(t) => t
                    .lanes
                    .iter()
                    .map(|l| {
                        self.lanes
                            .iter()
                            .position(|m| m == l || *m == l.reversed())
                            .expect("track lanes come from the plan")
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Splits `n` lanes into `parts` contiguous, disjoint blocks.
fn partition(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    (0..parts).map(|a| (a * n / parts)..((a + 1) * n / parts)).collect()
}

fn plan_lanes(prior: &ScalarField, spacing: f64, orientation: Orientation, fraction: f64) -> Result<Vec<Lane>> {
    let g = *prior.spec();
    let peak = prior.max();
    if !(peak > 0.0) {
        return Err(Error::DegeneratePrior("lawnmower needs a positive prior".into()));
    }
    let thr = fraction * peak;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if prior.at(i, j) > 0.0 && prior.at(i, j) >= thr {
                let p = g.node(i, j);
                x0 = x0.min(p.x - 0.5 * g.dx());
                x1 = x1.max(p.x + 0.5 * g.dx());
                y0 = y0.min(p.y - 0.5 * g.dy());
                y1 = y1.max(p.y + 0.5 * g.dy());
            }
        }
    }
    let (across0, across1) = match orientation {
        Orientation::Horizontal => (y0, y1),
        Orientation::Vertical => (x0, x1),
    };
    let extent = across1 - across0;
    let n = ((extent / spacing).ceil() as usize).max(1);
    let mid = 0.5 * (across0 + across1);
    let lanes = (0..n)
        .map(|k| {
            let c = mid + (k as f64 - 0.5 * (n - 1) as f64) * spacing;
            match orientation {
                Orientation::Horizontal => {
                    let y = c.clamp(0.0, g.height);
                    Lane {
                        start: Vec2::new(x0, y),
                        end: Vec2::new(x1, y),
                    }
                }
                Orientation::Vertical => {
                    let x = c.clamp(0.0, g.width);
                    Lane {
                        start: Vec2::new(x, y0),
                        end: Vec2::new(x, y1),
                    }
                }
            }
        })
        .collect();
    Ok(lanes)
}

impl Controller for LawnmowerController {
    fn name(&self) -> &'static str {
        "lawnmower"
    }

    fn directions(&mut self, ctx: &ControlContext<'_>) -> Result<Vec<Direction>> {
        let mut out = Vec::with_capacity(ctx.agents.len());
        for (agent, track) in ctx.agents.iter().zip(self.tracks.iter_mut()) {
            let Some(track) = track else {
                out.push(Direction::Keep);
                continue;
            };
            let capture = agent.v * ctx.dt;
            let mut lane = track.current();
            let mut along = lane_coordinate(lane, agent.z);
            let len = (lane.end - lane.start).norm();
            if along.0 >= len - capture {
                track.cursor += 1;
                lane = track.current();
                along = lane_coordinate(lane, agent.z);
            }
            let len = (lane.end - lane.start).norm();
            let dir = if len <= 0.0 {
                lane.end - agent.z
            } else {
                let u = (lane.end - lane.start) * (1.0 / len);
                let s = (along.0.max(0.0) + track.lookahead).min(len);
                lane.start + u * s - agent.z
            };
            out.push(Direction::from_vector(dir));
        }
        out.resize(ctx.agents.len(), Direction::Keep);
        Ok(out)
    }
}

/// (along-lane, cross-lane) coordinates of `p` relative to the lane start.
fn lane_coordinate(lane: Lane, p: Vec2) -> (f64, f64) {
    let d = lane.end - lane.start;
    let len = d.norm();
    if len <= 0.0 {
        return (0.0, (p - lane.start).norm());
    }
    let u = d * (1.0 / len);
    let rel = p - lane.start;
    (rel.dot(u), u.cross(rel))
}
