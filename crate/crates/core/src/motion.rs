//! Constant-speed agent motion under the kinematic and Dubins (unicycle) models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, Vec2};
use crate::sensing::SensorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    /// Instantaneous heading changes.
    Kinematic,
    /// Turn rate bounded by `v / r_turn`.
    #[default]
    Dubins,
}

/// Desired heading for one step. `Keep` is returned when the steering field
/// has no usable direction at the agent; the agent then holds its heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Heading(Vec2),
    Keep,
}

impl Direction {
    /// Normalizes `v`, falling back to `Keep` for zero or non-finite input.
    pub fn from_vector(v: Vec2) -> Direction {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Direction::Heading(v * (1.0 / n))
        } else {
            Direction::Keep
        }
    }

    pub fn vector(&self) -> Option<Vec2> {
        match *self {
            Direction::Heading(v) => Some(v),
            Direction::Keep => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub z: Vec2,
    pub theta: f64,
    pub v: f64,
    pub r_turn: f64,
    pub omega_max: f64,
    pub sensor: SensorModel,
    pub model: MotionModel,
}

impl AgentState {
    pub fn new(z: Vec2, theta: f64, v: f64, r_turn: f64, sensor: SensorModel, model: MotionModel) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config("fleet.v", "speed must be positive"));
        }
        if !z.is_finite() || !theta.is_finite() {
            return Err(Error::config("fleet.z0", "initial pose must be finite"));
        }
        let omega_max = match model {
            MotionModel::Dubins if r_turn > 0.0 => v / r_turn,
            MotionModel::Dubins => {
                return Err(Error::config("fleet.r_turn", "Dubins agents need a positive turning radius"))
            }
            MotionModel::Kinematic if r_turn > 0.0 => v / r_turn,
            MotionModel::Kinematic => f64::INFINITY,
        };
        Ok(AgentState {
            z,
            theta: wrap_angle(theta),
            v,
            r_turn,
            omega_max,
            sensor,
            model,
        })
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    /// Advances one step with the agent's own motion model and applies the
    /// boundary policy of `domain`.
    pub fn step(&self, dir: Direction, dt: f64, domain: &GridSpec) -> AgentState {
        let next = match self.model {
            MotionModel::Kinematic => step_kinematic(self, dir, dt),
            MotionModel::Dubins => step_dubins(self, dir, dt),
        };
        enforce_boundary(&next, domain)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Signed angle that rotates `from` onto `to`.
pub fn signed_angle(from: Vec2, to: Vec2) -> f64 {
    from.cross(to).atan2(from.dot(to))
}

/// Moves straight along `dir` (or the current heading for `Keep`). No boundary handling.
pub fn step_kinematic(a: &AgentState, dir: Direction, dt: f64) -> AgentState {
    let (heading, theta) = match dir {
        Direction::Heading(d) => (d, d.angle()),
        Direction::Keep => (a.heading(), a.theta),
    };
    AgentState {
        z: a.z + heading * (a.v * dt),
        theta,
        ..*a
    }
}

/// Turns toward `dir` at no more than `omega_max`, then advances along the new
/// heading (explicit Euler). No boundary handling.
pub fn step_dubins(a: &AgentState, dir: Direction, dt: f64) -> AgentState {
    let turn = match dir {
        Direction::Heading(d) => {
            let omega = signed_angle(a.heading(), d) / dt;
            omega.signum() * omega.abs().min(a.omega_max) * dt
        }
        Direction::Keep => 0.0,
    };
    let theta = wrap_angle(a.theta + turn);
    AgentState {
        z: a.z + Vec2::from_angle(theta) * (a.v * dt),
        theta,
        ..*a
    }
}

/// Clamps the position into the domain; a heading pointing out through a
/// violated wall is mirrored about that wall.
pub fn enforce_boundary(a: &AgentState, domain: &GridSpec) -> AgentState {
    let mut out = *a;
    let mut h = a.heading();
    let mut reflected = false;
    if a.z.x < 0.0 || a.z.x > domain.width {
        out.z.x = a.z.x.clamp(0.0, domain.width);
        if (a.z.x < 0.0 && h.x < 0.0) || (a.z.x > domain.width && h.x > 0.0) {
            h.x = -h.x;
            reflected = true;
        }
    }
    if a.z.y < 0.0 || a.z.y > domain.height {
        out.z.y = a.z.y.clamp(0.0, domain.height);
        if (a.z.y < 0.0 && h.y < 0.0) || (a.z.y > domain.height && h.y > 0.0) {
            h.y = -h.y;
            reflected = true;
        }
    }
    if reflected {
        out.theta = h.angle();
    }
    out
}
