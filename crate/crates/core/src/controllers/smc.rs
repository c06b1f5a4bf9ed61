//! Spectral multiscale coverage: drive the cosine-mode coefficients of the
//! time-averaged coverage toward those of a goal density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, Vec2};
use crate::motion::Direction;
use crate::spectral::Dct2d;

use super::{ControlContext, Controller};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcParams {
    /// Modes per axis.
    #[serde(default = "default_k")]
    pub k_modes: usize,
    /// Sobolev exponent of the mode weights `(1 + |k|^2)^-s`.
    #[serde(default = "default_s")]
    pub sobolev_s: f64,
    /// Use `max(ln(m0 / floor), 0)` as the goal instead of `m0`.
    #[serde(default = "default_true")]
    pub log_prior: bool,
    /// Floor of the log prior as a fraction of `max m0`. Defaults to the
    /// smallest positive value of `m0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_floor: Option<f64>,
}

fn default_k() -> usize {
    50
}
fn default_s() -> f64 {
    1.5
}
fn default_true() -> bool {
    true
}

impl Default for SmcParams {
    fn default() -> Self {
        SmcParams {
            k_modes: default_k(),
            sobolev_s: default_s(),
            log_prior: true,
            log_floor: None,
        }
    }
}

impl SmcParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_modes < 2 {
            return Err(Error::config("smc.k_modes", "need at least 2 modes per axis"));
        }
        if !(self.sobolev_s > 0.0 && self.sobolev_s.is_finite()) {
            return Err(Error::config("smc.sobolev_s", "must be positive"));
        }
        if let Some(f) = self.log_floor {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config("smc.log_floor", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Goal density with unit mass. `floor` is relative to `max m0`; `None`
/// uses the smallest positive value of `m0`.
pub fn goal_density(prior: &ScalarField, log_prior: bool, floor: Option<f64>) -> Result<ScalarField> {
    let peak = prior.max();
    if !(peak > 0.0) {
        return Err(Error::DegeneratePrior("goal density needs a positive prior".into()));
    }
    let low = match floor {
        Some(f) => f * peak,
        None => prior.values().iter().copied().filter(|&v| v > 0.0).fold(peak, f64::min),
    };
    let g = if log_prior && low < peak {
        prior.map(|v| if v > 0.0 { (v / low).ln().max(0.0) } else { 0.0 })
    } else {
        prior.clone()
    };
    g.scale_to_unit_mass()
}

/// Normalized cosine basis `f_k(x) = cos(k1 pi x / W) cos(k2 pi y / H) / h_k`
/// truncated to `k_modes` per axis.
#[derive(Debug)]
pub struct SpectralBasis {
    spec: GridSpec,
    k: usize,
    dct: Dct2d,
    /// `1 / h_k`, row-major with `k2 * k + k1`.
    inv_norm: Vec<f64>,
}

impl SpectralBasis {
    /// `k_modes` is capped at the grid resolution.
    pub fn new(spec: &GridSpec, k_modes: usize) -> Result<Self> {
        spec.validate()?;
        if k_modes == 0 {
            return Err(Error::config("smc.k_modes", "need at least one mode"));
        }
        let k = k_modes.min(spec.nx).min(spec.ny);
        let area = spec.width * spec.height;
        let mut inv_norm = vec![0.0; k * k];
        for k2 in 0..k {
            for k1 in 0..k {
                let e1 = if k1 == 0 { 1.0 } else { 2.0 };
                let e2 = if k2 == 0 { 1.0 } else { 2.0 };
                inv_norm[k2 * k + k1] = (e1 * e2 / area).sqrt();
            }
        }
        Ok(SpectralBasis {
            spec: *spec,
            k,
            dct: Dct2d::new(spec.nx, spec.ny),
            inv_norm,
        })
    }

    pub fn k_modes(&self) -> usize {
        self.k
    }

    /// Basis function value at `p`.
    pub fn eval(&self, k1: usize, k2: usize, p: Vec2) -> f64 {
        (k1 as f64 * PI * p.x / self.spec.width).cos()
            * (k2 as f64 * PI * p.y / self.spec.height).cos()
            * self.inv_norm[k2 * self.k + k1]
    }

    /// `∫ f f_k dA` by midpoint quadrature, for every retained mode.
    pub fn coefficients(&self, f: &ScalarField) -> Vec<f64> {
        let full = self.dct.forward(f.values());
        let da = self.spec.cell_area();
        let nx = self.spec.nx;
        let mut out = vec![0.0; self.k * self.k];
        for k2 in 0..self.k {
            for k1 in 0..self.k {
                let m = k2 * self.k + k1;
                out[m] = full[k2 * nx + k1] * da * self.inv_norm[m];
            }
        }
        out
    }

    /// Gradient of `sum_k w_k f_k` at `p`.
    pub fn gradient(&self, w: &[f64], p: Vec2) -> Vec2 {
        let k = self.k;
        let ax = PI / self.spec.width;
        let ay = PI / self.spec.height;
        let (cx, sx): (Vec<f64>, Vec<f64>) = (0..k).map(|n| ((n as f64 * ax * p.x).cos(), (n as f64 * ax * p.x).sin())).unzip();
        let (cy, sy): (Vec<f64>, Vec<f64>) = (0..k).map(|n| ((n as f64 * ay * p.y).cos(), (n as f64 * ay * p.y).sin())).unzip();
        let mut g = Vec2::new(0.0, 0.0);
        for k2 in 0..k {
            for k1 in 0..k {
                let c = w[k2 * k + k1] * self.inv_norm[k2 * k + k1];
                if c == 0.0 {
                    continue;
                }
                g.x -= c * k1 as f64 * ax * sx[k1] * cy[k2];
                g.y -= c * k2 as f64 * ay * cx[k1] * sy[k2];
            }
        }
        g
    }
}

#[derive(Debug)]
pub struct SmcController {
    basis: SpectralBasis,
    goal: Vec<f64>,
    lambda: Vec<f64>,
    /// Sum of fleet sensor intensities, computed on first use.
    fleet_intensity: Option<f64>,
}

impl SmcController {
    pub fn new(params: &SmcParams, prior: &ScalarField) -> Result<Self> {
        let basis = SpectralBasis::new(prior.spec(), params.k_modes)?;
        Self::with_goal(basis, params.sobolev_s, &goal_density(prior, params.log_prior, params.log_floor)?)
    }

    /// Controller tracking an explicit unit-mass goal density.
    pub fn with_goal(basis: SpectralBasis, sobolev_s: f64, goal: &ScalarField) -> Result<Self> {
        goal.check_finite()?;
        let k = basis.k_modes();
        let lambda = (0..k * k)
            .map(|m| {
                let (k1, k2) = ((m % k) as f64, (m / k) as f64);
                (1.0 + k1 * k1 + k2 * k2).powf(-sobolev_s)
            })
            .collect();
        Ok(SmcController {
            goal: basis.coefficients(goal),
            basis,
            lambda,
            fleet_intensity: None,
        })
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }
}

impl Controller for SmcController {
    fn name(&self) -> &'static str {
        "smc"
    }

    fn directions(&mut self, ctx: &ControlContext<'_>) -> Result<Vec<Direction>> {
        let c = &ctx.coverage.field;
        let intensity = *self
            .fleet_intensity
            .get_or_insert_with(|| ctx.agents.iter().map(|a| a.sensor.intensity()).sum());
        let mass = c.integrate()? + intensity * ctx.dt;
        let cov = self.basis.coefficients(c);
        let w: Vec<f64> = cov
            .iter()
            .zip(&self.goal)
            .zip(&self.lambda)
            .map(|((ck, mu), l)| l * (ck - mass * mu))
            .collect();
        let scale: f64 = w.iter().map(|x| x.abs()).sum::<f64>() * self.basis.k as f64 * PI / self.basis.spec.width.min(self.basis.spec.height);
        Ok(ctx
            .agents
            .iter()
            .map(|a| {
                let g = self.basis.gradient(&w, ctx.grid().clamp(a.z));
                if g.norm() <= 1e-12 * scale {
                    Direction::Keep
                } else {
                    Direction::from_vector(-g)
                }
            })
            .collect())
    }
}
