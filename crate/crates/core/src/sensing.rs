//! Sensor detection-rate functions, coverage accumulation and the transforms
//! from coverage to detection probability and undetected-target density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, Vec2};
use crate::motion::AgentState;

/// Footprint geometry of a sensor in the agent body frame. The body frame has
/// its first axis along the heading and its second axis to the agent's left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorShape {
    /// Axisymmetric Gaussian centred on the agent.
    GaussianDisc { sigma: f64 },
    /// Axisymmetric Gaussian centred `offset` metres ahead of the agent.
    OffsetGaussian { sigma: f64, offset: f64 },
    /// Flat-topped elliptical footprint `exp(-q^2)` with
    /// `q = ((r_f - offset) / forward)^2 + (r_l / lateral)^2`.
    ForwardEllipse {
        forward: f64,
        lateral: f64,
        #[serde(default)]
        offset: f64,
    },
}

/// Elliptic footprints are truncated at `q = ELLIPSE_Q_MAX` (relative rate e^-9).
const ELLIPSE_Q_MAX: f64 = 3.0;
const GAUSSIAN_SUPPORT_SIGMAS: f64 = 4.0;

impl SensorShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SensorShape::GaussianDisc { sigma } => sigma > 0.0,
            SensorShape::OffsetGaussian { sigma, offset } => sigma > 0.0 && offset.is_finite(),
            SensorShape::ForwardEllipse {
                forward,
                lateral,
                offset,
            } => forward > 0.0 && lateral > 0.0 && offset.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("sensor", format!("invalid shape parameters {self:?}")))
        }
    }

    /// Unit-gain profile, peak value 1.
    #[inline]
    fn profile(&self, r: Vec2) -> f64 {
        match *self {
            SensorShape::GaussianDisc { sigma } => (-r.norm_sq() / (2.0 * sigma * sigma)).exp(),
            SensorShape::OffsetGaussian { sigma, offset } => {
                let f = r.x - offset;
                (-(f * f + r.y * r.y) / (2.0 * sigma * sigma)).exp()
            }
            SensorShape::ForwardEllipse {
                forward,
                lateral,
                offset,
            } => {
                let a = (r.x - offset) / forward;
                let b = r.y / lateral;
                let q = a * a + b * b;
                if q > ELLIPSE_Q_MAX {
                    0.0
                } else {
                    (-q * q).exp()
                }
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            SensorShape::GaussianDisc { sigma } => GAUSSIAN_SUPPORT_SIGMAS * sigma,
            SensorShape::OffsetGaussian { sigma, offset } => offset.abs() + GAUSSIAN_SUPPORT_SIGMAS * sigma,
            SensorShape::ForwardEllipse {
                forward,
                lateral,
                offset,
            } => offset.abs() + ELLIPSE_Q_MAX.sqrt() * forward.max(lateral),
        }
    }

    /// Lateral width of the region where the rate is at least 10% of its peak.
    pub fn effective_width(&self) -> f64 {
        let ln10 = std::f64::consts::LN_10;
        match *self {
            SensorShape::GaussianDisc { sigma } | SensorShape::OffsetGaussian { sigma, .. } => {
                2.0 * sigma * (2.0 * ln10).sqrt()
            }
            SensorShape::ForwardEllipse { lateral, .. } => 2.0 * lateral * ln10.powf(0.25),
        }
    }
}

/// A spatially variant detection-rate function `gamma(r) = gain * profile(r)`
/// in 1/s, identically zero beyond `support_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub shape: SensorShape,
    pub gain: f64,
}

impl SensorModel {
    pub fn new(shape: SensorShape, gain: f64) -> Result<Self> {
        shape.validate()?;
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::config("sensor.gain", "gain must be positive"));
        }
        Ok(SensorModel { shape, gain })
    }

    /// Builds a sensor whose gain is chosen so that its intensity equals
    /// `target` within 0.1%.
    pub fn calibrated(shape: SensorShape, target: f64) -> Result<Self> {
        shape.validate()?;
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::config("sensor.target_intensity", "must be positive"));
        }
        let f = |g: f64| SensorModel { shape, gain: g }.intensity() - target;
        // secant iteration on f(g) = I(g) - target
        let (mut g0, mut g1) = (0.0, 1.0);
        let (mut f0, mut f1) = (f(g0), f(g1));
        for _ in 0..50 {
            if (f1 / target).abs() <= 1e-9 {
                break;
            }
            let g2 = g1 - f1 * (g1 - g0) / (f1 - f0);
            g0 = g1;
            f0 = f1;
            g1 = g2;
            f1 = f(g1);
        }
        if !(g1 > 0.0) || (f1 / target).abs() > 1e-3 {
            return Err(Error::config(
                "sensor.target_intensity",
                format!("could not calibrate gain for intensity {target}"),
            ));
        }
        SensorModel::new(shape, g1)
    }

    pub fn support_radius(&self) -> f64 {
        self.shape.support_radius()
    }

    pub fn effective_width(&self) -> f64 {
        self.shape.effective_width()
    }

    /// Detection rate at body-frame offset `r`.
    #[inline]
    pub fn rate(&self, r: Vec2) -> f64 {
        let rad = self.support_radius();
        if r.norm_sq() > rad * rad {
            0.0
        } else {
            self.gain * self.shape.profile(r)
        }
    }

    pub fn peak_rate(&self) -> f64 {
        self.gain
    }

    /// Integral of the rate over its support (midpoint rule, 512 x 512 cells).
    pub fn intensity(&self) -> f64 {
        self.intensity_with_resolution(self.support_radius() / 256.0)
    }

    /// Integral of the rate by the midpoint rule on square cells of side at most `h`.
    pub fn intensity_with_resolution(&self, h: f64) -> f64 {
        let rad = self.support_radius();
        let n = ((2.0 * rad / h).ceil() as usize).max(1);
        let step = 2.0 * rad / n as f64;
        let mut total = 0.0;
        for j in 0..n {
            let y = -rad + (j as f64 + 0.5) * step;
            let mut row = 0.0;
            for i in 0..n {
                let x = -rad + (i as f64 + 0.5) * step;
                row += self.rate(Vec2::new(x, y));
            }
            total += row;
        }
        total * step * step
    }
}

/// Offset of `x` from agent position `z`, expressed in the heading-aligned frame
/// of an agent with heading `theta` (rotation of `x - z` by `-theta`).
#[inline]
pub fn to_body_frame(x: Vec2, z: Vec2, theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    body_frame_sc(x, z, s, c)
}

#[inline]
fn body_frame_sc(x: Vec2, z: Vec2, s: f64, c: f64) -> Vec2 {
    let d = x - z;
    Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
}

/// Accumulated detection-rate exposure `c(x, t)`, dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageField {
    pub field: ScalarField,
}

/// Inclusive node-index rectangle touched by a stamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl CoverageField {
    pub fn zeros(spec: GridSpec) -> Self {
        CoverageField {
            field: ScalarField::zeros(spec),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.field.spec()
    }

    /// Adds `gamma_i(r) * dt` for each agent at every node inside its support.
    /// Returns the node rectangles that were touched.
    pub fn stamp(&mut self, agents: &[AgentState], dt: f64) -> Vec<NodeRect> {
        agents
            .iter()
            .filter_map(|a| stamp_one(&mut self.field, a.z, a.theta, &a.sensor, dt))
            .collect()
    }
}

/// Stamps a single sensor pose into `field`.
pub(crate) fn stamp_one(
    field: &mut ScalarField,
    z: Vec2,
    theta: f64,
    sensor: &SensorModel,
    dt: f64,
) -> Option<NodeRect> {
    let spec = *field.spec();
    let rad = sensor.support_radius();
    let (ri, rj) = spec.nodes_near(z, rad)?;
    let (s, c) = theta.sin_cos();
    let rect = NodeRect {
        i0: *ri.start(),
        i1: *ri.end(),
        j0: *rj.start(),
        j1: *rj.end(),
    };
    let values = field.values_mut();
    for j in rj {
        for i in ri.clone() {
            let r = body_frame_sc(spec.node(i, j), z, s, c);
            let g = sensor.rate(r);
            if g > 0.0 {
                values[spec.index(i, j)] += g * dt;
            }
        }
    }
    Some(rect)
}

/// Functional form of [`CoverageField::stamp`].
pub fn stamp_coverage(c: &CoverageField, agents: &[AgentState], dt: f64) -> CoverageField {
    let mut out = c.clone();
    out.stamp(agents, dt);
    out
}

/// Pointwise `1 - exp(-c)`.
pub fn detection_probability(c: &CoverageField) -> ScalarField {
    c.field.map(|v| -(-v).exp_m1())
}

/// Prior target density `m0` and undetected-target density `m = m0 * exp(-c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceField {
    pub prior: ScalarField,
    pub current: ScalarField,
}

impl OccurrenceField {
    pub fn new(prior: ScalarField) -> Self {
        OccurrenceField {
            current: prior.clone(),
            prior,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.prior.spec()
    }

    /// Recomputes `current = prior * exp(-c)` on the given node rectangles only.
    pub fn refresh(&mut self, c: &CoverageField, rects: &[NodeRect]) {
        let spec = *self.prior.spec();
        let prior = self.prior.values();
        let cov = c.field.values();
        let cur = self.current.values_mut();
        for r in rects {
            for j in r.j0..=r.j1 {
                let row = j * spec.nx;
                for k in row + r.i0..=row + r.i1 {
                    cur[k] = prior[k] * (-cov[k]).exp();
                }
            }
        }
    }
}

/// Pointwise `current = prior * exp(-c)`.
pub fn update_occurrence(o: &OccurrenceField, c: &CoverageField) -> Result<OccurrenceField> {
    let current = o.prior.zip_map(&c.field, |m0, cv| m0 * (-cv).exp())?;
    Ok(OccurrenceField {
        prior: o.prior.clone(),
        current,
    })
}

/// Total probability `E` that an undetected target is present in the domain.
pub fn total_presence(o: &OccurrenceField) -> f64 {
    o.current.sum() * o.current.spec().cell_area()
}
