//! TOML scenario configuration, dotted-path overrides and serialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerName, LawnmowerParams, RhcParams, SmcParams};
use crate::error::{Error, Result};
use crate::field::{GridSpec, Vec2};
use crate::heat::HedacParams;
use crate::motion::MotionModel;
use crate::sensing::SensorShape;

use super::prior::{Circle, CircleSet, RoadNetwork, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub n_targets: usize,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub prior: PriorConfig,
    pub controller: ControllerTable,
    #[serde(default)]
    pub hedac: HedacParams,
    #[serde(default)]
    pub lawnmower: LawnmowerParams,
    #[serde(default)]
    pub smc: SmcParams,
    #[serde(default)]
    pub rhc: RhcParams,
    #[serde(default)]
    pub fleet: Vec<AgentConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerTable {
    pub kind: ControllerName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorConfig {
    Gaussian {
        center: [f64; 2],
        /// Standard deviations along x and y.
        sigma: [f64; 2],
    },
    Regions {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        circles: Vec<CircleEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry_file: Option<PathBuf>,
    },
    Roads {
        sigma: f64,
        /// `[x1, y1, x2, y2]` per segment.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        segments: Vec<[f64; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry_file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleEntry {
    /// `"+"` adds the disc to the region, `"-"` removes it.
    pub sign: String,
    pub center: [f64; 2],
    pub radius: f64,
}

impl PriorConfig {
    /// Loads any referenced geometry file (relative paths resolve against
    /// `base_dir`) and returns the equivalent inline configuration.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<PriorConfig> {
        let read = |file: &Path| -> Result<(PathBuf, String)> {
            let path = match base_dir {
                Some(b) if file.is_relative() => b.join(file),
                _ => file.to_path_buf(),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            Ok((path, text))
        };
        Ok(match self {
            PriorConfig::Gaussian { .. } => self.clone(),
            PriorConfig::Regions { circles, geometry_file } => {
                let mut circles = circles.clone();
                if let Some(file) = geometry_file {
                    let (path, text) = read(file)?;
                    let set = CircleSet::parse(&text).map_err(|message| Error::Parse { path, message })?;
                    circles.extend(circle_entries(&set));
                }
                PriorConfig::Regions {
                    circles,
                    geometry_file: None,
                }
            }
            PriorConfig::Roads {
                sigma,
                segments,
                geometry_file,
            } => {
                let mut segments = segments.clone();
                if let Some(file) = geometry_file {
                    let (path, text) = read(file)?;
                    let segs = RoadNetwork::parse_segments(&text).map_err(|message| Error::Parse { path, message })?;
                    segments.extend(segs.iter().map(|s| [s.start.x, s.start.y, s.end.x, s.end.y]));
                }
                PriorConfig::Roads {
                    sigma: *sigma,
                    segments,
                    geometry_file: None,
                }
            }
        })
    }

    /// Circle set of an inline `regions` prior.
    pub fn circle_set(&self) -> Result<CircleSet> {
        let PriorConfig::Regions { circles, .. } = self else {
            return Err(Error::config("prior.kind", "not a regions prior"));
        };
        let mut set = CircleSet::default();
        for c in circles {
            let circle = Circle {
                center: Vec2::new(c.center[0], c.center[1]),
                radius: c.radius,
            };
            match c.sign.as_str() {
                "+" => set.minuends.push(circle),
                "-" => set.subtrahends.push(circle),
                other => return Err(Error::config("prior.circles.sign", format!("expected `+` or `-`, got `{other}`"))),
            }
        }
        Ok(set)
    }

    /// Road network of an inline `roads` prior.
    pub fn road_network(&self) -> Result<RoadNetwork> {
        let PriorConfig::Roads { sigma, segments, .. } = self else {
            return Err(Error::config("prior.kind", "not a roads prior"));
        };
        Ok(RoadNetwork {
            sigma: *sigma,
            segments: segments
                .iter()
                .map(|s| Segment {
                    start: Vec2::new(s[0], s[1]),
                    end: Vec2::new(s[2], s[3]),
                })
                .collect(),
        })
    }
}

pub(crate) fn circle_entries(set: &CircleSet) -> Vec<CircleEntry> {
    let entry = |sign: &str, c: &Circle| CircleEntry {
        sign: sign.into(),
        center: [c.center.x, c.center.y],
        radius: c.radius,
    };
    set.minuends
        .iter()
        .map(|c| entry("+", c))
        .chain(set.subtrahends.iter().map(|c| entry("-", c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub v: f64,
    #[serde(default)]
    pub r_turn: f64,
    #[serde(default)]
    pub model: MotionModel,
    pub z0: [f64; 2],
    #[serde(default)]
    pub theta0: f64,
    pub sensor: SensorConfig,
}

/// Sensor shape plus either an explicit peak `gain` or a `target_intensity`
/// from which the gain is calibrated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    #[serde(flatten)]
    pub shape: SensorShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_intensity: Option<f64>,
}

/// One `key=value` override with a dotted key such as `hedac.beta` or `fleet.0.v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl Override {
    pub fn new(key: impl Into<String>, value: impl ToString) -> Self {
        Override {
            key: key.into(),
            value: value.to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Override> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config(s, "override must have the form key=value"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config(s, "empty override key"));
        }
        Ok(Override::new(k, v.trim()))
    }
}

impl std::str::FromStr for Override {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Override::parse(s)
    }
}

/// Overrides that are not plain config paths.
pub const N_AGENTS_KEY: &str = "n_agents";

/// Interprets an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = root;
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert((*part).into(), value);
                    return Ok(());
                }
                t.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()))
            }
            toml::Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{part}` is not an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(key, format!("index {idx} out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::config(key, format!("`{part}` cannot be set inside a scalar"))),
        };
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses a TOML document, applying `overrides` before validation.
    pub fn from_toml_str(text: &str, path: &Path, overrides: &[Override]) -> Result<ScenarioConfig> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_table(table, path, overrides)
    }

    pub fn from_file(path: &Path, overrides: &[Override]) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path, overrides)
    }

    fn from_table(table: toml::Table, path: &Path, overrides: &[Override]) -> Result<ScenarioConfig> {
        let mut root = toml::Value::Table(table);
        let mut n_agents = None;
        for o in overrides {
            if o.key == N_AGENTS_KEY {
                n_agents = Some(
                    o.value
                        .parse::<usize>()
                        .map_err(|_| Error::config(N_AGENTS_KEY, "expected a non-negative integer"))?,
                );
            } else {
                set_path(&mut root, &o.key, parse_value(&o.value))?;
            }
        }
        let mut cfg: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(n) = n_agents {
            cfg.replicate_first_agent(n)?;
        }
        Ok(cfg)
    }

    /// Applies overrides to an in-memory configuration.
    pub fn with_overrides(&self, overrides: &[Override]) -> Result<ScenarioConfig> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let table = toml::Table::try_from(self).map_err(|e| Error::config("<config>", e.to_string()))?;
        Self::from_table(table, Path::new("<overrides>"), overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<config>", e.to_string()))
    }

    /// Replaces the fleet by `n` copies of its first agent, spread evenly on a
    /// circle around the domain centre and facing inward.
    pub fn replicate_first_agent(&mut self, n: usize) -> Result<()> {
        let first = self
            .fleet
            .first()
            .cloned()
            .ok_or_else(|| Error::config(N_AGENTS_KEY, "the fleet is empty, nothing to replicate"))?;
        let c = Vec2::new(0.5 * self.grid.width, 0.5 * self.grid.height);
        let r = 0.3 * self.grid.width.min(self.grid.height);
        self.fleet = (0..n)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let p = c + Vec2::from_angle(phi) * r;
                AgentConfig {
                    z0: [p.x, p.y],
                    theta0: crate::motion::wrap_angle(phi + std::f64::consts::PI),
                    ..first.clone()
                }
            })
            .collect();
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::config("t_end", "must be at least dt"));
        }
        for (k, a) in self.fleet.iter().enumerate() {
            let p = Vec2::new(a.z0[0], a.z0[1]);
            if !self.grid.contains(p) {
                return Err(Error::config(format!("fleet.{k}.z0"), "initial position lies outside the domain"));
            }
            match (a.sensor.gain, a.sensor.target_intensity) {
                (Some(_), Some(_)) => {
                    return Err(Error::config(format!("fleet.{k}.sensor"), "give either gain or target_intensity, not both"))
                }
                (None, None) => return Err(Error::config(format!("fleet.{k}.sensor"), "needs gain or target_intensity")),
                _ => {}
            }
        }
        self.hedac.validate()?;
        self.lawnmower.validate()?;
        self.smc.validate()?;
        self.rhc.validate()
    }
}
