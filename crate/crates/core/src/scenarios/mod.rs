//! Search scenarios: domain, prior, fleet and controller settings.

mod config;
mod prior;

use std::f64::consts::PI;
use std::path::Path;

use crate::controllers::{ControllerKind, ControllerName};
use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, Vec2};
use crate::heat::HedacParams;
use crate::motion::{AgentState, MotionModel};
use crate::sensing::{SensorModel, SensorShape};

pub use config::{AgentConfig, CircleEntry, ControllerTable, Override, PriorConfig, ScenarioConfig, SensorConfig, N_AGENTS_KEY};
pub use prior::{
    gaussian_prior, region_prior, road_prior, road_prior_refined, sample_targets, Circle, CircleSet, RoadNetwork, Segment,
};

/// Default geometry for the island scenario, in full-size metres.
pub const TEST2_CIRCLES: &str = include_str!("../../data/test2_circles.txt");
/// Default road network for the road scenario, in full-size metres.
pub const TEST3_ROADS: &str = include_str!("../../data/test3_roads.txt");

/// A fully built, immutable scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    /// Normalized prior target density `m0`.
    pub prior: ScalarField,
    pub fleet: Vec<AgentState>,
    pub controller: ControllerKind,
    pub dt: f64,
    pub t_end: f64,
    pub n_targets: usize,
    pub seed: u64,
    /// Self-contained configuration this scenario was built from.
    config: ScenarioConfig,
}

impl Scenario {
    /// Builds a scenario. Geometry files are resolved relative to `base_dir`
    /// and inlined, so [`Scenario::config`] is self-contained.
    pub fn from_config(cfg: &ScenarioConfig, base_dir: Option<&Path>) -> Result<Scenario> {
        let mut cfg = cfg.clone();
        cfg.prior = cfg.prior.resolve(base_dir)?;
        cfg.validate()?;
        let grid = cfg.grid;
        let prior = match &cfg.prior {
            PriorConfig::Gaussian { center, sigma } => gaussian_prior(&grid, Vec2::new(center[0], center[1]), sigma[0], sigma[1])?,
            PriorConfig::Regions { .. } => region_prior(&grid, &cfg.prior.circle_set()?)?,
            PriorConfig::Roads { .. } => road_prior(&grid, &cfg.prior.road_network()?)?,
        };
        let fleet = cfg
            .fleet
            .iter()
            .enumerate()
            .map(|(k, a)| build_agent(a).map_err(|e| prefix_key(e, &format!("fleet.{k}"))))
            .collect::<Result<Vec<_>>>()?;
        let controller = match cfg.controller.kind {
            ControllerName::Hedac => ControllerKind::Hedac(cfg.hedac),
            ControllerName::Lawnmower => ControllerKind::Lawnmower(cfg.lawnmower),
            ControllerName::Smc => ControllerKind::Smc(cfg.smc),
            ControllerName::Rhc => ControllerKind::Rhc(cfg.rhc.clone()),
        };
        controller.validate()?;
        Ok(Scenario {
            name: cfg.name.clone(),
            grid,
            prior,
            fleet,
            controller,
            dt: cfg.dt,
            t_end: cfg.t_end,
            n_targets: cfg.n_targets,
            seed: cfg.seed,
            config: cfg,
        })
    }

    pub fn from_file(path: &Path, overrides: &[Override]) -> Result<Scenario> {
        let cfg = ScenarioConfig::from_file(path, overrides)?;
        Scenario::from_config(&cfg, path.parent())
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn to_toml_string(&self) -> Result<String> {
        self.config.to_toml_string()
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let cfg = ScenarioConfig::from_toml_str(text, Path::new("<string>"), &[])?;
        Scenario::from_config(&cfg, None)
    }

    /// Rebuilds the scenario with overrides applied.
    pub fn with_overrides(&self, overrides: &[Override]) -> Result<Scenario> {
        Scenario::from_config(&self.config.with_overrides(overrides)?, None)
    }

    pub fn with_controller(&self, name: ControllerName) -> Result<Scenario> {
        self.with_overrides(&[Override::new("controller.kind", format!("\"{name}\""))])
    }

    /// Same scenario with every agent switched to `model`.
    pub fn with_motion_model(&self, model: MotionModel) -> Result<Scenario> {
        let mut cfg = self.config.clone();
        for a in &mut cfg.fleet {
            a.model = model;
        }
        Scenario::from_config(&cfg, None)
    }

    /// Same scenario with the fleet replaced by `n` copies of agent 1.
    pub fn with_fleet_size(&self, n: usize) -> Result<Scenario> {
        let mut cfg = self.config.clone();
        cfg.replicate_first_agent(n)?;
        Scenario::from_config(&cfg, None)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

fn prefix_key(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { key, message } => Error::Config {
            key: format!("{prefix}.{key}"),
            message,
        },
        other => other,
    }
}

fn build_agent(a: &AgentConfig) -> Result<AgentState> {
    let sensor = match (a.sensor.gain, a.sensor.target_intensity) {
        (Some(g), None) => SensorModel::new(a.sensor.shape, g)?,
        (None, Some(i)) => SensorModel::calibrated(a.sensor.shape, i)?,
        _ => return Err(Error::config("sensor", "needs exactly one of gain or target_intensity")),
    };
    AgentState::new(Vec2::new(a.z0[0], a.z0[1]), a.theta0, a.v, a.r_turn, sensor, a.model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCase {
    /// Gaussian prior, five identical agents.
    Test1,
    /// Island-shaped uniform prior, three heterogeneous agent pairs.
    Test2,
    /// Road-network prior, five agents of two kinds.
    Test3,
}

impl std::str::FromStr for TestCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test1" => Ok(TestCase::Test1),
            "test2" => Ok(TestCase::Test2),
            "test3" => Ok(TestCase::Test3),
            other => Err(Error::config("test", format!("unknown test scenario `{other}`"))),
        }
    }
}

/// Full-size scenarios or reduced desk-scale variants for quick ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

fn agent(v: f64, r_turn: f64, z0: [f64; 2], theta0: f64, shape: SensorShape, intensity: f64) -> AgentConfig {
    AgentConfig {
        v,
        r_turn,
        model: MotionModel::Dubins,
        z0,
        theta0: crate::motion::wrap_angle(theta0),
        sensor: SensorConfig {
            shape,
            gain: None,
            target_intensity: Some(intensity),
        },
    }
}

const TEST1_SENSOR: SensorShape = SensorShape::GaussianDisc { sigma: 10.0 };
const TEST1_INTENSITY: f64 = 316.91;

/// The three sensor families of the island scenario: (v, r_turn, shape, intensity).
const TEST2_KINDS: [(f64, f64, SensorShape, f64); 3] = [
    (
        16.0,
        26.0,
        SensorShape::ForwardEllipse {
            forward: 15.0,
            lateral: 10.0,
            offset: 5.0,
        },
        937.76,
    ),
    (20.0, 29.0, SensorShape::GaussianDisc { sigma: 12.0 }, 800.24),
    (31.0, 43.0, SensorShape::OffsetGaussian { sigma: 8.0, offset: 10.0 }, 641.25),
];

/// The two sensor families of the road scenario.
const TEST3_KINDS: [(f64, f64, SensorShape, f64); 2] = [
    (
        20.0,
        36.0,
        SensorShape::ForwardEllipse {
            forward: 12.0,
            lateral: 18.0,
            offset: 0.0,
        },
        1096.06,
    ),
    (34.0, 48.0, SensorShape::OffsetGaussian { sigma: 14.0, offset: 8.0 }, 1428.25),
];

/// Road entry points on the boundary of the 4000 x 2000 m road domain and
/// their inward normals.
const TEST3_ENTRIES: [([f64; 2], f64); 5] = [
    ([0.0, 1000.0], 0.0),
    ([4000.0, 1000.0], PI),
    ([1800.0, 2000.0], -PI / 2.0),
    ([2800.0, 0.0], PI / 2.0),
    ([800.0, 0.0], PI / 2.0),
];

fn base(name: &str, grid: GridSpec, prior: PriorConfig, dt: f64, t_end: f64, hedac: HedacParams) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        dt,
        t_end,
        n_targets: 1000,
        seed: 1,
        grid,
        prior,
        controller: ControllerTable {
            kind: ControllerName::Hedac,
        },
        hedac,
        lawnmower: Default::default(),
        smc: Default::default(),
        rhc: Default::default(),
        fleet: Vec::new(),
    }
}

/// Configuration of a built-in test scenario.
pub fn test_config(which: TestCase, scale: Scale) -> ScenarioConfig {
    let k = match scale {
        Scale::Full => 1.0,
        Scale::Desk => 0.5,
    };
    let suffix = match scale {
        Scale::Full => "",
        Scale::Desk => "-desk",
    };
    match which {
        TestCase::Test1 => {
            let (size, n, n_agents, t_end) = match scale {
                Scale::Full => (1000.0, 250, 5, 600.0),
                Scale::Desk => (500.0, 125, 3, 1500.0),
            };
            let c = 0.5 * size;
            let grid = GridSpec {
                width: size,
                height: size,
                nx: n,
                ny: n,
            };
            let prior = PriorConfig::Gaussian {
                center: [c, c],
                sigma: [150.0 * k, 150.0 * k],
            };
            let mut cfg = base(&format!("test1{suffix}"), grid, prior, 0.25, t_end, HedacParams::new(0.03, 4.0));
            cfg.fleet = (1..=n_agents)
                .map(|i| {
                    let i = i as f64;
                    let phi = (i - 1.0) * 2.0 * PI / 5.0;
                    let z = [c + 70.0 * k * i * phi.cos(), c + 70.0 * k * i * phi.sin()];
                    agent(20.0, 30.0, z, (i - 1.0) * PI / 5.0 + PI, TEST1_SENSOR, TEST1_INTENSITY)
                })
                .collect();
            cfg
        }
        TestCase::Test2 => {
            let (size, n, t_end) = match scale {
                Scale::Full => (3000.0, 600, 1800.0),
                Scale::Desk => (1500.0, 300, 900.0),
            };
            let grid = GridSpec {
                width: size,
                height: size,
                nx: n,
                ny: n,
            };
            let set = CircleSet::parse(TEST2_CIRCLES).expect("bundled circle geometry parses").scaled(k);
            let prior = PriorConfig::Regions {
                circles: config::circle_entries(&set),
                geometry_file: None,
            };
            let mut cfg = base(&format!("test2{suffix}"), grid, prior, 0.5, t_end, HedacParams::new(0.03, 2.0));
            let poses = [
                ([1000.0, 500.0], 0.0),
                ([400.0, 1000.0], PI / 6.0),
                ([1500.0, 1000.0], PI / 3.0),
                ([1500.0, 2000.0], PI / 2.0),
                ([2700.0, 2000.0], 2.0 * PI / 3.0),
                ([2300.0, 2600.0], 5.0 * PI / 6.0),
            ];
            cfg.fleet = poses
                .iter()
                .enumerate()
                .map(|(n, (z, th))| {
                    let (v, r, shape, i) = TEST2_KINDS[n / 2];
                    agent(v, r, [z[0] * k, z[1] * k], *th, shape, i)
                })
                .collect();
            cfg
        }
        TestCase::Test3 => {
            let (w, h, t_end) = match scale {
                Scale::Full => (4000.0, 2000.0, 3000.0),
                Scale::Desk => (2000.0, 1000.0, 1500.0),
            };
            let grid = GridSpec {
                width: w,
                height: h,
                nx: (w / 5.0) as usize,
                ny: (h / 5.0) as usize,
            };
            let segs = RoadNetwork::parse_segments(TEST3_ROADS).expect("bundled road geometry parses");
            let prior = PriorConfig::Roads {
                sigma: 100.0 * k,
                segments: segs
                    .iter()
                    .map(|s| [s.start.x * k, s.start.y * k, s.end.x * k, s.end.y * k])
                    .collect(),
                geometry_file: None,
            };
            let mut cfg = base(&format!("test3{suffix}"), grid, prior, 0.5, t_end, HedacParams::new(0.03, 2.0));
            cfg.fleet = TEST3_ENTRIES
                .iter()
                .enumerate()
                .map(|(n, (z, th))| {
                    let (v, r, shape, i) = TEST3_KINDS[if n < 3 { 0 } else { 1 }];
                    agent(v, r, [z[0] * k, z[1] * k], *th, shape, i)
                })
                .collect();
            cfg
        }
    }
}

/// Full-size test scenario with optional overrides (including `n_agents`).
pub fn build_test_scenario(which: TestCase, overrides: &[Override]) -> Result<Scenario> {
    Scenario::from_config(&test_config(which, Scale::Full).with_overrides(overrides)?, None)
}

/// Reduced-size variant of a test scenario.
pub fn build_desk_scenario(which: TestCase, overrides: &[Override]) -> Result<Scenario> {
    Scenario::from_config(&test_config(which, Scale::Desk).with_overrides(overrides)?, None)
}
