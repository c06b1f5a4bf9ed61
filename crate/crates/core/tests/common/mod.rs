//! Random scenario generator and the simulation invariants checked on it.
//! Shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use hedac::controllers::{ControlContext, ControllerName};
use hedac::motion::{step_dubins, wrap_angle, AgentState, Direction, MotionModel};
use hedac::scenarios::{AgentConfig, ControllerTable, CircleEntry, PriorConfig, Scenario, ScenarioConfig, SensorConfig};
use hedac::sensing::{CoverageField, OccurrenceField, SensorModel, SensorShape};
use hedac::sim::{run_simulation, RunMetrics, RunOptions};
use hedac::{GridSpec, Vec2};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use nalgebra::DMatrix;

pub const CASES: u32 = 128;

fn sensor_strategy() -> impl Strategy<Value = SensorConfig> {
    (0..3usize, 2.0..12.0f64, 0.0..8.0f64, 0.05..2.0f64).prop_map(|(kind, size, offset, gain)| {
        let shape = match kind {
            0 => SensorShape::GaussianDisc { sigma: size },
            1 => SensorShape::OffsetGaussian { sigma: size, offset },
            _ => SensorShape::ForwardEllipse {
                forward: 1.5 * size,
                lateral: size,
                offset,
            },
        };
        SensorConfig {
            shape,
            gain: Some(gain),
            target_intensity: None,
        }
    })
}

/// Agent with its position given as fractions of the domain.
fn agent_strategy() -> impl Strategy<Value = (f64, f64, AgentConfig)> {
    (0.0..1.0f64, 0.0..1.0f64, -3.2..3.2f64, 2.0..20.0f64, 2.0..40.0f64, any::<bool>(), sensor_strategy()).prop_map(
        |(fx, fy, theta0, v, r_turn, dubins, sensor)| {
            let a = AgentConfig {
                v,
                r_turn,
                model: if dubins { MotionModel::Dubins } else { MotionModel::Kinematic },
                z0: [0.0, 0.0],
                theta0,
                sensor,
            };
            (fx, fy, a)
        },
    )
}

pub fn scenario_strategy() -> impl Strategy<Value = ScenarioConfig> {
    (
        (60.0..300.0f64, 60.0..300.0f64, 12..36usize, 12..36usize),
        (0.1..1.0f64, 8..40usize, any::<u64>()),
        (0..4usize, any::<bool>(), 0.1..0.9f64, 0.1..0.9f64, 0.1..0.5f64),
        prop::collection::vec(agent_strategy(), 1..4),
    )
        .prop_map(|((w, h, nx, ny), (dt, steps, seed), (ctrl, gaussian, cx, cy, spread), agents)| {
            let mut cfg = hedac::scenarios::test_config(hedac::scenarios::TestCase::Test1, hedac::scenarios::Scale::Desk);
            cfg.name = "random".into();
            cfg.grid = GridSpec::new(w, h, nx, ny).unwrap();
            cfg.dt = dt;
            cfg.t_end = dt * steps as f64;
            cfg.seed = seed;
            cfg.n_targets = 60;
            cfg.prior = if gaussian {
                PriorConfig::Gaussian {
                    center: [cx * w, cy * h],
                    sigma: [spread * w, spread * h],
                }
            } else {
                PriorConfig::Regions {
                    circles: vec![CircleEntry {
                        sign: "+".into(),
                        center: [cx * w, cy * h],
                        radius: spread * w.min(h) + 0.1 * w.max(h),
                    }],
                    geometry_file: None,
                }
            };
            cfg.controller = ControllerTable {
                kind: ControllerName::ALL[ctrl],
            };
            cfg.smc.k_modes = 8;
            cfg.rhc.horizon_steps = 3;
            cfg.rhc.swarm_size = 6;
            cfg.rhc.pso_iters = 3;
            cfg.fleet = agents
                .into_iter()
                .map(|(fx, fy, mut a)| {
                    a.z0 = [fx * w, fy * h];
                    a
                })
                .collect();
            cfg
        })
}

pub fn build(cfg: &ScenarioConfig) -> Scenario {
    Scenario::from_config(cfg, None).expect("generated scenarios are valid")
}

fn run(cfg: &ScenarioConfig, randomize: bool) -> (Scenario, RunMetrics) {
    let s = build(cfg);
    let opts = RunOptions {
        randomize_poses: randomize,
        ..Default::default()
    };
    let m = run_simulation(&s, s.seed, &opts).expect("run succeeds");
    (s, m)
}

pub fn e_non_increasing(cfg: &ScenarioConfig) -> Result<(), TestCaseError> {
    let (_, m) = run(cfg, false);
    for w in m.e_series.windows(2) {
        prop_assert!(w[1] <= w[0], "E rose from {} to {}", w[0], w[1]);
    }
    Ok(())
}

pub fn d_non_decreasing(cfg: &ScenarioConfig) -> Result<(), TestCaseError> {
    let (s, m) = run(cfg, true);
    for w in m.d_series.windows(2) {
        prop_assert!(w[1] >= w[0], "D fell from {} to {}", w[0], w[1]);
    }
    let mut seen = vec![false; s.n_targets];
    for &(i, _) in &m.detections {
        prop_assert!(!seen[i], "target {} detected twice", i);
        seen[i] = true;
    }
    let last = *m.d_series.last().unwrap();
    prop_assert!((last - m.detections.len() as f64 / s.n_targets as f64).abs() < 1e-12);
    Ok(())
}

pub fn stays_in_domain(cfg: &ScenarioConfig) -> Result<(), TestCaseError> {
    let (s, m) = run(cfg, false);
    for traj in &m.trajectories {
        for p in traj {
            prop_assert!(p.x >= 0.0 && p.x <= s.grid.width && p.y >= 0.0 && p.y <= s.grid.height, "left the domain at {:?}", p);
        }
    }
    Ok(())
}

/// Heading changes of Dubins agents respect `v / R_T` on every step that did
/// not end on a wall (where the boundary policy mirrors the heading).
pub fn turn_rate_bounded(cfg: &ScenarioConfig) -> Result<(), TestCaseError> {
    let (s, m) = run(cfg, false);
    for (a, traj) in s.fleet.iter().zip(&m.trajectories) {
        if a.model != MotionModel::Dubins {
            continue;
        }
        let bound = a.v / a.r_turn * s.dt * (1.0 + 1e-9) + 1e-12;
        for w in traj.windows(2) {
            let on_wall = w[1].x == 0.0 || w[1].y == 0.0 || w[1].x == s.grid.width || w[1].y == s.grid.height;
            if on_wall {
                continue;
            }
            let turn = wrap_angle(w[1].theta - w[0].theta).abs();
            prop_assert!(turn <= bound, "turned {} > {}", turn, bound);
        }
    }
    Ok(())
}

/// One Dubins step from an arbitrary state towards an arbitrary direction.
pub fn dubins_step_bounded(theta: f64, target: f64, v: f64, r_turn: f64, dt: f64) -> Result<(), TestCaseError> {
    let s = SensorModel::new(SensorShape::GaussianDisc { sigma: 3.0 }, 1.0).unwrap();
    let a = AgentState::new(Vec2::new(0.0, 0.0), theta, v, r_turn, s, MotionModel::Dubins).unwrap();
    let b = step_dubins(&a, Direction::Heading(Vec2::from_angle(target)), dt);
    let turn = wrap_angle(b.theta - a.theta).abs();
    prop_assert!(turn <= v / r_turn * dt * (1.0 + 1e-9) + 1e-12);
    prop_assert!(((b.z - a.z).norm() - v * dt).abs() < 1e-9 * v * dt.max(1.0));
    Ok(())
}

/// Every controller returns either `Keep` or a unit vector, for agents placed
/// anywhere on a partially searched field.
pub fn unit_directions(cfg: &ScenarioConfig) -> Result<(), TestCaseError> {
    let s = build(cfg);
    let mut ctrl = s.controller.instantiate(&s.prior, &s.fleet, s.dt, s.seed).unwrap();
    let mut occ = OccurrenceField::new(s.prior.clone());
    let mut cov = CoverageField::zeros(s.grid);
    let mut agents = s.fleet.clone();
    for step in 0..s.n_steps().min(12) {
        let rects = cov.stamp(&agents, 4.0 * s.dt);
        occ.refresh(&cov, &rects);
        let ctx = ControlContext {
            agents: &agents,
            occurrence: &occ,
            coverage: &cov,
            time: step as f64 * s.dt,
            dt: s.dt,
            step,
        };
        let dirs = ctrl.directions(&ctx).unwrap();
        prop_assert_eq!(dirs.len(), agents.len());
        for d in &dirs {
            if let Direction::Heading(v) = d {
                prop_assert!((v.norm() - 1.0).abs() < 1e-12, "|d| = {}", v.norm());
            }
        }
        agents = agents.iter().zip(&dirs).map(|(a, d)| a.step(*d, s.dt, &s.grid)).collect();
    }
    Ok(())
}

pub fn deterministic(cfg: &ScenarioConfig) -> Result<(), TestCaseError> {
    let (_, a) = run(cfg, true);
    let (_, b) = run(cfg, true);
    prop_assert!(a == b, "two runs with seed {} differ", cfg.seed);
    Ok(())
}

pub struct Soundness {
    pub mean_d: f64,
    pub one_minus_e: f64,
    /// Binomial standard error of `mean_d`.
    pub sigma: f64,
    pub seeds: usize,
}

/// One agent on a 100 x 100 m, 50 x 50 grid from a fixed start; only the
/// target draws and detection rolls change between seeds, so `E(t_end)` is
/// the same for all of them and every target is an independent Bernoulli trial.
pub fn soundness(seeds: usize, n_targets: usize) -> Soundness {
    let mut cfg = hedac::scenarios::test_config(hedac::scenarios::TestCase::Test1, hedac::scenarios::Scale::Desk);
    cfg.grid = GridSpec::new(100.0, 100.0, 50, 50).unwrap();
    cfg.prior = PriorConfig::Gaussian {
        center: [55.0, 45.0],
        sigma: [25.0, 20.0],
    };
    cfg.dt = 0.5;
    cfg.t_end = 40.0;
    cfg.n_targets = n_targets;
    cfg.fleet.truncate(1);
    cfg.fleet[0].v = 4.0;
    cfg.fleet[0].r_turn = 8.0;
    cfg.fleet[0].z0 = [20.0, 30.0];
    cfg.fleet[0].theta0 = 0.3;
    cfg.fleet[0].sensor = SensorConfig {
        shape: SensorShape::GaussianDisc { sigma: 6.0 },
        gain: Some(0.35),
        target_intensity: None,
    };
    let s = build(&cfg);
    let runs: Vec<RunMetrics> = {
        use rayon::prelude::*;
        (0..seeds)
            .into_par_iter()
            .map(|k| run_simulation(&s, hedac::sim::derive_seed(99, k), &RunOptions::default()).unwrap())
            .collect()
    };
    let e_end = *runs[0].e_series.last().unwrap();
    assert!(runs.iter().all(|r| *r.e_series.last().unwrap() == e_end));
    let mean_d = runs.iter().map(|r| *r.d_series.last().unwrap()).sum::<f64>() / seeds as f64;
    let p = 1.0 - e_end;
    Soundness {
        mean_d,
        one_minus_e: p,
        sigma: (p * (1.0 - p) / (seeds * n_targets) as f64).sqrt(),
        seeds,
    }
}

/// Dense `beta I - alpha Lap_h` with mirrored-ghost Neumann rows, lengths in
/// units of `l`.
pub fn dense_operator(g: &GridSpec, alpha: f64, beta: f64, l: f64) -> DMatrix<f64> {
    let n = g.len();
    let kx = alpha / (g.dx() / l).powi(2);
    let ky = alpha / (g.dy() / l).powi(2);
    let mut a = DMatrix::zeros(n, n);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            a[(k, k)] += beta;
            let mut couple = |nb: usize, c: f64| {
                a[(k, k)] += c;
                a[(k, nb)] -= c;
            };
            if i > 0 {
                couple(g.index(i - 1, j), kx);
            }
            if i + 1 < g.nx {
                couple(g.index(i + 1, j), kx);
            }
            if j > 0 {
                couple(g.index(i, j - 1), ky);
            }
            if j + 1 < g.ny {
                couple(g.index(i, j + 1), ky);
            }
        }
    }
    a
}

