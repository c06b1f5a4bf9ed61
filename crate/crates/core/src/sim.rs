//! Time stepping, Monte-Carlo ensembles and search metrics.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::controllers::ControlContext;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Vec2};
use crate::motion::AgentState;
use crate::scenarios::{sample_targets, Scenario};
use crate::sensing::{to_body_frame, total_presence, CoverageField, OccurrenceField};

/// `E` level that defines the t90 search time.
pub const T90_LEVEL: f64 = 0.1;

const STREAM_TARGETS: u64 = 1;
const STREAM_POSES: u64 = 2;
const STREAM_DETECTION: u64 = 3;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Draw initial poses uniformly instead of using the configured ones.
    pub randomize_poses: bool,
    /// Measure the wall-clock time of every control step.
    pub record_timing: bool,
    /// Keep a copy of the undetected-target density every this many steps.
    pub snapshot_every: Option<usize>,
    /// Stop after this many steps even if `t_end` is not reached.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    /// Sample times, starting at 0.
    pub times: Vec<f64>,
    pub e_series: Vec<f64>,
    pub d_series: Vec<f64>,
    /// `(target index, detection time)` in order of detection.
    pub detections: Vec<(usize, f64)>,
    /// Control wall-clock per sample in seconds; `None` where not measured
    /// (the initial sample, or timing disabled).
    pub step_wallclock: Vec<Option<f64>>,
    /// One pose sequence per agent, aligned with `times`.
    pub trajectories: Vec<Vec<Pose>>,
    pub targets: Vec<Vec2>,
    /// `(time, m)` pairs when snapshots were requested.
    pub snapshots: Vec<(f64, ScalarField)>,
}

impl RunMetrics {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Mean measured control time in seconds, if any step was timed.
    pub fn mean_step_time(&self) -> Option<f64> {
        let timed: Vec<f64> = self.step_wallclock.iter().flatten().copied().collect();
        (!timed.is_empty()).then(|| timed.iter().sum::<f64>() / timed.len() as f64)
    }
}

/// A run that stopped on an error, with everything recorded up to that point.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: Box<RunMetrics>,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run stopped at t = {}: {}", self.partial.times.last().copied().unwrap_or(0.0), self.error)
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Error {
        f.error
    }
}

/// Per-step probability that `target` is detected by at least one agent.
pub fn detection_chance(target: Vec2, agents: &[AgentState], dt: f64) -> f64 {
    let exposure: f64 = agents
        .iter()
        .map(|a| a.sensor.rate(to_body_frame(target, a.z, a.theta)))
        .sum::<f64>()
        * dt;
    -(-exposure).exp_m1()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform poses over the domain interior, keeping a margin of 50 m (or a
/// quarter of the shorter side on small domains) from the walls.
fn random_poses(s: &Scenario, seed: u64) -> Vec<AgentState> {
    let mut rng = rng_for(seed, STREAM_POSES);
    let margin = 50.0f64.min(0.25 * s.grid.width.min(s.grid.height));
    s.fleet
        .iter()
        .map(|a| {
            let x = rng.gen_range(margin..=s.grid.width - margin);
            let y = rng.gen_range(margin..=s.grid.height - margin);
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            AgentState {
                z: Vec2::new(x, y),
                theta,
                ..*a
            }
        })
        .collect()
}

fn record_poses(trajectories: &mut [Vec<Pose>], agents: &[AgentState], t: f64) {
    for (traj, a) in trajectories.iter_mut().zip(agents) {
        traj.push(Pose {
            t,
            x: a.z.x,
            y: a.z.y,
            theta: a.theta,
        });
    }
}

/// Simulates one search. Each step: controller, motion, coverage, occurrence
/// and `E`, stochastic detection, `D`.
pub fn run_simulation(s: &Scenario, seed: u64, opts: &RunOptions) -> std::result::Result<RunMetrics, RunFailure> {
    let mut agents = if opts.randomize_poses { random_poses(s, seed) } else { s.fleet.clone() };
    let mut m = RunMetrics {
        seed,
        times: vec![0.0],
        e_series: Vec::new(),
        d_series: vec![0.0],
        detections: Vec::new(),
        step_wallclock: vec![None],
        trajectories: vec![Vec::new(); agents.len()],
        targets: Vec::new(),
        snapshots: Vec::new(),
    };
    let setup = (|| -> Result<_> {
        let targets = sample_targets(&s.prior, s.n_targets, &mut rng_for(seed, STREAM_TARGETS))?;
        let controller = s.controller.instantiate(&s.prior, &agents, s.dt, seed)?;
        Ok((targets, controller))
    })();
    let (targets, mut controller) = match setup {
        Ok(v) => v,
        Err(error) => {
            return Err(RunFailure {
                partial: Box::new(m),
                error,
            })
        }
    };
    m.targets = targets;
    let mut detect_rng = rng_for(seed, STREAM_DETECTION);
    let mut occurrence = OccurrenceField::new(s.prior.clone());
    let mut coverage = CoverageField::zeros(s.grid);
    let mut undetected: Vec<usize> = (0..m.targets.len()).collect();
    m.e_series.push(total_presence(&occurrence));
    record_poses(&mut m.trajectories, &agents, 0.0);
    if opts.snapshot_every.is_some() {
        m.snapshots.push((0.0, occurrence.current.clone()));
    }

    let n_steps = opts.max_steps.map_or(s.n_steps(), |k| k.min(s.n_steps()));
    for step in 0..n_steps {
        let t = (step + 1) as f64 * s.dt;
        let ctx = ControlContext {
            agents: &agents,
            occurrence: &occurrence,
            coverage: &coverage,
            time: step as f64 * s.dt,
            dt: s.dt,
            step,
        };
        let started = opts.record_timing.then(Instant::now);
        let dirs = match controller.directions(&ctx) {
            Ok(d) => d,
            Err(error) => {
                return Err(RunFailure {
                    partial: Box::new(m),
                    error,
                })
            }
        };
        let elapsed = started.map(|t0| t0.elapsed().as_secs_f64());

        for (a, d) in agents.iter_mut().zip(&dirs) {
            *a = a.step(*d, s.dt, &s.grid);
        }
        let rects = coverage.stamp(&agents, s.dt);
        occurrence.refresh(&coverage, &rects);

        undetected.retain(|&j| {
            let p = detection_chance(m.targets[j], &agents, s.dt);
            if p > 0.0 && detect_rng.gen::<f64>() < p {
                m.detections.push((j, t));
                false
            } else {
                true
            }
        });

        m.times.push(t);
        m.e_series.push(total_presence(&occurrence));
        let n = m.targets.len();
        m.d_series.push(if n == 0 { 0.0 } else { m.detections.len() as f64 / n as f64 });
        m.step_wallclock.push(elapsed);
        record_poses(&mut m.trajectories, &agents, t);
        if let Some(k) = opts.snapshot_every {
            if k > 0 && (step + 1) % k == 0 {
                m.snapshots.push((t, occurrence.current.clone()));
            }
        }
    }
    Ok(m)
}

/// First time the series falls to `level`, linearly interpolated between the
/// bracketing samples. `None` if it never does.
pub fn time_to_level(e: &[f64], times: &[f64], level: f64) -> Option<f64> {
    let k = e.iter().position(|&v| v <= level)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (e0, e1) = (e[k - 1], e[k]);
    let (t0, t1) = (times[k - 1], times[k]);
    if e0 == e1 {
        return Some(t1);
    }
    Some(t0 + (e0 - level) / (e0 - e1) * (t1 - t0))
}

/// Time at which `E` first reaches 0.1.
pub fn t90(e_mean: &[f64], times: &[f64]) -> Option<f64> {
    time_to_level(e_mean, times, T90_LEVEL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub per_run: Vec<RunMetrics>,
    pub times: Vec<f64>,
    pub e_mean: Vec<f64>,
    pub e_min: Vec<f64>,
    pub e_max: Vec<f64>,
    pub d_mean: Vec<f64>,
    pub t90: Option<f64>,
}

/// Seed of run `k` in an ensemble.
pub fn derive_seed(base_seed: u64, k: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = base_seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n_runs` independent searches with random initial poses (in parallel
/// on the current rayon pool) and aggregates them.
pub fn run_ensemble(s: &Scenario, n_runs: usize, base_seed: u64, opts: &RunOptions) -> Result<EnsembleResult> {
    if n_runs == 0 {
        return Err(Error::config("runs", "need at least one run"));
    }
    let opts = RunOptions {
        randomize_poses: true,
        ..opts.clone()
    };
    let per_run = (0..n_runs)
        .into_par_iter()
        .map(|k| run_simulation(s, derive_seed(base_seed, k), &opts).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(per_run))
}

/// Pointwise mean and envelope of equally long runs.
pub fn aggregate(per_run: Vec<RunMetrics>) -> EnsembleResult {
    let len = per_run.iter().map(|r| r.len()).min().unwrap_or(0);
    let n = per_run.len() as f64;
    let times = per_run.first().map(|r| r.times[..len].to_vec()).unwrap_or_default();
    let mut e_mean = vec![0.0; len];
    let mut e_min = vec![f64::INFINITY; len];
    let mut e_max = vec![f64::NEG_INFINITY; len];
    let mut d_mean = vec![0.0; len];
    for r in &per_run {
        for k in 0..len {
            e_mean[k] += r.e_series[k];
            e_min[k] = e_min[k].min(r.e_series[k]);
            e_max[k] = e_max[k].max(r.e_series[k]);
            d_mean[k] += r.d_series[k];
        }
    }
    for k in 0..len {
        e_mean[k] /= n;
        d_mean[k] /= n;
    }
    if per_run.len() == 1 {
        e_mean.clone_from(&per_run[0].e_series[..len].to_vec());
    }
    let t90 = t90(&e_mean, &times);
    EnsembleResult {
        per_run,
        times,
        e_mean,
        e_min,
        e_max,
        d_mean,
        t90,
    }
}

/// Mean control time in seconds over the first 100 steps (or fewer if the
/// scenario is shorter), starting from the configured poses.
pub fn benchmark_step(s: &Scenario, seed: u64) -> Result<f64> {
    let opts = RunOptions {
        record_timing: true,
        max_steps: Some(100),
        ..Default::default()
    };
    let m = run_simulation(s, seed, &opts)?;
    m.mean_step_time().ok_or_else(|| Error::config("t_end", "scenario has no steps to time"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub n: usize,
    /// Ensemble t90, `None` if `E` never reached the level.
    pub t90: Option<f64>,
    /// `t90 * n`.
    pub big_t90: Option<f64>,
    /// `T90(1) / T90(n)`; needs the `n = 1` row to be reached.
    pub eta: Option<f64>,
    #[serde(skip)]
    pub times: Vec<f64>,
    /// Ensemble-mean `E` for this fleet size.
    #[serde(skip)]
    pub e_mean: Vec<f64>,
}

/// Ensemble t90 as a function of fleet size, with the fleet built from copies
/// of the first agent. The efficiency is relative to the first entry of `ns`
/// when that entry is 1.
pub fn scalability_study(base: &Scenario, ns: &[usize], n_runs: usize, base_seed: u64) -> Result<Vec<ScaleRow>> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let s = base.with_fleet_size(n)?;
        let e = run_ensemble(&s, n_runs, base_seed, &RunOptions::default())?;
        rows.push(ScaleRow {
            n,
            t90: e.t90,
            big_t90: e.t90.map(|t| t * n as f64),
            eta: None,
            times: e.times,
            e_mean: e.e_mean,
        });
    }
    let reference = rows.iter().find(|r| r.n == 1).and_then(|r| r.big_t90);
    for r in &mut rows {
        r.eta = match (reference, r.big_t90) {
            (Some(a), Some(b)) => Some(a / b),
            _ => None,
        };
    }
    Ok(rows)
}
