//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Lines go straight to stdout so they show up without `--nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use hedac::controllers::ControllerName;
use hedac::heat::{conservation_defect, solve_potential, HedacParams, SolverKind};
use hedac::motion::MotionModel;
use hedac::scenarios::{build_desk_scenario, Override, Scenario, TestCase};
use hedac::sensing::{CoverageField, OccurrenceField, SensorModel};
use hedac::sim::{benchmark_step, run_ensemble, scalability_study, RunOptions};
use hedac::{GridSpec, ScalarField, Vec2};
use nalgebra::DVector;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SOUNDNESS_SEEDS: usize = 500;
const SOUNDNESS_TARGETS: usize = 200;
const SOUNDNESS_Z: f64 = 3.0;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(120);

const ORACLE_SOURCES: usize = 20;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);

const CONSERVATION_TOL: f64 = 1e-6;

const ORDERING_RUNS: usize = 10;
const ORDERING_SEED: u64 = 2024;
const SMC_RATIO: (f64, f64) = (1.2, 1.9);
const LAWNMOWER_RATIO: (f64, f64) = (1.6, 2.6);
const ORDERING_BUDGET: Duration = Duration::from_secs(15 * 60);

const MOTION_GAP: f64 = 0.10;

const SCALE_NS: [usize; 4] = [1, 2, 4, 8];
const SCALE_RUNS: usize = 6;
/// Long enough for a single agent to reach t90 on desk Test 1.
const SCALE_T_END: f64 = 1200.0;
const ETA_SLACK: f64 = 0.05;

const TABLE1: [f64; 6] = [316.91, 937.76, 800.24, 641.25, 1096.06, 1428.25];
const CALIBRATION_TOL: f64 = 0.01;

type Outcome = Result<String, String>;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn check(&mut self, name: &'static str, f: impl FnOnce() -> Outcome) {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = t0.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!("PASS  {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                self.failed.push(name);
                format!("FAIL  {name}: {detail} [{secs:.1} s]")
            }
        };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn soundness() -> Outcome {
    let t0 = Instant::now();
    let r = common::soundness(SOUNDNESS_SEEDS, SOUNDNESS_TARGETS);
    let z = (r.mean_d - r.one_minus_e) / r.sigma;
    let elapsed = t0.elapsed();
    verdict(
        z.abs() <= SOUNDNESS_Z && elapsed < SOUNDNESS_BUDGET,
        format!(
            "mean D {:.5} vs 1 - E {:.5} over {} seeds, |z| = {:.2} (<= {SOUNDNESS_Z}), {:.0} s (< {} s)",
            r.mean_d,
            r.one_minus_e,
            r.seeds,
            z.abs(),
            elapsed.as_secs_f64(),
            SOUNDNESS_BUDGET.as_secs()
        ),
    )
}

fn pde_oracle() -> Outcome {
    let t0 = Instant::now();
    let g = GridSpec::new(100.0, 100.0, 16, 16).unwrap();
    let (alpha, beta) = (0.03, 2.0);
    let chol = common::dense_operator(&g, alpha, beta, 100.0).cholesky().ok_or("dense operator not SPD")?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_SOURCES {
        let m = ScalarField::from_values(g, (0..g.len()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let exact = chol.solve(&DVector::from_column_slice(m.values()));
        for (solver, tol) in [(SolverKind::Spectral, 1e-12), (SolverKind::Cg, 1e-11)] {
            let p = HedacParams {
                solver,
                tol,
                ..HedacParams::new(alpha, beta)
            };
            let u = solve_potential(&m, &p, None).map_err(|e| e.to_string())?;
            let num: f64 = u.field.values().iter().zip(exact.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(num / exact.norm());
        }
    }
    let elapsed = t0.elapsed();
    verdict(
        worst <= ORACLE_TOL && elapsed < ORACLE_BUDGET,
        format!(
            "16x16 grid, {ORACLE_SOURCES} sources, spectral and CG: max relative error {worst:.1e} (<= {ORACLE_TOL:.0e}), {:.2} s (< {} s)",
            elapsed.as_secs_f64(),
            ORACLE_BUDGET.as_secs()
        ),
    )
}

/// Potentials of all three desk-scale priors with growing coverage holes
/// carved in, for both solvers.
fn conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut solves = 0;
    for case in [TestCase::Test1, TestCase::Test2, TestCase::Test3] {
        let s = build_desk_scenario(case, &[]).map_err(|e| e.to_string())?;
        let mut occ = OccurrenceField::new(s.prior.clone());
        let mut cov = CoverageField::zeros(s.grid);
        for k in 0..5 {
            // sweep the fleet across the domain to carve holes in m
            let agents: Vec<_> = s
                .fleet
                .iter()
                .map(|a| hedac::motion::AgentState {
                    z: s.grid.clamp(Vec2::new(a.z.x + 40.0 * k as f64, a.z.y)),
                    ..*a
                })
                .collect();
            let rects = cov.stamp(&agents, 20.0);
            occ.refresh(&cov, &rects);
            for solver in [SolverKind::Spectral, SolverKind::Cg] {
                let p = HedacParams { solver, ..s.config().hedac };
                let u = solve_potential(&occ.current, &p, None).map_err(|e| e.to_string())?;
                worst = worst.max(conservation_defect(&u.field, &occ.current, p.beta));
                let lhs = p.beta * u.field.integrate().unwrap();
                let rhs = occ.current.integrate().unwrap();
                worst = worst.max(((lhs - rhs) / rhs).abs());
                solves += 1;
            }
        }
    }
    verdict(
        worst <= CONSERVATION_TOL,
        format!("{solves} solves on desk fields: max |beta*int(u) - int(m)| / int(m) = {worst:.1e} (<= {CONSERVATION_TOL:.0e})"),
    )
}

fn t90_of(s: &Scenario) -> Result<f64, String> {
    let e = run_ensemble(s, ORDERING_RUNS, ORDERING_SEED, &RunOptions::default()).map_err(|e| e.to_string())?;
    e.t90.ok_or_else(|| format!("{} never reached E = 0.1 (final {:.3})", s.controller.name(), e.e_mean.last().unwrap()))
}

fn method_ordering(hedac_t90: &mut Option<f64>) -> Outcome {
    let t0 = Instant::now();
    let base = build_desk_scenario(TestCase::Test1, &[]).map_err(|e| e.to_string())?;
    let h = t90_of(&base.with_controller(ControllerName::Hedac).unwrap())?;
    *hedac_t90 = Some(h);
    let s = t90_of(&base.with_controller(ControllerName::Smc).unwrap())?;
    let l = t90_of(&base.with_controller(ControllerName::Lawnmower).unwrap())?;
    let (rs, rl) = (s / h, l / h);
    let elapsed = t0.elapsed();
    let ok = h < s
        && s < l
        && (SMC_RATIO.0..=SMC_RATIO.1).contains(&rs)
        && (LAWNMOWER_RATIO.0..=LAWNMOWER_RATIO.1).contains(&rl)
        && elapsed < ORDERING_BUDGET;
    verdict(
        ok,
        format!(
            "t90 HEDAC {h:.1} s < SMC {s:.1} s < Lawnmower {l:.1} s ({ORDERING_RUNS} runs); SMC/HEDAC {rs:.2} in [{}, {}], Lawnmower/HEDAC {rl:.2} in [{}, {}]; {:.0} s (< {} s)",
            SMC_RATIO.0,
            SMC_RATIO.1,
            LAWNMOWER_RATIO.0,
            LAWNMOWER_RATIO.1,
            elapsed.as_secs_f64(),
            ORDERING_BUDGET.as_secs()
        ),
    )
}

fn kinematic_vs_dubins(dubins: Option<f64>) -> Outcome {
    let base = build_desk_scenario(TestCase::Test1, &[]).map_err(|e| e.to_string())?;
    let d = match dubins {
        Some(t) => t,
        None => t90_of(&base)?,
    };
    let k = t90_of(&base.with_motion_model(MotionModel::Kinematic).unwrap())?;
    let gap = (k - d).abs() / k;
    verdict(
        gap <= MOTION_GAP,
        format!("HEDAC t90 kinematic {k:.1} s vs Dubins {d:.1} s: gap {:.1}% (<= {:.0}%)", 100.0 * gap, 100.0 * MOTION_GAP),
    )
}

fn benchmark_ordering() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for case in [TestCase::Test1, TestCase::Test2, TestCase::Test3] {
        let s = build_desk_scenario(case, &[]).map_err(|e| e.to_string())?;
        let mut ms = [0.0; 4];
        for (slot, name) in ms.iter_mut().zip([ControllerName::Lawnmower, ControllerName::Smc, ControllerName::Hedac, ControllerName::Rhc]) {
            *slot = 1e3 * benchmark_step(&s.with_controller(name).unwrap(), s.seed).map_err(|e| e.to_string())?;
        }
        let [lm, smc, hd, rhc] = ms;
        ok &= lm < smc.min(hd) && smc.max(hd) < rhc;
        lines.push(format!("{}: lawnmower {lm:.3} / smc {smc:.2} / hedac {hd:.2} / rhc {rhc:.0} ms", s.name));
    }
    verdict(ok, format!("Lawnmower < {{SMC, HEDAC}} < RHC; {}", lines.join("; ")))
}

fn scalability() -> Outcome {
    let base = build_desk_scenario(TestCase::Test1, &[Override::new("t_end", SCALE_T_END)]).map_err(|e| e.to_string())?;
    let rows = scalability_study(&base, &SCALE_NS, SCALE_RUNS, 11).map_err(|e| e.to_string())?;
    let t90: Vec<Option<f64>> = rows.iter().map(|r| r.t90).collect();
    let eta: Vec<Option<f64>> = rows.iter().map(|r| r.eta).collect();
    let reached = t90.iter().all(Option::is_some);
    let decreasing = reached && t90.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
    let eta1 = eta[0] == Some(1.0);
    let bounded = eta.iter().all(|e| e.is_some_and(|e| e <= 1.0 + ETA_SLACK));
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("N={} t90 {} eta {}", r.n, fmt_opt(r.t90, 1), fmt_opt(r.eta, 3)))
        .collect();
    verdict(
        decreasing && eta1 && bounded,
        format!("{} ({SCALE_RUNS} runs each); strictly decreasing t90, eta(1) = 1, eta <= 1 + {ETA_SLACK}", table.join(", ")),
    )
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{v:.digits$}")).unwrap_or_else(|| "-".into())
}

fn invariants() -> Outcome {
    type Property = fn(&hedac::scenarios::ScenarioConfig) -> Result<(), proptest::test_runner::TestCaseError>;
    let props: [(&str, Property); 6] = [
        ("E non-increasing", common::e_non_increasing),
        ("D non-decreasing", common::d_non_decreasing),
        ("unit directions", common::unit_directions),
        ("Dubins turn rate", common::turn_rate_bounded),
        ("domain containment", common::stays_in_domain),
        ("seed determinism", common::deterministic),
    ];
    let mut failures = Vec::new();
    for (name, prop) in props {
        let mut runner = TestRunner::new(Config {
            cases: common::CASES,
            failure_persistence: None,
            ..Config::default()
        });
        if let Err(e) = runner.run(&common::scenario_strategy(), |cfg| prop(&cfg)) {
            failures.push(format!("{name}: {e}"));
        }
    }
    let mut runner = TestRunner::new(Config {
        cases: common::CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (-4.0..4.0f64, -4.0..4.0f64, 0.5..40.0f64, 0.5..100.0f64, 0.01..2.0f64);
    if let Err(e) = runner.run(&strategy, |(a, b, v, r, dt)| common::dubins_step_bounded(a, b, v, r, dt)) {
        failures.push(format!("Dubins step: {e}"));
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("6 properties x {} random scenarios (all four controllers, both motion models) + single-step Dubins bound", common::CASES)
        } else {
            failures.join("; ")
        },
    )
}

/// Intensities of the shipped sensors by an independent polar quadrature.
fn calibration() -> Outcome {
    let mut found: Vec<(f64, f64)> = Vec::new();
    for case in [TestCase::Test1, TestCase::Test2, TestCase::Test3] {
        let s = build_desk_scenario(case, &[]).map_err(|e| e.to_string())?;
        for (a, cfg) in s.fleet.iter().zip(&s.config().fleet) {
            let target = cfg.sensor.target_intensity.ok_or("sensor without a target intensity")?;
            if !found.iter().any(|(t, _)| *t == target) {
                found.push((target, polar_intensity(&a.sensor)));
            }
        }
    }
    let mut detail = Vec::new();
    let mut ok = found.len() == TABLE1.len();
    for want in TABLE1 {
        match found.iter().find(|(t, _)| *t == want) {
            Some(&(_, got)) => {
                let rel = (got - want).abs() / want;
                ok &= rel <= CALIBRATION_TOL;
                detail.push(format!("{want} -> {got:.2} ({:.3}%)", 100.0 * rel));
            }
            None => {
                ok = false;
                detail.push(format!("{want} -> missing"));
            }
        }
    }
    verdict(ok, format!("{} (tolerance {:.0}%)", detail.join(", "), 100.0 * CALIBRATION_TOL))
}

fn polar_intensity(s: &SensorModel) -> f64 {
    let rad = s.support_radius();
    let (nr, nt) = (1500, 1440);
    let (dr, dt) = (rad / nr as f64, std::f64::consts::TAU / nt as f64);
    let mut total = 0.0;
    for i in 0..nr {
        let r = (i as f64 + 0.5) * dr;
        for j in 0..nt {
            let t = (j as f64 + 0.5) * dt;
            total += s.rate(Vec2::from_angle(t) * r) * r;
        }
    }
    total * dr * dt
}

#[test]
fn primary_acceptance_criteria() {
    let mut report = Report { failed: Vec::new() };
    report.check("sensor calibration against reference intensities", calibration);
    report.check("PDE oracle equivalence", pde_oracle);
    report.check("Conservation identity", conservation);
    report.check("Invariant suite", invariants);
    report.check("Probabilistic soundness", soundness);
    let mut hedac_t90 = None;
    report.check("Method ordering", || method_ordering(&mut hedac_t90));
    report.check("Kinematic vs Dubins", || kinematic_vs_dubins(hedac_t90));
    report.check("Benchmark ordering", benchmark_ordering);
    report.check("Scalability trend", scalability);
    assert!(report.failed.is_empty(), "failed criteria: {:?}", report.failed);
}
