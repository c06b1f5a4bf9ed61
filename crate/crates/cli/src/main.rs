use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hedac::controllers::ControllerName;
use hedac::output::{BenchRow, Envelope, Manifest, OutputDir, ScaleSummaryRow, Summary};
use hedac::scenarios::{Override, Scenario};
use hedac::sim::{benchmark_step, run_ensemble, run_simulation, scalability_study, RunOptions};
use hedac::Error;

#[derive(Parser)]
#[command(name = "hedac", version, about = "Multi-agent probabilistic area search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One search from the configured initial poses.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        /// Record the control wall-clock of every step (step_ms column).
        #[arg(long)]
        timing: bool,
        /// Dump the undetected-target density every this many steps.
        #[arg(long, value_name = "STEPS")]
        snapshot_every: Option<usize>,
    },
    /// Monte-Carlo ensemble with random initial poses.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        timing: bool,
    },
    /// Mean control-step time over the first 100 steps.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        /// Controllers to time; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        controllers: Vec<ControllerName>,
    },
    /// t90 and efficiency as a function of fleet size.
    Scale {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: Output,
        #[arg(long = "Ns", value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and validate a scenario file, then exit.
    ValidateConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set hedac.beta=4` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<Override>,
    /// Seed (base seed for ensembles); defaults to the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Output {
    #[arg(long)]
    out: PathBuf,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn scenario(&self) -> hedac::Result<Scenario> {
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(Override::new("seed", seed));
        }
        Scenario::from_file(&self.config, &overrides)
    }
}

fn open_output(out: &Output, command: &str, s: &Scenario) -> hedac::Result<OutputDir> {
    let manifest = Manifest {
        command: command.into(),
        scenario: s.name.clone(),
        controller: s.controller.name().to_string(),
        base_seed: s.seed,
        ..Default::default()
    };
    let mut dir = OutputDir::create(&out.out, out.force, manifest)?;
    dir.write_config(&s.to_toml_string()?)?;
    Ok(dir)
}

fn set_workers(workers: Option<usize>) -> hedac::Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("workers", e.to_string()))?;
    }
    Ok(())
}

fn fmt_t90(t: Option<f64>) -> String {
    t.map(|t| format!("{t:.1} s")).unwrap_or_else(|| "not reached".into())
}

fn execute(cmd: Command) -> hedac::Result<()> {
    match cmd {
        Command::Run {
            common,
            out,
            timing,
            snapshot_every,
        } => {
            let s = common.scenario()?;
            let mut dir = open_output(&out, "run", &s)?;
            let opts = RunOptions {
                record_timing: timing,
                snapshot_every,
                ..Default::default()
            };
            let result = run_simulation(&s, s.seed, &opts);
            let run = match &result {
                Ok(m) => m,
                Err(f) => &f.partial,
            };
            dir.write_run(0, run)?;
            let e = hedac::sim::aggregate(vec![run.clone()]);
            let mut summary = Summary::new("run", &s.name, s.controller.name().as_str(), s.seed);
            summary.n_runs = 1;
            summary.t90 = e.t90;
            summary.envelope = Some(Envelope::from(&e));
            dir.write_summary(&summary)?;
            dir.finish()?;
            if let Err(f) = result {
                return Err(f.error);
            }
            let last = e.e_mean.last().copied().unwrap_or(1.0);
            println!("{} {}: t90 {}, final E {last:.4}", s.name, s.controller.name(), fmt_t90(e.t90));
        }
        Command::Ensemble {
            common,
            out,
            runs,
            workers,
            timing,
        } => {
            set_workers(workers)?;
            let s = common.scenario()?;
            let mut dir = open_output(&out, "ensemble", &s)?;
            let opts = RunOptions {
                record_timing: timing,
                ..Default::default()
            };
            let e = run_ensemble(&s, runs, s.seed, &opts)?;
            for (k, r) in e.per_run.iter().enumerate() {
                dir.write_run(k, r)?;
            }
            let mut summary = Summary::new("ensemble", &s.name, s.controller.name().as_str(), s.seed);
            summary.n_runs = runs;
            summary.t90 = e.t90;
            summary.envelope = Some(Envelope::from(&e));
            dir.write_summary(&summary)?;
            dir.finish()?;
            println!("{} {} ({runs} runs): t90 {}", s.name, s.controller.name(), fmt_t90(e.t90));
        }
        Command::Bench {
            common,
            out,
            controllers,
        } => {
            let s = common.scenario()?;
            let mut dir = open_output(&out, "bench", &s)?;
            let names = if controllers.is_empty() {
                vec![s.controller.name()]
            } else {
                controllers
            };
            let mut summary = Summary::new("bench", &s.name, s.controller.name().as_str(), s.seed);
            for name in names {
                let secs = benchmark_step(&s.with_controller(name)?, s.seed)?;
                println!("{} {name}: mean step {:.3} ms", s.name, secs * 1e3);
                summary.bench.push(BenchRow {
                    controller: name.to_string(),
                    mean_step_ms: secs * 1e3,
                });
            }
            dir.write_summary(&summary)?;
            dir.finish()?;
        }
        Command::Scale {
            common,
            out,
            ns,
            runs,
            workers,
        } => {
            set_workers(workers)?;
            let s = common.scenario()?;
            let mut dir = open_output(&out, "scale", &s)?;
            let rows = scalability_study(&s, &ns, runs, s.seed)?;
            let mut summary = Summary::new("scale", &s.name, s.controller.name().as_str(), s.seed);
            summary.n_runs = runs;
            for r in &rows {
                dir.write_scale_curve(r)?;
                summary.scalability.push(ScaleSummaryRow::from(r));
                let eta = r.eta.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                println!("N = {:3}: t90 {}, eta {eta}", r.n, fmt_t90(r.t90));
            }
            dir.write_summary(&summary)?;
            dir.finish()?;
        }
        Command::ValidateConfig { common } => {
            let s = common.scenario()?;
            println!(
                "{}: ok ({} x {} grid, {} agents, controller {})",
                s.name,
                s.grid.nx,
                s.grid.ny,
                s.fleet.len(),
                s.controller.name()
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if matches!(e, Error::SolverFailure { .. } | Error::NonFinite { .. }) {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
