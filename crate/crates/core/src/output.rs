//! Result files: per-run series and trajectories, field snapshots, an
//! ensemble summary and a manifest listing everything that was written.
//!
//! Layout inside the output directory:
//!
//! ```text
//! run_<k>.csv              t,E,D,step_ms   (step_ms blank unless timed)
//! traj_<k>_<agent>.csv     t,x,y,theta
//! targets_<k>.csv          x,y,t_detect    (t_detect blank if never found)
//! snap_<k>_<i>.txt         field snapshot of m
//! scale_<n>.csv            t,E             (ensemble mean for fleet size n)
//! summary.json
//! effective_config.toml
//! manifest.json
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{EnsembleResult, RunMetrics, ScaleRow, T90_LEVEL};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "effective_config.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub scenario: String,
    pub controller: String,
    pub base_seed: u64,
    pub effective_config: Option<String>,
    pub summary: Option<String>,
    pub runs: Vec<RunFiles>,
    pub scalability: Vec<ScaleFiles>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFiles {
    pub index: usize,
    pub seed: u64,
    pub series: String,
    pub trajectories: Vec<String>,
    pub targets: String,
    pub snapshots: Vec<SnapshotFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub t: f64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFiles {
    pub n: usize,
    pub series: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub e_mean: Vec<f64>,
    pub e_min: Vec<f64>,
    pub e_max: Vec<f64>,
    pub d_mean: Vec<f64>,
}

impl From<&EnsembleResult> for Envelope {
    fn from(e: &EnsembleResult) -> Self {
        Envelope {
            times: e.times.clone(),
            e_mean: e.e_mean.clone(),
            e_min: e.e_min.clone(),
            e_max: e.e_max.clone(),
            d_mean: e.d_mean.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub controller: String,
    pub mean_step_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummaryRow {
    pub n: usize,
    pub t90: Option<f64>,
    pub big_t90: Option<f64>,
    pub eta: Option<f64>,
}

impl From<&ScaleRow> for ScaleSummaryRow {
    fn from(r: &ScaleRow) -> Self {
        ScaleSummaryRow {
            n: r.n,
            t90: r.t90,
            big_t90: r.big_t90,
            eta: r.eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub scenario: String,
    pub controller: String,
    pub base_seed: u64,
    pub n_runs: usize,
    pub t90_level: f64,
    /// `None` when the mean `E` never reached the level (or nothing was run).
    pub t90: Option<f64>,
    pub envelope: Option<Envelope>,
    pub bench: Vec<BenchRow>,
    pub scalability: Vec<ScaleSummaryRow>,
}

impl Summary {
    pub fn new(command: &str, scenario: &str, controller: &str, base_seed: u64) -> Self {
        Summary {
            command: command.to_string(),
            scenario: scenario.to_string(),
            controller: controller.to_string(),
            base_seed,
            n_runs: 0,
            t90_level: T90_LEVEL,
            t90: None,
            envelope: None,
            bench: Vec::new(),
            scalability: Vec::new(),
        }
    }
}

/// An output directory being filled; call [`OutputDir::finish`] to write the
/// manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    /// Creates `root` if needed. An existing non-empty directory is refused
    /// unless `force` is set.
    pub fn create(root: impl Into<PathBuf>, force: bool, manifest: Manifest) -> Result<Self> {
        let root = root.into();
        if root.exists() {
            if !root.is_dir() {
                return Err(Error::config("out", format!("{} is not a directory", root.display())));
            }
            if !force && fs::read_dir(&root)?.next().is_some() {
                return Err(Error::config(
                    "out",
                    format!("{} is not empty (use --force to overwrite)", root.display()),
                ));
            }
        }
        fs::create_dir_all(&root)?;
        Ok(OutputDir { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        fs::write(self.root.join(name), body)?;
        Ok(())
    }

    pub fn write_config(&mut self, toml: &str) -> Result<()> {
        self.write(CONFIG_FILE, toml)?;
        self.manifest.effective_config = Some(CONFIG_FILE.into());
        Ok(())
    }

    /// Writes every file belonging to run `k`.
    pub fn write_run(&mut self, k: usize, run: &RunMetrics) -> Result<()> {
        let series = format!("run_{k}.csv");
        self.write(&series, &run_csv(run))?;
        let mut trajectories = Vec::with_capacity(run.trajectories.len());
        for (a, traj) in run.trajectories.iter().enumerate() {
            let name = format!("traj_{k}_{a}.csv");
            let mut s = String::from("t,x,y,theta\n");
            for p in traj {
                let _ = writeln!(s, "{},{},{},{}", p.t, p.x, p.y, p.theta);
            }
            self.write(&name, &s)?;
            trajectories.push(name);
        }
        let targets = format!("targets_{k}.csv");
        let mut found = vec![None; run.targets.len()];
        for &(i, t) in &run.detections {
            found[i] = Some(t);
        }
        let mut s = String::from("x,y,t_detect\n");
        for (p, t) in run.targets.iter().zip(&found) {
            let _ = writeln!(s, "{},{},{}", p.x, p.y, t.map(|t| t.to_string()).unwrap_or_default());
        }
        self.write(&targets, &s)?;
        let mut snapshots = Vec::with_capacity(run.snapshots.len());
        for (i, (t, field)) in run.snapshots.iter().enumerate() {
            let name = format!("snap_{k}_{i}.txt");
            let mut w = BufWriter::new(fs::File::create(self.root.join(&name))?);
            field.write_snapshot(&mut w)?;
            w.flush()?;
            snapshots.push(SnapshotFile { t: *t, path: name });
        }
        self.manifest.runs.push(RunFiles {
            index: k,
            seed: run.seed,
            series,
            trajectories,
            targets,
            snapshots,
        });
        Ok(())
    }

    pub fn write_scale_curve(&mut self, row: &ScaleRow) -> Result<()> {
        let name = format!("scale_{}.csv", row.n);
        let mut s = String::from("t,E\n");
        for (t, e) in row.times.iter().zip(&row.e_mean) {
            let _ = writeln!(s, "{t},{e}");
        }
        self.write(&name, &s)?;
        self.manifest.scalability.push(ScaleFiles { n: row.n, series: name });
        Ok(())
    }

    pub fn write_summary(&mut self, summary: &Summary) -> Result<()> {
        let body = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.into()))?;
        self.write(SUMMARY_FILE, &(body + "\n"))?;
        self.manifest.summary = Some(SUMMARY_FILE.into());
        Ok(())
    }

    /// Writes the manifest and returns its path.
    pub fn finish(self) -> Result<PathBuf> {
        let body = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Io(e.into()))?;
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, body + "\n")?;
        Ok(path)
    }
}

fn run_csv(run: &RunMetrics) -> String {
    let mut s = String::from("t,E,D,step_ms\n");
    for k in 0..run.len() {
        let ms = run.step_wallclock[k].map(|w| (w * 1e3).to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", run.times[k], run.e_series[k], run.d_series[k], ms);
    }
    s
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
