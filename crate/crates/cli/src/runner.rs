//! Executes scenarios: jobs run on the worker pool, files and the manifest
//! are written afterwards by this thread alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Output};
use crate::engine::{self, RunOutput, Status};
use crate::output;
use crate::scenarios::{Job, Scenario};
use crate::sweep::{run_sweep, SweepRow};

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory; absent when nothing was written.
    pub file: Option<String>,
    pub kind: &'static str,
    pub sha256: Option<String>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_values: Option<Vec<f64>>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub generator: String,
    pub output: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub manifest: PathBuf,
    pub files: Vec<PathBuf>,
    /// Runs (or sweep points) that stopped on an error.
    pub failures: usize,
}

enum JobResult {
    Run(Result<RunOutput, qsqueeze::Error>),
    Sweep(Vec<SweepRow>),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Collector<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
    entries: Vec<ManifestEntry>,
}

impl Collector<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<String> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(sha256_hex(bytes))
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        file: Option<(&str, &[u8])>,
        kind: &'static str,
        status: String,
        error: Option<String>,
        snapshot_time: Option<f64>,
        sweep: Option<(String, Vec<f64>)>,
        config: &ExperimentConfig,
    ) -> anyhow::Result<()> {
        let (file, sha256) = match file {
            Some((name, bytes)) => (Some(name.to_string()), Some(self.write(name, bytes)?)),
            None => (None, None),
        };
        let (sweep_axis, sweep_values) = match sweep {
            Some((a, v)) => (Some(a), Some(v)),
            None => (None, None),
        };
        self.entries.push(ManifestEntry {
            file,
            kind,
            sha256,
            status,
            error,
            snapshot_time,
            sweep_axis,
            sweep_values,
            config: config.clone(),
        });
        Ok(())
    }
}

fn run_job(job: &Job) -> JobResult {
    match job {
        Job::Run { config, .. } => JobResult::Run(engine::run(config)),
        Job::Sweep {
            config, axis, values, ..
        } => JobResult::Sweep(run_sweep(config, *axis, values)),
    }
}

/// Runs every job of `scenario` and writes its files into `dir`.
pub fn execute(scenario: &Scenario, dir: &Path) -> anyhow::Result<Report> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let results: Vec<JobResult> = scenario.jobs.par_iter().map(run_job).collect();

    let mut col = Collector {
        dir,
        files: Vec::new(),
        entries: Vec::new(),
    };
    let mut failures = 0;
    for (job, result) in scenario.jobs.iter().zip(results) {
        let stem = job.stem();
        let config = job.config();
        match (job, result) {
            (Job::Run { .. }, JobResult::Run(Err(e))) => {
                log::error!("{stem}: {e}");
                failures += 1;
                col.record(None, "run", "failed".into(), Some(e.to_string()), None, None, config)?;
            }
            (Job::Run { .. }, JobResult::Run(Ok(out))) => {
                let (status, error) = match &out.failure {
                    Some(e) => {
                        log::error!("{stem}: {e}");
                        failures += 1;
                        ("failed".to_string(), Some(e.to_string()))
                    }
                    None => ("ok".to_string(), None),
                };
                if config.outputs.contains(&Output::Series) {
                    let mut buf = Vec::new();
                    output::write_series(&mut buf, &out.series)?;
                    let name = format!("{stem}.csv");
                    col.record(
                        Some((&name, &buf)),
                        "series",
                        status.clone(),
                        error.clone(),
                        None,
                        None,
                        config,
                    )?;
                }
                if config.outputs.contains(&Output::Steady) {
                    let summary = engine::summarize(config, &out);
                    let mut buf = Vec::new();
                    output::write_summaries(&mut buf, None, &[(None, &summary)])?;
                    let name = format!("{stem}_steady.csv");
                    col.record(
                        Some((&name, &buf)),
                        "steady",
                        status.clone(),
                        error.clone(),
                        None,
                        None,
                        config,
                    )?;
                }
                for snap in &out.snapshots {
                    let mut buf = Vec::new();
                    output::write_wigner(&mut buf, &snap.grid)?;
                    let name = format!("{stem}_wigner_t{}.dat", snap.t);
                    col.record(
                        Some((&name, &buf)),
                        "wigner",
                        "ok".into(),
                        None,
                        Some(snap.t),
                        None,
                        config,
                    )?;
                }
            }
            (Job::Sweep { axis, values, .. }, JobResult::Sweep(rows)) => {
                let failed = rows.iter().filter(|r| r.summary.status == Status::Failed).count();
                failures += failed;
                let table: Vec<(Option<f64>, &engine::Summary)> =
                    rows.iter().map(|r| (Some(r.value), &r.summary)).collect();
                let mut buf = Vec::new();
                output::write_summaries(&mut buf, Some(axis.name()), &table)?;
                let status = if failed == 0 {
                    "ok".to_string()
                } else {
                    format!("{failed} of {} points failed", rows.len())
                };
                let name = format!("{stem}.csv");
                col.record(
                    Some((&name, &buf)),
                    "sweep",
                    status,
                    None,
                    None,
                    Some((axis.name().to_string(), values.clone())),
                    config,
                )?;
            }
            _ => unreachable!("job and result kinds match"),
        }
    }

    let manifest = Manifest {
        scenario: scenario.name.clone(),
        generator: format!("qsqueeze {}", env!("CARGO_PKG_VERSION")),
        output: col.entries,
    };
    let text = toml::to_string(&manifest).context("serializing manifest")?;
    let path = dir.join(&scenario.manifest);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(Report {
        manifest: path,
        files: col.files,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
