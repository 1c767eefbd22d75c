use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use qsqueeze_cli::config::ExperimentConfig;
use qsqueeze_cli::scenarios::{self, Scenario};
use qsqueeze_cli::sweep::Axis;
use qsqueeze_cli::{execute, Report};

#[derive(Parser)]
#[command(name = "qsqueeze", version, about = "Qubit-assisted mechanical squeezing simulator")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the Fock cutoff of every run.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset scenario (fig1 … fig7) or `custom <config>`.
    Simulate {
        scenario: String,
        /// Configuration file for `custom`.
        config: Option<PathBuf>,
    },
    /// Run one configuration over a list of values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values; an empty list gives an empty table.
        #[arg(long, default_value = "")]
        values: String,
    },
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".into())
}

fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().with_context(|| format!("invalid sweep value {v:?}")))
        .collect()
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::parse_file(path)?)
}

/// Output directory and stem of a custom run; `output_path` wins over `--out`.
fn custom_target(cli_out: &Path, config_path: &Path, config: &ExperimentConfig) -> (PathBuf, String) {
    match &config.output_path {
        Some(p) => (p.parent().map(Path::to_path_buf).unwrap_or_default(), stem_of(p)),
        None => (cli_out.join("custom"), stem_of(config_path)),
    }
}

fn plan(cli: &Cli) -> Result<(Scenario, PathBuf)> {
    let (scenario, dir) = match &cli.command {
        Command::Simulate { scenario, config } => {
            let path = match (scenario.strip_prefix("custom:"), scenario.as_str(), config) {
                (Some(p), _, None) => Some(PathBuf::from(p)),
                (None, "custom", Some(p)) => Some(p.clone()),
                (None, "custom", None) => bail!("simulate custom needs a configuration file"),
                (_, _, Some(_)) => bail!("only the custom scenario takes a configuration file"),
                _ => None,
            };
            match path {
                Some(path) => {
                    let config = load(&path)?;
                    let (dir, stem) = custom_target(&cli.out, &path, &config);
                    (scenarios::custom(&stem, config), dir)
                }
                None => (scenarios::preset(scenario)?, cli.out.join(scenario)),
            }
        }
        Command::Sweep { config, axis, values } => {
            let stem = format!("{}_{}_sweep", stem_of(config), axis);
            (
                scenarios::sweep(&stem, load(config)?, *axis, parse_values(values)?),
                cli.out.join("sweep"),
            )
        }
    };
    let scenario = match cli.cutoff {
        Some(n) => scenario.with_cutoff(n)?,
        None => scenario,
    };
    Ok((scenario, dir))
}

fn run(cli: &Cli) -> Result<Report> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let (scenario, dir) = plan(cli)?;
    log::info!(
        "running {} ({} jobs) into {}",
        scenario.name,
        scenario.jobs.len(),
        dir.display()
    );
    execute(&scenario, &dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            println!("{}", report.manifest.display());
            if report.failures > 0 {
                eprintln!("{} run(s) failed; see the manifest", report.failures);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
