//! Command-line driver: emit presets, run the pipeline, diagonalize, and
//! compare previously written artifacts.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtraj::config::{self, ConfigError};
use qtraj::model::PhysicalConstants;
use qtraj::oracle;
use qtraj::pipeline::{self, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "qtraj", about = "Quantum trajectory correlation functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a ready-made configuration (harmonic, quartic, gaussian_well).
    Preset { name: String },
    /// Run the pipeline described by a configuration file.
    Run {
        config: PathBuf,
        /// Stages to execute; defaults to all of them.
        #[arg(long, value_delimiter = ',', value_parser = parse_stage)]
        stages: Vec<Stage>,
        /// Override the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diagonalize the configured potential and print its lowest levels.
    Eigen { config: PathBuf },
    /// Re-run the comparison over artifacts in a run directory.
    Compare { dir: PathBuf },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                AppError::Config(_) => ExitCode::from(1),
                AppError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Config(ConfigError),
    #[error(transparent)]
    Numerical(PipelineError),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => AppError::Config(c),
            other => AppError::Numerical(other),
        }
    }
}

fn load_config(path: &PathBuf) -> Result<config::RunConfig, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        AppError::Config(ConfigError::Constraint {
            key: "config",
            message: format!("cannot read {}: {e}", path.display()),
        })
    })?;
    Ok(config::parse_config(&text)?)
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Preset { name } => {
            print!("{}", config::emit_preset(&name)?);
            Ok(())
        }
        Command::Run { config, stages, workers, out } => {
            let mut run_config = load_config(&config)?;
            if let Some(workers) = workers {
                run_config.workers = workers;
            }
            if let Some(out) = out {
                run_config.output_dir = out.display().to_string();
            }
            let stages = if stages.is_empty() { Stage::ALL.to_vec() } else { stages };
            let manifest = pipeline::run_pipeline(&run_config, &stages)?;
            println!(
                "wrote {} files to {} ({} trajectories, {} frozen)",
                manifest.files.len() + 1,
                run_config.output_dir,
                manifest.trajectory_status.len(),
                manifest.trajectory_status.iter().filter(|s| s.as_str() != "ok").count()
            );
            Ok(())
        }
        Command::Eigen { config } => {
            let run_config = load_config(&config)?;
            let eig = oracle::dvr_eigensolve(
                &run_config.potential_model(),
                &run_config.grid_spec(),
                &PhysicalConstants::default(),
                8,
            )
            .map_err(|e| AppError::Numerical(PipelineError::Numerical(e)))?;
            let mut out = Vec::new();
            oracle::write_eigenvalues_csv(&eig, &mut out)
                .map_err(|e| AppError::Numerical(PipelineError::Numerical(e)))?;
            print!("{}", String::from_utf8_lossy(&out));
            Ok(())
        }
        Command::Compare { dir } => {
            let dpm = pipeline::read_correlation_csv(&dir.join("correlation.csv"))?;
            let reference = pipeline::read_correlation_csv(&dir.join("oracle_correlation.csv"))?;
            let peaks = pipeline::read_two_column_csv(&dir.join("peaks.csv"))?;
            let energies = pipeline::read_two_column_csv(&dir.join("eigenvalues.csv"))?;
            let spectrum_result = qtraj::spectrum::SpectrumResult {
                omegas: Vec::new(),
                intensities: Vec::new(),
                peaks: peaks
                    .into_iter()
                    .map(|(omega, height)| qtraj::spectrum::Peak { omega, height })
                    .collect(),
            };
            let eig = oracle::EigenResult {
                energies: energies.into_iter().map(|(_, e)| e).collect(),
                states: Vec::new(),
            };
            let report = pipeline::compare_report(&dpm, &reference, &spectrum_result, &eig);
            let path = dir.join("compare.csv");
            std::fs::write(&path, &report).map_err(|e| {
                AppError::Numerical(PipelineError::Io { path, source: e })
            })?;
            print!("{report}");
            Ok(())
        }
    }
}
