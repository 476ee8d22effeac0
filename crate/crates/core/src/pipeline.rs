//! Configuration-driven orchestration: propagate a trajectory ensemble over
//! a worker pool, assemble correlation and spectrum artifacts, run the grid
//! reference solver, and compare the two. A manifest with content digests is
//! written last, and only if every stage succeeded.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, RunConfig};
use crate::ivr::{self, CorrelationSeries, EnsembleRun};
use crate::model::PhysicalConstants;
use crate::oracle;
use crate::spectrum::{self, SpectrumResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Propagate,
    Correlate,
    Spectrum,
    Oracle,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 5] =
        [Stage::Propagate, Stage::Correlate, Stage::Spectrum, Stage::Oracle, Stage::Compare];
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "propagate" => Ok(Stage::Propagate),
            "correlate" => Ok(Stage::Correlate),
            "spectrum" => Ok(Stage::Spectrum),
            "oracle" => Ok(Stage::Oracle),
            "compare" => Ok(Stage::Compare),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed data file {path}: {message}")]
    MalformedFile { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Written once, last, and only when every requested stage succeeded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub stages: Vec<Stage>,
    /// "ok" or "frozen-at-<time>" per trajectory, in grid order.
    pub trajectory_status: Vec<String>,
    /// Relative file name -> SHA-256 content digest.
    pub files: BTreeMap<String, String>,
    /// Stage wall-clock timings in seconds.
    pub timings: BTreeMap<String, f64>,
}

/// Execute the requested stages in dependency order.
///
/// Prerequisite results that were not requested are still computed in memory
/// (a comparison needs both correlation series) but only requested stages
/// emit files; the manifest lists exactly what was written.
pub fn run_pipeline(config: &RunConfig, stages: &[Stage]) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    let out_dir = PathBuf::from(&config.output_dir);
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

    let consts = PhysicalConstants::default();
    let model = config.potential_model();
    let spec = config.wavepacket_spec();
    let want = |s: Stage| stages.contains(&s);
    let need_ensemble = want(Stage::Propagate) || want(Stage::Correlate)
        || want(Stage::Spectrum) || want(Stage::Compare);
    let need_correlation = want(Stage::Correlate) || want(Stage::Spectrum) || want(Stage::Compare);

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let mut emit = |name: &str, contents: &[u8], dir: &Path| -> Result<(), PipelineError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        files.insert(name.to_string(), hex_digest(contents));
        Ok(())
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("worker pool construction");

    let mut trajectory_status = Vec::new();
    let mut ensemble: Option<EnsembleRun> = None;
    if need_ensemble {
        let start = Instant::now();
        let grid = ivr::sample_initial_points(
            &spec,
            config.sampling.n_points,
            config.sampling.scheme,
            config.sampling.density_cutoff,
        )?;
        let hierarchy = config.hierarchy_config();
        let run = pool.install(|| {
            ivr::propagate_ensemble(
                grid,
                &spec,
                &model,
                &consts,
                &hierarchy,
                config.hierarchy.output_stride,
            )
        })?;
        trajectory_status = run
            .records
            .iter()
            .map(|r| match r.frozen_at {
                None => "ok".to_string(),
                Some(t) => format!("frozen-at-{t}"),
            })
            .collect();
        if want(Stage::Propagate) {
            for (i, record) in run.records.iter().enumerate() {
                let mut buf = Vec::new();
                crate::dpm::write_record_csv(record, &mut buf)?;
                emit(&format!("traj_{i:04}.csv"), &buf, &out_dir)?;
            }
            timings.insert("propagate".into(), start.elapsed().as_secs_f64());
        }
        ensemble = Some(run);
    }

    let mut correlation: Option<CorrelationSeries> = None;
    if need_correlation {
        let start = Instant::now();
        let run = ensemble.as_ref().expect("ensemble computed above");
        let series = ivr::autocorrelation(run, &spec, &consts, config.correlation.form)?;
        if want(Stage::Correlate) {
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            emit("correlation.csv", &buf, &out_dir)?;
            timings.insert("correlate".into(), start.elapsed().as_secs_f64());
        }
        correlation = Some(series);
    }

    let mut spectrum_result: Option<SpectrumResult> = None;
    if want(Stage::Spectrum) || want(Stage::Compare) {
        let start = Instant::now();
        let series = correlation.as_ref().expect("correlation computed above");
        let sp = &config.spectrum;
        let mut result = spectrum::fourier_spectrum(
            series,
            &config.window_spec(),
            sp.omega_min,
            sp.omega_max,
            sp.n_omega,
        )?;
        result.peaks = spectrum::find_peaks(&result, sp.rel_threshold);
        if want(Stage::Spectrum) {
            let mut buf = Vec::new();
            result.write_csv(&mut buf)?;
            emit("spectrum.csv", &buf, &out_dir)?;
            let mut buf = Vec::new();
            result.write_peaks_csv(&mut buf)?;
            emit("peaks.csv", &buf, &out_dir)?;
            timings.insert("spectrum".into(), start.elapsed().as_secs_f64());
        }
        spectrum_result = Some(result);
    }

    let mut oracle_series: Option<CorrelationSeries> = None;
    let mut eigen: Option<oracle::EigenResult> = None;
    if want(Stage::Oracle) || want(Stage::Compare) {
        let start = Instant::now();
        let grid = config.grid_spec();
        let output_dt = config.hierarchy.dt * config.hierarchy.output_stride as f64;
        let stride = (output_dt / config.oracle.dt).round() as usize;
        let t_final = config
            .oracle
            .t_final
            .unwrap_or(config.hierarchy.t_final)
            .min(config.hierarchy.t_final);
        let series = oracle::split_operator_propagate(
            &model,
            &spec,
            &grid,
            &consts,
            config.oracle.dt,
            t_final,
            stride,
        )?;
        let eig = oracle::dvr_eigensolve(&model, &grid, &consts, 8)?;
        if want(Stage::Oracle) {
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            emit("oracle_correlation.csv", &buf, &out_dir)?;
            let mut buf = Vec::new();
            oracle::write_eigenvalues_csv(&eig, &mut buf)?;
            emit("eigenvalues.csv", &buf, &out_dir)?;
            timings.insert("oracle".into(), start.elapsed().as_secs_f64());
        }
        oracle_series = Some(series);
        eigen = Some(eig);
    }

    if want(Stage::Compare) {
        let start = Instant::now();
        let report = compare_report(
            correlation.as_ref().expect("correlation computed above"),
            oracle_series.as_ref().expect("oracle series computed above"),
            spectrum_result.as_ref().expect("spectrum computed above"),
            eigen.as_ref().expect("eigenvalues computed above"),
        );
        emit("compare.csv", report.as_bytes(), &out_dir)?;
        timings.insert("compare".into(), start.elapsed().as_secs_f64());
    }

    let manifest = RunManifest {
        config: config.clone(),
        stages: stages.to_vec(),
        trajectory_status,
        files,
        timings,
    };
    let manifest_path = out_dir.join("manifest.json");
    let body = serde_json::to_vec_pretty(&manifest).expect("manifest serialization");
    fs::write(&manifest_path, body).map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

/// Max and L2 deviations between the trajectory and grid correlation series,
/// plus the distance from each spectral peak to the nearest grid eigenvalue.
pub fn compare_report(
    dpm: &CorrelationSeries,
    reference: &CorrelationSeries,
    spectrum_result: &SpectrumResult,
    eigen: &oracle::EigenResult,
) -> String {
    let n = dpm.values.len().min(reference.values.len());
    let mut max_abs_dev = 0.0f64;
    let mut l2_num = 0.0;
    let mut l2_den = 0.0;
    for k in 0..n {
        let d = dpm.values[k] - reference.values[k];
        max_abs_dev = max_abs_dev.max((dpm.values[k].norm() - reference.values[k].norm()).abs());
        l2_num += d.norm_sqr();
        l2_den += reference.values[k].norm_sqr();
    }
    let l2_rel_dev = (l2_num / l2_den).sqrt();
    let mut report = String::from("metric,value\n");
    report.push_str(&format!("max_abs_magnitude_deviation,{max_abs_dev}\n"));
    report.push_str(&format!("l2_relative_deviation,{l2_rel_dev}\n"));
    for (i, peak) in spectrum_result.peaks.iter().enumerate() {
        let nearest = eigen
            .energies
            .iter()
            .map(|&e| (peak.omega - e).abs())
            .fold(f64::INFINITY, f64::min);
        report.push_str(&format!("peak_{i}_omega,{}\n", peak.omega));
        report.push_str(&format!("peak_{i}_nearest_eigenvalue_distance,{nearest}\n"));
    }
    report
}

pub fn hex_digest(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Read back a correlation CSV written by this crate.
pub fn read_correlation_csv(path: &Path) -> Result<CorrelationSeries, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(PipelineError::MalformedFile {
                path: path.to_path_buf(),
                message: format!("line {}: expected t,re_c,im_c[,abs_c]", lineno + 1),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| PipelineError::MalformedFile {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", lineno + 1),
            })
        };
        times.push(parse(fields[0])?);
        values.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
    }
    Ok(CorrelationSeries { times, values })
}

/// Read back a peaks CSV and an eigenvalues CSV for a standalone comparison.
pub fn read_two_column_csv(path: &Path) -> Result<Vec<(f64, f64)>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(PipelineError::MalformedFile {
                path: path.to_path_buf(),
                message: format!("line {}: expected two columns", lineno + 1),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| PipelineError::MalformedFile {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", lineno + 1),
            })
        };
        rows.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(rows)
}
