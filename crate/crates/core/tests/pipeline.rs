//! Pipeline-level behavior: stage gating, manifest completeness, worker
//! determinism, and the harmonic comparison, all against a temp directory.

use std::collections::BTreeSet;
use std::fs;

use qtraj::config::{emit_preset, parse_config, RunConfig};
use qtraj::pipeline::{hex_digest, run_pipeline, Stage};

fn short_harmonic(dir: &std::path::Path) -> RunConfig {
    let mut config = parse_config(&emit_preset("harmonic").unwrap()).unwrap();
    config.hierarchy.t_final = 4.0 * std::f64::consts::PI;
    config.output_dir = dir.display().to_string();
    config
}

#[test]
fn propagate_only_emits_trajectories_and_nothing_else() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_harmonic(tmp.path());
    let manifest = run_pipeline(&config, &[Stage::Propagate]).unwrap();

    assert_eq!(manifest.files.len(), config.sampling.n_points);
    assert!(manifest.files.keys().all(|name| name.starts_with("traj_")));
    assert!(!tmp.path().join("correlation.csv").exists());
    assert_eq!(manifest.trajectory_status.len(), config.sampling.n_points);
    assert!(manifest.trajectory_status.iter().all(|s| s == "ok"));
}

#[test]
fn manifest_lists_every_emitted_file_with_matching_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_harmonic(tmp.path());
    let manifest = run_pipeline(&config, &Stage::ALL).unwrap();

    let on_disk: BTreeSet<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    let listed: BTreeSet<String> = manifest.files.keys().cloned().collect();
    assert_eq!(on_disk, listed);
    for (name, digest) in &manifest.files {
        let contents = fs::read(tmp.path().join(name)).unwrap();
        assert_eq!(&hex_digest(&contents), digest, "{name}");
    }
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn harmonic_compare_report_shows_agreement_below_1e3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_harmonic(tmp.path());
    run_pipeline(&config, &Stage::ALL).unwrap();

    let report = fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    let max_dev: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("max_abs_magnitude_deviation,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_dev < 1e-3, "max |c| deviation {max_dev}");
}

#[test]
fn worker_counts_produce_byte_identical_correlation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in [1usize, 8] {
        let mut config = parse_config(&emit_preset("quartic").unwrap()).unwrap();
        config.hierarchy.t_final = 2.0 * std::f64::consts::PI;
        config.sampling.n_points = 16;
        config.workers = workers;
        let dir = tmp.path().join(format!("w{workers}"));
        config.output_dir = dir.display().to_string();
        run_pipeline(&config, &[Stage::Propagate, Stage::Correlate]).unwrap();
        outputs.push(fs::read(dir.join("correlation.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn repeated_runs_are_bit_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    for tag in ["a", "b"] {
        let dir = tmp.path().join(tag);
        let config = short_harmonic(&dir);
        manifests.push(run_pipeline(&config, &Stage::ALL).unwrap().files);
    }
    assert_eq!(manifests[0], manifests[1]);
}

#[test]
fn invalid_config_aborts_without_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = short_harmonic(tmp.path());
    config.hierarchy.n_order = 1;
    assert!(run_pipeline(&config, &Stage::ALL).is_err());
    assert!(!tmp.path().join("manifest.json").exists());
}
