use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command as Process;

use miub_cli::config::{Algorithm, ObjectiveKind};
use miub_cli::error::exit;
use miub_cli::manifest::MANIFEST_FILE;
use miub_cli::validation::{run_checks, Status};
use miub_cli::{execute, run_pipeline, with_threads, Command, ExperimentConfig, ResultManifest, Role};

fn quick() -> ExperimentConfig {
    let mut c = ExperimentConfig::toy();
    c.optimizer.pcdoa.population = 10;
    c.optimizer.pcdoa.iterations = 10;
    c.evaluation.trials = 1000;
    c.evaluation.mse_trials = 200;
    c.evaluation.scr_grid = vec![-5.0, 0.0];
    c.validation.samples = 4000;
    c.validation.nested_outer = 1000;
    c.validation.nested_inner = 50;
    c.validation.lipschitz_pairs = 50;
    c
}

/// Every result file except the manifest, keyed by name.
fn result_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != MANIFEST_FILE)
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

fn write_config(dir: &Path, c: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, c.to_toml_string().unwrap()).unwrap();
    path
}

fn miub_bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_miub"))
}

#[test]
fn full_run_lists_existing_files_with_hash_headers() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick();
    let m = run_pipeline(&c, dir.path()).unwrap();
    assert!(m.complete);
    assert_eq!(m.stages, ["optimize", "evaluate", "analyze"]);
    for role in [Role::Trace, Role::Waveform, Role::Roc, Role::Mse, Role::Autocorr, Role::Ambiguity] {
        assert!(m.has_role(role), "{role:?} missing");
    }
    let hash_line = format!("# config_hash: {}", c.hash().unwrap());
    for f in &m.files {
        let text = std::fs::read_to_string(dir.path().join(&f.path)).unwrap();
        assert!(text.lines().take_while(|l| l.starts_with('#')).any(|l| l == hash_line), "{}", f.path);
        assert!(text.starts_with("# miub "), "{}", f.path);
    }
    assert_eq!(ResultManifest::read(dir.path()).unwrap(), m);
}

#[test]
fn rpc_objective_writes_roc_and_mse_but_no_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick();
    c.objective.kind = ObjectiveKind::Rpc;
    let m = execute(&c, dir.path(), Command::Run).unwrap();
    assert!(m.has_role(Role::Roc) && m.has_role(Role::Mse));
    assert!(!m.has_role(Role::Trace));
    assert!(!dir.path().join("trace.txt").exists());
    assert!(!dir.path().join("roc_rpc.txt").exists());
}

#[test]
fn rpc_algorithm_writes_no_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick();
    c.optimizer.algorithm = Algorithm::Rpc;
    c.optimizer.rpc_draws = 20;
    let m = run_pipeline(&c, dir.path()).unwrap();
    assert!(!m.has_role(Role::Trace));
    assert!(m.has_role(Role::Waveform));
}

#[test]
fn pso_and_wsm_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick();
    c.optimizer.algorithm = Algorithm::Pso;
    c.optimizer.pso.population = 10;
    c.optimizer.pso.iterations = 10;
    c.objective.kind = ObjectiveKind::Wsm;
    c.objective.weight = 0.5;
    let m = run_pipeline(&c, dir.path()).unwrap();
    assert!(m.has_role(Role::Trace));
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = quick();
    run_pipeline(&c, a.path()).unwrap();
    run_pipeline(&c, b.path()).unwrap();
    assert_eq!(result_files(a.path()), result_files(b.path()));

    let d = tempfile::tempdir().unwrap();
    let mut other = c.clone();
    other.seed = 1;
    run_pipeline(&other, d.path()).unwrap();
    assert_ne!(result_files(a.path())["waveform.txt"], result_files(d.path())["waveform.txt"]);
}

#[test]
fn separate_commands_match_full_run() {
    let full = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    let c = quick();
    run_pipeline(&c, full.path()).unwrap();
    execute(&c, split.path(), Command::Optimize).unwrap();
    execute(&c, split.path(), Command::Evaluate).unwrap();
    let m = execute(&c, split.path(), Command::Analyze).unwrap();
    assert_eq!(result_files(full.path()), result_files(split.path()));
    assert_eq!(m.stages, ["optimize", "evaluate", "analyze"]);
    assert_eq!(m.files.len(), 7);
}

#[test]
fn evaluate_refuses_missing_or_foreign_waveform() {
    let dir = tempfile::tempdir().unwrap();
    let c = quick();
    let e = execute(&c, dir.path(), Command::Evaluate).unwrap_err();
    assert_eq!(e.exit_code(), exit::CONFIG);

    execute(&c, dir.path(), Command::Optimize).unwrap();
    let mut other = c.clone();
    other.seed = 5;
    let e = execute(&other, dir.path(), Command::Analyze).unwrap_err();
    assert!(e.to_string().contains("different config"), "{e}");
}

#[test]
fn thread_count_does_not_change_results() {
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    let c = quick();
    with_threads(Some(1), || run_pipeline(&c, one.path())).unwrap().unwrap();
    with_threads(Some(4), || run_pipeline(&c, four.path())).unwrap().unwrap();
    assert_eq!(result_files(one.path()), result_files(four.path()));
}

#[test]
fn validation_passes_on_toy_scenario() {
    let report = run_checks(&quick()).unwrap();
    for check in &report.checks {
        assert_ne!(check.status, Status::Fail, "{check:?}");
    }
    let zero = report.get("zero_target_mi_approx").unwrap();
    assert!(zero.estimate.abs() <= 1e-9);
    assert!(report.get("zero_target_mc_miub").unwrap().estimate.abs() <= 1e-9);
}

#[test]
fn validate_command_names_corrupted_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick();
    c.scenario.target[0].weight = 0.7;
    let path = write_config(dir.path(), &c);
    let out = miub_bin()
        .args(["validate", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::VALIDATION));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("target model"), "{stderr}");
    assert!(stderr.contains("weights sum to 0.8999"), "{stderr}");
    let report = std::fs::read_to_string(dir.path().join("out/validation.txt")).unwrap();
    assert!(report.contains("target_model, fail"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = quick();
    bad.objective.weight = 2.0;
    let path = write_config(dir.path(), &bad);
    let status = miub_bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(exit::CONFIG));

    std::fs::write(&path, "seed = \"not a number\"").unwrap();
    let status = miub_bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(status.status.code(), Some(exit::CONFIG));

    let path = write_config(dir.path(), &quick());
    let out_dir = dir.path().join("run");
    let status = miub_bin()
        .args(["run", "--seed", "3", "--threads", "2", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(exit::OK));
    assert_eq!(ResultManifest::read(&out_dir).unwrap().seed, 3);
}

#[test]
fn template_output_parses() {
    let out = miub_bin().arg("template").output().unwrap();
    assert!(out.status.success());
    let c = ExperimentConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(c, ExperimentConfig::toy());
}
