use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn axivort(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_axivort"));
    cmd.args(args).env_remove("AXIVORT_THREADS");
    if let Some(t) = threads {
        cmd.env("AXIVORT_THREADS", t);
    }
    cmd.output().expect("spawn axivort")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_RING: &str = r#"{
  "experiment": "single_ring",
  "sim": { "dt": 0.2, "t_end": 1.0, "d": 3, "kernel": "tabulated" },
  "initial": { "ring": { "center": { "r": 1.0, "z": 0.0 }, "radius": 0.2, "amplitude": 5.0, "resolution": 8 } }
}"#;

#[test]
fn missing_config_exits_one() {
    let out = axivort(&["run", "/nonexistent/config.json"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_experiment_exits_one_and_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "vortex_soup"}"#);
    let out = axivort(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["dipole_growth", "single_ring", "inequality_corpus", "kernel_bounds", "highd_static"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn list_is_stable_and_complete() {
    let a = axivort(&["list"], None);
    let b = axivort(&["list"], None);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("dipole_growth"));
    assert_eq!(text.lines().count(), axivort_cli::REGISTRY.len());
}

#[test]
fn kernel_bounds_defaults_pass_and_match_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "kernel_bounds"}"#);
    let out_dir = dir.path().join("out");
    let out = axivort(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    let schema: serde_json::Value =
        serde_json::from_slice(&std::fs::read(repo_file("schemas/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&report));
    assert_eq!(report["details"]["reports"].as_array().unwrap().len(), 12);
    assert!(out_dir.join("plot.dat").exists());
}

#[test]
fn bound_failure_exits_two() {
    // a one-field corpus has no stable maximum
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "inequality_corpus", "corpus": {"n_fields": 1}}"#);
    let out = axivort(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RING);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = axivort(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()], Some(threads));
        assert_eq!(out.status.code(), Some(0));
        let files: Vec<Vec<u8>> = ["diagnostics.csv", "report.json", "plot.dat"]
            .iter()
            .map(|f| std::fs::read(out_dir.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert!(csv.starts_with("t,R,omega_max,relvort_L1,relvort_Linf,r_omega_L1,energy,I_r2,I_z,L,max_ur\n"));
}

#[test]
fn invalid_thread_count_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_RING);
    let out = axivort(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], Some("zero"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_changes_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "highd_static", "corpus": {"n_fields": 2, "dims": [4]}}"#);
    let read = |seed: &str| {
        let o = dir.path().join(format!("s{seed}"));
        axivort(&["run", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--seed", seed], None);
        std::fs::read(o.join("plot.dat")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn shipped_configs_parse() {
    let schema: serde_json::Value =
        serde_json::from_slice(&std::fs::read(repo_file("schemas/config.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for entry in std::fs::read_dir(repo_file("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        axivort_cli::RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        assert!(validator.is_valid(&serde_json::from_str(&text).unwrap()), "{}", path.display());
    }
}
