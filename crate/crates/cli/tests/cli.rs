use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fsrg-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fsrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsrg")).args(args).output().expect("spawn fsrg")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn rewrite_fixture(name: &str, dir: &Path, edit: impl FnOnce(&mut String)) -> PathBuf {
    let mut text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    edit(&mut text);
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn triv_run_passes_and_writes_artifacts() {
    let dir = scratch("triv");
    let cfg = fixtures().join("m-triv.run.json");
    let o = fsrg(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.kv", "digest.txt", "trace.txt", "spectrum.txt"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let kv = std::fs::read_to_string(dir.join("summary.kv")).unwrap();
    assert!(kv.contains("status = pass"));
}

#[test]
fn reports_are_deterministic() {
    let cfg = fixtures().join("m-triv.run.json");
    let runs: Vec<String> = (0..2)
        .map(|k| {
            let dir = scratch(&format!("det{k}"));
            let o = fsrg(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--format", "kv"]);
            assert_eq!(code(&o), 0);
            std::fs::read_to_string(dir.join("summary.kv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn infrared_violation_is_a_config_error() {
    let dir = scratch("ir");
    let cfg = rewrite_fixture("m-triv.json", &dir, |t| {
        *t = t.replace("\"infrared_exponent\": 0.5", "\"infrared_exponent\": 1.5");
    });
    let o = fsrg(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("infrared"));
}

#[test]
fn empty_and_missing_configs_are_usage_errors() {
    let dir = scratch("empty");
    let empty = dir.join("empty.json");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&fsrg(&["suite", "--config", empty.to_str().unwrap()])), 1);
    assert_eq!(code(&fsrg(&["run", "--config", dir.join("nope.json").to_str().unwrap()])), 1);
    assert_eq!(code(&fsrg(&["run"])), 1);
    assert_eq!(code(&fsrg(&["--help"])), 0);
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = scratch("schema");
    let cfg = rewrite_fixture("m-triv.json", &dir, |t| *t = t.replacen("\"schema_version\": 1", "\"schema_version\": 9", 1));
    let o = fsrg(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
}

#[test]
fn verify_passes_on_pauli() {
    let dir = scratch("verify");
    let cfg = fixtures().join("m-pauli.run.json");
    let o = fsrg(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--format", "kv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("hypothesis.symmetry.pass = true"));
}

#[test]
fn broken_symmetry_fails_the_suite() {
    let dir = scratch("broken");
    let cfg = rewrite_fixture("m-pauli.json", &dir, |t| {
        // Weaken the second atomic level's coupling so the swap generator no longer commutes.
        let needle = "[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]]";
        let broken = "[[0.0, 0.0], [0.8, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]]";
        assert!(t.contains(needle));
        *t = t.replace(needle, broken);
    });
    let o = fsrg(&["suite", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--format", "kv", "--seed", "3"]);
    assert_eq!(code(&o), 2);
    let kv = String::from_utf8_lossy(&o.stdout);
    assert!(kv.contains("suite.rg.schur_deviation.pass = false"), "{kv}");
    assert!(kv.contains("suite.model.symmetry.pass = false"), "{kv}");
}

#[test]
fn triv_suite_and_sweep_pass() {
    let dir = scratch("triv-suite");
    let cfg = fixtures().join("m-triv.run.json");
    let o = fsrg(&["suite", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = fsrg(&["sweep-g", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--two-sided"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.join("sweep.dat").is_file());
}
