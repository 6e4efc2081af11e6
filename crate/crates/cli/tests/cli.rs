use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use darksteady::config::{config_from_header, parse_config};

fn run(dir: &Path, experiment: &str, config: &str, extra: &[&str]) -> Output {
    let conf = dir.join("run.conf");
    fs::write(&conf, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_darksteady"))
        .arg(experiment)
        .arg("--config")
        .arg(&conf)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn no_outputs(dir: &Path) -> bool {
    ["data.csv", "summary.txt", "plot.gp"]
        .iter()
        .all(|f| !dir.join("out").join(f).exists())
}

#[test]
fn steady_run_succeeds_and_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "steady", "experiment = steady\n", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["data.csv", "summary.txt", "plot.gp"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let plot = fs::read_to_string(dir.path().join("out/plot.gp")).unwrap();
    assert!(plot.contains("'data.csv'"));
}

#[test]
fn header_round_trips_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "evolve",
        "[params]\nomega = 1.5\n",
        &["--seed", "7", "--integrator", "propagator"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/data.csv")).unwrap();
    let cfg = parse_config(&config_from_header(&csv)).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.integrator.to_string(), "propagator");
    assert_eq!(cfg.params.omega_e, 1.5);
    assert_eq!(cfg.params.omega_n, 1.5);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("steady", "[params]\ngamma_plus = -1\n"),
        ("steady", "[params]\nbogus = 1\n"),
        ("steady", "experiment = fig2\n"),
        ("no-such-experiment", ""),
    ];
    for (exp, text) in cases {
        let out = run(dir.path(), exp, text, &[]);
        assert_eq!(out.status.code(), Some(2), "{exp}: {text}");
        assert!(no_outputs(dir.path()));
    }
    let out = run(dir.path(), "steady", "", &["--integrator", "euler"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run(dir.path(), "steady", "[params]\ngamma_plus = -1\n", &[]).stderr)
        .to_string();
    assert!(stderr.contains("gamma_plus"), "{stderr}");
}

#[test]
fn oversized_step_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "evolve", "dt = 0.01\nintegrator = rk4\n", &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(no_outputs(dir.path()));
}

#[test]
fn non_unique_steady_state_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "steady", "[params]\nomega = 0\n", &[]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(no_outputs(dir.path()));
}

#[test]
fn failed_rerun_removes_previous_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "steady", "", &[]).status.code(), Some(0));
    assert_eq!(run(dir.path(), "steady", "[params]\nomega = 0\n", &[]).status.code(), Some(4));
    assert!(no_outputs(dir.path()));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = "t_end = 2\ninitial = random-pure\n";
    for d in [&a, &b] {
        let out = run(d.path(), "evolve", text, &["--seed", "11"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("out/data.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let text = fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 8);
}
