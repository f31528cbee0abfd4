use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use critreg_cli::{run, ExperimentConfig, Kind};
use serde_json::Value;

fn critreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critreg"))
        .args(args)
        .env("CRITREG_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("critreg-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const DYNAMICS: [&str; 8] = [
    "dynamics",
    "--map",
    "parabolic",
    "--param",
    "1",
    "--k-max",
    "200",
    "--grid",
];

#[test]
fn passing_run_exits_zero_and_writes_outputs() {
    let dir = scratch("pass");
    let out = dir.join("r");
    let mut args = DYNAMICS.to_vec();
    args.extend(["500", "--out", out.to_str().unwrap()]);
    let o = critreg(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["kind"], "dynamics");
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));
    assert!(out.join("wandering.csv").exists());
    // The output directory is not part of the echoed configuration.
    assert!(r["config"].get("out").is_none());
}

#[test]
fn failing_check_exits_two() {
    let dir = scratch("fail");
    let out = dir.join("r");
    let o = critreg(&[
        "boxes",
        "--sequence",
        "b-general",
        "--d",
        "3",
        "--alpha",
        "1/3,1/3,1/3",
        "--n-max",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL [boxes.multiplicity]"));
    // `report` replays the stored status.
    let again = critreg(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&again), 2);
    assert!(String::from_utf8_lossy(&again.stdout).contains("boxes.multiplicity"));
}

#[test]
fn usage_and_precondition_errors_exit_one() {
    let o = critreg(&[
        "dynamics", "--map", "logistic", "--param", "0.5", "--k-max", "20",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-hyperbolic-fixed-point"));
    assert_eq!(
        code(&critreg(&["lemma1", "--d", "2"])),
        1,
        "lemma1 needs a seed"
    );
    assert_eq!(code(&critreg(&["report", "/nonexistent/critreg"])), 1);
    assert_eq!(code(&critreg(&["dynamics", "--map", "nope"])), 1);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = scratch("repro");
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.join(format!("run{i}"))).collect();
    for r in &runs {
        let o = critreg(&[
            "lemma1",
            "--d",
            "2",
            "--n",
            "4,6",
            "--seed",
            "7",
            "--samples",
            "200",
            "--out",
            r.to_str().unwrap(),
        ]);
        assert!(
            code(&o) == 0 || code(&o) == 2,
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert_eq!(
        fs::read(runs[0].join("report.json")).unwrap(),
        fs::read(runs[1].join("report.json")).unwrap()
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("config");
    let cfg = dir.join("c.json");
    fs::write(
        &cfg,
        r#"{"kind": "dynamics", "map": "parabolic", "param": 1.0, "k-max": 50, "grid": 300}"#,
    )
    .unwrap();
    let out = dir.join("r");
    let o = critreg(&[
        "dynamics",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = &report(&out)["config"];
    assert_eq!(c["param"], 2.0);
    assert_eq!(c["k-max"], 50);

    // Wrong kind, unknown keys and broken JSON are all rejected.
    assert_eq!(
        code(&critreg(&["boxes", "--config", cfg.to_str().unwrap()])),
        1
    );
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"kind": "dynamics", "colour": 3}"#).unwrap();
    assert_eq!(
        code(&critreg(&["dynamics", "--config", bad.to_str().unwrap()])),
        1
    );
    fs::write(&bad, "{").unwrap();
    assert_eq!(
        code(&critreg(&["dynamics", "--config", bad.to_str().unwrap()])),
        1
    );
}

#[test]
fn library_runs_match_the_binary() {
    let dir = scratch("lib");
    let out = dir.join("r");
    let o = critreg(&[
        "identity",
        "--model",
        "translation",
        "--d",
        "2",
        "--seed",
        "3",
        "--samples",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        code(&o) == 0 || code(&o) == 2,
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let cfg = ExperimentConfig {
        kind: Some(Kind::Identity),
        model: Some("translation".into()),
        d: Some(2),
        seed: Some(3),
        samples: Some(20),
        ..ExperimentConfig::default()
    };
    let lib: Value = serde_json::from_str(&run(&cfg).unwrap().to_json()).unwrap();
    assert_eq!(lib, report(&out));
}
