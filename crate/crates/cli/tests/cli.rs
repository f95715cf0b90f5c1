use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn telemask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telemask"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> Output {
    let out = telemask(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset shared by every test.
fn population() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let pop = tmp.path().join("pop");
        ok(&[
            "synth",
            "--out",
            s(&pop),
            "--users",
            "8",
            "--duration",
            "40",
            "--seed",
            "5",
        ]);
        (tmp, pop)
    })
    .1
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn synth_writes_manifest_with_seed_and_listing() {
    let m: serde_json::Value =
        serde_json::from_slice(&read(population().join("manifest.json"))).unwrap();
    assert_eq!(m["command"], "synth");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["users"], 8);
    assert_eq!(m["identities"].as_array().unwrap().len(), 8);
    assert!(m["sessions"].as_array().is_some());
}

#[test]
fn identity_anonymization_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for file in ["body.csv", "gaze.csv"] {
        let input = population().join("identity_u003/session_2").join(file);
        let out = tmp.path().join(file);
        ok(&[
            "anonymize",
            "--input",
            s(&input),
            "--out",
            s(&out),
            "--mechanism",
            "gaussian(sigma_pos=0)",
        ]);
        assert_eq!(read(out.join(file)), read(&input), "{file}");
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn anonymize_leaves_input_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let input = population().join("identity_u000/session_1/gaze.csv");
    let before = read(&input);
    ok(&[
        "anonymize",
        "--input",
        s(&input),
        "--out",
        s(tmp.path()),
        "--eye",
        "gaussian(sigma_gaze=2)",
    ]);
    assert_eq!(read(&input), before);
    assert_ne!(read(tmp.path().join("gaze.csv")), before);
}

#[test]
fn reid_twice_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "reid",
            "--data",
            s(population()),
            "--out",
            s(&out),
            "--eye",
            "gaussian(sigma_gaze=1)",
            "--body",
            "body_ldp",
            "--seed",
            "11",
        ]);
        (
            read(out.join("report.json")),
            read(out.join("manifest.json")),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn sweep_twice_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "sweep",
            "--data",
            s(population()),
            "--out",
            s(&out),
            "--mechanism",
            "motion_retarget",
            "--param",
            "noise_amp=0,0.1,0.3",
            "--modality",
            "body",
            "--metric",
            "score_ratio",
            "--jobs",
            "1",
        ]);
        [
            "sweep.csv",
            "frontier.csv",
            "selection.json",
            "manifest.json",
        ]
        .map(|f| read(out.join(f)))
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let csv = String::from_utf8(a[0].clone()).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn manifest_replays_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    ok(&[
        "sweep",
        "--data",
        s(population()),
        "--out",
        s(&first),
        "--mechanism",
        "smoothing",
        "--param",
        "B=1,10,40",
        "--modality",
        "gaze",
        "--metric",
        "aoi_accuracy",
        "--seed",
        "3",
    ]);
    let m: serde_json::Value = serde_json::from_slice(&read(first.join("manifest.json"))).unwrap();
    let mut doc = toml::Table::new();
    doc.insert(
        "seed".into(),
        toml::Value::Integer(m["seed"].as_i64().unwrap()),
    );
    doc.insert("sweep".into(), toml::Value::try_from(&m["config"]).unwrap());
    let cfg = tmp.path().join("replay.toml");
    std::fs::write(&cfg, toml::to_string(&doc).unwrap()).unwrap();
    let second = tmp.path().join("second");
    ok(&["sweep", "--config", s(&cfg), "--out", s(&second)]);
    assert_eq!(
        read(first.join("sweep.csv")),
        read(second.join("sweep.csv"))
    );
    assert_eq!(
        read(first.join("manifest.json")),
        read(second.join("manifest.json"))
    );
}

#[test]
fn grid_has_one_row_per_pairing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("grid");
    ok(&["grid", "--data", s(population()), "--out", s(&out)]);
    let csv = String::from_utf8(read(out.join("grid.csv"))).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "body_mech,eye_mech,gaze_ir,body_ir,multi_ir");
    assert_eq!(lines.len(), 1 + 11 * 5);
}

#[test]
fn chimera_and_metrics_run() {
    let tmp = tempfile::tempdir().unwrap();
    let ch = tmp.path().join("ch");
    ok(&[
        "chimera",
        "--gaze",
        s(population()),
        "--body",
        s(population()),
        "--out",
        s(&ch),
    ]);
    let m: serde_json::Value = serde_json::from_slice(&read(ch.join("manifest.json"))).unwrap();
    assert_eq!(m["pairs"].as_array().unwrap().len(), 8);

    let an = tmp.path().join("an");
    ok(&[
        "anonymize",
        "--input",
        s(population()),
        "--out",
        s(&an),
        "--mechanism",
        "identity",
    ]);
    let out = ok(&[
        "metrics",
        "--original",
        s(population()),
        "--anonymized",
        s(&an),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["angular_deg"], 0.0);
    assert_eq!(report["euclidean_m"], 0.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = |n: &str| tmp.path().join(n);
    assert_eq!(code(&telemask(&["frobnicate"])), 1);
    assert_eq!(code(&telemask(&["reid", "--out", s(&out("x"))])), 1);
    assert_eq!(
        code(&telemask(&[
            "reid",
            "--data",
            s(population()),
            "--out",
            s(&out("y")),
            "--eye",
            "gaussian(sigma=",
        ])),
        1
    );
    assert_eq!(
        code(&telemask(&[
            "reid",
            "--data",
            s(&out("missing")),
            "--out",
            s(&out("z"))
        ])),
        2
    );
    let bad = out("bad.csv");
    std::fs::write(&bad, "t,yaw_deg,pitch_deg\n0.0,0,0\n0.0,1,1\n").unwrap();
    assert_eq!(
        code(&telemask(&[
            "anonymize",
            "--input",
            s(&bad),
            "--out",
            s(&out("w")),
            "--mechanism",
            "identity",
        ])),
        2
    );
    let infeasible = telemask(&[
        "sweep",
        "--data",
        s(population()),
        "--out",
        s(&out("sw")),
        "--mechanism",
        "gaussian",
        "--param",
        "sigma_gaze=6,9",
        "--modality",
        "gaze",
        "--metric",
        "angular_deg",
    ]);
    assert_eq!(code(&infeasible), 3);
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("closest"));
    assert!(out("sw").join("sweep.csv").exists());
    assert_eq!(
        code(&telemask(&[
            "sweep",
            "--data",
            s(population()),
            "--out",
            s(&out("sw2")),
            "--mechanism",
            "smoothing",
            "--modality",
            "gaze",
            "--metric",
            "euclidean_m",
        ])),
        1
    );
}
