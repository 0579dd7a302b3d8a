use std::fs;
use std::process::Command;

use cta::cli::{run_command, CliError};
use cta::model::{parse_model, validate_network};
use serde_json::Value;

fn model(name: &str) -> String {
    format!("{}/models/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Result<String, CliError> {
    let mut out = Vec::new();
    run_command(std::iter::once("cta").chain(args.iter().copied()), &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn run_json(args: &[&str]) -> Value {
    serde_json::from_str(&run(args).unwrap()).unwrap()
}

#[test]
fn validate_reports_topology() {
    let v = run_json(&["validate", &model("writer_reader.json")]);
    assert_eq!(v["valid"], true);
    assert_eq!(v["diagnostics"].as_array().unwrap().len(), 0);
    assert_eq!(v["topology"]["classification"], "TwoChainNoGlobals");
    assert_eq!(v["topology"]["max_constant"], 1);
}

#[test]
fn validate_lists_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let doc = fs::read_to_string(model("writer_reader.json"))
        .unwrap()
        .replace(
            "[{ \"id\": \"c\", \"from\": \"A\", \"to\": \"B\" }]",
            "[{ \"id\": \"c\", \"from\": \"A\", \"to\": \"B\" }, { \"id\": \"d\", \"from\": \"A\", \"to\": \"B\" }]",
        );
    fs::write(&path, doc).unwrap();
    let v = run_json(&["validate", path.to_str().unwrap()]);
    assert_eq!(v["valid"], false);
    assert_eq!(v["diagnostics"][0]["kind"], "duplicate-channel-pair");

    fs::write(&path, "{ not json").unwrap();
    let v = run_json(&["validate", path.to_str().unwrap()]);
    assert_eq!(v["valid"], false);
    assert!(v["diagnostics"][0]
        .as_str()
        .unwrap()
        .contains("syntax error"));
}

#[test]
fn reach_with_every_method() {
    let m = model("writer_reader.json");
    for method in ["explore", "oca", "bmps"] {
        let v = run_json(&[
            "reach",
            &m,
            "--method",
            method,
            "--target",
            "A:s2,B:q2,channel-empty",
        ]);
        assert_eq!(v["status"], "reachable", "{method}: {v}");
        assert_eq!(v["method"], method);
        let init = v["witness"]["init"].as_array().unwrap();
        assert_eq!(init, &[Value::from("A:s1"), Value::from("B:q1")]);
        assert!(!v["witness"]["steps"].as_array().unwrap().is_empty());
    }
}

#[test]
fn reach_negative_verdicts() {
    let m = model("writer_reader.json");
    let v = run_json(&["reach", &m, "--method", "oca", "--target", "A:s1,B:q2"]);
    assert_eq!(v["status"], "unreachable");
    assert!(v.get("witness").is_none());
    let v = run_json(&["reach", &m, "--target", "A:s1,B:q2", "--steps", "10"]);
    assert_eq!(v["status"], "exhausted");
    let v = run_json(&[
        "reach",
        &model("two_way.json"),
        "--method",
        "oca",
        "--target",
        "A1:p2",
    ]);
    assert_eq!(v["status"], "error");
    assert!(v["message"].as_str().unwrap().contains("two automata"));
}

#[test]
fn bmps_reach_on_two_way() {
    let v = run_json(&[
        "reach",
        &model("two_way.json"),
        "--method",
        "bmps",
        "--target",
        "A1:p2,A2:q3",
        "--contexts",
        "4",
        "--steps",
        "60",
        "--max-stack",
        "6",
    ]);
    assert_eq!(v["status"], "reachable", "{v}");
}

#[test]
fn simulate_is_seeded() {
    let m = model("two_way.json");
    let a = run(&["simulate", &m, "--steps", "15", "--seed", "7"]).unwrap();
    let b = run(&["simulate", &m, "--steps", "15", "--seed", "7"]).unwrap();
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["configurations"].as_array().unwrap().len(), 16);
    assert_eq!(v["trace"]["steps"].as_array().unwrap().len(), 15);
    assert_eq!(v["configurations"][0], "((p1,0),(q1,0),eps,eps)");
}

#[test]
fn simulate_writes_a_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("walk.json");
    let v = run_json(&[
        "simulate",
        &model("writer_reader.json"),
        "--seed",
        "3",
        "--trace",
        path.to_str().unwrap(),
    ]);
    let written: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written, v["trace"]);
}

#[test]
fn gen_emits_valid_models() {
    let cases: [&[&str]; 4] = [
        &["gen", "subset-sum", "--set", "3,5", "--target", "8"],
        &["gen", "two-counter", &model("transfer.2cm.json")],
        &[
            "gen",
            "two-counter",
            &model("transfer.2cm.json"),
            "--ghosts",
        ],
        &[
            "gen",
            "two-counter",
            &model("pump.selfloop.json"),
            "--variant",
            "selfloop",
        ],
    ];
    for args in cases {
        let net = parse_model(&run(args).unwrap()).unwrap();
        assert!(validate_network(&net).is_empty(), "{args:?}");
    }
}

#[test]
fn gen_output_feeds_reach() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ss.json");
    fs::write(
        &path,
        run(&["gen", "subset-sum", "--set", "2,7", "--target", "9"]).unwrap(),
    )
    .unwrap();
    let v = run_json(&[
        "reach",
        path.to_str().unwrap(),
        "--method",
        "oca",
        "--target",
        "B:r_f",
    ]);
    assert_eq!(v["status"], "reachable");
}

#[test]
fn export_writes_dot_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("writer_reader.json");
    for (what, needle) in [
        ("region:B", "digraph \"region_B\""),
        ("oca", "(s1,0)|(q1,0),eps|0"),
        ("bmps", "digraph"),
    ] {
        let path = dir.path().join("out.dot");
        run(&[
            "export",
            &m,
            "--what",
            what,
            "--dot",
            path.to_str().unwrap(),
        ])
        .unwrap();
        assert!(
            fs::read_to_string(&path).unwrap().contains(needle),
            "{what}"
        );
    }
}

#[test]
fn bad_input_is_reported() {
    let m = model("writer_reader.json");
    let input = |r: Result<String, CliError>| match r {
        Err(e @ CliError::Input(_)) => assert_eq!(e.exit_code(), 1),
        other => panic!("expected an input error, got {other:?}"),
    };
    input(run(&["reach", &m, "--target", "Z:s1"]));
    input(run(&["reach", &m, "--method", "magic", "--target", "A:s1"]));
    input(run(&[
        "export",
        &m,
        "--what",
        "graph",
        "--dot",
        "/dev/null",
    ]));
    input(run(&[
        "export",
        &m,
        "--what",
        "region:Q",
        "--dot",
        "/dev/null",
    ]));
    input(run(&["gen", "two-counter", &m]));
    input(run(&["frobnicate"]));
    match run(&["validate", "/nonexistent/model.json"]) {
        Err(e @ CliError::Io { .. }) => assert_eq!(e.exit_code(), 1),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cta");
    let ok = Command::new(bin)
        .args([
            "reach",
            &model("writer_reader.json"),
            "--target",
            "A:s2,B:q2",
        ])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["status"], "reachable");

    let bad = Command::new(bin)
        .args(["validate", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("cta: "));

    let threads = Command::new(bin)
        .env("CTA_THREADS", "zero")
        .args(["validate", &model("two_way.json")])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(1));

    let usage = Command::new(bin).arg("--bogus").output().unwrap();
    assert!(!usage.status.success());
}
