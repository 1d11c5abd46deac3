use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saltlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("saltlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn eps_reports_exact_value() {
    let out = run(&[
        "eps",
        "--family",
        "preimage_zero",
        "--M",
        "4",
        "--N",
        "4",
        "--T",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        json(&out),
        serde_json::json!({"value_num": 7, "value_den": 16})
    );
}

#[test]
fn eps_strategy_and_spec_file() {
    let spec = scratch("spec.json");
    std::fs::write(&spec, r#"{"family": "preimage_zero", "M": 1, "N": 2}"#).unwrap();
    let out = run(&[
        "eps",
        "--spec",
        spec.to_str().unwrap(),
        "--T",
        "1",
        "--strategy",
    ]);
    let v = json(&out);
    assert_eq!(v["value_num"], 1);
    assert_eq!(v["value_den"], 2);
    assert!(v["strategy"].is_object());

    std::fs::write(
        &spec,
        r#"{"family": "preimage_zero", "M": 1, "N": 2, "extra": 1}"#,
    )
    .unwrap();
    let out = run(&["eps", "--spec", spec.to_str().unwrap(), "--T", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn nonuniform_and_multi() {
    let out = run(&[
        "eps-nonuniform",
        "--family",
        "preimage_zero",
        "--M",
        "2",
        "--N",
        "2",
        "--K",
        "2",
        "--S",
        "0",
        "--T",
        "0",
    ]);
    let plain = run(&[
        "eps",
        "--family",
        "preimage_zero",
        "--M",
        "2",
        "--N",
        "2",
        "--K",
        "2",
        "--T",
        "0",
    ]);
    assert_eq!(json(&out), json(&plain));
    let out = run(&[
        "eps-multi",
        "--family",
        "inversion",
        "--M",
        "2",
        "--N",
        "2",
        "--n-challenges",
        "0",
        "--T",
        "1",
    ]);
    assert_eq!(
        json(&out),
        serde_json::json!({"value_num": 1, "value_den": 1})
    );
}

#[test]
fn salting_bound_argmin() {
    let out = run(&[
        "bound", "--name", "salting", "--eps", "1/10", "--S", "4", "--K", "16", "--Lmax", "64",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["argmin_L"], 4);
    assert!(v["value"]["decimal"]
        .as_str()
        .unwrap()
        .starts_with("0.7000"));
}

#[test]
fn other_bounds_run() {
    let out = run(&[
        "bound", "--name", "moment", "--K", "2", "--L", "2", "--c", "1/2",
    ]);
    let v = json(&out);
    assert_eq!(v["exact"], serde_json::json!({"num": 3, "den": 8}));
    assert_eq!(v["bound"], serde_json::json!({"num": 9, "den": 4}));
    let out = run(&["bound", "--name", "compositions", "--K", "2", "--L", "2"]);
    assert_eq!(json(&out)["exact"], "3");
    let out = run(&[
        "bound",
        "--name",
        "salting-mult",
        "--eps-multi",
        "1,1/2,1/4,1/8",
        "--S",
        "1",
        "--K",
        "2",
        "--Lmax",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&[
        "bound",
        "--name",
        "inversion",
        "--S",
        "4",
        "--T",
        "2",
        "--K",
        "8",
        "--N",
        "64",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&[
        "bound",
        "--name",
        "large-advice",
        "--family",
        "preimage_zero",
        "--M",
        "2",
        "--N",
        "2",
        "--S",
        "1",
        "--K",
        "2",
        "--Lmax",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn argument_errors_exit_two_without_output() {
    for args in [
        vec![
            "eps",
            "--family",
            "preimage_zero",
            "--M",
            "4",
            "--N",
            "4",
            "--T",
            "1",
            "--bogus",
        ],
        vec![
            "eps", "--family", "nope", "--M", "4", "--N", "4", "--T", "1",
        ],
        vec![
            "attack",
            "--family",
            "collision",
            "--K",
            "4",
            "--M",
            "4",
            "--N",
            "4",
            "--S",
            "8",
            "--T",
            "2",
        ],
        vec!["bound", "--name", "salting", "--eps", "x", "--K", "2"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn attack_is_seed_deterministic() {
    let args = [
        "attack",
        "--family",
        "collision",
        "--K",
        "16",
        "--M",
        "16",
        "--N",
        "16",
        "--S",
        "48",
        "--T",
        "4",
        "--trials",
        "2000",
        "--seed",
        "9",
    ];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["capacity"], 4);
    assert!(v["estimate"].as_f64().unwrap() >= 0.25 - 3.0 * v["stderr"].as_f64().unwrap());
}

#[test]
fn reduce_emits_trace_and_values() {
    let file = scratch("reduce.json");
    std::fs::write(
        &file,
        r#"{
          "games": [{"family": "preimage_zero", "M": 1, "N": 2}, {"family": "preimage_zero", "M": 1, "N": 2}],
          "algorithm": {
            "programs": [
              {"query": {"oracle": 1, "position": 0, "branches": [{"output": 0}, {"output": 0}]}},
              {"output": 0}
            ],
            "budgets": [1, 1]
          }
        }"#,
    )
    .unwrap();
    let out = run(&["reduce", file.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["before"], serde_json::json!({"num": 1, "den": 4}));
    assert_eq!(v["fair"], true);
    assert_eq!(v["traces"].as_array().unwrap().len(), 4);
}

#[test]
fn qsim_checks_pass_and_manifest_is_written() {
    let manifest = scratch("manifest.json");
    let out = run(&[
        "qsim",
        "--check",
        "equivalence",
        "--M",
        "2",
        "--N",
        "2",
        "--T",
        "2",
        "--trials",
        "3",
        "--seed",
        "5",
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], true);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "qsim");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["params"]["trials"], 3);
    assert_eq!(m["result"], json(&out));

    for check in [
        "unitarity",
        "bounded-db",
        "transition",
        "paths",
        "threshold",
        "lemma5",
        "gh",
    ] {
        let out = run(&[
            "qsim", "--check", check, "--K", "2", "--M", "1", "--N", "2", "--T", "2", "--trials",
            "3", "--seed", "1",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{check}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn qsim_memory_cap_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_saltlab"))
        .args([
            "qsim",
            "--check",
            "unitarity",
            "--M",
            "8",
            "--N",
            "4",
            "--Z",
            "4",
            "--seed",
            "1",
        ])
        .env("SALTLAB_MEM_CAP_MB", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn suite_subset_and_out_file() {
    let path = scratch("suite.json");
    let out = run(&["suite", "--only", "1,4,6", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["criteria"].as_array().unwrap().len(), 3);
    assert_eq!(v["pass"], true);
    assert_eq!(run(&["suite", "--only", "13"]).status.code(), Some(2));
}
