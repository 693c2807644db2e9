use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ottc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ottc"))
        .current_dir(dir)
        .env_remove("OTTC_SEED")
        .args(args)
        .output()
        .expect("spawn ottc")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ottc(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SUBCOMMANDS: [(&str, &[&str]); 6] = [
    ("gen", &["--vocab", "--count", "--target-len", "--dur", "--noise", "--silence-prob", "--seed", "--out", "--config"]),
    ("train", &["--mode", "--data", "--epochs", "--freeze-last", "--lr", "--warmup", "--batch", "--seed", "--ckpt-out", "--log-out", "--ctc-ckpt", "--drop-threshold"]),
    ("eval", &["--ckpt", "--data", "--mode", "--tolerance-frames", "--drop-threshold", "--report-out"]),
    ("align", &["--alpha", "--beta", "--out"]),
    ("sotd", &["--x", "--y", "--r", "--cost", "--oracle", "--out", "--seed"]),
    ("export-alignment", &["--ckpt", "--data", "--ids", "--out"]),
];

#[test]
fn help_documents_every_flag() {
    let dir = TempDir::new().unwrap();
    let top = ottc(dir.path(), &["--help"]);
    assert!(top.status.success());
    let text = String::from_utf8(top.stdout).unwrap();
    for (sub, flags) in SUBCOMMANDS {
        assert!(text.contains(sub), "{sub} missing from top-level help");
        let out = ottc(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        let help = String::from_utf8(out.stdout).unwrap();
        for f in flags {
            assert!(help.contains(f), "{sub} --help lacks {f}");
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["gen", "--bogus"][..],
        &["gen", "--out", "d.jsonl", "--target-len", "3-8"],
        &["train", "--data", "d.jsonl"],
        &["sotd", "--x", "a", "--y", "b", "--out", "o", "--cost", "manhattan"],
        &["nope"],
        &[],
    ] {
        assert_eq!(ottc(dir.path(), args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_two_with_distinct_messages() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.jsonl"), "{\"id\": \"a\", \"vectors\": [[1.0]]}\n{not json\n").unwrap();
    fs::write(d.join("alpha.json"), "[0.5, 0.6]").unwrap();
    fs::write(d.join("beta.json"), "[1.0]").unwrap();
    fs::write(d.join("short.json"), "[1.0]").unwrap();
    fs::write(d.join("long.json"), "[0.25, 0.25, 0.5]").unwrap();

    let missing = ottc(d, &["align", "--alpha", "nothere.json", "--beta", "beta.json", "--out", "o.json"]);
    let malformed = ottc(d, &["sotd", "--x", "bad.jsonl", "--y", "bad.jsonl", "--oracle", "--out", "o.jsonl"]);
    let not_simplex = ottc(d, &["align", "--alpha", "alpha.json", "--beta", "beta.json", "--out", "o.json"]);
    let infeasible = ottc(d, &["eval", "--ckpt", "beta.json", "--data", "bad.jsonl", "--report-out", "r.json"]);
    let messages: Vec<String> = [&missing, &malformed, &not_simplex, &infeasible].iter().map(|o| stderr(o)).collect();
    for (o, m) in [&missing, &malformed, &not_simplex, &infeasible].iter().zip(&messages) {
        assert_eq!(o.status.code(), Some(2), "{m}");
        assert!(!m.trim().is_empty());
    }
    assert!(messages[0].contains("nothere.json"));
    assert!(messages[1].contains("line 2"), "{}", messages[1]);
    for i in 0..messages.len() {
        for j in i + 1..messages.len() {
            assert_ne!(messages[i], messages[j]);
        }
    }
    assert!(!d.join("o.json").exists());
}

#[test]
fn gen_example_is_rerunnable() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let args = ["gen", "--vocab", "8", "--count", "10", "--target-len", "3:8", "--dur", "2:6", "--noise", "0", "--silence-prob", "0", "--seed", "7", "--out"];
    ok(d, &[&args[..], &["a.jsonl"]].concat());
    ok(d, &[&args[..], &["b.jsonl"]].concat());
    let a = fs::read(d.join("a.jsonl")).unwrap();
    assert_eq!(a, fs::read(d.join("b.jsonl")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 10);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let run = |out: &str, seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_ottc"));
        c.current_dir(d).env_remove("OTTC_SEED").args(["gen", "--count", "3", "--out", out]);
        if let Some(s) = seed {
            c.env("OTTC_SEED", s);
        }
        assert!(c.status().unwrap().success());
        fs::read(d.join(out)).unwrap()
    };
    ok(d, &["gen", "--count", "3", "--seed", "5", "--out", "flag.jsonl"]);
    assert_eq!(run("env.jsonl", Some("5")), fs::read(d.join("flag.jsonl")).unwrap());
    assert_ne!(run("other.jsonl", Some("6")), fs::read(d.join("flag.jsonl")).unwrap());
}

#[test]
fn sotd_self_distance_is_zero() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("a.jsonl"), "{\"id\":\"s\",\"vectors\":[[0.0,1.0],[2.0,0.5],[1.0,1.0]]}\n").unwrap();
    ok(d, &["sotd", "--x", "a.jsonl", "--y", "a.jsonl", "--r", "1", "--cost", "euclid", "--oracle", "--out", "o.jsonl"]);
    let rec: serde_json::Value = serde_json::from_str(fs::read_to_string(d.join("o.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(rec["distance"].as_f64(), Some(0.0));
}

#[test]
fn align_writes_one_based_triples() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("alpha.json"), "[0.2, 0.3, 0.5]").unwrap();
    fs::write(d.join("beta.json"), "[0.5, 0.5]").unwrap();
    ok(d, &["align", "--alpha", "alpha.json", "--beta", "beta.json", "--out", "c.json"]);
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(c["entries"][0][0], 1);
    assert_eq!(c["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn train_then_eval_smoke() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--vocab", "4", "--count", "30", "--target-len", "2:4", "--dur", "2:4", "--noise", "0.2", "--seed", "3", "--out", "d.jsonl"]);
    ok(d, &["--out-dir", "run", "train", "--mode", "ottc", "--data", "d.jsonl", "--epochs", "2", "--freeze-last", "1", "--ckpt-out", "m.json", "--log-out", "log.csv"]);
    assert!(d.join("run/m.json").exists());
    let csv = fs::read_to_string(d.join("run/log.csv")).unwrap();
    assert!(csv.starts_with("epoch,loss,ter,peaky,f1,idr,dropped_pct\n"));
    assert_eq!(csv.lines().count(), 3);
    ok(d, &["eval", "--ckpt", "run/m.json", "--data", "d.jsonl", "--report-out", "r.json"]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    for k in ["peaky_percent", "f1", "idr", "token_error_rate", "dropped_frame_percent"] {
        assert!(r[k].as_f64().unwrap().is_finite(), "{k}");
    }
    let oracle = ottc(d, &["train", "--mode", "ottc-oracle-beta", "--data", "d.jsonl", "--epochs", "1", "--freeze-last", "0", "--ckpt-out", "o.json", "--log-out", "o.csv"]);
    assert_eq!(oracle.status.code(), Some(2));
    assert!(stderr(&oracle).contains("--ctc-ckpt"));
}
