use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssm"))
        .args(args)
        .output()
        .expect("ssm binary runs")
}

fn config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

/// Every listed output exists and every written file is listed.
fn assert_manifest_complete(out: &Path) {
    let m = manifest(out);
    let mut listed: Vec<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    listed.sort();
    let mut present: Vec<String> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    present.sort();
    assert_eq!(listed, present);
}

/// File contents of an output directory, manifest excluded because it
/// records wall-clock time.
fn snapshot(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_ppf_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = config(
        dir.path(),
        "dp.json",
        r#"{"ppf":{"family":"dp","theta":1.0},"bound":5}"#,
    );
    let out = dir.path().join("ok");
    let o = ssm(&["validate-ppf", "--config", s(&ok), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_manifest_complete(&out);
    let balance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("balance.json")).unwrap()).unwrap();
    assert_eq!(balance["holds"], true);

    let bad = config(
        dir.path(),
        "sq.json",
        r#"{"ppf":{"family":"polynomial-f","coefficients":[1,0,1],"theta":1.0},"bound":3}"#,
    );
    let out = dir.path().join("bad");
    let o = ssm(&["validate-ppf", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    // reports are still written on a method failure
    assert_manifest_complete(&out);
    let balance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("balance.json")).unwrap()).unwrap();
    assert_eq!(balance["holds"], false);
    assert_eq!(balance["violations"][0]["composition"], "1");
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let malformed = config(dir.path(), "m.json", "{not json");
    let unknown = config(
        dir.path(),
        "u.json",
        r#"{"ppf":{"family":"dp","theta":1.0},"bogus":1}"#,
    );
    let seeded = config(
        dir.path(),
        "s.json",
        r#"{"model":{"kind":"dp-stick-breaking","params":{"theta":1.0}},"seed":3}"#,
    );
    for args in [
        vec!["validate-ppf", "--config", s(&malformed), "--out", s(&out)],
        vec!["validate-ppf", "--config", s(&unknown), "--out", s(&out)],
        vec!["validate-ppf", "--out", s(&out)],
        vec![
            "sample-weights",
            "--config",
            s(&seeded),
            "--seed",
            "4",
            "--out",
            s(&out),
        ],
        vec!["fit", "--out", s(&out)],
        vec![
            "fit",
            "--preset",
            "grid",
            "--iters",
            "5",
            "--burn-in",
            "5",
            "--out",
            s(&out),
        ],
        vec!["no-such-command"],
        vec![
            "--workers",
            "0",
            "fit",
            "--preset",
            "grid",
            "--out",
            s(&out),
        ],
    ] {
        assert_eq!(code(&ssm(&args)), 2, "{args:?}");
    }
    // agreeing flag and config values are fine
    let o = ssm(&[
        "sample-weights",
        "--config",
        s(&seeded),
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_manifest_complete(&out);
}

#[test]
fn derive_eppf_flags_path_dependence() {
    let dir = TempDir::new().unwrap();
    let ok = config(
        dir.path(),
        "dp.json",
        r#"{"ppf":{"family":"dp","theta":2.0},"bound":4}"#,
    );
    let out = dir.path().join("dp");
    assert_eq!(
        code(&ssm(&["derive-eppf", "--config", s(&ok), "--out", s(&out)])),
        0
    );
    let rows = fs::read_to_string(out.join("eppf.csv")).unwrap();
    // header plus 1 + 2 + 4 + 8 compositions
    assert_eq!(rows.lines().count(), 16);

    let bad = config(
        dir.path(),
        "sq.json",
        r#"{"ppf":{"family":"polynomial-f","coefficients":[1,0,1],"theta":1.0},"bound":4}"#,
    );
    let o = ssm(&[
        "derive-eppf",
        "--config",
        s(&bad),
        "--out",
        s(&dir.path().join("sq")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("path dependent"));
}

#[test]
fn estimates_are_identical_across_reruns_and_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        dir.path(),
        "e.json",
        r#"{"model":{"kind":"logistic-normal","params":{"a":1,"b":5,"sigma2":1}},"draws":3000,"compositions":["1","2-1","1-2","3-1-1"]}"#,
    );
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = ssm(&[
            "--workers",
            workers,
            "estimate-ppf",
            "--config",
            s(&cfg),
            "--seed",
            "17",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_manifest_complete(&out);
        snapshot(&out)
    };
    let first = run("a", "4");
    assert_eq!(first, run("b", "4"));
    assert_eq!(first, run("c", "1"));
    let csv = String::from_utf8(
        first
            .iter()
            .find(|f| f.0 == "estimates.csv")
            .unwrap()
            .1
            .clone(),
    )
    .unwrap();
    assert!(csv.starts_with("composition,j,estimate,stderr,L,ess,seed\n"));
    assert_eq!(csv.lines().count(), 1 + 2 + 3 + 3 + 4);
}

#[test]
fn simulation_and_fit_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let sim = config(
        dir.path(),
        "sim.json",
        r#"{"ppf":{"family":"dp","theta":1.0},"length":6,"reps":50}"#,
    );
    let fit = config(
        dir.path(),
        "fit.json",
        r#"{"preset":"grid","prior":{"prior":"ssm","model":{"kind":"logistic-normal","params":{"a":1,"b":5,"sigma2":1}},"ppf_draws":100},"iters":12,"burn_in":2,"grid_points":20}"#,
    );
    for (cmd, cfg) in [("simulate", &sim), ("fit", &fit)] {
        let snaps: Vec<_> = ["1", "3"]
            .iter()
            .map(|w| {
                let out = dir.path().join(format!("{cmd}-{w}"));
                let o = ssm(&[
                    "--workers",
                    w,
                    cmd,
                    "--config",
                    s(cfg),
                    "--seed",
                    "5",
                    "--out",
                    s(&out),
                ]);
                assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
                assert_manifest_complete(&out);
                assert_eq!(manifest(&out)["seed"], 5);
                snapshot(&out)
            })
            .collect();
        assert_eq!(snaps[0], snaps[1], "{cmd}");
    }
    let chain = fs::read_to_string(dir.path().join("fit-1/chain.txt")).unwrap();
    assert_eq!(chain.lines().count(), 10);
    assert!(chain.lines().all(|l| l.split(' ').count() == 9));
}

#[test]
fn sarcoma_preset_writes_summaries() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sarcoma");
    let o = ssm(&[
        "fit",
        "--preset",
        "sarcoma",
        "--iters",
        "60",
        "--burn-in",
        "10",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_manifest_complete(&out);
    assert!(!out.join("predictive.csv").exists());
    let co = fs::read_to_string(out.join("cocluster.csv")).unwrap();
    assert_eq!(co.lines().count(), 8);
    let k = fs::read_to_string(out.join("k_dist.csv")).unwrap();
    assert!(k.starts_with("k,probability\n"));
    let total: f64 = k
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}
