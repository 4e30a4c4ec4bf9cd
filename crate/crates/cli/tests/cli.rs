use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::{json, Value};
use tempfile::TempDir;

fn powervar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powervar"))
        .args(args)
        .env_remove("POWERVAR_SEED")
        .env_remove("POWERVAR_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny(out: &Path) -> Value {
    json!({
        "dataset": {"synthetic": {"n_train": 400, "n_val": 40, "n_test": 120, "dim": 5, "seed": 2}},
        "loop": {
            "initial_labeled": 40, "final_labeled": 80, "runs": 1,
            "acquisition": {"batch_k": 20, "pool_subset_m": 150},
            "regressor": {"hidden_widths": [16, 16], "epochs": 4}
        },
        "baselines": ["majority"],
        "output_dir": out
    })
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn minimal_run_completes_quickly_and_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.json", &tiny(&out));
    let t = Instant::now();
    let o = powervar(&["run", "--config", &cfg, "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t.elapsed().as_secs() < 60);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["seeds"], json!([0]));
    assert_eq!(manifest["config"]["loop"]["regressor"]["input_dim"], 5);
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(out.join(a.as_str().unwrap()).is_file(), "{a}");
    }
    let run = fs::read_to_string(out.join("runs/powervariance_seed0.csv")).unwrap();
    assert_eq!(run.lines().count(), 1 + 3);
    let acq = fs::read_to_string(out.join("acquisitions/powervariance_seed0.jsonl")).unwrap();
    assert_eq!(acq.lines().count(), 2);
    assert!(!out.join("FAILED").exists());
}

#[test]
fn reruns_are_byte_identical_including_from_the_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    let cfg = write_config(tmp.path(), "c.json", &tiny(&a));
    let args = [
        "--quiet",
        "--strategies",
        "uniform,powervariance",
        "--seeds",
        "3,4",
    ];
    assert!(powervar(&[&["run", "--config", &cfg][..], &args].concat())
        .status
        .success());
    let b_str = b.to_str().unwrap();
    assert!(
        powervar(&[&["run", "--config", &cfg, "--out", b_str][..], &args].concat())
            .status
            .success()
    );
    let resolved = a.join("config.json");
    let c_str = c.to_str().unwrap();
    assert!(powervar(&[
        "run",
        "--config",
        resolved.to_str().unwrap(),
        "--out",
        c_str,
        "--quiet"
    ])
    .status
    .success());
    for name in [
        "runs/uniform_seed3.csv",
        "runs/powervariance_seed4.csv",
        "acquisitions/powervariance_seed3.jsonl",
        "aggregate.csv",
        "baselines.csv",
    ] {
        let first = fs::read(a.join(name)).unwrap();
        assert_eq!(first, fs::read(b.join(name)).unwrap(), "{name}");
        assert_eq!(first, fs::read(c.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn environment_overrides_seed_and_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny(&tmp.path().join("unused")));
    let out = tmp.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_powervar"))
        .args([
            "run",
            "--config",
            &cfg,
            "--quiet",
            "--strategies",
            "uniform",
        ])
        .env("POWERVAR_SEED", "11")
        .env("POWERVAR_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("runs/uniform_seed11.csv").is_file());
    assert!(!tmp.path().join("unused").exists());
}

#[test]
fn unknown_strategy_is_a_config_error_listing_valid_names() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &tiny(&tmp.path().join("o")));
    let o = powervar(&["run", "--config", &cfg, "--strategies", "uniform,bald"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(
        msg.contains("bald") && msg.contains("uniform, topk_variance, powervariance"),
        "{msg}"
    );

    let mut bad = tiny(&tmp.path().join("o"));
    bad["strategies"] = json!(["entropy"]);
    let cfg = write_config(tmp.path(), "bad.json", &bad);
    let o = powervar(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("powervariance"), "{}", stderr(&o));
}

#[test]
fn validate_reports_fatal_findings() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = tiny(&tmp.path().join("o"));
    cfg["loop"]["final_labeled"] = json!(90);
    let path = write_config(tmp.path(), "div.json", &cfg);
    let o = powervar(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("not divisible by batch_k"),
        "{}",
        stderr(&o)
    );

    let mut cfg = tiny(&tmp.path().join("o"));
    cfg["loop"]["acquisition"]["pool_subset_m"] = json!(10);
    let path = write_config(tmp.path(), "pool.json", &cfg);
    let o = powervar(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("pool_subset_m (10) is smaller than batch_k (20)"),
        "{}",
        stderr(&o)
    );

    let mut cfg = tiny(&tmp.path().join("o"));
    cfg["loop"]["initial_labeled"] = json!(420);
    cfg["loop"]["final_labeled"] = json!(440);
    let path = write_config(tmp.path(), "big.json", &cfg);
    let o = powervar(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("exceeds the training split (400)"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn validate_prints_the_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), "ok.json", &tiny(&tmp.path().join("o")));
    let o = powervar(&["validate", "--config", &path, "--seeds", "5,6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(resolved["seeds"], json!([5, 6]));
    assert_eq!(resolved["loop"]["runs"], 2);
    assert_eq!(
        resolved["strategies"],
        json!(["uniform", "topk_variance", "powervariance"])
    );
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn dataset_schema_errors_name_the_line() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("d.jsonl");
    fs::write(
        &data,
        "{\"id\":\"a\",\"split\":\"train\",\"level\":0,\"features\":[1.0]}\n\
         {\"id\":\"b\",\"split\":\"test\",\"level\":7,\"features\":[1.0]}\n",
    )
    .unwrap();
    let mut cfg = tiny(&tmp.path().join("o"));
    cfg["dataset"] = json!({"file": {"path": "d.jsonl"}});
    let path = write_config(tmp.path(), "file.json", &cfg);
    let o = powervar(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));
}

#[test]
fn runtime_failure_leaves_a_marker_and_partial_results() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let mut cfg = tiny(&out);
    cfg["strategies"] = json!(["uniform"]);
    cfg["loop"]["regressor"]["learning_rate"] = json!(1e200);
    let path = write_config(tmp.path(), "boom.json", &cfg);
    let o = powervar(&["run", "--config", &path, "--quiet"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.join("FAILED").is_file());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
}

fn run_grid(tmp: &Path, strategies: &str, seeds: &str) -> std::path::PathBuf {
    let out = tmp.join(format!("grid-{}", strategies.replace(',', "-")));
    let mut cfg = tiny(&out);
    cfg["baselines"] = json!([]);
    let path = write_config(tmp, "grid.json", &cfg);
    let o = powervar(&[
        "run",
        "--config",
        &path,
        "--quiet",
        "--strategies",
        strategies,
        "--seeds",
        seeds,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn report_groups_gains_and_distributions() {
    let tmp = TempDir::new().unwrap();
    let out = run_grid(
        tmp.path(),
        "uniform,topk_variance,powervariance",
        "0,1,2,3,4",
    );
    let o = powervar(&["report", out.to_str().unwrap(), "--svg", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = out.join("report");

    let curves = rows(&report.join("learning_curves.csv"));
    let mut runs = std::collections::BTreeSet::new();
    let mut aggregates = std::collections::BTreeSet::new();
    for r in &curves {
        match r[0].as_str() {
            "run" => runs.insert((r[1].clone(), r[2].clone())),
            "aggregate" => aggregates.insert((r[1].clone(), String::new())),
            other => panic!("group {other}"),
        };
    }
    assert_eq!((runs.len(), aggregates.len()), (15, 3));

    for r in rows(&report.join("level_distribution.csv")) {
        let sum: f64 = r[6..9].iter().map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-9, "{r:?}");
    }
    let gains = rows(&report.join("active_gain.csv"));
    assert!(gains
        .iter()
        .filter(|r| r[1] == "uniform")
        .all(|r| r[6] == "0"));
    assert!(gains
        .iter()
        .any(|r| r[1] == "powervariance" && r[0] == "aggregate"));
    assert_eq!(rows(&report.join("gaps.csv")).len(), 0);
    assert!(fs::read_to_string(report.join("learning_curves.svg"))
        .unwrap()
        .contains("<polyline"));

    // Reports are views: every run row matches the per-run CSV it came from.
    let source = rows(&out.join("runs/powervariance_seed2.csv"));
    let view: Vec<_> = curves
        .iter()
        .filter(|r| r[0] == "run" && r[1] == "powervariance" && r[2] == "2")
        .collect();
    assert_eq!(view.len(), source.len());
    for (v, s) in view.iter().zip(&source) {
        assert_eq!(v[6], s[2]);
    }
}

#[test]
fn uniform_only_gain_is_zero_and_missing_runs_are_flagged() {
    let tmp = TempDir::new().unwrap();
    let out = run_grid(tmp.path(), "uniform", "0,1");
    fs::remove_file(out.join("runs/uniform_seed1.csv")).unwrap();
    let o = powervar(&["report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("gap"));
    let report = out.join("report");
    let gains = rows(&report.join("active_gain.csv"));
    assert!(!gains.is_empty());
    assert!(
        gains.iter().all(|r| r[6].parse::<f64>().unwrap() == 0.0),
        "{gains:?}"
    );
    let gaps = rows(&report.join("gaps.csv"));
    assert_eq!(gaps.len(), 1);
    assert_eq!((gaps[0][0].as_str(), gaps[0][1].as_str()), ("uniform", "1"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = powervar(&["validate", "--config", path.to_str().unwrap(), "--quiet"]);
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
