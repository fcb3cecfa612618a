use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfit"))
        .current_dir(dir)
        .env_remove("SFIT_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_FIT: &[&str] = &["fit", "--rows", "2000", "--hidden", "16,8", "--epochs", "8"];

fn fitted(dir: &Path) {
    let o = sfit(dir, SMALL_FIT);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn fit_writes_checkpoint_and_history() {
    let dir = tempfile::tempdir().unwrap();
    fitted(dir.path());
    let out = dir.path().join("sfit-out");
    let ck = json(&out.join("checkpoint.json"));
    assert_eq!(ck["format"], "sfit-checkpoint");
    assert_eq!(ck["version"], 1);
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,validation_loss,best\n"));
    assert_eq!(history.matches('*').count(), 1);
    let fit = json(&out.join("fit.json"));
    assert_eq!(fit["schema_version"], 1);
    assert_eq!(fit["command"], "fit");
    assert_eq!(fit["config"]["model"]["hidden"], serde_json::json!([16, 8]));
}

#[test]
fn checkpoint_floats_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    fitted(dir.path());
    let text = std::fs::read_to_string(dir.path().join("sfit-out/checkpoint.json")).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    let again: Value = serde_json::from_str(&serde_json::to_string(&value).unwrap()).unwrap();
    assert_eq!(value, again);
    let w = &value["model"]["layers"][0]["weights"]["data"];
    assert!(w.as_array().unwrap().iter().all(|v| v.is_f64()));
}

#[test]
fn early_stopping_marks_best_epoch() {
    let dir = tempfile::tempdir().unwrap();
    // a huge min_delta means no epoch after the first counts as an improvement
    let o = sfit(
        dir.path(),
        &["fit", "--rows", "2000", "--hidden", "8", "--epochs", "30", "--patience", "2", "--min-delta", "1e9"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let history = std::fs::read_to_string(dir.path().join("sfit-out/history.csv")).unwrap();
    let rows: Vec<&str> = history.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r.ends_with('*')).count(), 1);
    let fit = json(&dir.path().join("sfit-out/fit.json"));
    assert_eq!(fit["result"]["history"]["stopped_early"], true);
}

#[test]
fn test_reports_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    fitted(a.path());
    fitted(b.path());
    let ck_a = std::fs::read(a.path().join("sfit-out/checkpoint.json")).unwrap();
    let ck_b = std::fs::read(b.path().join("sfit-out/checkpoint.json")).unwrap();
    assert_eq!(ck_a, ck_b);
    for dir in [&a, &b] {
        let o = sfit(dir.path(), &["test", "--order", "2"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let strip = |dir: &Path| {
        let mut v = json(&dir.join("sfit-out/test.json"));
        assert!(v["generated_at"].as_u64().unwrap() > 0);
        v.as_object_mut().unwrap().remove("generated_at");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn seed_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sfit"))
        .current_dir(dir.path())
        .env("SFIT_SEED", "7")
        .args(SMALL_FIT)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&dir.path().join("sfit-out/fit.json"));
    assert_eq!(fit["config"]["seed"], 7);
    assert_eq!(fit["seeds"][0], serde_json::json!(["root", 7]));
}

#[test]
fn summary_ranks_by_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfit(dir.path(), &["fit", "--rows", "20000", "--hidden", "32,16", "--epochs", "15"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = sfit(dir.path(), &["test"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("sfit-out/test.json"));
    let features = report["result"]["first_order"]["features"].as_array().unwrap();
    let stat = |name: &str| {
        features.iter().find(|f| f["name"] == name).unwrap()["outcome"]["statistic"].as_f64().unwrap()
    };
    assert!(stat("X1") > stat("X3"));
    let summary = stdout(&o);
    let x1 = summary.find("\nX1 ").expect("X1 listed");
    let x3 = summary.find("\nX3 ").expect("X3 listed");
    assert!(x1 < x3, "{summary}");
}

#[test]
fn second_order_reports_failed_gate() {
    let dir = tempfile::tempdir().unwrap();
    // a linear model on two correlated features selects both, leaving nothing
    // for the gate to find
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[data]\nsource = \"correlated-toy\"\nrows = 3000\n\n[model]\nhidden = []\nstep_size = 0.01\n")
        .unwrap();
    let o = sfit(dir.path(), &["--config", "run.toml", "fit"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = sfit(dir.path(), &["test", "--order", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("gate not passed"), "{}", stdout(&o));
    let report = json(&dir.path().join("sfit-out/test.json"));
    assert_eq!(report["result"]["second_order"]["gate"]["passed"], false);
    assert_eq!(report["result"]["second_order"]["pairs"], serde_json::json!([]));
}

fn class_csv(path: &Path, rows: usize, extra_column: bool) {
    let mut text = String::from(if extra_column { "a,b,color,z,label\n" } else { "a,b,color,label\n" });
    for i in 0..rows {
        let a = ((i * 37) % 101) as f64 / 50.0 - 1.0;
        let b = ((i * 53) % 97) as f64 / 48.0 - 1.0;
        let color = ["red", "green", "blue"][i % 3];
        let label = if a + 0.2 * b > 0.0 { "yes" } else { "no" };
        if extra_column {
            text.push_str(&format!("{a},{b},{color},1,{label}\n"));
        } else {
            text.push_str(&format!("{a},{b},{color},{label}\n"));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn partition_by_class_gives_one_report_per_class() {
    let dir = tempfile::tempdir().unwrap();
    class_csv(&dir.path().join("data.csv"), 1500, false);
    let o = sfit(
        dir.path(),
        &[
            "fit",
            "--data",
            "data.csv",
            "--target",
            "label",
            "--categorical",
            "color",
            "--classification",
            "--hidden",
            "8",
            "--epochs",
            "10",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = sfit(dir.path(), &["test", "--partition", "class"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("sfit-out/test.json"));
    let parts = report["result"]["partitions"].as_array().unwrap();
    assert_eq!(parts.len(), 2);
    assert_eq!(parts[0][0], "class-0");
    assert_eq!(parts[1][0], "class-1");
    assert_eq!(report["config"]["data"]["source"], "csv");
}

#[test]
fn mismatched_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    class_csv(&dir.path().join("data.csv"), 600, false);
    class_csv(&dir.path().join("wide.csv"), 100, true);
    let fit = [
        "fit", "--data", "data.csv", "--target", "label", "--categorical", "color", "--classification", "--hidden",
        "4", "--epochs", "2",
    ];
    assert_eq!(code(&sfit(dir.path(), &fit)), 0);
    let o = sfit(dir.path(), &["test", "--data", "wide.csv"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn malformed_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[model]\nhiden = [3]\n").unwrap();
    let o = sfit(dir.path(), &["--config", "bad.toml", "fit"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("hiden"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.toml"), "[test]\nalpha = 2.0\n").unwrap();
    let o = sfit(dir.path(), &["--config", "bad.toml", "fit"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("test.alpha"), "{}", stderr(&o));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "seed = 5\n[data]\nrows = 1000\n[model]\nhidden = [4]\nmax_epochs = 2\n")
        .unwrap();
    let o = sfit(dir.path(), &["--config", "run.toml", "fit", "--hidden", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&dir.path().join("sfit-out/fit.json"));
    assert_eq!(fit["config"]["seed"], 5);
    assert_eq!(fit["config"]["data"]["rows"], 1000);
    assert_eq!(fit["config"]["model"]["hidden"], serde_json::json!([6]));
}

#[test]
fn calibrated_beta_feeds_the_test() {
    let dir = tempfile::tempdir().unwrap();
    fitted(dir.path());
    let o = sfit(dir.path(), &["calibrate", "--grid", "0.05", "--alpha", "1", "--random-models", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cal = json(&dir.path().join("sfit-out/calibration.json"));
    assert_eq!(cal["result"]["chosen"], 0.05);
    assert_eq!(cal["result"]["qualified"], true);

    let o = sfit(dir.path(), &["test"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("sfit-out/test.json"));
    assert_eq!(report["result"]["beta"], 0.05);
    assert!(report["result"]["beta_source"].as_str().unwrap().starts_with("calibration"));

    let o = sfit(dir.path(), &["test", "--beta", "0.001"]);
    assert_eq!(code(&o), 0);
    let report = json(&dir.path().join("sfit-out/test.json"));
    assert_eq!(report["result"]["beta"], 0.001);
}

#[test]
fn calibration_without_a_qualifying_beta_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fitted(dir.path());
    // with beta = 0 random models flag about half the features at alpha = 0.5
    let o = sfit(dir.path(), &["calibrate", "--grid", "0", "--alpha", "0.0001", "--random-models", "3"]);
    let cal = json(&dir.path().join("sfit-out/calibration.json"));
    if cal["result"]["qualified"] == false {
        assert_eq!(code(&o), 3);
        assert_eq!(cal["result"]["chosen"], 0.0);
    } else {
        assert_eq!(code(&o), 0);
    }
}

#[test]
fn loco_restricted_to_named_features() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfit(
        dir.path(),
        &["loco", "--rows", "2000", "--hidden", "8", "--epochs", "5", "--features", "X1,X3"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&dir.path().join("sfit-out/loco.json"));
    let r = &report["result"];
    assert_eq!(r["features"].as_array().unwrap().len(), 2);
    assert_eq!(r["refit_count"], 3);
    assert!(r["total_wall_secs"].as_f64().unwrap() > 0.0);

    let o = sfit(dir.path(), &["loco", "--rows", "500", "--hidden", "4", "--epochs", "1", "--features", "X9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_power_writes_one_row_per_item() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfit(
        dir.path(),
        &[
            "simulate", "--study", "power", "--trials", "2", "--n-train", "1000", "--n-inference", "400", "--n2s",
            "200,400", "--hidden", "8", "--epochs", "3",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sfit-out/power.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "kind,item,alpha,beta1,beta2,n2,frequency,trials");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // per cell: 7 first-order, 7 second-order, 2 gates, plus pairs
    for n2 in ["200", "400"] {
        let cell: Vec<_> = rows.iter().filter(|r| r[5] == n2).collect();
        assert_eq!(cell.iter().filter(|r| r[0] == "first-order").count(), 7);
        assert_eq!(cell.iter().filter(|r| r[0] == "gate").count(), 2);
    }
    for r in &rows {
        let f: f64 = r[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&f));
        assert_eq!(r[7], "2");
    }
}

#[test]
fn simulate_loco_comparison_reports_timing_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfit(dir.path(), &["simulate", "--study", "loco-comparison", "--trials", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sfit-out/loco-comparison.csv")).unwrap();
    assert!(csv.starts_with("feature,sfit_rate,loco_rate,trials\n"));
    let ratio_row = csv.lines().find(|l| l.starts_with("timing_ratio,")).unwrap();
    let ratio: f64 = ratio_row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(ratio > 0.0);
}

#[test]
fn unknown_study_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfit(dir.path(), &["simulate", "--study", "bogus"]);
    assert_eq!(code(&o), 2);
    std::fs::write(dir.path().join("s.toml"), "[simulate]\nstudy = \"bogus\"\n").unwrap();
    let o = sfit(dir.path(), &["--config", "s.toml", "simulate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfit(dir.path(), &["test", "--checkpoint", "nope.json"]);
    assert_eq!(code(&o), 2);
}
