use std::fs;
use std::process::Command;

fn sif() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sif"))
}

#[test]
fn repeated_runs_write_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = sif()
            .args(["run", "--filters", "sif", "--mc-runs", "10", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        outputs.push(fs::read(out.join("summary.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        sif()
            .args(["run", "--filters", "ukf,sif", "--mc-runs", "12", "--format", "json", "--threads", threads])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn table_has_rmse_and_anees_rows_per_filter() {
    let out = sif()
        .args(["run", "--filters", "ekf,ukf,sif", "--mc-runs", "20", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let header: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(header, ["EKF", "UKF", "SIF"]);
    for (i, label) in ["RMSE x1", "RMSE x2", "RMSE x3", "RMSE x4", "ANEES"].iter().enumerate() {
        let row = lines[i + 1];
        assert!(row.starts_with(label), "{row}");
        let values: Vec<&str> = row[label.len()..].split_whitespace().collect();
        assert_eq!(values.len(), 3, "{row}");
        for v in values {
            let (_, decimals) = v.split_once('.').unwrap();
            assert_eq!(decimals.len(), 4);
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn json_summary_reports_default_scenario() {
    let out = sif()
        .args(["run", "--filters", "sif-sqrt", "--mc-runs", "3", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["scenario"]["radar_position"], serde_json::json!([50.0, 0.0]));
    assert_eq!(v["scenario"]["horizon"], 20);
    assert_eq!(v["settings"]["sir"]["max_iterations"], 10);
    assert_eq!(v["reports"][0]["filter"], "sif-sqrt");
    assert_eq!(v["reports"][0]["rmse"].as_array().unwrap().len(), 4);
    assert!(v["reports"][0].get("wall_time").is_none());
}

#[test]
fn csv_lists_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let status = sif()
        .args(["run", "--filters", "ekf", "--mc-runs", "2", "--format", "csv", "--smooth", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let csv = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_index,filter,kind,step,se_x1,se_x2,se_x3,se_x4,nees"
    );
    assert_eq!(lines.count(), 2 * 2 * 21);
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn config_file_values_are_used_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "filters = [\"kf\"]\n[scenario]\nmeasurement = \"linear\"\nmc_runs = 4\nseed = 3\n",
    )
    .unwrap();
    let out = sif()
        .args(["run", "--format", "json", "--mc-runs", "5", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["scenario"]["mc_runs"], 5);
    assert_eq!(v["scenario"]["seed"], 3);
    assert_eq!(v["reports"][0]["filter"], "kf");
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| sif().args(args).output().unwrap().status.code();
    assert_eq!(code(&["validate"]), Some(0));
    assert_eq!(code(&["validate", "--mc-runs", "0"]), Some(1));
    assert_eq!(code(&["run", "--ukf-kappa", "-4", "--mc-runs", "1"]), Some(1));
    assert_eq!(code(&["run", "--filters", "pf"]), Some(1));
    assert_eq!(code(&["run", "--filters", "kf", "--mc-runs", "1"]), Some(1));
    assert_eq!(code(&["run", "--config", "/nonexistent/run.toml"]), Some(1));
}

#[test]
fn validate_lists_every_problem() {
    let out = sif()
        .args(["validate", "--mc-runs", "0", "--nmax", "0", "--ukf-kappa", "-4"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = sif()
        .args(["run", "--filters", "ekf", "--mc-runs", "1", "--out"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
