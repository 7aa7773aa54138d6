//! Behavior of the `gp-locate` binary: exit codes, file outputs, and
//! sweep determinism on a small scenario.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gp-locate"))
}

fn small_config_json() -> String {
    r#"{
  "area_width_m": 120.0,
  "area_height_m": 120.0,
  "num_rrh": 8,
  "num_train": 16,
  "num_test": 5,
  "ref_distance": 10.0,
  "ref_loss": -47.5,
  "pathloss_breakpoints": [
    { "max_distance_m": 10.0, "exponent": 0.0 },
    { "max_distance_m": 45.0, "exponent": 2.0 },
    { "max_distance_m": null, "exponent": 6.7 }
  ],
  "tx_power": 21.0,
  "noise_power": -107.5,
  "rx_sensitivity": -106.5,
  "shadowing_variances": [1.0, 3.0],
  "coord_noise_var": 1.0,
  "mc_trials": 3,
  "mc_samples": 4,
  "master_seed": 7,
  "pathloss_mode": "continuous",
  "train_layout": "grid"
}
"#
    .to_string()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, small_config_json()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let out = run(&["sweep", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Usage"), "no usage text: {stderr}");
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
}

#[test]
fn missing_config_file_exits_one() {
    let out = run(&["--config", "/nonexistent/config.json", "simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn predict_without_models_exits_one_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let rss = dir.path().join("test_rss.csv");
    std::fs::write(&rss, "0,1\n-80,-90\n").unwrap();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "predict",
        "--models",
        dir.path().join("models").to_str().unwrap(),
        "--test-rss",
        rss.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("gp-locate train"),
        "missing actionable hint: {stderr}"
    );
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    // A file where a directory is expected makes create_dir_all fail.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "rrh.csv",
        "train_locations.csv",
        "test_locations.csv",
        "train_rss.csv",
        "test_rss_sz1.csv",
        "test_rss_sz3.csv",
    ] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let rss = std::fs::read_to_string(out_dir.join("train_rss.csv")).unwrap();
    let mut lines = rss.lines();
    assert_eq!(lines.next().unwrap(), "0,1,2,3,4,5,6,7");
    assert_eq!(lines.count(), 16);
}

#[test]
fn train_then_predict_produces_prediction_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let models = dir.path().join("models");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        models.to_str().unwrap(),
        "train",
        "--restarts",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(models.join("model_x.json").exists());
    assert!(models.join("model_y.json").exists());

    let sim = dir.path().join("sim");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        sim.to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(out.status.code(), Some(0));

    let preds = dir.path().join("preds");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
        "predict",
        "--models",
        models.to_str().unwrap(),
        "--test-rss",
        sim.join("test_rss_sz1.csv").to_str().unwrap(),
        "--truth",
        sim.join("test_locations.csv").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["predictions_cgp.csv", "predictions_nagp.csv"] {
        let text = std::fs::read_to_string(preds.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "user_id,true_x,true_y,mean_x,mean_y,var_x,var_y,bar2_x,bar2_y,method,S,seed"
        );
        assert_eq!(lines.count(), 5);
    }
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut outputs = Vec::new();
    for name in ["run_a", "run_b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "99",
            "--out",
            out_dir.to_str().unwrap(),
            "sweep",
            "--m-values",
            "4,8",
            "--restarts",
            "2",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push(std::fs::read(out_dir.join("detail.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "detail.csv differs between runs");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut outputs = Vec::new();
    for (name, threads) in [("serial", "1"), ("parallel", "4")] {
        let out_dir = dir.path().join(name);
        let out = bin()
            .env("GP_LOCATE_THREADS", threads)
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "sweep",
                "--restarts",
                "2",
            ])
            .output()
            .expect("binary runs");
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push(std::fs::read(out_dir.join("detail.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "serial and parallel runs disagree");
}

#[test]
fn sweep_report_round_trip_preserves_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let sweep_dir = dir.path().join("sweep");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        sweep_dir.to_str().unwrap(),
        "sweep",
        "--restarts",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let detail = sweep_dir.join("detail.csv");
    assert!(detail.exists());
    assert!(sweep_dir.join("aggregate.csv").exists());
    assert!(sweep_dir.join("plots/rmse_vs_sigma.svg").exists());

    let report_dir = dir.path().join("report");
    let out = run(&[
        "report",
        "--detail",
        detail.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = std::fs::read_to_string(sweep_dir.join("aggregate.csv")).unwrap();
    let b = std::fs::read_to_string(report_dir.join("aggregate.csv")).unwrap();
    assert_eq!(a, b, "re-aggregation drifted from the original");
}

#[test]
fn report_on_handbuilt_detail_rows() {
    let dir = tempfile::tempdir().unwrap();
    let detail = dir.path().join("detail.csv");
    std::fs::write(
        &detail,
        "method,M,sigma_z2,trial,rmse_m,lpd,coverage_2sigma,bcrlb_m,seed\n\
         CGP,30,1,0,10,-40,0.12,9.5,111\n\
         CGP,30,1,1,12,-44,0.08,10.5,222\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "report",
        "--detail",
        detail.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let agg = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,M,sigma_z2,n_trials,rmse_m_mean,rmse_m_se,lpd_mean,lpd_se,coverage_2sigma_mean,coverage_2sigma_se,bcrlb_m_mean,bcrlb_m_se"
    );
    // Hand computation: means 11, -42, 0.1, 10; rmse se = 1.
    let row = lines.next().unwrap();
    assert!(row.starts_with("CGP,30,1,2,11,1,-42,"), "row was {row}");
    assert!(lines.next().is_none());
}

#[test]
fn methods_filter_restricts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--methods",
        "cgp",
        "--out",
        out_dir.to_str().unwrap(),
        "sweep",
        "--restarts",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let detail = std::fs::read_to_string(out_dir.join("detail.csv")).unwrap();
    assert!(!detail.contains("NaGP"));
    // 1 method x 1 M x 2 sigmas x 3 trials data rows + header.
    assert_eq!(detail.lines().count(), 1 + 6);
}
