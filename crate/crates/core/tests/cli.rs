use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use sleeperloc::cli;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> (i32, String, String) {
    let mut argv: Vec<OsString> = vec!["sleeperloc".into()];
    argv.extend(args.iter().map(|a| a.as_ref().to_os_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn usage_errors_exit_1() {
    let (code, _, err) = run(&[&"frobnicate"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());

    let (code, _, _) = run(&[&"estimate", &"--run", &"x.csv"]);
    assert_eq!(code, 1);

    let (code, _, err) = run(&[&"detect-eval", &"--pred", &"a", &"--truth", &"b", &"--tol", &"0"]);
    assert_eq!(code, 1);
    assert!(err.contains("tol"));
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let (code, _, err) = run(&[&"compare", &"--config", &missing, &"--out", &tmp.path()]);
    assert_eq!(code, 2);
    assert!(err.contains("nope.json"), "{err}");
}

#[test]
fn malformed_run_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("run.csv");
    fs::write(&bad, "t_s,oops\n1,2\n").unwrap();
    let out = tmp.path().join("est.csv");
    let (code, _, err) = run(&[
        &"estimate",
        &"--run",
        &bad,
        &"--method",
        &"visual",
        &"--config",
        &config("reference.json"),
        &"--out",
        &out,
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("run.csv"), "{err}");
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn compare_matches_the_staged_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("reference.json");
    let staged = tmp.path().join("staged");
    let cmp = tmp.path().join("cmp");

    let (code, _, err) = run(&[&"simulate", &"--config", &cfg, &"--out", &staged]);
    assert_eq!(code, 0, "{err}");
    for method in ["direct", "visual"] {
        let out = staged.join(format!("estimates_{method}.csv"));
        let (code, _, err) = run(&[
            &"estimate",
            &"--run",
            &staged.join("run.csv"),
            &"--method",
            &method,
            &"--config",
            &cfg,
            &"--out",
            &out,
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let (code, table, _) = run(&[&"compare", &"--config", &cfg, &"--out", &cmp]);
    assert_eq!(code, 0);
    assert!(table.contains("Whole Route"));
    assert_eq!(read(&cmp.join("comparison.txt")), table);

    assert_eq!(read(&staged.join("run.csv")), read(&cmp.join("run.csv")));
    for method in ["direct", "visual"] {
        let est = staged.join(format!("estimates_{method}.csv"));
        assert_eq!(read(&est), read(&cmp.join(format!("estimates_{method}.csv"))));
        let (code, json, _) = run(&[&"evaluate", &"--estimates", &est, &"--config", &cfg, &"--format", &"json"]);
        assert_eq!(code, 0);
        assert_eq!(json, read(&cmp.join(format!("report_{method}.json"))));
    }

    let (code, table, _) = run(&[
        &"evaluate",
        &"--estimates",
        &staged.join("estimates_visual.csv"),
        &"--config",
        &cfg,
    ]);
    assert_eq!(code, 0);
    assert_eq!(table.lines().count(), 7);

    let curve = read(&cmp.join("error_curve.csv"));
    assert!(curve.starts_with("t_s,err_direct_m,err_visual_m\n"));
}

#[test]
fn detect_eval_on_simulated_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&[&"simulate", &"--config", &config("reference.json"), &"--out", &tmp.path()]);
    assert_eq!(code, 0);
    let (code, out, _) = run(&[
        &"detect-eval",
        &"--pred",
        &tmp.path().join("detections.csv"),
        &"--truth",
        &tmp.path().join("truth.csv"),
        &"--tol",
        &"15",
    ]);
    assert_eq!(code, 0);
    let f1: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("f1 "))
        .unwrap()
        .parse()
        .unwrap();
    // misses and false positives are injected, so not perfect
    assert!(f1 > 0.9 && f1 < 1.0, "{f1}");
}

#[test]
fn simulate_writes_rasters_when_enabled() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&read(&config("reference.json"))).unwrap();
    cfg["route"]["stations_m"] = serde_json::json!([0, 100]);
    cfg["route"]["tunnels_m"] = serde_json::json!([]);
    cfg["profile"]["dwell_s"] = serde_json::json!(0.0);
    cfg["raster"]["enabled"] = serde_json::json!(true);
    cfg["raster"]["every_n_frames"] = serde_json::json!(100);
    let path = tmp.path().join("small.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out = tmp.path().join("out");
    let (code, _, err) = run(&[&"simulate", &"--config", &path, &"--out", &out]);
    assert_eq!(code, 0, "{err}");
    let pgm = fs::read(out.join("frame_000000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n256 256\n255\n"));
    assert_eq!(pgm.len(), b"P5\n256 256\n255\n".len() + 256 * 256);
}

#[test]
fn calibrate_reports_homography_and_scale() {
    let (code, out, err) = run(&[&"calibrate", &"--points", &config("calibration.json")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("H =\n"));
    assert!(out.contains("r = 100 px/m"), "{out}");
}
