use std::path::Path;
use std::process::{Command, Output};

fn superres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superres"))
        .args(args)
        .env_remove("SUPERRES_LOG")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(code(&superres(&[])), 2);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&superres(&["gen", "--delta", "0.2", "--bogus"])), 2);
}

#[test]
fn malformed_json_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = superres(&["measure", "--in", p(&bad), "--K", "4"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}

#[test]
fn generate_measure_recover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    let meas = dir.path().join("meas.json");
    let est = dir.path().join("est.json");
    let dual = dir.path().join("dual.json");
    let grid = dir.path().join("grid.csv");

    let o = superres(&["gen", "--delta", "0.15", "--seed", "3", "--out", p(&truth)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = superres(&["measure", "--in", p(&truth), "--K", "8", "--out", p(&meas)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = superres(&[
        "recover", "--in", p(&meas), "--truth", p(&truth), "--dual-out", p(&dual), "--out",
        p(&est),
    ]);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert_eq!(code(&o), 0, "{stderr}");
    let line = stderr
        .lines()
        .find(|l| l.starts_with("support_error = "))
        .expect("support error reported");
    let err: f64 = line["support_error = ".len()..].trim().parse().unwrap();
    assert!(err <= 1e-3, "{err}");

    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&est).unwrap()).unwrap();
    assert!(v.is_object());

    let o = superres(&["plot", "--dual-poly", p(&dual), "--grid", "64", "--out-csv", p(&grid)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&grid).unwrap();
    assert!(text.starts_with("t,re,im,abs\n"));
    assert_eq!(text.lines().count(), 65);
}

#[test]
fn fourier_baseline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    let meas = dir.path().join("meas.json");
    assert_eq!(code(&superres(&["gen", "--delta", "0.25", "--seed", "1", "--out", p(&truth)])), 0);
    let o = superres(&["measure", "--in", p(&truth), "--K", "10", "--fourier", "--out", p(&meas)]);
    assert_eq!(code(&o), 0);
    let o = superres(&["recover", "--in", p(&meas), "--baseline-fourier", "--truth", p(&truth)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let truth = dir.path().join(format!("truth{tag}.json"));
        let meas = dir.path().join(format!("meas{tag}.json"));
        let est = dir.path().join(format!("est{tag}.json"));
        assert_eq!(code(&superres(&["gen", "--delta", "0.2", "--seed", "9", "--out", p(&truth)])), 0);
        assert_eq!(
            code(&superres(&["measure", "--in", p(&truth), "--K", "6", "--out", p(&meas)])),
            0
        );
        assert_eq!(code(&superres(&["recover", "--in", p(&meas), "--out", p(&est)])), 0);
        [truth, meas, est].map(|f| std::fs::read(f).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn iteration_limit_is_a_recoverable_failure() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    let meas = dir.path().join("meas.json");
    assert_eq!(code(&superres(&["gen", "--delta", "0.2", "--out", p(&truth)])), 0);
    assert_eq!(code(&superres(&["measure", "--in", p(&truth), "--K", "6", "--out", p(&meas)])), 0);
    let o = superres(&["recover", "--in", p(&meas), "--max-iters", "2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn certify_reports_a_valid_certificate() {
    let o = superres(&["certify", "--support", "0.1,0.35,0.6", "--signs", "1,-1,0:1", "--fc", "10"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    let line = out.lines().find(|l| l.starts_with("off_support_max = ")).unwrap();
    let v: f64 = line["off_support_max = ".len()..].parse().unwrap();
    assert!(v < 1.0);
    assert!(out.contains("far_region"));
}

#[test]
fn certify_rejects_bad_torus_cutoff() {
    let o = superres(&["certify", "--support", "0.1,0.5", "--fc", "10", "--torus"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn invert_approaches_the_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"points":[0.37],"weights":[[2.0,1.0]]}"#).unwrap();
    let o = superres(&["invert", "--in", p(&m), "--K", "2000", "--t", "0.37"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["abs"].as_f64().unwrap() - 5f64.sqrt()).abs() < 1e-3);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let csv = dir.path().join("out.csv");
    let svg = dir.path().join("out.svg");
    std::fs::write(
        &spec,
        r#"{"K": 6, "N_values": [4], "sigma_values": [0.1], "delta_grid": [0.3],
            "trials_per_cell": 2, "seed": 1}"#,
    )
    .unwrap();
    let o = superres(&["sweep", "--spec", p(&spec), "--out-csv", p(&csv), "--out-svg", p(&svg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "delta,method,sigma,N,success,support_err,duality_gap,wall_time_s,seed,outcome\n"
    ));
    assert_eq!(text.lines().count(), 5);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let truth = dir.path().join("truth.json");
    std::fs::write(&cfg, "# defaults\ndelta = 0.2\nseed = 4\n").unwrap();
    let o = superres(&["--config", p(&cfg), "gen", "--out", p(&truth)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(truth.exists());
}
