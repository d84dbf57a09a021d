use std::path::{Path, PathBuf};
use std::process::Command;

use jmgt_sim::scenario::manufactured_study;
use jmgt_sim::{parse_config, run_scenario, Scenario, ENERGY_COLUMNS};

fn shipped(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

const SMALL: &str = r#"
scenario = "small_data_global"
[kernel]
type = "abel"
alpha = 0.5
[domain]
lengths = ["pi"]
modes = [8]
[time]
dt = 0.01
t_final = 2.0
[initial]
preset = "single_mode"
k = [1]
amplitude = 1e-2
[source]
preset = "decaying_mode"
k = [1]
amplitude = 1e-3
rate = 0.5
"#;

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn zero_data_give_all_zero_energies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&shipped("simulate_zero.toml")).unwrap();
    let verdict = run_scenario(&cfg, dir.path()).unwrap();
    assert!(verdict.passed);
    let (header, rows) = read_csv(&dir.path().join("energies.csv"));
    assert_eq!(header, ENERGY_COLUMNS);
    assert_eq!(rows.len(), 101);
    for (n, row) in rows.iter().enumerate() {
        assert!((row[0] - n as f64 * 0.01).abs() < 1e-12);
        // every energy and norm column; the last one counts Picard iterations
        assert!(row[1..8].iter().all(|&v| v == 0.0), "{row:?}");
    }
    assert!(dir.path().join("checks.json").exists());
}

#[test]
fn row_count_follows_stride() {
    for stride in [1, 3, 7, 200, 1000] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(SMALL).unwrap();
        cfg.output.stride = stride;
        run_scenario(&cfg, dir.path()).unwrap();
        let (_, rows) = read_csv(&dir.path().join("energies.csv"));
        assert_eq!(rows.len(), 200 / stride + 1, "stride {stride}");
        assert_eq!(
            rows[1.min(rows.len() - 1)][0],
            if rows.len() > 1 { stride as f64 * 0.01 } else { 0.0 }
        );
    }
}

#[test]
fn identical_config_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL).unwrap();
    let va = run_scenario(&cfg, a.path()).unwrap();
    let vb = run_scenario(&cfg, b.path()).unwrap();
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "energies.csv"), read(b.path(), "energies.csv"));
    assert_eq!(read(a.path(), "checks.json"), read(b.path(), "checks.json"));
    assert_eq!(va, vb);
}

#[test]
fn small_data_verdict_lists_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let v = run_scenario(&parse_config(SMALL).unwrap(), dir.path()).unwrap();
    let names: Vec<&str> = v.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "completed",
            "z_relation",
            "y_plateau",
            "bootstrap_plateau",
            "energy_identity",
            "energy_inequality"
        ]
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"], "small_data_global");
    assert_eq!(json["checks"][1]["measured"]["h3_z_initial"], 0.0);
    assert!(v.checks[..2].iter().all(|c| c.passed));
}

#[test]
fn convergence_study_reaches_second_order() {
    let cfg = parse_config(&shipped("convergence_study.toml")).unwrap();
    let Scenario::ConvergenceStudy(opts) = &cfg.scenario else {
        unreachable!()
    };
    let (rows, runs) = manufactured_study(cfg.solver(), opts, 1).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].order.is_none());
    for r in &rows[1..] {
        assert!(r.order.unwrap() >= 1.8, "{rows:?}");
    }
    assert!(runs.iter().all(|r| r.completed()));
    let dir = tempfile::tempdir().unwrap();
    assert!(run_scenario(&cfg, dir.path()).unwrap().passed);
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(text.starts_with("dt,error,order\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn kernel_compare_writes_one_series_per_kernel() {
    let text = shipped("kernel_compare.toml").replace("t_final = 10.0", "t_final = 0.5");
    let cfg = parse_config(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let v = run_scenario(&cfg, dir.path()).unwrap();
    assert!(v.passed, "{:?}", v.failed_checks().collect::<Vec<_>>());
    assert_eq!(v.runs.len(), 7);
    for run in &v.runs {
        let (_, rows) = read_csv(&dir.path().join(&run.name).join("energies.csv"));
        assert_eq!(rows.len(), 50 / 10 + 1);
    }
    let summary = std::fs::read_to_string(dir.path().join("kernel_compare.csv")).unwrap();
    assert_eq!(summary.lines().count(), 8);
    assert!(v.runs[0].boundary_gradient_residual > 0.0);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jmgt-sim"))
}

#[test]
fn exit_status_reflects_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("ok.toml");
    std::fs::write(&cfg_path, shipped("simulate_zero.toml")).unwrap();
    let out = dir.path().join("ok");
    let ok = cli()
        .args([
            "run",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--stride",
            "10",
        ])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert_eq!(read_csv(&out.join("energies.csv")).1.len(), 11);

    // unattainable growth on a short horizon: the check fails, exit 1
    let fail = shipped("inviscid_growth.toml")
        .replace("t_final = 100.0", "t_final = 0.2")
        .replace("amplitude = 5.0", "amplitude = 0.01")
        .replace("modes = [32]", "modes = [8]");
    let fail_path = dir.path().join("fail.toml");
    std::fs::write(&fail_path, fail).unwrap();
    let out = cli()
        .args(["run", fail_path.to_str().unwrap()])
        .env("JMGT_SIM_OUT", dir.path().join("env_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL inviscid_growth"));
    assert!(dir.path().join("env_out/checks.json").exists());

    let bad_path = dir.path().join("bad.toml");
    std::fs::write(
        &bad_path,
        "scenario = \"simulate\"\n[kernel]\ntype = \"abel\"\nalpha = 1.5\n",
    )
    .unwrap();
    let out = cli().args(["run", bad_path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel.alpha"));
}

#[test]
fn check_kernel_runs_the_admissibility_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("k.toml");
    std::fs::write(&cfg_path, shipped("small_data_global.toml")).unwrap();
    let out = cli()
        .args([
            "check-kernel",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS abel(alpha=0.5)/kernel_monotonicity"));
    assert!(stdout.contains("PASS abel(alpha=0.5)/discrete_positivity"));
    assert!(!dir.path().join("energies.csv").exists());
}
