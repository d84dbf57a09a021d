use std::f64::consts::PI;
use std::path::PathBuf;

use jmgt_core::solver::HistoryBackend;
use jmgt_core::KernelFamily;
use jmgt_sim::config::{InitialPreset, SourcePreset};
use jmgt_sim::{parse_config, ConfigError, Scenario, ScenarioKind};

fn shipped(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

const MINIMAL: &str = r#"
scenario = "simulate"
[kernel]
type = "abel"
alpha = 0.5
[domain]
lengths = ["pi"]
modes = [8]
[time]
dt = 0.01
t_final = 1.0
[initial]
preset = "zero"
"#;

fn validation_key(text: &str) -> String {
    match parse_config(text) {
        Err(ConfigError::Validation { key, .. }) => key,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn empty_file_lacks_scenario() {
    assert_eq!(validation_key(""), "scenario");
}

#[test]
fn canonical_example_parses_to_documented_values() {
    let cfg = parse_config(&shipped("small_data_global.toml")).unwrap();
    let Scenario::SmallDataGlobal(g) = &cfg.scenario else {
        panic!("wrong scenario {:?}", cfg.scenario)
    };
    assert_eq!(
        (g.plateau_start, g.plateau_tolerance, g.transient_fraction),
        (0.5, 0.05, 0.1)
    );
    assert_eq!(cfg.kernel.family(), KernelFamily::Abel { alpha: 0.5 });
    let s = cfg.solver();
    assert_eq!((s.tau, s.c, s.delta, s.sigma), (1.0, 1.0, 0.5, 1.0));
    assert_eq!((s.dt, s.t_final, s.steps()), (5e-3, 100.0, 20_000));
    assert_eq!(s.domain.lengths(), vec![PI]);
    assert_eq!(s.domain.modes(), vec![32]);
    assert_eq!(s.history, HistoryBackend::Exact);
    assert!(s.dealias && s.track_identity);
    assert_eq!(
        cfg.initial,
        InitialPreset::SingleMode {
            k: vec![1],
            amplitude: 1e-2
        }
    );
    assert_eq!(
        cfg.source,
        SourcePreset::DecayingMode {
            k: vec![1],
            amplitude: 1e-3,
            rate: 0.5
        }
    );
    assert_eq!((cfg.output.stride, cfg.output.seed), (20, 2024));
    assert_eq!(cfg.output.dir, PathBuf::from("out/small_data_global"));
}

#[test]
fn all_shipped_configs_parse() {
    for (name, kind) in [
        ("small_data_global.toml", ScenarioKind::SmallDataGlobal),
        ("inviscid_growth.toml", ScenarioKind::InviscidGrowth),
        ("convergence_study.toml", ScenarioKind::ConvergenceStudy),
        ("kernel_compare.toml", ScenarioKind::KernelCompare),
        ("positivity_suite.toml", ScenarioKind::PositivitySuite),
        ("simulate_zero.toml", ScenarioKind::Simulate),
    ] {
        let cfg = parse_config(&shipped(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(cfg.scenario.kind(), kind);
    }
}

#[test]
fn abel_range_is_a_validation_error() {
    assert_eq!(
        validation_key(&MINIMAL.replace("alpha = 0.5", "alpha = 1.5")),
        "kernel.alpha"
    );
    let ml = MINIMAL.replace(
        "type = \"abel\"\nalpha = 0.5",
        "type = \"mittag_leffler\"\nalpha = 0.5\nbeta = 0.3",
    );
    assert_eq!(validation_key(&ml), "kernel.beta");
}

#[test]
fn unknown_keys_are_parse_errors_with_position() {
    let text = MINIMAL.replace("t_final = 1.0", "t_final = 1.0\nt_finl = 2.0");
    match parse_config(&text) {
        Err(ConfigError::Parse { line, message, .. }) => {
            assert_eq!(line, 12, "{message}");
            assert!(message.contains("t_finl"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match parse_config("scenario = \"simulate\"\nbogus = 1\n") {
        Err(ConfigError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 1)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_config("scenario = ["),
        Err(ConfigError::Parse { line: 1, .. })
    ));
}

#[test]
fn scenario_specific_requirements() {
    assert_eq!(
        validation_key(&MINIMAL.replace("[initial]\npreset = \"zero\"", "")),
        "initial"
    );
    assert_eq!(
        validation_key(&MINIMAL.replace("simulate", "kernel_compare")),
        "compare.kernels"
    );
    assert_eq!(
        validation_key(&format!("{MINIMAL}\n[global]\nplateau_start = 0.5\n")),
        "global"
    );
    assert_eq!(validation_key(&MINIMAL.replace("modes = [8]", "modes = [0]")), "domain");
    assert_eq!(validation_key(&MINIMAL.replace("dt = 0.01", "dt = -0.01")), "time.dt");
    assert_eq!(validation_key(&MINIMAL.replace("\"pi\"", "\"tau\"")), "domain.lengths");
    let single = MINIMAL.replace(
        "preset = \"zero\"",
        "preset = \"single_mode\"\nk = [9]\namplitude = 1.0",
    );
    assert_eq!(validation_key(&single), "initial.k");
    let soe = format!("{MINIMAL}\n[numerics]\nsoe_tol = 1e-6\n");
    assert_eq!(validation_key(&soe), "numerics.soe_tol");
    let inviscid = MINIMAL
        .replace("simulate", "inviscid_growth")
        .replace("[kernel]", "[physics]\ndelta = 0.0\n[kernel]");
    assert_eq!(validation_key(&inviscid), "physics.delta");
}

#[test]
fn convergence_study_needs_a_closed_form_case() {
    let base = shipped("convergence_study.toml");
    assert_eq!(
        validation_key(&base.replace("type = \"exponential\"\nbeta = 0.6", "type = \"abel\"\nalpha = 0.5")),
        "convergence.phi"
    );
    assert_eq!(
        validation_key(&base.replace("sigma = 0.0", "sigma = 1.0")),
        "physics.sigma"
    );
    // φ'(0) = −φ(0)/τ fails for φ = e^{-t} with τ = 2
    assert_eq!(
        validation_key(&base.replace("phi = [[1.5, 1.0], [-0.5, 2.0]]", "phi = [[1.0, 1.0]]")),
        "convergence.phi"
    );
    assert_eq!(
        validation_key(&format!("{base}\n[initial]\npreset = \"zero\"\n")),
        "initial"
    );
}

#[test]
fn positivity_suite_needs_only_a_kernel() {
    let cfg = parse_config("scenario = \"positivity_suite\"\n[kernel]\ntype = \"polynomial\"\np = 2.0\n").unwrap();
    assert!(cfg.solver.is_none());
    assert_eq!(
        (cfg.positivity.trials, cfg.positivity.steps, cfg.positivity.dt),
        (1000, 128, 0.05)
    );
    assert_eq!(
        validation_key("scenario = \"positivity_suite\"\n[kernel]\ntype = \"dirac\"\n"),
        "kernel.type"
    );
}
