use std::path::Path;
use std::process::{Command as Process, Output};

use modesel_cli::commands::{run_benchmark, run_optimize, run_reproduce, run_sweep, Status};
use modesel_cli::config::{apply_override, ScenarioConfig};
use proptest::prelude::*;

fn binary(args: &[&str], out: &Path) -> Output {
    Process::new(env!("CARGO_BIN_EXE_modesel")).args(args).arg("--out").arg(out).output().unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn leaky() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.count_model.leak_even = 0.07;
    cfg
}

#[test]
fn default_optimize_gives_unit_norm_twenty_mode_pumps() {
    let out = run_optimize(&ScenarioConfig::default());
    assert_eq!(out.status(), Status::Ok);
    assert_eq!(out.record.thetas.len(), 3);
    for t in &out.record.thetas {
        let p = t.pump.as_ref().unwrap();
        assert_eq!(p.coefficients.len(), 20);
        let norm: f64 = p.coefficients.iter().map(|[re, im]| re * re + im * im).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(p.modes.iter().all(|[l, _]| l % 2 == 1));
    }
}

#[test]
fn zero_separation_is_isolated() {
    let mut cfg = ScenarioConfig::default();
    cfg.theta_x_um = vec![0.0, 5.0];
    let out = run_optimize(&cfg);
    assert_eq!(out.status(), Status::Partial);
    assert!(out.record.thetas[0].error.as_ref().unwrap().contains("degenerate"));
    assert!(out.record.thetas[1].pump.is_some());

    let dir = tempfile::tempdir().unwrap();
    let res = binary(&["optimize", "--set", "theta_x_um=[0,5]"], dir.path());
    assert_eq!(res.status.code(), Some(4));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "modesel.run/v1");
    assert!(json["thetas"][0]["error"].is_string());
    assert!(json["thetas"][1]["pump"]["coefficients"].is_array());
}

#[test]
fn feedback_lands_within_five_percent_of_eigen() {
    let mut cfg = ScenarioConfig::default();
    cfg.method = modesel_core::pump_opt::Method::Feedback;
    let out = run_optimize(&cfg);
    for t in &out.record.thetas {
        let p = t.pump.as_ref().unwrap();
        assert!(p.objective >= 0.95 * p.eigen_objective, "{}: {} vs {}", t.theta_x_um, p.objective, p.eigen_objective);
        assert!(!p.trace.is_empty());
    }
}

#[test]
fn config_errors_exit_with_code_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"count_model": {"eta0": 1e-4, "dark": 1}}"#).unwrap();
    let res = binary(&["sweep", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("count_model") && err.contains("dark"), "{err}");

    let res = binary(&["sweep", "--set", "geometry.sigma_s=-3"], &dir.path().join("o"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("geometry.sigma_s"));

    let res = binary(&["sweep", "--set", "trials"], &dir.path().join("o"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn sweep_table_shape_and_monotonicity() {
    let mut cfg = leaky();
    cfg.budgets.n_ave = vec![10.0, 30.0, 90.0, 270.0, 810.0];
    let out = run_sweep(&cfg, true);
    let (_, csv) = out.files.iter().find(|(n, _)| n == "sweep.csv").unwrap();
    assert!(csv.starts_with("# schema: modesel.sweep/v1\ntheta_x_um,n_ave,fidelity,ci_lo,ci_hi,R_A,R_B,R_t"));
    let rows = data_rows(csv);
    assert_eq!(rows.len(), 15);
    for chunk in rows.chunks(5) {
        for w in chunk.windows(2) {
            let hi_next: f64 = w[1][4].parse().unwrap();
            let lo_prev: f64 = w[0][3].parse().unwrap();
            assert!(hi_next >= lo_prev);
        }
    }
    assert!(out.files.iter().any(|(n, s)| n == "sweep.svg" && s.starts_with("<svg")));
}

#[test]
fn saturation_budget_shrinks_with_separation() {
    let mut cfg = leaky();
    cfg.budgets.n_ave = (0..12).map(|k| 10.0 * 1.6f64.powi(k)).collect();
    let out = run_sweep(&cfg, false);
    let saturation: Vec<f64> = out
        .record
        .thetas
        .iter()
        .map(|t| t.curve.iter().find(|p| p.estimate.fidelity >= 0.99).map(|p| p.n_ave_target).unwrap())
        .collect();
    assert!(saturation.windows(2).all(|w| w[1] < w[0]), "{saturation:?}");
}

#[test]
fn benchmark_columns_and_laws() {
    let out = run_benchmark(&leaky(), false);
    assert_eq!(out.status(), Status::Ok);
    let (_, csv) = out.files.iter().find(|(n, _)| n == "benchmark.csv").unwrap();
    assert!(csv.starts_with(
        "# schema: modesel.benchmark/v1\ntheta_x_um,n_direct_68,n_direct_95,n_simulated_68,n_simulated_95,gain_68,gain_95"
    ));
    let b = &out.record.benchmark;
    let d10 = b.iter().find(|r| r.theta_x_um == 10.0).unwrap().n_direct_68.unwrap();
    assert!((d10 - 26.7).abs() < 0.1);
    let d5 = b.iter().find(|r| r.theta_x_um == 5.0).unwrap().n_direct_68.unwrap();
    assert!((d5 / d10 - 16.0).abs() < 1e-10);
    let n95: Vec<f64> = b.iter().map(|r| r.n_simulated_95.unwrap()).collect();
    assert!(n95.windows(2).all(|w| w[1] <= w[0]), "{n95:?}");
    assert!(b.iter().all(|r| r.n_simulated_68.unwrap() <= r.n_simulated_95.unwrap()));
}

#[test]
fn benchmark_flags_rows_that_hit_the_cap() {
    let mut cfg = leaky();
    cfg.benchmark.max_n_ave = 20.0;
    let out = run_benchmark(&cfg, false);
    assert_eq!(out.status(), Status::Partial);
    assert!(out.record.benchmark.iter().any(|r| r.status == "capped" && r.n_simulated_95.is_none()));
}

#[test]
fn reproduce_reports_reference_values_and_is_deterministic() {
    let mut cfg = ScenarioConfig::default();
    cfg.trials = 4000;
    let a = run_reproduce(&cfg, false);
    let b = run_reproduce(&cfg, false);
    assert!(a.report.contains("4000 sessions per point"));
    for v in ["0.75", "0.79", "0.87", "0.77", "0.61", "0.45", "534 / 132 / 62"] {
        assert!(a.report.contains(v), "missing {v}");
    }
    assert_eq!(a.files, b.files);
    let strip = |o: &modesel_cli::Outcome| {
        let mut v = serde_json::to_value(&o.record).unwrap();
        v.as_object_mut().unwrap().remove("metadata");
        v
    };
    assert_eq!(strip(&a), strip(&b));
    for r in &a.record.reproduction {
        assert!((r.n_min_round_trip - r.n_min_reference).abs() < 1e-9);
        assert!((r.r_b.unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn overrides_reach_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let res = binary(&["optimize", "--set", "theta_x_um=[4]", "--seed", "9", "--jobs", "2"], dir.path());
    assert_eq!(res.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["theta_x_um"], serde_json::json!([4.0]));
    assert_eq!(json["config"]["seed"], 9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip_is_idempotent(
        sp in 1.0f64..100.0,
        leak in -1.0f64..1.0,
        thetas in proptest::collection::vec(0.0f64..50.0, 1..5),
        seed in any::<u64>(),
        gain in proptest::option::of(0.1f64..100.0),
        shots in proptest::option::of(1.0f64..1e6),
    ) {
        let mut doc = serde_json::json!({});
        apply_override(&mut doc, &format!("geometry.sigma_p={sp}")).unwrap();
        apply_override(&mut doc, &format!("count_model.leak_even={leak}")).unwrap();
        apply_override(&mut doc, &format!("theta_x_um={}", serde_json::to_string(&thetas).unwrap())).unwrap();
        apply_override(&mut doc, &format!("seed={seed}")).unwrap();
        apply_override(&mut doc, &format!("count_model.gain_opt={}", serde_json::to_string(&gain).unwrap())).unwrap();
        apply_override(&mut doc, &format!("feedback.shots={}", serde_json::to_string(&shots).unwrap())).unwrap();
        let cfg = ScenarioConfig::from_value(doc).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let again = ScenarioConfig::from_json(&text).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(serde_json::to_string(&again).unwrap(), text);
    }

    #[test]
    fn unknown_keys_fail(key in "[a-z]{3,10}") {
        prop_assume!(!["geometry", "theta_x_um", "modes", "method", "feedback", "count_model", "budgets", "benchmark", "trials", "seed", "output_dir"].contains(&key.as_str()));
        let text = format!("{{\"{key}\": 1}}");
        prop_assert!(ScenarioConfig::from_json(&text).is_err());
    }
}
