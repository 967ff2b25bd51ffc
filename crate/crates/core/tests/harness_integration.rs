use magstab::charts::{self, BaseSurfaceMap, ChartError, ChartSettings};
use magstab::geometry::MetricSpec;
use magstab::harness::{self, corpus, run, EscapeError, Expected, ProblemDefinition, ProblemError, RunOptions, SweepSettings};
use magstab::par::Execution;
use magstab::ScalarField;

#[test]
fn sweeps_are_byte_identical_across_runs_and_modes() {
    let def = corpus::entry("kolibri").unwrap().unwrap();
    let json = |execution| {
        let settings = SweepSettings { execution, ..SweepSettings::for_problem(&def) };
        serde_json::to_string(&harness::run_epsilon_sweep(&def, &settings)).unwrap()
    };
    let first = json(Execution::Parallel);
    assert_eq!(first, json(Execution::Parallel));
    assert_eq!(first, json(Execution::Sequential));
}

#[test]
fn every_corpus_entry_meets_its_dynamic_expectation() {
    for def in corpus::corpus() {
        let report = harness::run_epsilon_sweep(&def, &SweepSettings::for_problem(&def));
        let g = def.gradient_norm_at_center();
        for (run, eps) in report.runs.iter().zip(&def.epsilons) {
            assert!(run.error.is_none(), "{} ε={eps}: {:?}", def.name, run.error);
            assert_eq!(run.initial_speed, eps * g);
            assert!(run.initial_drift_error <= 1e-10, "{}: {}", def.name, run.initial_drift_error);
            assert!(run.consistency.as_ref().unwrap().max_distance <= 1e-6);
        }
        let escape = harness::detect_escape(&report, None);
        match def.expected {
            Some(Expected::Unstable) => assert!(escape.as_ref().is_ok_and(|v| v.demonstrated), "{}: {escape:?}", def.name),
            Some(Expected::Stable) => assert!(matches!(escape, Err(EscapeError::NoPositiveDrift { .. })), "{}: {escape:?}", def.name),
            None => {}
        }
    }
}

#[test]
fn escape_level_can_be_given_explicitly() {
    let def = corpus::entry("mechanical-plane").unwrap().unwrap();
    let report = harness::run_epsilon_sweep(&def, &SweepSettings::for_problem(&def));
    let v = harness::detect_escape(&report, Some(0.5)).unwrap();
    assert!(!v.level_auto);
    for t in &v.times {
        assert!((t.tau_star.unwrap() - 0.25).abs() < 1e-9);
    }
    assert!(matches!(harness::detect_escape(&report, Some(1e-9)), Err(EscapeError::NoPositiveDrift { .. })));
}

#[test]
fn run_all_is_deterministic_and_meets_expectations() {
    let defs = corpus::corpus();
    let a = run::run_all(&defs, &RunOptions { seed: 7, ..Default::default() });
    let b = run::run_all(&defs, &RunOptions { seed: 7, execution: Execution::Sequential, ..Default::default() });
    assert!(a.all_expected && !a.numerical_failure);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn validation_reports_every_problem_at_once() {
    let text = r#"{
        "name": "broken",
        "dimension": 2,
        "metric": "euclidean",
        "potential": "x1^2 + x3",
        "f": "sin(",
        "center": [1, 0],
        "T": -1,
        "epsilons": [0.01, 0.1]
    }"#;
    let Err(ProblemError::Validation(errors)) = ProblemDefinition::from_json(text, "broken") else {
        panic!("expected validation errors");
    };
    assert!(errors.len() >= 4, "{errors:?}");
}

#[test]
fn problem_files_load_from_disk() {
    let dir = std::env::temp_dir().join(format!("magstab-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("plane.json");
    std::fs::write(&path, corpus::source("mechanical-plane").unwrap()).unwrap();
    let def = harness::load_problem(&path).unwrap();
    assert_eq!(def.name, "mechanical-plane");
    assert!(matches!(harness::load_problem(&dir.join("missing.json")), Err(ProblemError::Io { .. })));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn one_parameter_base_is_rejected_for_a_surface_level_set() {
    // (−s², 0, s) lies in {x1 + x3² = 0} but parameterizes a curve, not the surface.
    let f = ScalarField::parse("x1 + x3^2", 3).unwrap();
    let base = BaseSurfaceMap::parse(&["-x1^2", "0", "x1"], 1).unwrap();
    for s in [-0.3, 0.0, 0.2] {
        let p = base.eval(&[s]).unwrap();
        assert!(f.eval(&p).unwrap().abs() < 1e-15);
    }
    let err = charts::build_chart(&MetricSpec::euclidean(3).unwrap(), &f, base, (-0.1, 0.1), vec![(-0.3, 0.3)], ChartSettings::default());
    assert!(matches!(err, Err(ChartError::IdentityViolation { .. })), "{err:?}");
}
