use magstab::certify::{self, HypothesisProbe, ProbeSettings, Verdict};
use magstab::charts::{self, BaseSurfaceMap, ChartSettings};
use magstab::geometry::{MetricSpec, OneForm};
use magstab::par::Execution;
use magstab::ScalarField;
use proptest::prelude::*;

fn field(s: &str) -> ScalarField {
    ScalarField::parse(s, 3).unwrap()
}

fn conformal_metric() -> MetricSpec {
    MetricSpec::diagonal(vec![field("1 + x2^2"), field("1 + x2^2"), field("2")]).unwrap()
}

fn probe(metric: MetricSpec, u: &str, mu: Option<[&str; 3]>, f: &str, seed: u64, execution: Execution) -> HypothesisProbe {
    HypothesisProbe {
        metric,
        potential: field(u),
        magnetic: mu.map(|m| OneForm::parse(&m).unwrap()),
        f: field(f),
        center: vec![0.0; 3],
        settings: ProbeSettings { samples: 100, delta_min: 1e-6, delta_max: 1e-3, seed, execution, ..Default::default() },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_gradient_flow_is_additive(
        x in prop::collection::vec(-0.3f64..0.3, 3),
        s in -0.2f64..0.2,
        t in -0.2f64..0.2,
    ) {
        let metric = conformal_metric();
        let f = field("x1 + x3^2");
        let a = charts::flow_normalized_gradient(&metric, &f, &x, t).unwrap();
        let composed = charts::flow_normalized_gradient(&metric, &f, &a, s).unwrap();
        let direct = charts::flow_normalized_gradient(&metric, &f, &x, s + t).unwrap();
        let err = composed.iter().zip(&direct).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-7, "{err}");
        let level = f.eval(&direct).unwrap() - f.eval(&x).unwrap() - (s + t);
        prop_assert!(level.abs() <= 1e-8, "{level}");
    }

    #[test]
    fn doubling_f_doubles_ratios(seed in 0u64..1000) {
        let base = probe(MetricSpec::euclidean(3).unwrap(), "(x1^2 - x2^2*x3)^2", Some(["0", "x1", "0"]), "x1 + 0.5*x3", seed, Execution::Sequential);
        let doubled = HypothesisProbe { f: field("2*(x1 + 0.5*x3)"), ..base.clone() };
        for shell in certify::sample_shells(&base).unwrap() {
            for x in &shell.points {
                prop_assert_eq!(doubled.potential_ratio(x).unwrap(), 2.0 * base.potential_ratio(x).unwrap());
                prop_assert_eq!(doubled.magnetic_ratio(x).unwrap(), 2.0 * base.magnetic_ratio(x).unwrap());
            }
        }
        for certify_fn in [certify::certify_potential_condition, certify::certify_magnetic_condition] {
            let (a, b) = (certify_fn(&base).unwrap(), certify_fn(&doubled).unwrap());
            prop_assert_eq!(a.verdict, b.verdict);
            for (ra, rb) in a.shells.iter().zip(&b.shells) {
                prop_assert_eq!(rb.max_ratio, 2.0 * ra.max_ratio);
            }
        }
    }

    #[test]
    fn identity_metric_matches_direct_dot_product(seed in 0u64..1000) {
        let explicit = MetricSpec::parse_matrix(&[vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]]).unwrap();
        let p = probe(explicit, "x3^2 + x1^2*x2^2", None, "x1 + x2*x3", seed, Execution::Sequential);
        for shell in certify::sample_shells(&p).unwrap() {
            for x in &shell.points {
                let du = p.potential.grad_partials(x).unwrap();
                let df = p.f.grad_partials(x).unwrap();
                let direct = du.iter().zip(&df).map(|(a, b)| a * b).sum::<f64>().abs() / p.potential.eval(x).unwrap();
                let got = p.potential_ratio(x).unwrap();
                prop_assert!((got - direct).abs() <= 1e-12 * direct.max(1.0), "{got} vs {direct}");
            }
        }
    }

    #[test]
    fn refutations_carry_witnesses(a in 1i32..4, b in 1i32..4, seed in 0u64..100) {
        let u = format!("x1^{} * x2^{} + x3^2", 2 * a, 2 * b);
        let p = probe(MetricSpec::euclidean(3).unwrap(), &u, None, "x1", seed, Execution::Sequential);
        let r = certify::certify_potential_condition(&p).unwrap();
        if r.verdict == Verdict::Refuted {
            let w = r.witness.as_ref().unwrap();
            prop_assert!(w.ratio.is_finite() && w.potential > 0.0);
        }
    }
}

#[test]
fn shell_tables_are_deterministic_across_runs_and_modes() {
    let run = |execution| {
        let p = probe(MetricSpec::euclidean(3).unwrap(), "x3^2 + x1^2*x2^2", Some(["0", "x1", "0"]), "x1", 42, execution);
        let a = certify::certify_potential_condition(&p).unwrap();
        let b = certify::certify_magnetic_condition(&p).unwrap();
        serde_json::to_string(&(a, b)).unwrap()
    };
    let first = run(Execution::Sequential);
    assert_eq!(first, run(Execution::Sequential));
    assert_eq!(first, run(Execution::Parallel));
    let shells = |seed| {
        let p = probe(MetricSpec::euclidean(3).unwrap(), "x3^2 + x1^2*x2^2", None, "x1", seed, Execution::Sequential);
        certify::certify_potential_condition(&p).unwrap().shells
    };
    assert_ne!(shells(42), shells(43));
}

#[test]
fn curved_chart_is_injective_and_level_preserving() {
    let (chart, report) = charts::build_chart(
        &conformal_metric(),
        &field("x1 + x3^2"),
        BaseSurfaceMap::parse(&["-x2^2", "x1", "x2"], 2).unwrap(),
        (-0.2, 0.2),
        vec![(-0.3, 0.3); 2],
        ChartSettings { grid: 5, ..Default::default() },
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.collisions.is_empty() && report.min_separation >= 1e-10);
    assert!(report.level_derivative.unwrap() <= 1e-6);
    let x = chart.evaluate(&[0.1, 0.05, -0.2]).unwrap();
    assert!((x[0] + x[2] * x[2] - 0.1).abs() <= 1e-8);
}
