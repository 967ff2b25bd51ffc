use magstab::dynamics::{self, IntegrationSettings, LagrangianSystem, Scaling, State};
use magstab::geometry::{self, MetricSpec, OneForm, PointGeometry};
use magstab::ode::Tolerances;
use magstab::ScalarField;
use proptest::prelude::*;

fn curved_metric() -> MetricSpec {
    MetricSpec::parse_matrix(&[
        vec!["2 + sin(x1)*x2", "0.3*x3", "0"],
        vec!["0.3*x3", "1 + x1^2", "0.1*cos(x2)"],
        vec!["0", "0.1*cos(x2)", "exp(0.2*x3)"],
    ])
    .unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.8f64..0.8, 3)
}

fn field(s: &str) -> ScalarField {
    ScalarField::parse(s, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn christoffel_symbols_are_metric_compatible(x in point()) {
        let metric = curved_metric();
        let g = metric.matrix_at(&x).unwrap();
        let gamma = geometry::christoffel(&metric, &x).unwrap();
        let h = 1e-6;
        for c in 0..3 {
            let mut up = x.clone();
            let mut down = x.clone();
            up[c] += h;
            down[c] -= h;
            let dg = (metric.matrix_at(&up).unwrap() - metric.matrix_at(&down).unwrap()) / (2.0 * h);
            for a in 0..3 {
                for b in 0..3 {
                    let rhs: f64 = (0..3).map(|d| g[(d, b)] * gamma.get(d, a, c) + g[(a, d)] * gamma.get(d, b, c)).sum();
                    prop_assert!((dg[(a, b)] - rhs).abs() <= 1e-6, "∂{c} g{a}{b}: {} vs {rhs}", dg[(a, b)]);
                }
            }
        }
    }

    #[test]
    fn point_geometry_invariants(x in point()) {
        let form = OneForm::parse(&["x2*x3", "sin(x1)", "x1^2*x2"]).unwrap();
        let pg = PointGeometry::at(&curved_metric(), Some(&form), &x).unwrap();
        let id = &pg.metric * &pg.inverse;
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((id[(a, b)] - want).abs() <= 1e-10);
                for c in 0..3 {
                    prop_assert_eq!(pg.christoffel.get(a, b, c), pg.christoffel.get(a, c, b));
                }
            }
        }
        let f = pg.magnetic.unwrap();
        prop_assert_eq!(f.clone(), -f.transpose());
    }

    #[test]
    fn gradient_is_dual_to_the_differential(x in point(), ws in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 100)) {
        let metric = curved_metric();
        let f = field("x1*exp(x2) + x3^3");
        let grad = geometry::riemannian_gradient(&metric, &f, &x).unwrap();
        let df = f.grad_partials(&x).unwrap();
        let at = metric.factor(&x).unwrap();
        for w in &ws {
            let lhs: f64 = df.iter().zip(w).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - at.inner(&grad, w)).abs() <= 1e-8);
        }
    }

    #[test]
    fn magnetic_tensor_is_linear(x in point()) {
        let a = ["x2*x3", "sin(x1)", "0"];
        let b = ["x1^2", "x3", "cos(x2)"];
        let sum: Vec<String> = a.iter().zip(&b).map(|(p, q)| format!("({p}) + ({q})")).collect();
        let fa = geometry::magnetic_tensor(&OneForm::parse(&a).unwrap(), &x).unwrap();
        let fb = geometry::magnetic_tensor(&OneForm::parse(&b).unwrap(), &x).unwrap();
        let fs = geometry::magnetic_tensor(&OneForm::parse(&sum).unwrap(), &x).unwrap();
        prop_assert_eq!(fs, fa + fb);
    }

    #[test]
    fn energy_is_conserved_on_random_orbits(v in prop::collection::vec(-1.0f64..1.0, 3), eps in prop::sample::select(vec![0.1, 0.03])) {
        let system = LagrangianSystem::new(
            curved_metric(),
            field("(x1 + x3^2)^2 + x2^2"),
            Some(OneForm::parse(&["0", "x1 + x3^2", "0"]).unwrap()),
            Scaling::Rescaled(eps),
        )
        .unwrap();
        let settings = IntegrationSettings { tol: Tolerances { abs: 1e-11, rel: 1e-11 }, ..Default::default() };
        let t = dynamics::integrate(&system, &State::new(0.0, vec![0.0; 3], v), 0.3, &settings).unwrap();
        prop_assert!(t.energy_drift <= 1e-6, "{}", t.energy_drift);
        let fwd: Vec<f64> = t.forward.steps.iter().map(|s| s.tau).collect();
        let bwd: Vec<f64> = t.backward.steps.iter().map(|s| s.tau).collect();
        prop_assert!(fwd[0] == 0.0 && bwd[0] == 0.0);
        prop_assert!(fwd.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(bwd.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mechanical_orbits_are_time_reversible(v in prop::collection::vec(-1.0f64..1.0, 3)) {
        let system = LagrangianSystem::new(curved_metric(), field("x1^2 + x2^2*x3^2 + x3^2"), None, Scaling::Unscaled).unwrap();
        let settings = IntegrationSettings { tol: Tolerances { abs: 1e-12, rel: 1e-12 }, ..Default::default() };
        let start = State::new(0.0, vec![0.1, -0.2, 0.05], v);
        let out = dynamics::integrate(&system, &start, 1.0, &settings).unwrap();
        let end = out.forward.last().unwrap();
        let back = State::new(0.0, end.x.clone(), end.v.iter().map(|c| -c).collect());
        let ret = dynamics::integrate(&system, &back, 1.0, &settings).unwrap();
        let last = ret.forward.last().unwrap();
        let err = last.x.iter().zip(&start.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-6, "{err}");
    }
}
