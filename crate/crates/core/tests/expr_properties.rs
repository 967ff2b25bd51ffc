use magstab::expr::{parse, Expr, Func};
use magstab::harness::corpus;
use magstab::ScalarField;
use proptest::prelude::*;

/// Expressions in three variables whose domains cover all of R^3.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(Expr::var),
        (-3.0f64..3.0).prop_map(Expr::num),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let positive = |e: Expr| Expr::add(Expr::num(1.0), Expr::PowInt(Box::new(e), 2));
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| Expr::Div(Box::new(a), Box::new(positive(b)))),
            (inner.clone(), 0i32..5).prop_map(|(a, k)| Expr::PowInt(Box::new(a), k)),
            (inner.clone(), -1.5f64..1.5).prop_map(move |(a, p)| Expr::Pow(Box::new(positive(a)), Box::new(Expr::num(p)))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
            inner.clone().prop_map(|a| Expr::Call(Func::Cos, Box::new(a))),
            inner.clone().prop_map(|a| Expr::Call(Func::Exp, Box::new(Expr::Call(Func::Sin, Box::new(a))))),
            inner.clone().prop_map(move |a| Expr::Call(Func::Ln, Box::new(positive(a)))),
            inner.prop_map(move |a| Expr::Call(Func::Sqrt, Box::new(positive(a)))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn central_difference(field: &ScalarField, x: &[f64], i: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[i] += h;
    down[i] -= h;
    (field.eval(&up).unwrap() - field.eval(&down).unwrap()) / (2.0 * h)
}

fn assert_matches_fd(field: &ScalarField, x: &[f64]) -> Result<(), TestCaseError> {
    let grad = field.grad_partials(x).unwrap();
    for (i, ad) in grad.iter().enumerate() {
        let fd = central_difference(field, x, i, 1e-6);
        prop_assert!((ad - fd).abs() <= 1e-6 * ad.abs().max(1.0), "{field} at {x:?}: ∂{i} AD {ad} FD {fd}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn dual_partials_match_finite_differences(expr in smooth_expr(), x in point()) {
        assert_matches_fd(&ScalarField::from_expr(expr, 3), &x)?;
    }

    #[test]
    fn corpus_expressions_match_finite_differences(x in point(), pick in 0usize..64) {
        let fields: Vec<ScalarField> = corpus::corpus()
            .into_iter()
            .filter(|d| d.dimension == 3)
            .flat_map(|d| [d.potential, d.f])
            .collect();
        assert_matches_fd(&fields[pick % fields.len()], &x)?;
    }

    #[test]
    fn printing_round_trips(expr in smooth_expr(), x in point()) {
        let once = parse(&expr.to_string(), 3).unwrap();
        let twice = parse(&once.to_string(), 3).unwrap();
        prop_assert_eq!(&once, &twice);
        let (a, b) = (expr.eval(&x).unwrap(), once.eval(&x).unwrap());
        prop_assert!(a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn parser_never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = parse(&String::from_utf8_lossy(&bytes), 4);
    }

    #[test]
    fn parser_never_panics_on_grammar_soup(s in "[x0-9.eE+*/^() -]{0,40}|(sin|cos|exp|ln|sqrt|x1|x2|[()+*^-]){0,20}") {
        match parse(&s, 2) {
            Ok(e) => prop_assert!(e.max_var().is_none_or(|i| i < 2)),
            Err(err) => prop_assert!(err.to_string().contains(':') || err.to_string().contains("deeper")),
        }
    }

    #[test]
    fn evaluation_is_finite_or_an_error(s in "(x1|x2|0|1|2|[()+*/^-]|ln|sqrt){1,16}", a in -3.0f64..3.0, b in -3.0f64..3.0) {
        if let Ok(field) = ScalarField::parse(&s, 2) {
            if let Ok(v) = field.eval(&[a, b]) {
                prop_assert!(v.is_finite(), "{s} gave {v}");
            }
        }
    }
}

#[test]
fn subtraction_is_left_associative_and_powers_right_associative() {
    assert_eq!(parse("x1-x2-x3", 3).unwrap(), parse("(x1-x2)-x3", 3).unwrap());
    assert_eq!(parse("x1^x2^x3", 3).unwrap(), parse("x1^(x2^x3)", 3).unwrap());
    assert_ne!(parse("x1-x2-x3", 3).unwrap(), parse("x1-(x2-x3)", 3).unwrap());
}
