use lsys_core::expr::{parse, var_list, Expr, ExpressionField, Func};
use proptest::prelude::*;

const NVARS: usize = 3;

fn names() -> Vec<String> {
    ["x", "y", "z'"].iter().map(|s| s.to_string()).collect()
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-3.0f64..3.0).prop_map(|c| Expr::Const((c * 4.0).round() / 4.0)),
        (0..NVARS).prop_map(Expr::Var),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Add(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Sub(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Mul(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Div(b(a), b(c))),
            (inner.clone(), 1u8..4).prop_map(move |(a, k)| Expr::Pow(b(a), b(Expr::Const(k as f64)))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Pow(b(a), b(c))),
            (
                prop_oneof![
                    Just(Func::Sqrt),
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Tan),
                    Just(Func::Exp),
                    Just(Func::Log),
                    Just(Func::Asinh),
                    Just(Func::Abs)
                ],
                inner
            )
                .prop_map(move |(f, a)| Expr::Call(f, b(a))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, NVARS)
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(scale).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn symbolic_matches_dual(e in arb_expr(), x in point(), i in 0..NVARS) {
        let v = e.eval(&x);
        prop_assume!(v.is_ok());
        let sym = e.derivative(i).eval(&x);
        let mut dir = vec![0.0; NVARS];
        dir[i] = 1.0;
        let dual = e.eval_dual(&x, &dir);
        prop_assume!(sym.is_ok() && dual.is_ok());
        let (s, d) = (sym.unwrap(), dual.unwrap().eps);
        prop_assume!(s.abs() < 1e8);
        prop_assert!(rel(s, d, 0.0) <= 1e-12, "{} : symbolic {s} dual {d}", e.display(&names()));
    }

    #[test]
    fn symbolic_matches_central_differences(e in arb_expr(), x in point(), i in 0..NVARS) {
        let f0 = e.eval(&x);
        prop_assume!(f0.is_ok());
        let f0 = f0.unwrap();
        let d = e.derivative(i);
        let s = d.eval(&x);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (e.eval(&xp), e.eval(&xm));
        prop_assume!(fp.is_ok() && fm.is_ok());
        // away from kinks and poles the second derivative stays moderate
        let dd = d.derivative(i);
        let curv = [&xp, &x, &xm].iter().map(|p| dd.eval(p)).collect::<Result<Vec<_>, _>>();
        prop_assume!(curv.is_ok());
        let curv = curv.unwrap();
        prop_assume!(curv.iter().all(|c| c.abs() < 1e4) && (curv[0] - curv[2]).abs() < 1e2);
        prop_assume!(s.abs() < 1e6 && f0.abs() < 1e6);
        let fd = (fp.unwrap() - fm.unwrap()) / (2.0 * h);
        prop_assert!(rel(s, fd, f0.abs()) <= 1e-6, "{} : symbolic {s} fd {fd}", e.display(&names()));
    }

    #[test]
    fn differentiation_is_linear(e1 in arb_expr(), e2 in arb_expr(), a in -3.0f64..3.0, b in -3.0f64..3.0,
                                 x in point(), i in 0..NVARS) {
        let combo = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Const(a)), Box::new(e1.clone()))),
            Box::new(Expr::Mul(Box::new(Expr::Const(b)), Box::new(e2.clone()))),
        );
        let lhs = combo.derivative(i).eval(&x);
        let (d1, d2) = (e1.derivative(i).eval(&x), e2.derivative(i).eval(&x));
        prop_assume!(lhs.is_ok() && d1.is_ok() && d2.is_ok());
        let rhs = a * d1.unwrap() + b * d2.unwrap();
        prop_assert!(rel(lhs.unwrap(), rhs, 0.0) <= 1e-12);
    }

    #[test]
    fn printing_is_a_fixed_point(e in arb_expr()) {
        let vars = names();
        let printed = e.display(&vars).to_string();
        let reparsed = parse(&printed, &vars).unwrap();
        let again = reparsed.display(&vars).to_string();
        prop_assert_eq!(&printed, &again);
        let third = parse(&again, &vars).unwrap();
        prop_assert_eq!(reparsed, third);
    }

    #[test]
    fn reparsed_expression_evaluates_identically(e in arb_expr(), x in point()) {
        let vars = names();
        let reparsed = parse(&e.display(&vars).to_string(), &vars).unwrap();
        match (e.eval(&x), reparsed.eval(&x)) {
            (Ok(a), Ok(b)) => prop_assert!(a == b || rel(a, b, 0.0) < 1e-14),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }
}

#[test]
fn jacobian_agrees_with_dual_path_on_rosenberg_constraint() {
    let f = ExpressionField::parse_vector(&["z' - y*x'", "x'*sqrt(y^2 + 1)"], var_list(&["x", "y", "z", "x'", "y'", "z'"]))
        .unwrap();
    let p = [0.3, -1.2, 0.7, 2.0, 3.0, -0.5];
    let exact = f.jacobian(&p).unwrap();
    let dual = f.jacobian_dual(&p).unwrap();
    assert!((exact - dual).amax() < 1e-15);
}

#[test]
fn third_derivatives_are_expressions() {
    let vars = var_list(&["v"]);
    let l = parse("-sqrt(1 + v^2)", &vars).unwrap();
    let d3 = l.derivative(0).derivative(0).derivative(0);
    // d³/dv³ of -sqrt(1+v²) = 3v/(1+v²)^(5/2)
    let v: f64 = 0.7;
    let expected = 3.0 * v / (1.0 + v * v).powf(2.5);
    assert!((d3.eval(&[v]).unwrap() - expected).abs() < 1e-14);
}
