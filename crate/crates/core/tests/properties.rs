use std::f64::consts::PI;

use hamosc::criteria::{check_cor22, check_thm32, check_thm33, CriteriaOptions, Verdict, Window};
use hamosc::dynamics::{detect_zeros, integrate_hamiltonian};
use hamosc::expr::{parse, BinOp, Constant, Expr, ExprKind, Func};
use hamosc::func::ScalarFn;
use hamosc::linalg::{self, identity, real_diag, zeros, CMat};
use hamosc::matfun::{hermitian_sqrt, HermitianMatrix};
use hamosc::ode::OdeOptions;
use hamosc::oracle::{comparison_grid, comparison_predict_and_verify, trial_initial_data, ComparisonInput, OracleOptions};
use hamosc::reduction::ScalarSystem2x2;
use hamosc::system::SystemSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(m, e)| Expr::new(ExprKind::Num(m as f64 / 10f64.powi(e as i32)))),
        Just(Expr::new(ExprKind::Time)),
        Just(Expr::new(ExprKind::Const(Constant::Pi))),
        Just(Expr::new(ExprKind::Const(Constant::E))),
    ]
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    let binops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];
    let unary = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log, Func::Sqrt, Func::Abs];
    leaf().prop_recursive(6, 64, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::new(ExprKind::Neg(Box::new(e)))),
            (proptest::sample::select(binops.to_vec()), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::new(ExprKind::Binary {
                op,
                lhs: Box::new(l),
                rhs: Box::new(r)
            })),
            (proptest::sample::select(unary.to_vec()), inner.clone()).prop_map(|(func, a)| Expr::new(ExprKind::Call { func, args: vec![a] })),
            (proptest::sample::select(vec![Func::Min, Func::Max]), inner.clone(), inner).prop_map(|(func, a, b)| Expr::new(ExprKind::Call {
                func,
                args: vec![a, b]
            })),
        ]
    })
}

/// Reference semantics: `None` for every domain error.
fn reference_eval(e: &Expr, t: f64) -> Option<f64> {
    Some(match e.kind() {
        ExprKind::Num(x) => *x,
        ExprKind::Time => t,
        ExprKind::Const(Constant::Pi) => PI,
        ExprKind::Const(Constant::E) => std::f64::consts::E,
        ExprKind::Neg(a) => -reference_eval(a, t)?,
        ExprKind::Binary { op, lhs, rhs } => {
            let (a, b) = (reference_eval(lhs, t)?, reference_eval(rhs, t)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return None,
                BinOp::Div => a / b,
                BinOp::Pow if a == 0.0 && b < 0.0 => return None,
                BinOp::Pow if a < 0.0 && b.fract() != 0.0 => return None,
                BinOp::Pow => a.powf(b),
            }
        }
        ExprKind::Call { func, args } => {
            let x = reference_eval(&args[0], t)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Exp => x.exp(),
                Func::Log if x <= 0.0 => return None,
                Func::Log => x.ln(),
                Func::Sqrt if x < 0.0 => return None,
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Min => x.min(reference_eval(&args[1], t)?),
                Func::Max => x.max(reference_eval(&args[1], t)?),
            }
        }
    })
}

fn same_bits(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

proptest! {
    #[test]
    fn printed_expressions_parse_back(e in expr_tree()) {
        let printed = e.to_string();
        let parsed = parse(&printed).unwrap();
        prop_assert_eq!(&parsed, &e, "{}", printed);
    }

    #[test]
    fn evaluation_matches_reference_to_the_bit(e in expr_tree(), t in -5.0f64..5.0) {
        let parsed = parse(&e.to_string()).unwrap();
        match (parsed.eval(t), reference_eval(&e, t)) {
            (Ok(x), Some(y)) => prop_assert!(same_bits(x, y), "{} vs {}", x, y),
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got.ok(), want),
        }
    }
}

fn random_matrix(n: usize, entries: &[f64]) -> CMat {
    DMatrix::from_fn(n, n, |i, j| Complex64::new(entries[2 * (i * n + j)], entries[2 * (i * n + j) + 1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sqrt_of_gram_matrix_squares_back(entries in proptest::collection::vec(-2.0f64..2.0, 18)) {
        let m = random_matrix(3, &entries);
        let b = m.adjoint() * &m;
        let s = hermitian_sqrt(&HermitianMatrix::new(b.clone()).unwrap()).unwrap();
        let s = s.matrix();
        prop_assert!((s * s - &b).norm() <= 1e-10 * b.norm().max(1.0));
        prop_assert!(linalg::hermitian_defect(s) <= 1e-12 * s.norm().max(1.0));
    }

    #[test]
    fn sampled_initial_data_is_conjoined(seed in any::<u64>(), index in 0usize..50, n in 1usize..5) {
        let opts = OracleOptions { seed, ..Default::default() };
        let (_, phi, psi) = trial_initial_data(n, index, &opts);
        prop_assert_eq!(linalg::conjoined_defect(&phi, &psi), 0.0);
        prop_assert!(psi.norm() <= opts.psi_norm_cap * (1.0 + 1e-12));
        prop_assert!(linalg::sigma_min(&phi) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn window_integral_scales_with_coefficients(lambda in 0.05f64..4.0, len in 0.2f64..6.0) {
        let s = ScalarSystem2x2::constant(0.0, lambda, -lambda, 0.0);
        let r = check_thm33(&s, Window::new(1.0, 1.0 + len).unwrap(), &CriteriaOptions::default()).unwrap();
        let integral = r.diagnostics.integral.unwrap();
        prop_assert!((integral - lambda * len).abs() <= 1e-9 * (1.0 + lambda * len));
        let proven = r.verdict == Verdict::ProvenOscillatory;
        prop_assert_eq!(proven, r.margin.unwrap() > r.diagnostics.quadrature_error.unwrap());
    }

    #[test]
    fn window_integral_grows_with_the_window(b in 0.0f64..3.0, c in -3.0f64..0.0, len in 0.5f64..5.0, extra in 0.0f64..2.0) {
        let sys = SystemSpec::constant(0.0, zeros(1), real_diag(&[b]), real_diag(&[c]));
        let opts = CriteriaOptions::default();
        let short = check_cor22(&sys, 1, Window::new(0.0, len).unwrap(), &opts).unwrap();
        let long = check_cor22(&sys, 1, Window::new(0.0, len + extra).unwrap(), &opts).unwrap();
        let (i_short, i_long) = (short.diagnostics.integral.unwrap(), long.diagnostics.integral.unwrap());
        prop_assert!(i_long >= i_short - 1e-9);
        if short.verdict == Verdict::ProvenOscillatory {
            prop_assert_eq!(long.verdict, Verdict::ProvenOscillatory);
        }
    }

    #[test]
    fn varying_weight_matches_closed_form(k in -1.0f64..1.0, len in 0.5f64..3.0) {
        // E = k: integrand min(e^{−kt}, e^{kt}) = e^{−|k| t}
        let s = ScalarSystem2x2::constant(k, 1.0, -1.0, 0.0);
        let r = check_thm33(&s, Window::new(0.0, len).unwrap(), &CriteriaOptions::default()).unwrap();
        let want = if k.abs() < 1e-12 { len } else { (1.0 - (-k.abs() * len).exp()) / k.abs() };
        prop_assert!((r.diagnostics.integral.unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn staged_integrals_are_monotone_for_nonnegative_integrands(p in 0.0f64..2.0, q in 0.0f64..2.0) {
        let s = ScalarSystem2x2::constant(0.0, p, -q, 0.0);
        let r = check_thm32(&s, 0.0, 64.0, &CriteriaOptions::default()).unwrap();
        for w in r.diagnostics.stages.windows(2) {
            prop_assert!(w[1].i1 >= w[0].i1 - 1e-9 && w[1].i2 >= w[0].i2 - 1e-9);
        }
        let expected = p.min(q) * 64.0 >= 10.0 + 1e-6 && p > 0.0 && q > 0.0;
        prop_assert_eq!(r.verdict == Verdict::DivergenceEvidence, expected);
    }

    #[test]
    fn easier_equation_never_blows_up_first(delta in 0.0f64..2.0, h2 in -1.0f64..1.5, y20 in -1.0f64..1.0) {
        let k = ScalarFn::constant;
        let c = ComparisonInput::integrate([k(1.0), k(0.0), k(h2 - delta)], [k(1.0), k(0.0), k(h2)], y20, 0.0, 3.0, &OdeOptions::default()).unwrap();
        let v = comparison_predict_and_verify(&c, &comparison_grid(0.0, 3.0, 61), &OdeOptions::default()).unwrap();
        prop_assert!(v.condition.satisfied);
        prop_assert!(v.verified);
    }

    #[test]
    fn scalar_harmonic_zeros_are_where_expected(psi0 in -5.0f64..5.0) {
        // φ = cos t + ψ₀ sin t vanishes at t = arccot(−ψ₀) + kπ
        let sys = SystemSpec::constant(0.0, zeros(1), identity(1), -identity(1));
        let traj = integrate_hamiltonian(&sys, &identity(1), &real_diag(&[psi0]), 0.0, 7.0, &OdeOptions::default()).unwrap();
        let scan = detect_zeros(&traj, 0.0, 7.0, None);
        let first = (-1.0 / psi0).atan().rem_euclid(PI);
        let first = if first == 0.0 { PI / 2.0 } else { first };
        let expected: Vec<f64> = (0..3).map(|k| first + k as f64 * PI).filter(|&t| t <= 7.0).collect();
        prop_assert_eq!(scan.zeros.len(), expected.len());
        for (z, e) in scan.zeros.iter().zip(&expected) {
            prop_assert!((z.t - e).abs() < 1e-6, "{} vs {}", z.t, e);
        }
    }
}
