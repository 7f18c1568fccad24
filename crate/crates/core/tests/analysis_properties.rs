use frac_core::analysis::{
    integrability_residual, is_closed, kernel_basis_1d, kernel_basis_dv, solve_exact, ExactnessResult,
};
use frac_core::forms::{frac_exterior_deriv, Form};
use frac_core::rl::rl_deriv;
use frac_core::{Context, Expr};
use proptest::prelude::*;

fn ctx(n: usize) -> Context {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    Context::new(&names).unwrap()
}

fn poly(n: usize) -> impl Strategy<Value = Expr> {
    let term = (-4i32..=4, proptest::collection::vec(0u32..4, n)).prop_map(|(c, e)| {
        let f: Vec<(usize, f64)> = e.into_iter().enumerate().map(|(i, p)| (i, f64::from(p))).collect();
        Expr::monomial(f64::from(c), &f)
    });
    proptest::collection::vec(term, 1..4).prop_map(|ts| ts.into_iter().fold(Expr::zero(), |a, t| &a + &t))
}

#[test]
fn kernels_are_annihilated() {
    for nu in [0.3, 0.5, 1.0, 1.5, 2.7] {
        for n in 1..=3 {
            let c = ctx(n);
            for i in 0..n {
                for k in kernel_basis_1d(nu, i).unwrap() {
                    assert!(rl_deriv(&k, i, nu, &c).unwrap().max_coeff() <= 1e-10);
                }
            }
            let basis = kernel_basis_dv(nu, &c).unwrap();
            assert_eq!(basis.len(), (nu.ceil() as usize).pow(n as u32));
            for k in basis {
                assert!(frac_exterior_deriv(&Form::scalar(k), nu, &c).unwrap().is_zero());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_forms_are_integrable(f in poly(3), nu in 0.05f64..=1.0) {
        let c = ctx(3);
        let alpha = frac_exterior_deriv(&Form::scalar(f), nu, &c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let r = integrability_residual(&alpha, i, j, &c).unwrap();
                prop_assert!(r.max_coeff() <= 1e-8, "({}, {}): {}", i, j, c.display(&r));
            }
        }
        match solve_exact(&alpha, nu, &c).unwrap() {
            ExactnessResult::Exact(g) => {
                let back = frac_exterior_deriv(&Form::scalar(g), nu, &c).unwrap();
                prop_assert!(back.approx_eq(&alpha, 1e-9));
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn closedness_at_order_one_is_the_curl_test(a in poly(2), b in poly(2)) {
        let c = ctx(2);
        let alpha = Form::one_form(1.0, &[a.clone(), b.clone()]).unwrap();
        let curl = &b.classical_derivative(0, 1) - &a.classical_derivative(1, 1);
        let report = is_closed(&alpha, 1.0, &c).unwrap();
        prop_assert_eq!(report.closed, curl.is_zero());
        if let Some((_, _, r)) = report.witnesses.first() {
            prop_assert!(r.approx_eq(&curl, 1e-12));
        }
        let exact = matches!(solve_exact(&alpha, 1.0, &c).unwrap(), ExactnessResult::Exact(_));
        prop_assert_eq!(exact, curl.is_zero());
    }
}
