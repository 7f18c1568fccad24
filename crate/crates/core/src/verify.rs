//! End-to-end verification checks behind `frac verify`.
//!
//! Each check computes a value through the public API, compares it with an
//! independently stated expectation and reports both. Checks run in
//! parallel; results come back in declaration order.

use std::f64::consts::PI;

use serde::Serialize;

use crate::analysis::{is_closed, solve_exact, ExactnessResult};
use crate::coords::{self, alpha_k, inverse_residual, inverse_residual_symbolic, max_abs, polar_dr_entry, Mode};
use crate::error::{Error, Result};
use crate::expr::{fmt_num, Context, Expr};
use crate::forms::{frac_exterior_deriv, Form};
use crate::oracle::{gl_deriv, GlOptions};
use crate::par::{self, Exec};
use crate::parse::parse_expr;
use crate::rl::rl_deriv;
use crate::special::gamma;

/// What a check found.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub expected: String,
    pub computed: String,
    pub passed: bool,
}

impl Outcome {
    fn compare(expected: f64, computed: f64, tol: f64, relative: bool) -> Self {
        let err = (computed - expected).abs();
        let bound = if relative { tol * expected.abs() } else { tol };
        Self {
            expected: fmt_num(expected, Some(10)),
            computed: fmt_num(computed, Some(10)),
            passed: err <= bound,
        }
    }

    fn all(parts: Vec<Outcome>) -> Self {
        Self {
            expected: parts.iter().map(|p| p.expected.as_str()).collect::<Vec<_>>().join("; "),
            computed: parts.iter().map(|p| p.computed.as_str()).collect::<Vec<_>>().join("; "),
            passed: parts.iter().all(|p| p.passed),
        }
    }
}

pub struct Check {
    pub name: &'static str,
    pub description: &'static str,
    run: fn() -> Result<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub description: String,
    pub expected: String,
    pub computed: String,
    pub passed: bool,
}

pub fn checks() -> Vec<Check> {
    vec![
        Check {
            name: "constant-rule",
            description: "half derivative of 1 at x=4, symbolic and Grünwald-Letnikov",
            run: constant_rule,
        },
        Check {
            name: "dv-power",
            description: "d^nu x^2 in two coordinates at nu=0.37 against the closed form",
            run: dv_power,
        },
        Check { name: "dv-order-zero", description: "d^0 x^2 = 2x^2 in two coordinates", run: dv_order_zero },
        Check { name: "dv-order-one", description: "d^1 x^2 = 2x dx", run: dv_order_one },
        Check { name: "dv-order-two", description: "d^2 x^2 = 2 dx^2, y-term annihilated", run: dv_order_two },
        Check {
            name: "classical-closedness",
            description: "closed and exact classical one-forms at nu=mu=1",
            run: classical_closedness,
        },
        Check {
            name: "alpha-k-one-coordinate",
            description: "derivative of the kernel-adapted function is 1 for n=1",
            run: alpha_one_coordinate,
        },
        Check {
            name: "polar-jacobian",
            description: "polar Jacobian at nu=1 on ten points against the classical matrix",
            run: polar_jacobian,
        },
        Check {
            name: "polar-metric",
            description: "polar metric at nu=1 on ten points against diag(1, r^2)",
            run: polar_metric,
        },
        Check {
            name: "polar-fractional-dr",
            description: "numeric dr^0.5 entry of dx1^0.5 at (2, pi/4) against the closed form",
            run: polar_fractional_dr,
        },
        Check {
            name: "polar-inverse",
            description: "inverse-identity residual of the polar chart at nu=1",
            run: polar_inverse,
        },
        Check {
            name: "scale-inverse",
            description: "closed-form inverse-identity residual of x=4y at nu=0.5",
            run: scale_inverse,
        },
    ]
}

/// Runs every check, or only the one called `only`.
pub fn run(only: Option<&str>) -> Result<Vec<CheckResult>> {
    let selected: Vec<Check> = match only {
        None => checks(),
        Some(name) => {
            let picked: Vec<Check> = checks().into_iter().filter(|c| c.name == name).collect();
            if picked.is_empty() {
                let names: Vec<&str> = checks().iter().map(|c| c.name).collect();
                return Err(Error::InvalidArgument(format!(
                    "no check named `{name}`; available: {}",
                    names.join(", ")
                )));
            }
            picked
        }
    };
    Ok(par::map(Exec::default(), &selected, |c| {
        let outcome = (c.run)().unwrap_or_else(|e| Outcome {
            expected: "no error".into(),
            computed: format!("error: {e}"),
            passed: false,
        });
        CheckResult {
            name: c.name.into(),
            description: c.description.into(),
            expected: outcome.expected,
            computed: outcome.computed,
            passed: outcome.passed,
        }
    }))
}

fn xy() -> Context {
    Context::new(&["x", "y"]).expect("valid names")
}

fn form_outcome(expected: &Form, computed: &Form, ctx: &Context, exact: bool) -> Outcome {
    Outcome {
        expected: expected.display_sig(ctx, 10).to_string(),
        computed: computed.display_sig(ctx, 10).to_string(),
        passed: if exact { expected == computed } else { expected.approx_eq(computed, 1e-12) },
    }
}

fn constant_rule() -> Result<Outcome> {
    let ctx = Context::new(&["x"])?;
    let d = rl_deriv(&Expr::constant(1.0), 0, 0.5, &ctx)?;
    let symbolic = d.eval(&[4.0], &ctx)?;
    let numeric = gl_deriv(|_| 1.0, 0.5, 4.0, 0.0, 1e-4)?;
    Ok(Outcome::all(vec![
        Outcome::compare(0.282_094_791_8, symbolic, 1e-9, false),
        Outcome::compare(symbolic, numeric, 1e-3, true),
    ]))
}

fn dv_power() -> Result<Outcome> {
    let ctx = xy();
    let nu = 0.37;
    let computed = frac_exterior_deriv(&Form::scalar(Expr::power(0, 2.0)), nu, &ctx)?;
    let expected = Form::one_form(
        nu,
        &[
            Expr::monomial(gamma(3.0)? / gamma(3.0 - nu)?, &[(0, 2.0 - nu)]),
            Expr::monomial(1.0 / gamma(1.0 - nu)?, &[(0, 2.0), (1, -nu)]),
        ],
    )?;
    Ok(form_outcome(&expected, &computed, &ctx, false))
}

fn dv_order_zero() -> Result<Outcome> {
    let ctx = xy();
    let computed = frac_exterior_deriv(&Form::scalar(Expr::power(0, 2.0)), 0.0, &ctx)?;
    let expected = Form::scalar(parse_expr("2*x^2", &ctx)?);
    Ok(form_outcome(&expected, &computed, &ctx, true))
}

fn dv_order_one() -> Result<Outcome> {
    let ctx = xy();
    let computed = frac_exterior_deriv(&Form::scalar(Expr::power(0, 2.0)), 1.0, &ctx)?;
    let expected = Form::parse("2*x d(x,1)", &ctx)?;
    Ok(form_outcome(&expected, &computed, &ctx, true))
}

fn dv_order_two() -> Result<Outcome> {
    let ctx = xy();
    let computed = frac_exterior_deriv(&Form::scalar(Expr::power(0, 2.0)), 2.0, &ctx)?;
    let expected = Form::parse("2 d(x,2)", &ctx)?;
    Ok(form_outcome(&expected, &computed, &ctx, true))
}

fn classical_closedness() -> Result<Outcome> {
    let ctx = Context::new(&["x1", "x2"])?;
    let exact = Form::parse("2*x1*x2 d(x1,1) + x1^2 d(x2,1)", &ctx)?;
    let open = Form::parse("x2 d(x1,1)", &ctx)?;
    let closed_ok = is_closed(&exact, 1.0, &ctx)?.closed;
    let open_report = is_closed(&open, 1.0, &ctx)?;
    let potential = solve_exact(&exact, 1.0, &ctx)?;
    let want = parse_expr("x1^2*x2", &ctx)?;
    let passed = closed_ok
        && open_report.witnesses == vec![(0, 1, Expr::constant(-1.0))]
        && potential == ExactnessResult::Exact(want);
    let shown = match &potential {
        ExactnessResult::Exact(f) => ctx.display(f).to_string(),
        other => format!("{other:?}"),
    };
    Ok(Outcome {
        expected: "closed; not closed with witness -1; potential x1^2*x2".into(),
        computed: format!(
            "{}; {} witnesses; potential {shown}",
            if closed_ok { "closed" } else { "not closed" },
            open_report.witnesses.len()
        ),
        passed,
    })
}

fn alpha_one_coordinate() -> Result<Outcome> {
    let ctx = Context::new(&["x"])?;
    let mut parts = Vec::new();
    for nu in [0.3, 0.5, 1.0, 1.6, 2.5] {
        let d = rl_deriv(&alpha_k(0, nu, &ctx)?, 0, nu, &ctx)?;
        let value = d.eval(&[1.7], &ctx)?;
        let constant = d.terms().len() == 1 && d.terms()[0].exps.is_constant();
        let mut o = Outcome::compare(1.0, value, 1e-12, false);
        o.passed &= constant;
        parts.push(o);
    }
    Ok(Outcome::all(parts))
}

/// Ten fixed points spread over r in (0.5, 3), θ in (0, 2π).
fn polar_points() -> Vec<(f64, f64)> {
    (0..10).map(|i| (0.5 + 2.5 * ((i * 7 % 10) as f64 + 0.5) / 10.0, 2.0 * PI * (i as f64 + 0.3) / 10.0)).collect()
}

fn polar_jacobian() -> Result<Outcome> {
    let chart = coords::polar();
    let mut worst: f64 = 0.0;
    for (r, t) in polar_points() {
        let j = coords::jacobian_numeric(&chart, 1.0, &[r, t], GlOptions::default())?;
        let expected = [[t.cos(), -r * t.sin()], [t.sin(), r * t.cos()]];
        for k in 0..2 {
            for i in 0..2 {
                worst = worst.max((j.entries[k][i] - expected[k][i]).abs());
            }
        }
    }
    Ok(Outcome {
        expected: "max deviation <= 1e-8".into(),
        computed: format!("max deviation {worst:.3e}"),
        passed: worst <= 1e-8,
    })
}

fn polar_metric() -> Result<Outcome> {
    let chart = coords::polar();
    let mut worst: f64 = 0.0;
    let mut symmetric = true;
    for (r, t) in polar_points() {
        let g = coords::metric(&chart, 1.0, &[r, t], Mode::Numeric(GlOptions::default()))?;
        let expected = [[1.0, 0.0], [0.0, r * r]];
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((g.entries[i][j] - expected[i][j]).abs());
            }
        }
        symmetric &= g.entries[0][1] == g.entries[1][0];
    }
    Ok(Outcome {
        expected: "max deviation <= 1e-8, symmetric".into(),
        computed: format!("max deviation {worst:.3e}, {}", if symmetric { "symmetric" } else { "asymmetric" }),
        passed: worst <= 1e-8 && symmetric,
    })
}

fn polar_fractional_dr() -> Result<Outcome> {
    let (r, t) = (2.0, PI / 4.0);
    let j = coords::jacobian_numeric(&coords::polar(), 0.5, &[r, t], GlOptions::default())?;
    let closed = polar_dr_entry(0, 0.5, r, t)?;
    Ok(Outcome::compare(closed, j.entries[0][0], 1e-3, true))
}

fn polar_inverse() -> Result<Outcome> {
    let res = inverse_residual(&coords::polar(), 1.0, &[2.0, PI / 3.0], Mode::Numeric(GlOptions::default()))?;
    let worst = max_abs(&res);
    Ok(Outcome {
        expected: "max |residual| <= 1e-6".into(),
        computed: format!("max |residual| {worst:.3e}"),
        passed: worst <= 1e-6,
    })
}

fn scale_inverse() -> Result<Outcome> {
    let chart = coords::scale(&[4.0])?;
    let res = inverse_residual_symbolic(&chart, 0.5)?;
    let ctx = chart.y_ctx();
    Ok(Outcome {
        expected: "0".into(),
        computed: ctx.display_sig(&res[0][0], 10).to_string(),
        passed: res[0][0].is_zero(),
    })
}
