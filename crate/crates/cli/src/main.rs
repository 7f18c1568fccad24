//! `frac`: command-line front end for the fractional exterior calculus
//! engine.
//!
//! Exit codes: 0 success, 1 failed verification, 2 bad input (syntax,
//! unknown coordinate, invalid argument, usage), 3 domain errors, 4
//! unsupported operations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use frac_core::analysis::{is_closed, solve_exact, ExactnessResult};
use frac_core::coords::{self, Chart, MatrixJson, Mode};
use frac_core::expr::fmt_num;
use frac_core::forms::{frac_exterior_deriv, Form};
use frac_core::oracle::{richardson_partial, GlOptions, DEFAULT_LEVELS, DEFAULT_STEP};
use frac_core::parse::infer_coordinates;
use frac_core::rl::{ceil_order, rl_deriv, rl_integ};
use frac_core::{verify, Context, Error, Expr};

const SIG: usize = 10;

#[derive(Parser)]
#[command(name = "frac", version, about = "Fractional exterior calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Comma-separated coordinate names; inferred from the input when absent.
    #[arg(long, value_delimiter = ',')]
    coords: Option<Vec<String>>,
    /// Initial points, one per coordinate (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Option<Vec<f64>>,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Clone)]
struct ChartArgs {
    /// polar, identity[:n], scale:c1,...,cn or affine:a11,a12;a21,a22[|b1,b2]
    #[arg(long)]
    chart: String,
    #[arg(long, allow_hyphen_values = true)]
    order: f64,
    /// Point in the chart's source coordinates; omit for a symbolic result.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// Grünwald-Letnikov step for numeric entries.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    h: f64,
    /// Richardson levels for numeric entries (1 disables extrapolation).
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: u32,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    Symbolic,
    Numeric,
}

#[derive(Subcommand)]
enum Command {
    /// Riemann-Liouville derivative of an expression.
    Deriv {
        #[command(flatten)]
        common: Common,
        /// Coordinate to differentiate in (default: the first).
        #[arg(long)]
        var: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        order: f64,
        #[arg(allow_hyphen_values = true)]
        expr: String,
    },
    /// Riemann-Liouville integral of an expression.
    Integ {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        order: f64,
        #[arg(allow_hyphen_values = true)]
        expr: String,
    },
    /// Fractional exterior derivative of an expression or form.
    Dv {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        order: f64,
        #[arg(allow_hyphen_values = true)]
        form: String,
    },
    /// Closedness of a one-form under d^mu.
    Closed {
        #[command(flatten)]
        common: Common,
        /// Expected order of the form's differentials.
        #[arg(long)]
        order: Option<f64>,
        /// Order of the exterior derivative (default: the form's order).
        #[arg(long)]
        mu: Option<f64>,
        #[arg(allow_hyphen_values = true)]
        form: String,
    },
    /// Potential of an exact one-form, or the first failing integrability condition.
    Exact {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        order: Option<f64>,
        #[arg(allow_hyphen_values = true)]
        form: String,
    },
    /// Fractional Jacobian of a chart.
    Jacobian {
        #[command(flatten)]
        chart: ChartArgs,
        /// Also print the inverse-identity residual.
        #[arg(long)]
        residual: bool,
    },
    /// Fractional metric of a chart.
    Metric {
        #[command(flatten)]
        chart: ChartArgs,
    },
    /// Line element for a displacement at a point.
    Lineelement {
        #[command(flatten)]
        chart: ChartArgs,
        /// Displacement components paired with dy_i^nu.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dy: Vec<f64>,
    },
    /// Grünwald-Letnikov evaluation of an expression's differintegral.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        order: f64,
        /// Evaluation point, one value per coordinate.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        h: f64,
        #[arg(long, default_value_t = DEFAULT_LEVELS)]
        levels: u32,
        #[arg(allow_hyphen_values = true)]
        expr: String,
    },
    /// Run the built-in verification checks.
    Verify {
        /// Run a single named check.
        #[arg(long)]
        only: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Syntax { .. } | Error::UnknownCoordinate(_) | Error::InvalidArgument(_) => 2,
            Error::Pole(_)
            | Error::ExponentDomain { .. }
            | Error::Domain(_)
            | Error::BoundarySingularity { .. }
            | Error::ModeMismatch(_) => 3,
            Error::Unsupported(_) => 4,
            Error::Verification(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Deriv { common, var, order, expr } => cmd_rl(&common, var, order, &expr, false),
        Command::Integ { common, var, order, expr } => cmd_rl(&common, var, order, &expr, true),
        Command::Dv { common, order, form } => cmd_dv(&common, order, &form),
        Command::Closed { common, order, mu, form } => cmd_closed(&common, order, mu, &form),
        Command::Exact { common, order, form } => cmd_exact(&common, order, &form),
        Command::Jacobian { chart, residual } => cmd_jacobian(&chart, residual),
        Command::Metric { chart } => cmd_metric(&chart),
        Command::Lineelement { chart, dy } => cmd_line_element(&chart, &dy),
        Command::Oracle { common, var, order, point, h, levels, expr } => {
            cmd_oracle(&common, var, order, &point, h, levels, &expr)
        }
        Command::Verify { only, json } => cmd_verify(only.as_deref(), json),
    }
}

fn context(common: &Common, text: &str) -> Result<Context, Error> {
    let names = match &common.coords {
        Some(names) => names.clone(),
        None => {
            let inferred = infer_coordinates(text)?;
            if inferred.is_empty() {
                vec!["x".to_string()]
            } else {
                inferred
            }
        }
    };
    let ctx = Context::new(&names)?;
    match &common.origin {
        Some(origin) => ctx.with_origin(origin),
        None => Ok(ctx),
    }
}

fn coord(ctx: &Context, var: Option<&str>) -> Result<usize, Error> {
    match var {
        Some(name) => ctx.index_of(name),
        None => Ok(0),
    }
}

fn finite(name: &str, v: f64) -> Result<f64, Error> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("--{name} must be finite")))
    }
}

fn cmd_rl(common: &Common, var: Option<String>, order: f64, text: &str, integral: bool) -> Outcome {
    let order = finite("order", order)?;
    let ctx = context(common, text)?;
    let i = coord(&ctx, var.as_deref())?;
    let e = frac_core::parse_expr(text, &ctx)?;
    let result = if integral { rl_integ(&e, i, order, &ctx)? } else { rl_deriv(&e, i, order, &ctx)? };
    if common.json {
        Ok(json!({
            "coords": ctx.names(),
            "origin": ctx.origin(),
            "var": ctx.name(i),
            "order": order,
            "result": ctx.display(&result).to_string(),
        })
        .to_string())
    } else {
        Ok(ctx.display_sig(&result, SIG).to_string())
    }
}

fn form_json(f: &Form, ctx: &Context) -> Value {
    serde_json::to_value(f.to_json(ctx)).expect("form serializes")
}

fn cmd_dv(common: &Common, order: f64, text: &str) -> Outcome {
    let order = finite("order", order)?;
    if order < 0.0 {
        return Err(Error::InvalidArgument(format!("--order must be non-negative, got {order}")).into());
    }
    let ctx = context(common, text)?;
    let a = Form::parse(text, &ctx)?;
    let d = frac_exterior_deriv(&a, order, &ctx)?;
    if common.json {
        Ok(form_json(&d, &ctx).to_string())
    } else {
        Ok(d.display_sig(&ctx, SIG).to_string())
    }
}

fn one_form(common: &Common, order: Option<f64>, text: &str) -> Result<(Context, Form, f64), Error> {
    let ctx = context(common, text)?;
    let alpha = Form::parse(text, &ctx)?;
    if alpha.grade() != 1 && !alpha.is_zero() {
        return Err(Error::InvalidArgument(format!("expected a one-form, got grade {}", alpha.grade())));
    }
    let nu = match order {
        Some(o) => {
            let o = finite("order", o)?;
            if !alpha.is_zero() && (alpha.total_order() - o).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "form has differentials of order {}, --order says {o}",
                    alpha.total_order()
                )));
            }
            o
        }
        None if alpha.is_zero() => {
            return Err(Error::InvalidArgument("--order is required for the zero form".into()));
        }
        None => alpha.total_order(),
    };
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("order must be positive, got {nu}")));
    }
    Ok((ctx, alpha, nu))
}

fn cmd_closed(common: &Common, order: Option<f64>, mu: Option<f64>, text: &str) -> Outcome {
    let (ctx, alpha, nu) = one_form(common, order, text)?;
    let mu = finite("mu", mu.unwrap_or(nu))?;
    let report = is_closed(&alpha, mu, &ctx)?;
    if common.json {
        let witnesses: Vec<Value> = report
            .witnesses
            .iter()
            .map(|(i, j, r)| json!({"i": ctx.name(*i), "j": ctx.name(*j), "residual": ctx.display(r).to_string()}))
            .collect();
        return Ok(json!({"closed": report.closed, "nu": nu, "mu": mu, "witnesses": witnesses}).to_string());
    }
    let mut out = String::from(if report.closed { "closed" } else { "not closed" });
    for (i, j, r) in &report.witnesses {
        out.push_str(&format!("\n  ({}, {}): {}", ctx.name(*i), ctx.name(*j), ctx.display_sig(r, SIG)));
    }
    Ok(out)
}

fn cmd_exact(common: &Common, order: Option<f64>, text: &str) -> Outcome {
    let (ctx, alpha, nu) = one_form(common, order, text)?;
    match solve_exact(&alpha, nu, &ctx)? {
        ExactnessResult::Exact(f) => Ok(if common.json {
            json!({"status": "exact", "potential": ctx.display(&f).to_string()}).to_string()
        } else {
            format!("exact\npotential: {}", ctx.display_sig(&f, SIG))
        }),
        ExactnessResult::NotIntegrable { residual, i, j } => Ok(if common.json {
            json!({
                "status": "not_integrable",
                "i": ctx.name(i),
                "j": ctx.name(j),
                "residual": ctx.display(&residual).to_string(),
            })
            .to_string()
        } else {
            format!(
                "not integrable\n({}, {}) residual: {}",
                ctx.name(i),
                ctx.name(j),
                ctx.display_sig(&residual, SIG)
            )
        }),
        ExactnessResult::Unsupported(reason) => Err(Error::Unsupported(reason).into()),
    }
}

fn gl_options(args: &ChartArgs) -> Result<GlOptions, Error> {
    if !(args.h > 0.0) || !args.h.is_finite() {
        return Err(Error::InvalidArgument(format!("--h must be positive, got {}", args.h)));
    }
    if args.levels > 5 {
        return Err(Error::InvalidArgument(format!("--levels must be at most 5, got {}", args.levels)));
    }
    Ok(GlOptions { h: args.h, levels: args.levels })
}

fn mode(args: &ChartArgs) -> Result<Mode, Error> {
    let opts = gl_options(args)?;
    Ok(match args.mode {
        ModeArg::Auto => Mode::Auto(opts),
        ModeArg::Symbolic => Mode::Symbolic,
        ModeArg::Numeric => Mode::Numeric(opts),
    })
}

/// Rows printed with entries negligible next to the largest one shown as 0.
fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let scale = coords::max_abs(&m.to_vec());
    let rows: Vec<String> = m
        .iter()
        .map(|row| {
            let cells: Vec<String> = row
                .iter()
                .map(|&v| if v.abs() <= 1e-10 * scale { "0".to_string() } else { fmt_num(v, Some(SIG)) })
                .collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

fn fmt_expr_matrix(m: &[Vec<Expr>], ctx: &Context) -> String {
    m.iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|e| ctx.display_sig(e, SIG).to_string()).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn header(kind: &str, chart: &Chart, nu: f64, point: Option<&[f64]>) -> String {
    let m = ceil_order(nu);
    let mut h = format!("{kind} chart={} nu={} m={m}", chart.name(), fmt_num(nu, Some(SIG)));
    if let Some(p) = point {
        let p: Vec<String> = p.iter().map(|v| fmt_num(*v, Some(SIG))).collect();
        h.push_str(&format!(" point=({})", p.join(",")));
    }
    h
}

fn order_of(args: &ChartArgs) -> Result<f64, Error> {
    let nu = finite("order", args.order)?;
    if nu <= 0.0 {
        return Err(Error::InvalidArgument(format!("--order must be positive, got {nu}")));
    }
    Ok(nu)
}

fn cmd_jacobian(args: &ChartArgs, residual: bool) -> Outcome {
    let chart = Chart::parse(&args.chart)?;
    let nu = order_of(args)?;
    let mode = mode(args)?;
    let Some(point) = args.point.as_deref() else {
        if args.json {
            return Err(Error::InvalidArgument("--json needs --point".into()).into());
        }
        let j = coords::jacobian_symbolic(&chart, nu)?;
        let mut out = format!("{}\n{}", header("jacobian", &chart, nu, None), fmt_expr_matrix(&j.entries, chart.y_ctx()));
        if residual {
            let r = coords::inverse_residual_symbolic(&chart, nu)?;
            out.push_str(&format!("\nresidual\n{}", fmt_expr_matrix(&r, chart.y_ctx())));
        }
        return Ok(out);
    };
    let j = coords::jacobian_at(&chart, nu, point, mode)?;
    let res = if residual { Some(coords::inverse_residual(&chart, nu, point, mode)?) } else { None };
    if args.json {
        let m = MatrixJson {
            kind: "jacobian".into(),
            chart: chart.name().into(),
            nu,
            m: j.m,
            point: point.to_vec(),
            entries: j.entries,
            residual: res,
        };
        return Ok(serde_json::to_string(&m).expect("matrix serializes"));
    }
    let mut out = format!("{}\n{}", header("jacobian", &chart, nu, Some(point)), fmt_matrix(&j.entries));
    if let Some(r) = res {
        // the residual is a difference from the identity, so print it on an absolute scale
        let cells: Vec<String> = r
            .iter()
            .map(|row| format!("[{}]", row.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(",")))
            .collect();
        out.push_str(&format!("\nresidual [{}]", cells.join(",")));
    }
    Ok(out)
}

fn cmd_metric(args: &ChartArgs) -> Outcome {
    let chart = Chart::parse(&args.chart)?;
    let nu = order_of(args)?;
    let mode = mode(args)?;
    let Some(point) = args.point.as_deref() else {
        if args.json {
            return Err(Error::InvalidArgument("--json needs --point".into()).into());
        }
        let g = coords::metric_symbolic_from(&coords::jacobian_symbolic(&chart, nu)?);
        return Ok(format!("{}\n{}", header("metric", &chart, nu, None), fmt_expr_matrix(&g.entries, chart.y_ctx())));
    };
    let g = coords::metric(&chart, nu, point, mode)?;
    if args.json {
        let m = MatrixJson {
            kind: "metric".into(),
            chart: chart.name().into(),
            nu,
            m: ceil_order(nu),
            point: point.to_vec(),
            entries: g.entries,
            residual: None,
        };
        return Ok(serde_json::to_string(&m).expect("matrix serializes"));
    }
    Ok(format!("{}\n{}", header("metric", &chart, nu, Some(point)), fmt_matrix(&g.entries)))
}

fn cmd_line_element(args: &ChartArgs, dy: &[f64]) -> Outcome {
    let chart = Chart::parse(&args.chart)?;
    let nu = order_of(args)?;
    let mode = mode(args)?;
    let point = args
        .point
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--point is required for a line element".into()))?;
    let g = coords::metric(&chart, nu, point, mode)?;
    let ds = coords::line_element(&g, dy)?;
    if args.json {
        Ok(json!({"chart": chart.name(), "nu": nu, "point": point, "dy": dy, "value": ds}).to_string())
    } else {
        Ok(fmt_num(ds, Some(SIG)))
    }
}

fn cmd_oracle(
    common: &Common,
    var: Option<String>,
    order: f64,
    point: &[f64],
    h: f64,
    levels: u32,
    text: &str,
) -> Outcome {
    let order = finite("order", order)?;
    let ctx = context(common, text)?;
    let i = coord(&ctx, var.as_deref())?;
    let e = frac_core::parse_expr(text, &ctx)?;
    if point.len() != ctx.n() {
        return Err(Error::InvalidArgument(format!(
            "--point has {} components for {} coordinates",
            point.len(),
            ctx.n()
        ))
        .into());
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("--h must be positive, got {h}")).into());
    }
    let f = |p: &[f64]| e.eval(p, &ctx).unwrap_or(f64::NAN);
    let r = richardson_partial(f, i, order, point, ctx.origin()[i], GlOptions { h, levels })?;
    let symbolic = rl_deriv(&e, i, order, &ctx).and_then(|d| d.eval(point, &ctx)).ok();
    if common.json {
        return Ok(json!({
            "value": r.value,
            "error_estimate": if r.error_estimate.is_finite() { json!(r.error_estimate) } else { Value::Null },
            "converged": r.converged,
            "symbolic": symbolic,
        })
        .to_string());
    }
    let mut out = format!("gl: {}", fmt_num(r.value, Some(SIG)));
    if r.error_estimate.is_finite() {
        out.push_str(&format!("\nerror estimate: {:.3e}", r.error_estimate));
    }
    if let Some(s) = symbolic {
        out.push_str(&format!("\nsymbolic: {}", fmt_num(s, Some(SIG))));
        if s != 0.0 {
            out.push_str(&format!("\nrelative difference: {:.3e}", ((r.value - s) / s).abs()));
        }
    }
    Ok(out)
}

fn cmd_verify(only: Option<&str>, json_out: bool) -> Outcome {
    let results = verify::run(only)?;
    let passed = results.iter().all(|r| r.passed);
    let text = if json_out {
        json!({"passed": passed, "checks": results}).to_string()
    } else {
        let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let mut lines: Vec<String> = results
            .iter()
            .map(|r| {
                format!(
                    "{} {:width$}  expected: {}  computed: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.expected,
                    r.computed
                )
            })
            .collect();
        let failed = results.iter().filter(|r| !r.passed).count();
        lines.push(format!("{} of {} checks passed", results.len() - failed, results.len()));
        lines.join("\n")
    };
    if passed {
        Ok(text)
    } else {
        println!("{text}");
        Err(Failure { code: 1, message: String::new() })
    }
}
