//! Coordinate changes for fractional differentials: kernel-adapted functions,
//! the fractional Jacobian, transformation of one-forms, the inverse-identity
//! diagnostic and the fractional metric.
//!
//! Jacobians are stored with `entries[k][i] = J_i^k`, the coefficient of
//! `dy_i^ν` in `dx_k^ν`, so row `k` belongs to the target coordinate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{real_pow, snap, Context, Expr};
use crate::forms::Form;
use crate::oracle::{richardson_partial, GlOptions};
use crate::par::{self, Exec};
use crate::rl::{ceil_order, rl_deriv};
use crate::special::{gamma, rgamma};

/// Tolerance of [`Chart::roundtrip_error`] checks.
pub const ROUNDTRIP_TOL: f64 = 1e-8;

pub type NumericMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One component of a coordinate map.
///
/// A symbolic component is an [`Expr`] over the source context, so its
/// bases are measured from the source initial points; its value is the
/// absolute target coordinate.
#[derive(Clone)]
pub enum CoordMap {
    Symbolic(Expr),
    Numeric(NumericMap),
}

impl fmt::Debug for CoordMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordMap::Symbolic(e) => f.debug_tuple("Symbolic").field(e).finish(),
            CoordMap::Numeric(_) => f.write_str("Numeric(..)"),
        }
    }
}

impl CoordMap {
    pub fn numeric(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CoordMap::Numeric(Arc::new(f))
    }

    fn eval(&self, point: &[f64], ctx: &Context) -> Result<f64> {
        match self {
            CoordMap::Symbolic(e) => e.eval(point, ctx),
            CoordMap::Numeric(f) => Ok(f(point)),
        }
    }
}

/// An invertible change of coordinates `x = x(y)` with its inverse.
#[derive(Debug, Clone)]
pub struct Chart {
    name: String,
    x: Context,
    y: Context,
    forward: Vec<CoordMap>,
    inverse: Vec<CoordMap>,
}

impl Chart {
    /// `x` carries the initial points `a`, `y` the points `ã`; `forward[k]`
    /// is `x_k` over `y` and `inverse[i]` is `y_i` over `x`.
    pub fn new(
        name: impl Into<String>,
        x: Context,
        y: Context,
        forward: Vec<CoordMap>,
        inverse: Vec<CoordMap>,
    ) -> Result<Self> {
        let n = x.n();
        if y.n() != n || forward.len() != n || inverse.len() != n {
            return Err(Error::InvalidArgument("chart dimensions disagree".into()));
        }
        Ok(Self { name: name.into(), x, y, forward, inverse })
    }

    /// Parses a registry name: `polar`, `identity[:n]`, `scale:c1,...,cn` or
    /// `affine:a11,a12;a21,a22[|b1,b2]` (rows separated by `;`).
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, args) = match text.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (text, None),
        };
        match (kind, args) {
            ("polar", None) => Ok(polar()),
            ("identity", None) => identity(2),
            ("identity", Some(a)) => {
                let n: usize = a
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad dimension `{a}` for the identity chart")))?;
                identity(n)
            }
            ("scale", Some(a)) => scale(&parse_list(a)?),
            ("affine", Some(a)) => {
                let (rows, shift) = match a.split_once('|') {
                    Some((r, b)) => (r, Some(parse_list(b)?)),
                    None => (a, None),
                };
                let matrix = rows.split(';').map(parse_list).collect::<Result<Vec<_>>>()?;
                let n = matrix.len();
                affine(&matrix, &shift.unwrap_or_else(|| vec![0.0; n]))
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown chart `{text}`; expected polar, identity[:n], scale:c1,... or affine:rows[|b]"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// Target (Cartesian) coordinates and their initial points `a`.
    pub fn x_ctx(&self) -> &Context {
        &self.x
    }

    /// Source (curvilinear) coordinates and their initial points `ã`.
    pub fn y_ctx(&self) -> &Context {
        &self.y
    }

    pub fn forward(&self) -> &[CoordMap] {
        &self.forward
    }

    pub fn inverse(&self) -> &[CoordMap] {
        &self.inverse
    }

    /// The same chart read in the opposite direction.
    pub fn inverted(&self) -> Self {
        Self {
            name: format!("{}^-1", self.name),
            x: self.y.clone(),
            y: self.x.clone(),
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "point has {} components, chart `{}` has {} coordinates",
                y.len(),
                self.name,
                self.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point components must be finite".into()));
        }
        Ok(())
    }

    /// `x(y)`.
    pub fn to_x(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(y)?;
        self.forward.iter().map(|m| m.eval(y, &self.y)).collect()
    }

    /// `y(x)`.
    pub fn to_y(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.inverse.iter().map(|m| m.eval(x, &self.x)).collect()
    }

    /// Largest component of `|y(x(y)) - y|`.
    pub fn roundtrip_error(&self, y: &[f64]) -> Result<f64> {
        let back = self.to_y(&self.to_x(y)?)?;
        Ok(back.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn symbolic_forward(&self) -> Result<Vec<&Expr>> {
        self.forward
            .iter()
            .map(|m| match m {
                CoordMap::Symbolic(e) => Ok(e),
                CoordMap::Numeric(_) => Err(Error::ModeMismatch(format!(
                    "chart `{}` has black-box components; use numeric mode",
                    self.name
                ))),
            })
            .collect()
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("`{s}` is not a finite number")))
        })
        .collect()
}

fn numbered(prefix: &str, n: usize) -> Result<Context> {
    let names: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
    Context::new(&names)
}

/// `x1 = r cos θ`, `x2 = r sin θ` with both sets of initial points at 0.
pub fn polar() -> Chart {
    Chart {
        name: "polar".into(),
        x: Context::new(&["x1", "x2"]).expect("valid names"),
        y: Context::new(&["r", "theta"]).expect("valid names"),
        forward: vec![
            CoordMap::numeric(|p| p[0] * p[1].cos()),
            CoordMap::numeric(|p| p[0] * p[1].sin()),
        ],
        inverse: vec![CoordMap::numeric(|p| p[0].hypot(p[1])), CoordMap::numeric(|p| p[1].atan2(p[0]))],
    }
}

pub fn identity(n: usize) -> Result<Chart> {
    if n == 0 {
        return Err(Error::InvalidArgument("identity chart needs at least one coordinate".into()));
    }
    let maps: Vec<CoordMap> = (0..n).map(|i| CoordMap::Symbolic(Expr::power(i, 1.0))).collect();
    Chart::new(format!("identity:{n}"), numbered("x", n)?, numbered("y", n)?, maps.clone(), maps)
}

/// `x_k = c_k y_k`.
pub fn scale(c: &[f64]) -> Result<Chart> {
    if c.is_empty() || c.contains(&0.0) {
        return Err(Error::InvalidArgument("scale factors must be non-zero".into()));
    }
    let n = c.len();
    let forward = c.iter().enumerate().map(|(i, &ci)| CoordMap::Symbolic(Expr::monomial(ci, &[(i, 1.0)]))).collect();
    let inverse =
        c.iter().enumerate().map(|(i, &ci)| CoordMap::Symbolic(Expr::monomial(1.0 / ci, &[(i, 1.0)]))).collect();
    let name = format!("scale:{}", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    Chart::new(name, numbered("x", n)?, numbered("y", n)?, forward, inverse)
}

/// `x = A y + b` with `a = 0`, so `ã = -A^{-1} b`.
pub fn affine(matrix: &[Vec<f64>], shift: &[f64]) -> Result<Chart> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) || shift.len() != n {
        return Err(Error::InvalidArgument("affine chart needs a square matrix and a matching shift".into()));
    }
    let inv = invert(matrix)?;
    let origin_y: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| inv[i][j] * shift[j]).sum::<f64>()).collect();
    // bases are measured from the initial points, so x_k = Σ A_ki (y_i - ã_i)
    // and y_i = Σ A⁻¹_ij x_j + ã_i
    let linear = |rows: &[Vec<f64>], k: usize, constant: f64| {
        let mut terms: Vec<crate::expr::PowerTerm> =
            (0..n).map(|i| Expr::monomial(rows[k][i], &[(i, 1.0)])).flat_map(|e| e.terms().to_vec()).collect();
        terms.push(crate::expr::PowerTerm::constant(constant));
        CoordMap::Symbolic(Expr::from_terms(terms))
    };
    let forward = (0..n).map(|k| linear(matrix, k, 0.0)).collect();
    let inverse = (0..n).map(|i| linear(&inv, i, origin_y[i])).collect();
    let rows: Vec<String> =
        matrix.iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")).collect();
    let b: Vec<String> = shift.iter().map(|v| v.to_string()).collect();
    Chart::new(
        format!("affine:{}|{}", rows.join(";"), b.join(",")),
        numbered("x", n)?,
        numbered("y", n)?.with_origin(&origin_y)?,
        forward,
        inverse,
    )
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv = identity_matrix(n);
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("non-empty");
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::InvalidArgument("affine matrix is singular".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Ok(inv)
}

pub type Matrix = Vec<Vec<f64>>;

pub fn identity_matrix(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let p = b.first().map_or(0, Vec::len);
    (0..n).map(|i| (0..p).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().flatten().fold(0.0, |s, v| s.max(v.abs()))
}

/// Fractional Jacobian with its order metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix<T> {
    pub nu: f64,
    pub m: u32,
    /// `entries[k][i] = J_i^k`.
    pub entries: Vec<Vec<T>>,
}

/// Fractional metric `g_ij = Σ_k J_i^k J_j^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix<T> {
    pub nu: f64,
    pub entries: Vec<Vec<T>>,
}

fn check_order(nu: f64) -> Result<f64> {
    let nu = snap(nu);
    if nu > 0.0 && nu.is_finite() {
        Ok(nu)
    } else {
        Err(Error::InvalidArgument(format!("order must be positive and finite, got {nu}")))
    }
}

/// `α_k = (Π_{i≠k} (x_i - a_i))^{ν-m} (x_k - a_k)^ν / Γ(ν+1)`.
///
/// Annihilated by the order-`ν` derivative in every coordinate but `x_k`.
pub fn alpha_k(k: usize, nu: f64, ctx: &Context) -> Result<Expr> {
    let nu = check_order(nu)?;
    ctx.check_coord(k)?;
    let m = f64::from(ceil_order(nu));
    let factors: Vec<(usize, f64)> = (0..ctx.n()).map(|i| (i, if i == k { nu } else { nu - m })).collect();
    Ok(Expr::monomial(rgamma(nu + 1.0), &factors))
}

/// Symbolic Jacobian, available when every `x_k(y) - a_k` raised to the
/// needed powers stays a sum of power products.
pub fn jacobian_symbolic(chart: &Chart, nu: f64) -> Result<JacobianMatrix<Expr>> {
    let nu = check_order(nu)?;
    let m = ceil_order(nu);
    let forward = chart.symbolic_forward()?;
    let n = chart.n();
    let a = chart.x.origin();
    let shifted: Vec<Expr> = forward.iter().enumerate().map(|(k, e)| *e - &Expr::constant(a[k])).collect();
    let not_product = |e: Error| match e {
        Error::Domain(msg) => Error::ModeMismatch(format!("symbolic Jacobian unavailable: {msg}")),
        other => other,
    };
    let mut entries = Vec::with_capacity(n);
    for k in 0..n {
        let mut inner = Expr::constant(rgamma(nu + 1.0));
        for (j, s) in shifted.iter().enumerate() {
            let p = if j == k { nu } else { nu - f64::from(m) };
            inner = &inner * &s.powf(p).map_err(not_product)?;
        }
        let row = (0..n).map(|i| rl_deriv(&inner, i, nu, &chart.y)).collect::<Result<Vec<_>>>()?;
        entries.push(row);
    }
    Ok(JacobianMatrix { nu, m, entries })
}

/// Jacobian at the point `y` from Richardson-extrapolated Grünwald-Letnikov
/// partials of the black-box forward maps. Entries run in parallel.
pub fn jacobian_numeric(chart: &Chart, nu: f64, y: &[f64], opts: GlOptions) -> Result<JacobianMatrix<f64>> {
    let nu = check_order(nu)?;
    chart.check_point(y)?;
    let m = ceil_order(nu);
    let n = chart.n();
    let whole = f64::from(m) == nu;
    if !whole {
        let origin = chart.y.origin();
        if let Some(i) = (0..n).find(|&i| !(y[i] > origin[i])) {
            return Err(Error::Domain(format!(
                "{} = {} must lie above its initial point {} for a fractional order",
                chart.y.name(i),
                y[i],
                origin[i]
            )));
        }
    }
    let a = chart.x.origin().to_vec();
    let scale = rgamma(nu + 1.0);
    let cells = par::map_range(Exec::default(), n * n, |idx| {
        let (k, i) = (idx / n, idx % n);
        let f = |p: &[f64]| -> f64 {
            let mut acc = scale;
            for (j, map) in chart.forward.iter().enumerate() {
                let Ok(xj) = map.eval(p, &chart.y) else { return f64::NAN };
                let power = if j == k { nu } else { nu - f64::from(m) };
                match real_pow(xj - a[j], power) {
                    Some(v) => acc *= v,
                    None => return f64::NAN,
                }
            }
            acc
        };
        richardson_partial(f, i, nu, y, chart.y.origin()[i], opts).map(|r| r.value)
    });
    let mut entries = vec![vec![0.0; n]; n];
    for (idx, v) in cells.into_iter().enumerate() {
        entries[idx / n][idx % n] = v?;
    }
    Ok(JacobianMatrix { nu, m, entries })
}

/// How Jacobians are obtained at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Symbolic,
    Numeric(GlOptions),
    /// Symbolic when the chart allows it, numeric otherwise.
    Auto(GlOptions),
}

/// Jacobian evaluated at `y` in the requested mode.
pub fn jacobian_at(chart: &Chart, nu: f64, y: &[f64], mode: Mode) -> Result<JacobianMatrix<f64>> {
    chart.check_point(y)?;
    match mode {
        Mode::Numeric(opts) => jacobian_numeric(chart, nu, y, opts),
        Mode::Symbolic => eval_jacobian(&jacobian_symbolic(chart, nu)?, y, &chart.y),
        Mode::Auto(opts) => match jacobian_symbolic(chart, nu) {
            Ok(j) => eval_jacobian(&j, y, &chart.y),
            Err(Error::ModeMismatch(_)) => jacobian_numeric(chart, nu, y, opts),
            Err(e) => Err(e),
        },
    }
}

fn eval_jacobian(j: &JacobianMatrix<Expr>, y: &[f64], ctx: &Context) -> Result<JacobianMatrix<f64>> {
    let entries = j
        .entries
        .iter()
        .map(|row| row.iter().map(|e| e.eval(y, ctx)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(JacobianMatrix { nu: j.nu, m: j.m, entries })
}

/// `J(y,x,ν) J(x,y,ν) - I` at the point `y`, with the reverse Jacobian taken
/// at `x(y)`. Reported as a diagnostic: it vanishes for whole orders and for
/// one coordinate, but not in general.
pub fn inverse_residual(chart: &Chart, nu: f64, y: &[f64], mode: Mode) -> Result<Matrix> {
    let fwd = jacobian_at(chart, nu, y, mode)?;
    let x = chart.to_x(y)?;
    let back = jacobian_at(&chart.inverted(), nu, &x, mode)?;
    let mut r = mat_mul(&fwd.entries, &back.entries);
    for (i, row) in r.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    Ok(r)
}

/// Closed-form [`inverse_residual`] for charts with symbolic maps in both
/// directions: the reverse Jacobian is composed with `x(y)`.
pub fn inverse_residual_symbolic(chart: &Chart, nu: f64) -> Result<Vec<Vec<Expr>>> {
    let fwd = jacobian_symbolic(chart, nu)?;
    let back = jacobian_symbolic(&chart.inverted(), nu)?;
    let n = chart.n();
    let mut out = vec![vec![Expr::zero(); n]; n];
    for k in 0..n {
        for j in 0..n {
            let mut acc = Expr::constant(if k == j { -1.0 } else { 0.0 });
            for i in 0..n {
                let b = compose(&back.entries[i][j], chart)?;
                acc = &acc + &(&fwd.entries[k][i] * &b);
            }
            out[k][j] = acc;
        }
    }
    Ok(out)
}

/// Substitutes `x = x(y)` into an expression over the chart's `x` context.
pub fn compose(e: &Expr, chart: &Chart) -> Result<Expr> {
    let forward = chart.symbolic_forward()?;
    let a = chart.x.origin();
    let shifted: Vec<Expr> = forward.iter().enumerate().map(|(k, f)| *f - &Expr::constant(a[k])).collect();
    let mut out = Expr::zero();
    for t in e.terms() {
        let mut acc = Expr::constant(t.coeff);
        for (k, p) in t.exps.iter() {
            let base = shifted.get(k).ok_or_else(|| {
                Error::InvalidArgument(format!("coordinate {k} outside the chart's {} coordinates", chart.n()))
            })?;
            acc = &acc * &base.powf(p).map_err(|err| match err {
                Error::Domain(msg) => Error::ModeMismatch(format!("cannot compose with the chart: {msg}")),
                other => other,
            })?;
        }
        out = &out + &acc;
    }
    Ok(out)
}

fn one_form_parts(a: &Form, nu: f64, n: usize) -> Result<Vec<Expr>> {
    if a.is_zero() {
        return Ok(vec![Expr::zero(); n]);
    }
    let (order, coeffs) = a.one_form_coefficients(n)?;
    if (order - nu).abs() > crate::expr::EXPONENT_TOL {
        return Err(Error::InvalidArgument(format!("form has order {order}, Jacobian has order {nu}")));
    }
    Ok(coeffs)
}

/// Rewrites `A = Σ_k A_k dx_k^ν` as `Σ_i B_i dy_i^ν` with
/// `B_i = Σ_k A_k(x(y)) J_i^k`. The result lives over the chart's `y`
/// context.
pub fn transform_form(a: &Form, chart: &Chart, j: &JacobianMatrix<Expr>) -> Result<Form> {
    let n = chart.n();
    let coeffs = one_form_parts(a, j.nu, n)?;
    let composed = coeffs.iter().map(|c| compose(c, chart)).collect::<Result<Vec<_>>>()?;
    let out: Vec<Expr> = (0..n)
        .map(|i| (0..n).fold(Expr::zero(), |acc, k| &acc + &(&composed[k] * &j.entries[k][i])))
        .collect();
    Form::one_form(j.nu, &out)
}

/// [`transform_form`] at the point `y`: the coefficients become numbers.
pub fn transform_form_at(a: &Form, chart: &Chart, nu: f64, y: &[f64], mode: Mode) -> Result<Form> {
    let n = chart.n();
    let j = jacobian_at(chart, nu, y, mode)?;
    let coeffs = one_form_parts(a, j.nu, n)?;
    let x = chart.to_x(y)?;
    let values = coeffs.iter().map(|c| c.eval(&x, &chart.x)).collect::<Result<Vec<_>>>()?;
    let out: Vec<Expr> =
        (0..n).map(|i| Expr::constant((0..n).map(|k| values[k] * j.entries[k][i]).sum())).collect();
    Form::one_form(j.nu, &out)
}

/// `g_ij = Σ_k M[k][i] M[k][j]`, filled on and above the diagonal and
/// mirrored, so it is exactly symmetric.
pub fn metric_from(j: &JacobianMatrix<f64>) -> MetricMatrix<f64> {
    let n = j.entries.first().map_or(0, Vec::len);
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for jj in i..n {
            let v: f64 = j.entries.iter().map(|row| row[i] * row[jj]).sum();
            g[i][jj] = v;
            g[jj][i] = v;
        }
    }
    MetricMatrix { nu: j.nu, entries: g }
}

pub fn metric_symbolic_from(j: &JacobianMatrix<Expr>) -> MetricMatrix<Expr> {
    let n = j.entries.first().map_or(0, Vec::len);
    let mut g = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for jj in i..n {
            let v = j.entries.iter().fold(Expr::zero(), |acc, row| &acc + &(&row[i] * &row[jj]));
            g[i][jj] = v.clone();
            g[jj][i] = v;
        }
    }
    MetricMatrix { nu: j.nu, entries: g }
}

/// Metric at the point `y`.
pub fn metric(chart: &Chart, nu: f64, y: &[f64], mode: Mode) -> Result<MetricMatrix<f64>> {
    Ok(metric_from(&jacobian_at(chart, nu, y, mode)?))
}

/// `(Σ_ij g_ij dy_i dy_j)^{1/2}`, each `dy_i` standing for the displacement
/// paired with `dy_i^ν`.
pub fn line_element(g: &MetricMatrix<f64>, dy: &[f64]) -> Result<f64> {
    let n = g.entries.len();
    if dy.len() != n {
        return Err(Error::InvalidArgument(format!("{} displacements for a {n}-dimensional metric", dy.len())));
    }
    let mut q = 0.0;
    let mut size = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let t = g.entries[i][j] * dy[i] * dy[j];
            q += t;
            size = size.max(t.abs());
        }
    }
    if q < 0.0 {
        if q >= -1e-12 * size {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!("quadratic form is negative ({q}) for this displacement")));
    }
    Ok(q.sqrt())
}

/// Closed form of the `dr^ν` entry of the polar Jacobian for `dx_k^ν`
/// (`k = 0` for `x1`, `1` for `x2`):
/// `Γ(2ν-m+1) / (Γ(ν+1) Γ(ν-m+1)) · c^ν s^{ν-m} r^{ν-m}` with `c = cos θ`,
/// `s = sin θ` for `x1` and the roles swapped for `x2`.
pub fn polar_dr_entry(k: usize, nu: f64, r: f64, theta: f64) -> Result<f64> {
    let nu = check_order(nu)?;
    let m = f64::from(ceil_order(nu));
    let (own, other) = match k {
        0 => (theta.cos(), theta.sin()),
        1 => (theta.sin(), theta.cos()),
        _ => return Err(Error::InvalidArgument(format!("polar coordinate index {k} out of range"))),
    };
    let pow = |b: f64, p: f64| {
        real_pow(b, p).ok_or_else(|| Error::Domain(format!("{b} raised to {p} has no real value")))
    };
    let lead = gamma(2.0 * nu - m + 1.0)? * rgamma(nu + 1.0) * rgamma(nu - m + 1.0);
    Ok(lead * pow(own, nu)? * pow(other, nu - m)? * pow(r, nu - m)?)
}

/// JSON form of a numeric matrix with its metadata, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub kind: String,
    pub chart: String,
    pub nu: f64,
    pub m: u32,
    pub point: Vec<f64>,
    pub entries: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Matrix>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn registry() {
        assert_eq!(Chart::parse("polar").unwrap().n(), 2);
        assert_eq!(Chart::parse("identity:3").unwrap().n(), 3);
        assert_eq!(Chart::parse("scale:2,3").unwrap().n(), 2);
        let aff = Chart::parse("affine:1,2;0,1|1,1").unwrap();
        assert!(aff.roundtrip_error(&[0.3, 0.7]).unwrap() < ROUNDTRIP_TOL);
        assert_eq!(aff.to_x(&[1.0, 2.0]).unwrap(), vec![6.0, 3.0]);
        assert!(Chart::parse("affine:1,1;1,1").is_err());
        assert!(Chart::parse("scale:0").is_err());
        assert!(Chart::parse("spherical").is_err());
        assert!(polar().roundtrip_error(&[2.0, 0.9]).unwrap() < ROUNDTRIP_TOL);
    }

    #[test]
    fn alpha_k_kernels() {
        let one = Context::new(&["x"]).unwrap();
        let a = alpha_k(0, 0.5, &one).unwrap();
        assert!(rl_deriv(&a, 0, 0.5, &one).unwrap().approx_eq(&Expr::constant(1.0), 1e-14));
        let two = Context::new(&["x1", "x2"]).unwrap();
        let a = alpha_k(0, 0.5, &two).unwrap();
        assert_eq!(a.terms().len(), 1);
        assert!(rl_deriv(&a, 1, 0.5, &two).unwrap().is_zero());
        let a = alpha_k(1, 1.0, &two).unwrap();
        assert_eq!(a, parse_expr("x2", &two).unwrap());
    }

    #[test]
    fn polar_at_whole_order() {
        let chart = polar();
        let opts = GlOptions::default();
        let j = jacobian_at(&chart, 1.0, &[2.0, 0.0], Mode::Auto(opts)).unwrap();
        assert!(close(&j.entries, &vec![vec![1.0, 0.0], vec![0.0, 2.0]], 1e-8), "{j:?}");
        let (r, t) = (1.7, 0.6);
        let j = jacobian_numeric(&chart, 1.0, &[r, t], opts).unwrap();
        let expected = vec![vec![t.cos(), -r * t.sin()], vec![t.sin(), r * t.cos()]];
        assert!(close(&j.entries, &expected, 1e-8));
        let g = metric(&chart, 1.0, &[2.0, 0.7], Mode::Numeric(opts)).unwrap();
        assert!(close(&g.entries, &vec![vec![1.0, 0.0], vec![0.0, 4.0]], 1e-8));
        assert_eq!(g.entries[0][1], g.entries[1][0]);
        let res = inverse_residual(&chart, 1.0, &[2.0, PI / 3.0], Mode::Numeric(opts)).unwrap();
        assert!(max_abs(&res) <= 1e-6, "{res:?}");
    }

    #[test]
    fn polar_fractional_dr_entry() {
        let (r, t) = (2.0, PI / 4.0);
        let j = jacobian_numeric(&polar(), 0.5, &[r, t], GlOptions::default()).unwrap();
        let closed = polar_dr_entry(0, 0.5, r, t).unwrap();
        assert_relative_eq!(j.entries[0][0], closed, max_relative = 1e-3);
        let closed = polar_dr_entry(1, 0.5, r, t).unwrap();
        assert_relative_eq!(j.entries[1][0], closed, max_relative = 1e-3);
        assert!(matches!(jacobian_symbolic(&polar(), 0.5), Err(Error::ModeMismatch(_))));
        assert!(matches!(jacobian_numeric(&polar(), 0.5, &[2.0, 0.0], GlOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn scaling_charts() {
        let chart = scale(&[3.0]).unwrap();
        let j = jacobian_symbolic(&chart, 0.5).unwrap();
        let value = j.entries[0][0].eval(&[1.0], chart.y_ctx()).unwrap();
        assert_relative_eq!(value, 3f64.sqrt(), max_relative = 1e-15);
        let numeric = jacobian_numeric(&chart, 0.5, &[1.0], GlOptions::default()).unwrap();
        assert_relative_eq!(numeric.entries[0][0], 3f64.sqrt(), max_relative = 1e-6);
        let g = metric(&chart, 0.5, &[1.0], Mode::Symbolic).unwrap();
        assert_relative_eq!(g.entries[0][0], 3.0, max_relative = 1e-15);

        let exact = inverse_residual_symbolic(&scale(&[4.0]).unwrap(), 0.5).unwrap();
        assert!(exact[0][0].is_zero());
        let r = inverse_residual(&scale(&[3.0]).unwrap(), 0.5, &[1.0], Mode::Symbolic).unwrap();
        assert!(r[0][0].abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn diagonal_scaling_residual_is_reported() {
        let r = inverse_residual(&scale(&[2.0, 5.0]).unwrap(), 0.5, &[1.3, 0.4], Mode::Symbolic).unwrap();
        assert!(max_abs(&r) > 1e-3);
        let r = inverse_residual(&scale(&[2.0, 5.0]).unwrap(), 1.0, &[1.3, 0.4], Mode::Symbolic).unwrap();
        assert!(max_abs(&r) <= 1e-12);
    }

    #[test]
    fn affine_reduces_to_classical_partials() {
        let chart = Chart::parse("affine:2,-1;0.5,3|0.2,-0.4").unwrap();
        let j = jacobian_at(&chart, 1.0, &[0.8, 1.1], Mode::Symbolic).unwrap();
        assert!(close(&j.entries, &vec![vec![2.0, -1.0], vec![0.5, 3.0]], 1e-12));
        let jn = jacobian_numeric(&chart, 1.0, &[0.8, 1.1], GlOptions::default()).unwrap();
        assert!(close(&jn.entries, &j.entries, 1e-8));
        let r = inverse_residual(&chart, 1.0, &[0.8, 1.1], Mode::Symbolic).unwrap();
        assert!(max_abs(&r) <= 1e-12);
    }

    #[test]
    fn form_transformation() {
        let chart = polar();
        let x = chart.x_ctx().clone();
        let opts = Mode::Numeric(GlOptions::default());
        let dx1 = Form::parse("d(x1,1)", &x).unwrap();
        let b = transform_form_at(&dx1, &chart, 1.0, &[2.0, 0.0], opts).unwrap();
        let expected = Form::one_form(1.0, &[Expr::constant(1.0), Expr::zero()]).unwrap();
        assert!(b.approx_eq(&expected, 1e-8), "{b:?}");
        let dx2 = Form::parse("d(x2,1)", &x).unwrap();
        let b = transform_form_at(&dx2, &chart, 1.0, &[2.0, 0.0], opts).unwrap();
        let expected = Form::one_form(1.0, &[Expr::zero(), Expr::constant(2.0)]).unwrap();
        assert!(b.approx_eq(&expected, 1e-8));

        let id = identity(1).unwrap();
        let a = Form::parse("3*x1^2 d(x1,0.4)", id.x_ctx()).unwrap();
        let j = jacobian_symbolic(&id, 0.4).unwrap();
        let b = transform_form(&a, &id, &j).unwrap();
        let renamed = Form::parse("3*y1^2 d(y1,0.4)", id.y_ctx()).unwrap();
        assert!(b.approx_eq(&renamed, 1e-14));
    }

    #[test]
    fn line_elements() {
        let polar_g = MetricMatrix { nu: 1.0, entries: vec![vec![1.0, 0.0], vec![0.0, 4.0]] };
        assert_eq!(line_element(&polar_g, &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(line_element(&polar_g, &[0.0, 1.0]).unwrap(), 2.0);
        let id = MetricMatrix { nu: 1.0, entries: identity_matrix(2) };
        assert_eq!(line_element(&id, &[3.0, 4.0]).unwrap(), 5.0);
        let bad = MetricMatrix { nu: 1.0, entries: vec![vec![1.0, 0.0], vec![0.0, -1.0]] };
        assert!(matches!(line_element(&bad, &[0.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = MatrixJson {
            kind: "jacobian".into(),
            chart: "polar".into(),
            nu: 0.5,
            m: 1,
            point: vec![2.0, PI / 4.0],
            entries: vec![vec![0.1 + 0.2, -1.0 / 3.0], vec![1e-300, 7.0]],
            residual: None,
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<MatrixJson>(&text).unwrap(), m);
    }
}
