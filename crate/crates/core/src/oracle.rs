//! Grünwald-Letnikov differintegration of black-box functions.
//!
//! `D^q f(x) ≈ h^{-q} Σ_{k=0}^{N} (-1)^k C(q,k) f(x - k h)` with
//! `N = (x - a)/h`. First-order accurate for functions smooth on `[a, x]`.
//! The symbolic engine never calls into this module; it exists to check it.

use crate::error::{Error, Result};
use crate::expr::snap;
use crate::par::{self, Exec};

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_LEVELS: u32 = 3;

/// Minimum number of GL steps between the initial point and `x`.
pub const MIN_STEPS: usize = 10;

/// Step size and Richardson depth for numeric differintegration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlOptions {
    pub h: f64,
    pub levels: u32,
}

impl Default for GlOptions {
    fn default() -> Self {
        Self { h: DEFAULT_STEP, levels: DEFAULT_LEVELS }
    }
}

/// GL weights `(-1)^k C(q,k)` for `k = 0..=n`.
pub fn gl_weights(q: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    for k in 1..=n {
        let kf = k as f64;
        w.push(w[k - 1] * (kf - 1.0 - q) / kf);
    }
    w
}

fn whole_order(q: f64) -> Option<usize> {
    let s = snap(q);
    (s >= 0.0 && s.fract() == 0.0).then_some(s as usize)
}

/// GL sum over exactly `n` steps of width `(x - a)/n`, nodes placed as
/// `a + (n - k) h` so the last node is `a` itself. A non-finite value at `a`
/// is skipped (integrable endpoint singularity).
fn gl_sum<F>(exec: Exec, f: &F, q: f64, x: f64, a: f64, n: usize) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let h = (x - a) / n as f64;
    let w = gl_weights(q, n);
    let endpoint_singular = !f(a).is_finite();
    let terms = if endpoint_singular { n } else { n + 1 };
    let sum = par::try_chunked_sum(exec, terms, |k| {
        if w[k] == 0.0 {
            return Ok(0.0);
        }
        let t = a + (n - k) as f64 * h;
        let v = f(t);
        if v.is_finite() {
            Ok(w[k] * v)
        } else {
            Err(Error::Domain(format!("function is not finite at node t = {t}")))
        }
    })?;
    Ok(sum * h.powf(-q))
}

/// Backward-difference form used for whole orders: the weights vanish past
/// `k = q`, so only a local stencil of width `q h` is needed and the initial
/// point plays no role.
fn gl_local<F>(f: &F, order: usize, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let w = gl_weights(order as f64, order);
    let mut acc = par::Compensated::default();
    for (k, wk) in w.iter().enumerate() {
        let t = x - k as f64 * h;
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::Domain(format!("function is not finite at node t = {t}")));
        }
        acc.add(wk * v);
    }
    Ok(acc.value() * h.powi(-(order as i32)))
}

fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be positive, got {h}")))
    }
}

fn steps_for(x: f64, a: f64, h: f64) -> Result<usize> {
    if !(x > a) {
        return Err(Error::Domain(format!("evaluation point {x} must lie above the initial point {a}")));
    }
    let n = ((x - a) / h).round();
    if n < MIN_STEPS as f64 {
        return Err(Error::InvalidArgument(format!(
            "step {h} gives {n} steps on [{a}, {x}]; at least {MIN_STEPS} are required"
        )));
    }
    Ok(n as usize)
}

/// Grünwald-Letnikov differintegral of order `q` at `x` with initial point
/// `a` and step about `h` (adjusted so that it divides `x - a`).
pub fn gl_deriv<F>(f: F, q: f64, x: f64, a: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    gl_deriv_with(Exec::default(), f, q, x, a, h)
}

pub fn gl_deriv_with<F>(exec: Exec, f: F, q: f64, x: f64, a: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    check_step(h)?;
    if let Some(order) = whole_order(q) {
        return gl_local(&f, order, x, h);
    }
    let n = steps_for(x, a, h)?;
    gl_sum(exec, &f, q, x, a, n)
}

/// [`gl_deriv`] at many points; the outer loop runs in parallel.
pub fn gl_deriv_batch<F>(exec: Exec, f: F, q: f64, xs: &[f64], a: f64, h: f64) -> Vec<Result<f64>>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    par::map(exec, xs, |&x| gl_deriv_with(Exec::Sequential, &f, q, x, a, h))
}

/// Richardson-extrapolated differintegral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolated {
    pub value: f64,
    /// Difference between the two most refined entries of the last row.
    pub error_estimate: f64,
    /// `false` when successive diagonal extrapolants disagree by more than
    /// ten times the estimate.
    pub converged: bool,
}

/// Extrapolates GL values at `h0, h0/2, ..., h0/2^{levels-1}` assuming an
/// error expansion in whole powers of `h`. `levels` must lie in `2..=5`.
pub fn richardson<F>(f: F, q: f64, x: f64, a: f64, h0: f64, levels: u32) -> Result<Extrapolated>
where
    F: Fn(f64) -> f64 + Sync,
{
    richardson_with(Exec::default(), f, q, x, a, h0, levels)
}

pub fn richardson_with<F>(
    exec: Exec,
    f: F,
    q: f64,
    x: f64,
    a: f64,
    h0: f64,
    levels: u32,
) -> Result<Extrapolated>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(2..=5).contains(&levels) {
        return Err(Error::InvalidArgument(format!("Richardson levels must lie in 2..=5, got {levels}")));
    }
    check_step(h0)?;
    let levels = levels as usize;
    let mut column = Vec::with_capacity(levels);
    if let Some(order) = whole_order(q) {
        for i in 0..levels {
            column.push(gl_local(&f, order, x, h0 / (1u64 << i) as f64)?);
        }
    } else {
        let n0 = steps_for(x, a, h0)?;
        for i in 0..levels {
            column.push(gl_sum(exec, &f, q, x, a, n0 << i)?);
        }
    }
    Ok(extrapolate(&column))
}

/// Neville-style table for an expansion in `h, h^2, ...` with step ratio 2.
fn extrapolate(column: &[f64]) -> Extrapolated {
    let l = column.len();
    let mut table = vec![vec![0.0; l]; l];
    for i in 0..l {
        table[i][0] = column[i];
        for j in 1..=i {
            let factor = f64::from((1u32 << j) - 1);
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / factor;
        }
    }
    let value = table[l - 1][l - 1];
    let error_estimate = (value - table[l - 1][l - 2]).abs();
    let step = (value - table[l - 2][l - 2]).abs();
    let floor = 1e-13 * value.abs().max(1e-300);
    Extrapolated { value, error_estimate, converged: step <= 10.0 * error_estimate + floor }
}

/// GL differintegral of a multivariate function along `coord`, other
/// coordinates frozen at `point`.
pub fn gl_partial<F>(f: F, coord: usize, q: f64, point: &[f64], a: f64, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let restricted = restrict(&f, coord, point)?;
    gl_deriv(restricted, q, point[coord], a, h)
}

/// Richardson-extrapolated [`gl_partial`].
pub fn richardson_partial<F>(
    f: F,
    coord: usize,
    q: f64,
    point: &[f64],
    a: f64,
    opts: GlOptions,
) -> Result<Extrapolated>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let restricted = restrict(&f, coord, point)?;
    if opts.levels <= 1 {
        let value = gl_deriv(restricted, q, point[coord], a, opts.h)?;
        return Ok(Extrapolated { value, error_estimate: f64::NAN, converged: true });
    }
    richardson(restricted, q, point[coord], a, opts.h, opts.levels)
}

fn restrict<'a, F>(f: &'a F, coord: usize, point: &'a [f64]) -> Result<impl Fn(f64) -> f64 + Sync + 'a>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if coord >= point.len() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coord} out of range for a {}-component point",
            point.len()
        )));
    }
    Ok(move |t: f64| {
        let mut p = point.to_vec();
        p[coord] = t;
        f(&p)
    })
}
