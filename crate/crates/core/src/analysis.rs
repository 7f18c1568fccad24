//! Kernels of fractional derivatives, closedness and exactness of fractional
//! one-forms, and reconstruction of potentials.
//!
//! Every operation here assumes the initial points sit at the origin;
//! contexts with other initial points are rejected with
//! [`Error::Unsupported`].

use crate::error::{Error, Result};
use crate::expr::{snap, Context, Expr, EXPONENT_TOL};
use crate::forms::{frac_exterior_deriv, Form};
use crate::par::{self, Exec};
use crate::rl::{ceil_order, rl_deriv, rl_integ};

/// Coefficient tolerance for declaring a residual zero, relative to the size
/// of the quantities it was formed from.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Tolerance of the `d^ν f = α` check on reconstructed potentials.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

fn require_origin(ctx: &Context) -> Result<()> {
    if ctx.has_zero_origin() {
        Ok(())
    } else {
        Err(Error::Unsupported("kernels, closedness and exactness need every initial point at 0".into()))
    }
}

fn positive_order(nu: f64) -> Result<f64> {
    let nu = snap(nu);
    if nu > 0.0 && nu.is_finite() {
        Ok(nu)
    } else {
        Err(Error::InvalidArgument(format!("order must be positive and finite, got {nu}")))
    }
}

/// `true` when `r` is negligible next to expressions of size `scale`.
fn negligible(r: &Expr, scale: f64) -> bool {
    r.max_coeff() <= RESIDUAL_TOL * scale.max(1.0)
}

/// `{x^{ν-m+k} : k = 0..m-1}`, `m = ceil(ν)`: a basis of the kernel of the
/// order-`ν` derivative in `coord`.
pub fn kernel_basis_1d(nu: f64, coord: usize) -> Result<Vec<Expr>> {
    let nu = positive_order(nu)?;
    let m = ceil_order(nu);
    Ok((0..m).map(|k| Expr::power(coord, nu - f64::from(m) + f64::from(k))).collect())
}

/// `{Π_i x_i^{ν-m+k_i}}` over all `k ∈ {0..m-1}^n`: the kernel of `d^ν` on
/// scalars.
pub fn kernel_basis_dv(nu: f64, ctx: &Context) -> Result<Vec<Expr>> {
    let nu = positive_order(nu)?;
    require_origin(ctx)?;
    let m = ceil_order(nu) as usize;
    let n = ctx.n();
    let count = m.pow(n as u32);
    Ok((0..count)
        .map(|mut idx| {
            let mut factors = Vec::with_capacity(n);
            for i in 0..n {
                let k = idx % m;
                idx /= m;
                factors.push((i, nu - m as f64 + k as f64));
            }
            Expr::monomial(1.0, &factors)
        })
        .collect())
}

/// Outcome of [`is_closed`]. One witness per failing condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureReport {
    pub closed: bool,
    pub witnesses: Vec<(usize, usize, Expr)>,
}

/// Closedness of `α = Σ α_i dx_i^ν` under `d^μ`.
///
/// For `μ ≠ ν` every `∂_j^μ α_i` must vanish. For `μ = ν` the words
/// `dx_i^ν ∧ dx_i^ν` drop out, and for `i < j` the coefficient of
/// `dx_i^ν ∧ dx_j^ν`, namely `∂_i^ν α_j - ∂_j^ν α_i`, must vanish.
pub fn is_closed(alpha: &Form, mu: f64, ctx: &Context) -> Result<ClosureReport> {
    require_origin(ctx)?;
    let mu = positive_order(mu)?;
    let (nu, coeffs) = alpha.one_form_coefficients(ctx.n())?;
    let n = ctx.n();
    let pairs: Vec<(usize, usize)> = if (mu - nu).abs() > EXPONENT_TOL {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    } else {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    };
    let same = (mu - nu).abs() <= EXPONENT_TOL;
    let results = par::map(Exec::default(), &pairs, |&(i, j)| -> Result<Option<(usize, usize, Expr)>> {
        let (r, scale) = if same {
            let a = rl_deriv(&coeffs[j], i, mu, ctx)?;
            let b = rl_deriv(&coeffs[i], j, mu, ctx)?;
            let scale = a.max_coeff().max(b.max_coeff());
            (&a - &b, scale)
        } else {
            let r = rl_deriv(&coeffs[i], j, mu, ctx)?;
            (r, 0.0)
        };
        Ok((!negligible(&r, scale)).then_some((i, j, r)))
    });
    let mut witnesses = Vec::new();
    for r in results {
        if let Some(w) = r? {
            witnesses.push(w);
        }
    }
    Ok(ClosureReport { closed: witnesses.is_empty(), witnesses })
}

/// `∂_i^m [ (α_j - ∂_j^ν ∂_i^{-ν} α_i) x_i^{m-ν} ]` with `m = ceil(ν)`.
///
/// Zero for every pair `(i, j)` exactly when the one-form is integrable.
pub fn integrability_residual(alpha: &Form, i: usize, j: usize, ctx: &Context) -> Result<Expr> {
    require_origin(ctx)?;
    let (nu, coeffs) = alpha.one_form_coefficients(ctx.n())?;
    ctx.check_coord(i)?;
    ctx.check_coord(j)?;
    residual_from(&coeffs, nu, i, j, ctx)
}

fn residual_from(coeffs: &[Expr], nu: f64, i: usize, j: usize, ctx: &Context) -> Result<Expr> {
    let m = ceil_order(nu);
    let lifted = rl_deriv(&rl_integ(&coeffs[i], i, nu, ctx)?, j, nu, ctx)?;
    let diff = (&coeffs[j] - &lifted).shift_exponent(i, f64::from(m) - nu);
    let r = diff.classical_derivative(i, m);
    let scale = coeffs[j].max_coeff().max(lifted.max_coeff());
    Ok(if negligible(&r, scale) { Expr::zero() } else { r })
}

/// Outcome of [`solve_exact`].
#[derive(Debug, Clone, PartialEq)]
pub enum ExactnessResult {
    /// A potential `f` with `d^ν f = α`.
    Exact(Expr),
    /// The first failing integrability condition.
    NotIntegrable { residual: Expr, i: usize, j: usize },
    Unsupported(String),
}

/// Finds `f` with `d^ν f = α` for `0 < ν <= 1`.
///
/// The candidate is `f = ∂_1^{-ν} α_1 + c x_1^{ν-1}` where `c` is free of
/// `x_1`; matching the remaining components gives the same problem for `c`
/// in one coordinate fewer. The result is checked against
/// [`frac_exterior_deriv`] before it is returned.
pub fn solve_exact(alpha: &Form, nu: f64, ctx: &Context) -> Result<ExactnessResult> {
    let nu = positive_order(nu)?;
    if nu > 1.0 {
        return Ok(ExactnessResult::Unsupported(format!(
            "potentials are only reconstructed for 0 < order <= 1, got {nu}"
        )));
    }
    if !ctx.has_zero_origin() {
        return Ok(ExactnessResult::Unsupported("potentials need every initial point at 0".into()));
    }
    if alpha.is_zero() {
        return Ok(ExactnessResult::Exact(Expr::zero()));
    }
    let (order, coeffs) = alpha.one_form_coefficients(ctx.n())?;
    if (order - nu).abs() > EXPONENT_TOL {
        return Err(Error::InvalidArgument(format!("form has order {order}, requested {nu}")));
    }
    let n = ctx.n();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let residuals = par::map(Exec::default(), &pairs, |&(i, j)| residual_from(&coeffs, nu, i, j, ctx));
    for (&(i, j), r) in pairs.iter().zip(residuals) {
        let r = r?;
        if !r.is_zero() {
            return Ok(ExactnessResult::NotIntegrable { residual: r, i, j });
        }
    }
    let f = potential(0, &coeffs, nu, ctx)?;
    let check = frac_exterior_deriv(&Form::scalar(f.clone()), nu, ctx)?;
    if !check.approx_eq(alpha, ROUND_TRIP_TOL) {
        return Err(Error::Verification(format!(
            "reconstructed potential {} does not reproduce the form",
            ctx.display(&f)
        )));
    }
    Ok(ExactnessResult::Exact(f))
}

// Solves ∂_j^ν f = targets[j - k] for j >= k with f free of x_0..x_{k-1}.
fn potential(k: usize, targets: &[Expr], nu: f64, ctx: &Context) -> Result<Expr> {
    let Some((first, rest)) = targets.split_first() else {
        return Ok(Expr::zero());
    };
    let f0 = rl_integ(first, k, nu, ctx)?;
    let mut rhs = Vec::with_capacity(rest.len());
    for (offset, t) in rest.iter().enumerate() {
        let j = k + 1 + offset;
        let r = (t - &rl_deriv(&f0, j, nu, ctx)?).shift_exponent(k, 1.0 - nu);
        let r = r.map_terms(|term| {
            let negligible_term = term.exps.get(k) != 0.0 && term.coeff.abs() <= RESIDUAL_TOL * t.max_coeff().max(1.0);
            (!negligible_term).then(|| term.clone())
        });
        if !r.is_free_of(k) {
            return Err(Error::Verification(format!(
                "matching condition for {} still depends on {}",
                ctx.name(j),
                ctx.name(k)
            )));
        }
        rhs.push(r);
    }
    let c = potential(k + 1, &rhs, nu, ctx)?;
    Ok(&f0 + &c.shift_exponent(k, nu - 1.0))
}
