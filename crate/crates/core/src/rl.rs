//! Riemann-Liouville differintegrals on power-product expressions.
//!
//! With the initial point `a` of the context, the operator of order `q` maps
//! `(x - a)^p` to `Γ(p+1)/Γ(p-q+1) · (x - a)^{p-q}` for `p > -1`. Negative
//! `q` is a fractional integral. Terms whose new gamma denominator sits on a
//! pole vanish.

use crate::error::{Error, Result};
use crate::expr::{snap, Context, Expr, PowerTerm, EXPONENT_TOL};
use crate::special::{gamma_ratio, gen_binomial, rgamma};

/// Order `q` together with `m`, the smallest whole number `>= q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    q: f64,
    m: u32,
}

impl FracOrder {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q < 0.0 {
            return Err(Error::InvalidArgument(format!("order must be finite and non-negative, got {q}")));
        }
        let q = snap(q);
        Ok(Self { q, m: q.ceil() as u32 })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn is_whole(&self) -> bool {
        self.q == f64::from(self.m)
    }
}

/// Smallest whole number `>= q` for `q > 0`, with whole values snapped.
pub fn ceil_order(q: f64) -> u32 {
    snap(q).ceil().max(0.0) as u32
}

/// Fractional derivative (`q > 0`), identity (`q = 0`) or integral (`q < 0`)
/// in coordinate `coord`. Other coordinates ride along as constants.
pub fn rl_deriv(e: &Expr, coord: usize, q: f64, ctx: &Context) -> Result<Expr> {
    ctx.check_coord(coord)?;
    if !q.is_finite() {
        return Err(Error::InvalidArgument(format!("order must be finite, got {q}")));
    }
    let q = snap(q);
    for t in e.terms() {
        let p = t.exps.get(coord);
        if p <= -1.0 + EXPONENT_TOL {
            return Err(Error::ExponentDomain { coord, exponent: p });
        }
    }
    if q == 0.0 {
        return Ok(e.clone());
    }
    e.try_map_terms(|t| {
        let p = t.exps.get(coord);
        let ratio = gamma_ratio(p + 1.0, p - q + 1.0)?;
        if ratio == 0.0 {
            return Ok(None);
        }
        let mut exps = t.exps.clone();
        exps.set(coord, p - q);
        Ok(Some(PowerTerm::new(t.coeff * ratio, exps)))
    })
}

/// Fractional integral of order `q > 0`.
pub fn rl_integ(e: &Expr, coord: usize, q: f64, ctx: &Context) -> Result<Expr> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("integration order must be positive, got {q}")));
    }
    rl_deriv(e, coord, -q, ctx)
}

/// Value of `e` on the hyperplane `x_coord = a_coord`, as an expression in
/// the remaining coordinates.
fn at_initial_point(e: &Expr, coord: usize) -> Result<Expr> {
    e.try_map_terms(|t| {
        let p = t.exps.get(coord);
        if p > 0.0 {
            Ok(None)
        } else if p == 0.0 {
            Ok(Some(t.clone()))
        } else {
            Err(Error::BoundarySingularity { coord, exponent: p })
        }
    })
}

/// Defect of naive additivity of two differintegrals:
///
/// `D^p D^q e - D^{p+q} e + Σ_{j=1..k} [D^{q-j} e]_{x=a} (x-a)^{-p-j} / Γ(1-p-j)`
///
/// with `k` the smallest whole number satisfying `k - 1 <= q <= k`, `k >= 1`.
/// Zero whenever the composition law with boundary corrections holds.
pub fn compose_residual(e: &Expr, coord: usize, p: f64, q: f64, ctx: &Context) -> Result<Expr> {
    if !(p >= 0.0) || !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "composition needs p >= 0 and q >= 0, got p = {p}, q = {q}"
        )));
    }
    let k = ceil_order(q).max(1);
    let inner = rl_deriv(e, coord, q, ctx)?;
    let composed = rl_deriv(&inner, coord, p, ctx)?;
    let direct = rl_deriv(e, coord, p + q, ctx)?;
    let mut residual = &composed - &direct;
    for j in 1..=k {
        let j = f64::from(j);
        let boundary = at_initial_point(&rl_deriv(e, coord, q - j, ctx)?, coord)?;
        let weight = rgamma(1.0 - p - j);
        if weight == 0.0 || boundary.is_zero() {
            continue;
        }
        let correction = boundary.shift_exponent(coord, -p - j).scale(weight);
        residual = &residual + &correction;
    }
    Ok(residual)
}

/// Raised when a non-terminating product-rule series is cut off while the
/// first omitted term is still significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationWarning {
    /// Index of the first omitted term.
    pub next_index: u32,
    /// Its magnitude at the probe point `x_i = a_i + 1`.
    pub next_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductSeries {
    pub value: Expr,
    /// Number of series terms summed.
    pub terms: u32,
    pub truncation: Option<TruncationWarning>,
}

/// Magnitude threshold for [`TruncationWarning`].
pub const TRUNCATION_TOL: f64 = 1e-9;

fn series_term(f: &Expr, g: &Expr, coord: usize, q: f64, j: u32, ctx: &Context) -> Result<Expr> {
    let c = gen_binomial(q, j);
    if c == 0.0 {
        return Ok(Expr::zero());
    }
    let dg = g.classical_derivative(coord, j);
    if dg.is_zero() {
        return Ok(Expr::zero());
    }
    let df = rl_deriv(f, coord, q - f64::from(j), ctx)?;
    Ok((&df * &dg).scale(c))
}

/// Leibniz series `Σ_j C(q,j) D^{q-j} f · ∂^j g` for `D^q (f g)`.
///
/// Terminates at the degree of `g` in `coord` when `g` is a polynomial there;
/// otherwise (or when `max_terms` is smaller) it is cut after index
/// `max_terms` and the first omitted term is checked at a probe point.
pub fn product_rule_series(
    f: &Expr,
    g: &Expr,
    coord: usize,
    q: f64,
    max_terms: u32,
    ctx: &Context,
) -> Result<ProductSeries> {
    ctx.check_coord(coord)?;
    let last = match g.polynomial_degree(coord) {
        Some(deg) => deg.min(max_terms),
        None => max_terms,
    };
    let mut value = Expr::zero();
    for j in 0..=last {
        value = &value + &series_term(f, g, coord, q, j, ctx)?;
    }
    let exhausted = matches!(g.polynomial_degree(coord), Some(deg) if deg <= last);
    let truncation = if exhausted {
        None
    } else {
        let next = series_term(f, g, coord, q, last + 1, ctx)?;
        let probe: Vec<f64> = ctx.origin().iter().map(|a| a + 1.0).collect();
        let mag = next.eval(&probe, ctx)?.abs();
        (mag > TRUNCATION_TOL).then_some(TruncationWarning { next_index: last + 1, next_magnitude: mag })
    };
    Ok(ProductSeries { value, terms: last + 1, truncation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ctx() -> Context {
        Context::new(&["x"]).unwrap()
    }

    fn coeff_of(e: &Expr) -> f64 {
        assert_eq!(e.terms().len(), 1, "expected a single term");
        e.terms()[0].coeff
    }

    #[test]
    fn frac_order() {
        let o = FracOrder::new(1.5).unwrap();
        assert_eq!((o.q(), o.m()), (1.5, 2));
        let o = FracOrder::new(2.0).unwrap();
        assert_eq!(o.m(), 2);
        assert!(o.is_whole());
        assert_eq!(FracOrder::new(1.0 + 1e-12).unwrap().m(), 1);
        assert!(FracOrder::new(-0.5).is_err());
    }

    #[test]
    fn constant_rule() {
        let d = rl_deriv(&Expr::constant(1.0), 0, 0.5, &ctx()).unwrap();
        assert_relative_eq!(coeff_of(&d), 0.564_189_583_547_756_3, max_relative = 1e-14);
        assert_eq!(d.terms()[0].exps.get(0), -0.5);
    }

    #[test]
    fn power_rule_examples() {
        let d = rl_deriv(&Expr::power(0, 1.0), 0, 0.5, &ctx()).unwrap();
        assert_relative_eq!(coeff_of(&d), std::f64::consts::FRAC_2_SQRT_PI, max_relative = 1e-14);
        assert_eq!(d.terms()[0].exps.get(0), 0.5);
        assert!(rl_deriv(&Expr::power(0, -0.5), 0, 0.5, &ctx()).unwrap().is_zero());
        assert!(matches!(
            rl_deriv(&Expr::power(0, -2.0), 0, 0.5, &ctx()),
            Err(Error::ExponentDomain { .. })
        ));
        assert!(matches!(
            rl_deriv(&Expr::power(0, -1.0), 0, 0.5, &ctx()),
            Err(Error::ExponentDomain { .. })
        ));
    }

    #[test]
    fn integral_examples() {
        let c = ctx();
        assert_eq!(rl_integ(&Expr::constant(1.0), 0, 1.0, &c).unwrap(), Expr::power(0, 1.0));
        let i = rl_integ(&Expr::power(0, 1.0), 0, 0.5, &c).unwrap();
        assert_relative_eq!(coeff_of(&i), 0.752_252_778_063_675, max_relative = 1e-14);
        let f = Expr::power(0, 2.0);
        let back = rl_deriv(&rl_integ(&f, 0, 0.7, &c).unwrap(), 0, 0.7, &c).unwrap();
        assert!(back.approx_eq(&f, 1e-12));
        assert!(rl_integ(&f, 0, 0.0, &c).is_err());
    }

    #[test]
    fn other_coordinates_are_constants() {
        let c = Context::new(&["x", "y"]).unwrap();
        let e = parse_expr("x^2*y^3", &c).unwrap();
        let d = rl_deriv(&e, 1, 1.0, &c).unwrap();
        assert_eq!(d, parse_expr("3*x^2*y^2", &c).unwrap());
    }

    #[test]
    fn composition_residuals() {
        let c = ctx();
        let r = compose_residual(&Expr::power(0, 1.0), 0, 0.5, 0.5, &c).unwrap();
        assert!(r.is_zero());
        let r = compose_residual(&Expr::constant(1.0), 0, 0.5, 0.5, &c).unwrap();
        assert!(r.is_zero());
        // D^0.5 D^0.5 x^-0.5 = 0 but D^1 x^-0.5 = -0.5 x^-1.5; the boundary
        // term accounts for the difference.
        let r = compose_residual(&Expr::power(0, -0.5), 0, 0.5, 0.5, &c).unwrap();
        assert!(r.approx_eq(&Expr::zero(), 1e-12), "{r:?}");
        assert!(matches!(
            compose_residual(&Expr::power(0, -0.5), 0, 0.5, 1.2, &c),
            Err(Error::BoundarySingularity { .. }) | Err(Error::ExponentDomain { .. })
        ));
    }

    #[test]
    fn integral_after_derivative_loses_kernel() {
        let c = ctx();
        let e = Expr::power(0, -0.5);
        let round = rl_integ(&rl_deriv(&e, 0, 0.5, &c).unwrap(), 0, 0.5, &c).unwrap();
        assert!(round.is_zero());
        assert_ne!(round, e);
    }

    #[test]
    fn product_series() {
        let c = ctx();
        let s = product_rule_series(&Expr::power(0, 2.0), &Expr::power(0, 3.0), 0, 0.5, 20, &c).unwrap();
        assert_eq!(s.terms, 4);
        assert!(s.truncation.is_none());
        let direct = rl_deriv(&Expr::power(0, 5.0), 0, 0.5, &c).unwrap();
        assert!(s.value.approx_eq(&direct, 1e-10));

        let f = parse_expr("x^1.5 + 2", &c).unwrap();
        let s = product_rule_series(&f, &Expr::constant(1.0), 0, 0.7, 5, &c).unwrap();
        assert_eq!(s.value, rl_deriv(&f, 0, 0.7, &c).unwrap());

        let s = product_rule_series(&Expr::constant(1.0), &Expr::power(0, 1.0), 0, 0.5, 5, &c).unwrap();
        assert!(s.value.approx_eq(&rl_deriv(&Expr::power(0, 1.0), 0, 0.5, &c).unwrap(), 1e-12));

        let g = Expr::power(0, 0.5);
        let s = product_rule_series(&Expr::power(0, 1.0), &g, 0, 0.5, 2, &c).unwrap();
        let w = s.truncation.expect("non-polynomial g must warn");
        assert_eq!(w.next_index, 3);
        assert!(w.next_magnitude > TRUNCATION_TOL);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let term = (-3.0f64..3.0, prop_oneof![(0u32..5).prop_map(f64::from), -0.9f64..4.0])
            .prop_map(|(c, p)| Expr::monomial(c, &[(0, p)]));
        proptest::collection::vec(term, 1..4).prop_map(|ts| ts.iter().fold(Expr::zero(), |a, t| &a + t))
    }

    proptest! {
        #[test]
        fn linearity(a in arb_expr(), b in arb_expr(), s in -2.0f64..2.0, t in -2.0f64..2.0, q in -1.5f64..2.5) {
            let c = ctx();
            let lhs = rl_deriv(&(&a.scale(s) + &b.scale(t)), 0, q, &c).unwrap();
            let rhs = &rl_deriv(&a, 0, q, &c).unwrap().scale(s) + &rl_deriv(&b, 0, q, &c).unwrap().scale(t);
            prop_assert!(lhs.approx_eq(&rhs, 1e-10));
        }

        #[test]
        fn whole_orders_are_classical(e in arb_expr(), n in 0u32..4) {
            let c = ctx();
            // exponents must exceed n - 1 for the classical derivative to stay in range
            let e = e.map_terms(|t| (t.exps.get(0) > f64::from(n) - 1.0).then(|| t.clone()));
            let lhs = rl_deriv(&e, 0, f64::from(n), &c).unwrap();
            prop_assert!(lhs.approx_eq(&e.classical_derivative(0, n), 1e-10));
        }

        #[test]
        fn whole_derivative_after_fractional(e in arb_expr(), q in 0.0f64..2.0, n in 0u32..3) {
            let c = ctx();
            let lhs = rl_deriv(&e, 0, q, &c).unwrap().classical_derivative(0, n);
            let rhs = rl_deriv(&e, 0, q + f64::from(n), &c).unwrap();
            prop_assert!(lhs.approx_eq(&rhs, 1e-10), "{:?} vs {:?}", lhs, rhs);
        }

        #[test]
        fn derivative_inverts_integral(e in arb_expr(), q in 0.01f64..3.0) {
            let c = ctx();
            let back = rl_deriv(&rl_integ(&e, 0, q, &c).unwrap(), 0, q, &c).unwrap();
            prop_assert!(back.approx_eq(&e, 1e-10));
        }

        #[test]
        fn integrals_form_a_semigroup(e in arb_expr(), p in 0.01f64..2.0, q in 0.01f64..2.0) {
            let c = ctx();
            let lhs = rl_integ(&rl_integ(&e, 0, p, &c).unwrap(), 0, q, &c).unwrap();
            let rhs = rl_integ(&e, 0, p + q, &c).unwrap();
            prop_assert!(lhs.approx_eq(&rhs, 1e-10));
        }
    }
}
