//! Sums of generalized power products.
//!
//! An [`Expr`] is a finite sum of terms `c · Π_i (x_i - a_i)^{p_i}` with real
//! coefficients and real exponents. The initial points `a_i` belong to the
//! [`Context`], never to individual terms. This class is closed under the
//! Riemann-Liouville power rule, under products, and under whole-order
//! differentiation.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Exponents closer than this are treated as equal.
pub const EXPONENT_TOL: f64 = 1e-9;

/// Terms whose coefficient magnitude falls below this are dropped.
pub const COEFF_DROP: f64 = 1e-12;

/// Rounds `v` to the nearest integer when it lies within [`EXPONENT_TOL`].
pub fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= EXPONENT_TOL {
        if r == 0.0 {
            0.0
        } else {
            r
        }
    } else {
        v
    }
}

pub fn is_whole(v: f64) -> bool {
    (v - v.round()).abs() <= EXPONENT_TOL
}

/// Coordinate names and initial points shared by a family of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    names: Vec<String>,
    origin: Vec<f64>,
}

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Context {
    /// A context with every initial point at the origin.
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("at least one coordinate is required".into()));
        }
        let names: Vec<String> = names.iter().map(|s| s.as_ref().trim().to_string()).collect();
        for (i, name) in names.iter().enumerate() {
            if !valid_ident(name) {
                return Err(Error::InvalidArgument(format!("`{name}` is not a valid coordinate name")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidArgument(format!("coordinate `{name}` declared twice")));
            }
        }
        let origin = vec![0.0; names.len()];
        Ok(Self { names, origin })
    }

    pub fn with_origin(mut self, origin: &[f64]) -> Result<Self> {
        if origin.len() != self.names.len() {
            return Err(Error::InvalidArgument(format!(
                "{} initial points given for {} coordinates",
                origin.len(),
                self.names.len()
            )));
        }
        if origin.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("initial points must be finite".into()));
        }
        self.origin = origin.to_vec();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, coord: usize) -> &str {
        &self.names[coord]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownCoordinate(name.to_string()))
    }

    pub(crate) fn check_coord(&self, coord: usize) -> Result<()> {
        if coord < self.n() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "coordinate index {coord} out of range for {} coordinates",
                self.n()
            )))
        }
    }

    pub fn has_zero_origin(&self) -> bool {
        self.origin.iter().all(|&a| a == 0.0)
    }

    /// Formats `e` in the expression grammar with full round-trip precision.
    pub fn display<'a>(&'a self, e: &'a Expr) -> ExprDisplay<'a> {
        ExprDisplay { ctx: self, expr: e, sig: None }
    }

    /// Formats `e` with numbers rounded to `sig` significant digits.
    pub fn display_sig<'a>(&'a self, e: &'a Expr, sig: usize) -> ExprDisplay<'a> {
        ExprDisplay { ctx: self, expr: e, sig: Some(sig) }
    }
}

/// Dense exponent vector indexed by coordinate, trailing zeros trimmed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Exponents(Vec<f64>);

impl Exponents {
    pub fn new(mut v: Vec<f64>) -> Self {
        for e in &mut v {
            *e = snap(*e);
        }
        let mut out = Self(v);
        out.trim();
        out
    }

    pub fn get(&self, coord: usize) -> f64 {
        self.0.get(coord).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, coord: usize, value: f64) {
        if coord >= self.0.len() {
            self.0.resize(coord + 1, 0.0);
        }
        self.0[coord] = snap(value);
        self.trim();
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0.0) {
            self.0.pop();
        }
    }

    /// Non-zero `(coord, exponent)` pairs in coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, e)| e != 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest coordinate index plus one.
    pub fn span(&self) -> usize {
        self.0.len()
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let len = self.0.len().max(other.0.len());
        Self::new((0..len).map(|i| f(self.get(i), other.get(i))).collect())
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        let len = self.0.len().max(other.0.len());
        (0..len).all(|i| (self.get(i) - other.get(i)).abs() <= EXPONENT_TOL)
    }

    fn lex_cmp(&self, other: &Self) -> Ordering {
        let len = self.0.len().max(other.0.len());
        for i in 0..len {
            match self.get(i).total_cmp(&other.get(i)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// One term `coeff · Π (x_i - a_i)^{exps_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exps: Exponents,
}

impl PowerTerm {
    pub fn constant(c: f64) -> Self {
        Self { coeff: c, exps: Exponents::default() }
    }

    pub fn new(coeff: f64, exps: Exponents) -> Self {
        Self { coeff, exps }
    }

    fn eval(&self, point: &[f64], origin: &[f64]) -> Result<f64> {
        let mut v = self.coeff;
        for (coord, p) in self.exps.iter() {
            let base = point[coord] - origin[coord];
            v *= real_pow(base, p).ok_or_else(|| {
                Error::Domain(format!(
                    "base {base} raised to exponent {p} on coordinate {coord} has no real value"
                ))
            })?;
        }
        Ok(v)
    }
}

/// Real-branch power. `None` for a negative base with a non-whole exponent,
/// or a zero base with a negative exponent.
pub(crate) fn real_pow(base: f64, p: f64) -> Option<f64> {
    if p == 0.0 {
        return Some(1.0);
    }
    if base == 0.0 {
        return if p > 0.0 { Some(0.0) } else { None };
    }
    if is_whole(p) {
        let k = p.round();
        if k.abs() <= i32::MAX as f64 {
            return Some(base.powi(k as i32));
        }
        return Some(base.powf(k));
    }
    if base < 0.0 {
        None
    } else {
        Some(base.powf(p))
    }
}

/// A canonical sum of power terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    terms: Vec<PowerTerm>,
}

impl Expr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![PowerTerm::constant(c)])
    }

    /// `(x_coord - a_coord)^p`.
    pub fn power(coord: usize, p: f64) -> Self {
        Self::monomial(1.0, &[(coord, p)])
    }

    pub fn monomial(coeff: f64, factors: &[(usize, f64)]) -> Self {
        let mut exps = Exponents::default();
        for &(coord, p) in factors {
            let cur = exps.get(coord);
            exps.set(coord, cur + p);
        }
        Self::from_terms(vec![PowerTerm::new(coeff, exps)])
    }

    /// Builds and canonicalizes.
    pub fn from_terms(terms: Vec<PowerTerm>) -> Self {
        Self { terms }.canonicalize()
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    /// Merges like terms, drops negligible coefficients and sorts terms
    /// lexicographically by exponent vector.
    pub fn canonicalize(self) -> Self {
        let mut merged: Vec<PowerTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            if !t.coeff.is_finite() {
                merged.push(t);
                continue;
            }
            match merged.iter_mut().find(|m| m.exps.approx_eq(&t.exps)) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t),
            }
        }
        merged.retain(|t| !(t.coeff.abs() < COEFF_DROP));
        merged.sort_by(|a, b| a.exps.lex_cmp(&b.exps));
        Self { terms: merged }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_terms(
            self.terms.iter().map(|t| PowerTerm::new(t.coeff * c, t.exps.clone())).collect(),
        )
    }

    /// Multiplies every term by `(x_coord - a_coord)^p`.
    pub fn shift_exponent(&self, coord: usize, p: f64) -> Self {
        self.map_terms(|t| {
            let mut exps = t.exps.clone();
            exps.set(coord, exps.get(coord) + p);
            Some(PowerTerm::new(t.coeff, exps))
        })
    }

    pub(crate) fn map_terms(&self, f: impl Fn(&PowerTerm) -> Option<PowerTerm>) -> Self {
        Self::from_terms(self.terms.iter().filter_map(f).collect())
    }

    pub(crate) fn try_map_terms(
        &self,
        f: impl Fn(&PowerTerm) -> Result<Option<PowerTerm>>,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if let Some(nt) = f(t)? {
                out.push(nt);
            }
        }
        Ok(Self::from_terms(out))
    }

    /// Evaluates at absolute coordinates `point`, measuring each base from
    /// the context's initial points.
    pub fn eval(&self, point: &[f64], ctx: &Context) -> Result<f64> {
        if point.len() < ctx.n() {
            return Err(Error::InvalidArgument(format!(
                "point has {} components, context has {} coordinates",
                point.len(),
                ctx.n()
            )));
        }
        let mut sum = 0.0;
        for t in &self.terms {
            if t.exps.span() > ctx.n() {
                return Err(Error::InvalidArgument("expression uses coordinates outside the context".into()));
            }
            sum += t.eval(point, ctx.origin())?;
        }
        Ok(sum)
    }

    /// Whole-order partial derivative in `coord`, applied term by term.
    pub fn classical_derivative(&self, coord: usize, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        self.map_terms(|t| {
            let p = t.exps.get(coord);
            let mut c = t.coeff;
            for i in 0..order {
                c *= p - f64::from(i);
            }
            if c == 0.0 {
                return None;
            }
            let mut exps = t.exps.clone();
            exps.set(coord, p - f64::from(order));
            Some(PowerTerm::new(c, exps))
        })
    }

    /// Largest exponent on `coord` when every exponent on it is a
    /// non-negative whole number.
    pub fn polynomial_degree(&self, coord: usize) -> Option<u32> {
        let mut deg = 0u32;
        for t in &self.terms {
            let p = t.exps.get(coord);
            if p < 0.0 || !is_whole(p) {
                return None;
            }
            deg = deg.max(p.round() as u32);
        }
        Some(deg)
    }

    /// `true` when no term involves `coord`.
    pub fn is_free_of(&self, coord: usize) -> bool {
        self.terms.iter().all(|t| t.exps.get(coord) == 0.0)
    }

    /// Highest coordinate index used plus one.
    pub fn span(&self) -> usize {
        self.terms.iter().map(|t| t.exps.span()).max().unwrap_or(0)
    }

    /// Real power of an expression, staying inside the class: whole
    /// non-negative powers of any sum, and arbitrary powers of a single term
    /// with positive coefficient.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let p = snap(p);
        if p == 0.0 {
            return Ok(Self::constant(1.0));
        }
        if self.terms.len() == 1 {
            let t = &self.terms[0];
            let c = real_pow(t.coeff, p).ok_or_else(|| {
                Error::Domain(format!("coefficient {} raised to {p} has no real value", t.coeff))
            })?;
            let exps = Exponents::new((0..t.exps.span()).map(|i| t.exps.get(i) * p).collect());
            return Ok(Self::from_terms(vec![PowerTerm::new(c, exps)]));
        }
        if self.is_zero() {
            return if p > 0.0 {
                Ok(Self::zero())
            } else {
                Err(Error::Domain(format!("zero raised to {p}")))
            };
        }
        if p > 0.0 && is_whole(p) {
            let mut acc = Self::constant(1.0);
            for _ in 0..p.round() as u64 {
                acc = &acc * self;
            }
            return Ok(acc);
        }
        Err(Error::Domain(format!(
            "a sum of {} terms raised to {p} is not a power product",
            self.terms.len()
        )))
    }

    /// Coefficient-wise comparison: the difference has no coefficient above
    /// `tol · max(1, largest coefficient)`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let scale = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| t.coeff.abs())
            .fold(1.0, f64::max);
        let diff = self - other;
        diff.terms.iter().all(|t| t.coeff.abs() <= tol * scale)
    }

    /// Largest coefficient magnitude, zero for the zero expression.
    pub fn max_coeff(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max)
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::from_terms(self.terms.iter().chain(&rhs.terms).cloned().collect())
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self + &(-rhs)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr {
            terms: self.terms.iter().map(|t| PowerTerm::new(-t.coeff, t.exps.clone())).collect(),
        }
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        let mut out = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                out.push(PowerTerm::new(a.coeff * b.coeff, a.exps.combine(&b.exps, |x, y| x + y)));
            }
        }
        Expr::from_terms(out)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

/// Formats a number either exactly (shortest round-trip form) or rounded to
/// `sig` significant digits. Never uses exponent notation.
pub fn fmt_num(v: f64, sig: Option<usize>) -> String {
    let v = match sig {
        Some(s) if v.is_finite() && v != 0.0 => {
            format!("{:.*e}", s.saturating_sub(1), v).parse::<f64>().unwrap_or(v)
        }
        _ => v,
    };
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}

pub struct ExprDisplay<'a> {
    ctx: &'a Context,
    expr: &'a Expr,
    sig: Option<usize>,
}

impl ExprDisplay<'_> {
    fn write_term(&self, f: &mut fmt::Formatter<'_>, t: &PowerTerm, coeff: f64) -> fmt::Result {
        let factors: Vec<(usize, f64)> = t.exps.iter().collect();
        let mut first = true;
        if factors.is_empty() || coeff != 1.0 {
            write!(f, "{}", fmt_num(coeff, self.sig))?;
            first = false;
        }
        for (coord, p) in factors {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            let name = self.ctx.names.get(coord).map(String::as_str).unwrap_or("?");
            if p == 1.0 {
                f.write_str(name)?;
            } else {
                write!(f, "{name}^{}", fmt_num(p, self.sig))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.expr.terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in terms.iter().enumerate() {
            if i == 0 {
                self.write_term(f, t, t.coeff)?;
            } else if t.coeff < 0.0 {
                f.write_str(" - ")?;
                self.write_term(f, t, -t.coeff)?;
            } else {
                f.write_str(" + ")?;
                self.write_term(f, t, t.coeff)?;
            }
        }
        Ok(())
    }
}
