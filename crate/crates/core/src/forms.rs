//! Fractional differential forms.
//!
//! A form is a finite linear combination of wedge words of fractional-order
//! coordinate differentials `dx_i^μ` with [`Expr`] coefficients. Two
//! differentials in a word cancel the word only when both coordinate and
//! order coincide; `dx^0.3 ∧ dx^0.7` is a perfectly good basis element, and
//! the grade of a form may exceed the number of coordinates.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{fmt_num, snap, Context, Expr, EXPONENT_TOL};
use crate::parse::parse_form_terms;
use crate::rl::rl_deriv;

/// `dx_coord^order` with `order > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffFactor {
    pub coord: usize,
    pub order: f64,
}

impl DiffFactor {
    pub fn new(coord: usize, order: f64) -> Result<Self> {
        let order = snap(order);
        if !(order > 0.0) || !order.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "differential order must be positive and finite, got {order}"
            )));
        }
        Ok(Self { coord, order })
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.coord.cmp(&other.coord).then_with(|| {
            if (self.order - other.order).abs() <= EXPONENT_TOL {
                Ordering::Equal
            } else {
                self.order.total_cmp(&other.order)
            }
        })
    }
}

/// Differentials sorted ascending by `(coord, order)`, all distinct.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WedgeWord {
    factors: Vec<DiffFactor>,
}

impl WedgeWord {
    /// The empty word (scalar unit).
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn factors(&self) -> &[DiffFactor] {
        &self.factors
    }

    pub fn grade(&self) -> usize {
        self.factors.len()
    }

    pub fn total_order(&self) -> f64 {
        snap(self.factors.iter().map(|f| f.order).sum())
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        for (a, b) in self.factors.iter().zip(&other.factors) {
            match a.cmp_key(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.factors.len().cmp(&other.factors.len())
    }

    fn same(&self, other: &Self) -> bool {
        self.cmp_key(other) == Ordering::Equal
    }
}

/// Result of sorting a list of differentials into canonical order.
#[derive(Debug, Clone, PartialEq)]
pub enum Canonical {
    Zero,
    Word { sign: i8, word: WedgeWord },
}

/// Sorts `factors` by `(coord, order)`, tracking the permutation parity.
/// Order-zero factors are the scalar unit and are dropped.
pub fn canonical_word(factors: &[DiffFactor]) -> Canonical {
    let mut v: Vec<DiffFactor> = factors.iter().copied().filter(|f| snap(f.order) != 0.0).collect();
    let mut sign = 1i8;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1].cmp_key(&v[j]) == Ordering::Greater {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0].cmp_key(&w[1]) == Ordering::Equal) {
        return Canonical::Zero;
    }
    Canonical::Word { sign, word: WedgeWord { factors: v } }
}

/// A form of fixed grade and total differential order.
#[derive(Debug, Clone)]
pub struct Form {
    grade: usize,
    total_order: f64,
    terms: Vec<(WedgeWord, Expr)>,
}

impl Form {
    pub fn zero(grade: usize, total_order: f64) -> Self {
        Self { grade, total_order: snap(total_order), terms: Vec::new() }
    }

    pub fn scalar(e: Expr) -> Self {
        let mut f = Self::zero(0, 0.0);
        f.push(WedgeWord::unit(), e);
        f
    }

    /// `Σ_i coeffs[i] dx_i^order`.
    pub fn one_form(order: f64, coeffs: &[Expr]) -> Result<Self> {
        let mut f = Self::zero(1, order);
        for (i, c) in coeffs.iter().enumerate() {
            let word = WedgeWord { factors: vec![DiffFactor::new(i, order)?] };
            f.push(word, c.clone());
        }
        Ok(f)
    }

    /// Builds a form from `(coefficient, differentials)` pairs; every word
    /// must have the same grade and total order.
    pub fn from_parts(parts: Vec<(Expr, Vec<DiffFactor>)>) -> Result<Self> {
        let mut out: Option<Self> = None;
        for (coeff, factors) in parts {
            let kept: Vec<DiffFactor> = factors.into_iter().filter(|f| f.order != 0.0).collect();
            let grade = kept.len();
            let order = snap(kept.iter().map(|f| f.order).sum());
            let form = out.get_or_insert_with(|| Self::zero(grade, order));
            if form.grade != grade || (form.total_order - order).abs() > EXPONENT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "mixed form: grade {grade} / order {order} next to grade {} / order {}",
                    form.grade, form.total_order
                )));
            }
            if let Canonical::Word { sign, word } = canonical_word(&kept) {
                form.push(word, coeff.scale(f64::from(sign)));
            }
        }
        Ok(out.unwrap_or_else(|| Self::zero(0, 0.0)))
    }

    /// Parses the form-literal syntax, e.g. `2*x1*x2 d(x1,0.5) & d(x2,0.5)`.
    /// Plain expressions parse as grade-0 forms.
    pub fn parse(text: &str, ctx: &Context) -> Result<Self> {
        let raw = parse_form_terms(text, ctx)?;
        let parts = raw
            .into_iter()
            .map(|(c, diffs)| {
                let factors = diffs
                    .into_iter()
                    .filter(|&(_, o)| snap(o) != 0.0)
                    .map(|(coord, order)| DiffFactor::new(coord, order))
                    .collect::<Result<Vec<_>>>()?;
                Ok((c, factors))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(parts)
    }

    fn push(&mut self, word: WedgeWord, coeff: Expr) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.binary_search_by(|(w, _)| w.cmp_key(&word)) {
            Ok(i) => {
                let merged = &self.terms[i].1 + &coeff;
                if merged.is_zero() {
                    self.terms.remove(i);
                } else {
                    self.terms[i].1 = merged;
                }
            }
            Err(i) => self.terms.insert(i, (word, coeff)),
        }
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn total_order(&self) -> f64 {
        self.total_order
    }

    pub fn terms(&self) -> &[(WedgeWord, Expr)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the canonical `word`, zero when absent.
    pub fn coefficient(&self, word: &WedgeWord) -> Expr {
        self.terms.iter().find(|(w, _)| w.same(word)).map(|(_, c)| c.clone()).unwrap_or_default()
    }

    /// The scalar value of a grade-0 form.
    pub fn as_scalar(&self) -> Option<Expr> {
        (self.grade == 0).then(|| self.coefficient(&WedgeWord::unit()))
    }

    /// Coefficients `α_i` of a grade-1 form of uniform order `order` over `n`
    /// coordinates.
    pub fn one_form_coefficients(&self, n: usize) -> Result<(f64, Vec<Expr>)> {
        if self.grade != 1 {
            return Err(Error::InvalidArgument(format!("expected a one-form, got grade {}", self.grade)));
        }
        let order = self.total_order;
        let mut coeffs = vec![Expr::zero(); n];
        for (word, c) in &self.terms {
            let f = word.factors[0];
            if f.coord >= n {
                return Err(Error::InvalidArgument(format!("differential on coordinate {} outside the context", f.coord)));
            }
            coeffs[f.coord] = &coeffs[f.coord] + c;
        }
        Ok((order, coeffs))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.is_zero() || other.is_zero() {
            return Ok(());
        }
        if self.grade != other.grade || (self.total_order - other.total_order).abs() > EXPONENT_TOL {
            return Err(Error::InvalidArgument(format!(
                "cannot add a grade {}/order {} form to a grade {}/order {} form",
                self.grade, self.total_order, other.grade, other.total_order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.push(w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.mul_expr(&Expr::constant(c))
    }

    /// Multiplies every coefficient by `e`.
    pub fn mul_expr(&self, e: &Expr) -> Self {
        let mut out = Self::zero(self.grade, self.total_order);
        for (w, c) in &self.terms {
            out.push(w.clone(), c * e);
        }
        out
    }

    /// Word-by-word coefficient comparison at coefficient tolerance `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if !self.is_zero() && !other.is_zero() && (self.grade != other.grade) {
            return false;
        }
        let words = self.terms.iter().chain(&other.terms).map(|(w, _)| w);
        for w in words {
            if !self.coefficient(w).approx_eq(&other.coefficient(w), tol) {
                return false;
            }
        }
        true
    }

    pub fn display<'a>(&'a self, ctx: &'a Context) -> FormDisplay<'a> {
        FormDisplay { form: self, ctx, sig: None }
    }

    pub fn display_sig<'a>(&'a self, ctx: &'a Context, sig: usize) -> FormDisplay<'a> {
        FormDisplay { form: self, ctx, sig: Some(sig) }
    }

    pub fn to_json(&self, ctx: &Context) -> FormJson {
        FormJson {
            grade: self.grade,
            total_order: self.total_order,
            terms: self
                .terms
                .iter()
                .map(|(w, c)| TermJson {
                    sign: 1,
                    factors: w
                        .factors
                        .iter()
                        .map(|f| FactorJson { coord: ctx.name(f.coord).to_string(), order: f.order })
                        .collect(),
                    coeff: ctx.display(c).to_string(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &FormJson, ctx: &Context) -> Result<Self> {
        let mut parts = Vec::with_capacity(json.terms.len());
        for t in &json.terms {
            if t.sign != 1 && t.sign != -1 {
                return Err(Error::InvalidArgument(format!("term sign must be 1 or -1, got {}", t.sign)));
            }
            let coeff = crate::parse::parse_expr(&t.coeff, ctx)?.scale(f64::from(t.sign));
            let factors = t
                .factors
                .iter()
                .map(|f| DiffFactor::new(ctx.index_of(&f.coord)?, f.order))
                .collect::<Result<Vec<_>>>()?;
            parts.push((coeff, factors));
        }
        let mut form = Self::from_parts(parts)?;
        if form.is_zero() {
            form = Self::zero(json.grade, json.total_order);
        } else if form.grade != json.grade || (form.total_order - json.total_order).abs() > EXPONENT_TOL {
            return Err(Error::InvalidArgument(format!(
                "declared grade {}/order {} disagrees with the terms (grade {}/order {})",
                json.grade, json.total_order, form.grade, form.total_order
            )));
        }
        Ok(form)
    }
}

// Orders are sums of floats, so they compare at the exponent tolerance like
// the exponents of the coefficients do.
impl PartialEq for Form {
    fn eq(&self, other: &Self) -> bool {
        self.grade == other.grade
            && (self.total_order - other.total_order).abs() <= EXPONENT_TOL
            && self.terms.len() == other.terms.len()
            && self.terms.iter().zip(&other.terms).all(|((wa, ca), (wb, cb))| wa.same(wb) && ca == cb)
    }
}

/// Exterior product. Bilinear; each concatenated word is re-sorted with its
/// permutation sign.
pub fn wedge(a: &Form, b: &Form) -> Form {
    let mut out = Form::zero(a.grade + b.grade, a.total_order + b.total_order);
    for (wa, ca) in &a.terms {
        for (wb, cb) in &b.terms {
            let factors: Vec<DiffFactor> = wa.factors.iter().chain(&wb.factors).copied().collect();
            if let Canonical::Word { sign, word } = canonical_word(&factors) {
                out.push(word, (ca * cb).scale(f64::from(sign)));
            }
        }
    }
    out
}

/// Fractional exterior derivative `d^ν = Σ_j dx_j^ν ∂_j^ν`.
///
/// On forms of positive grade only the coefficients are differentiated: the
/// differentials are constants under whole-order partials, so the Leibniz
/// series keeps only its leading term. `ν = 0` multiplies by `n` and keeps
/// the grade, since order-zero differentials are the scalar unit.
pub fn frac_exterior_deriv(a: &Form, nu: f64, ctx: &Context) -> Result<Form> {
    let nu = snap(nu);
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!("order must be non-negative and finite, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(a.scale(ctx.n() as f64));
    }
    let mut out = Form::zero(a.grade + 1, a.total_order + nu);
    for (word, coeff) in &a.terms {
        for j in 0..ctx.n() {
            let d = rl_deriv(coeff, j, nu, ctx)?;
            if d.is_zero() {
                continue;
            }
            let mut factors = Vec::with_capacity(word.grade() + 1);
            factors.push(DiffFactor::new(j, nu)?);
            factors.extend_from_slice(&word.factors);
            if let Canonical::Word { sign, word } = canonical_word(&factors) {
                out.push(word, d.scale(f64::from(sign)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorJson {
    pub coord: String,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub sign: i8,
    pub factors: Vec<FactorJson>,
    pub coeff: String,
}

/// Wire format: `{grade, total_order, terms:[{sign, factors:[{coord,order}], coeff}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub grade: usize,
    pub total_order: f64,
    pub terms: Vec<TermJson>,
}

pub struct FormDisplay<'a> {
    form: &'a Form,
    ctx: &'a Context,
    sig: Option<usize>,
}

impl FormDisplay<'_> {
    fn expr(&self, e: &Expr) -> String {
        match self.sig {
            Some(s) => self.ctx.display_sig(e, s).to_string(),
            None => self.ctx.display(e).to_string(),
        }
    }

    fn word(&self, w: &WedgeWord) -> String {
        w.factors
            .iter()
            .map(|f| format!("d({},{})", self.ctx.name(f.coord), fmt_num(f.order, self.sig)))
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

impl fmt::Display for FormDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.form.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (w, c)) in self.form.terms.iter().enumerate() {
            if w.factors.is_empty() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                f.write_str(&self.expr(c))?;
                continue;
            }
            let single = c.terms().len() == 1;
            let negative = single && c.terms()[0].coeff < 0.0;
            if i > 0 {
                f.write_str(if negative { " - " } else { " + " })?;
            } else if negative {
                f.write_str("-")?;
            }
            let shown = if negative { -c } else { c.clone() };
            if shown == Expr::constant(1.0) {
                // bare differential
            } else if single {
                write!(f, "{} ", self.expr(&shown))?;
            } else {
                write!(f, "({}) ", self.expr(&shown))?;
            }
            f.write_str(&self.word(w))?;
        }
        Ok(())
    }
}
