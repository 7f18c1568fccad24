//! Recursive-descent parser for expressions and form literals.
//!
//! ```text
//! expr    := term (("+"|"-") term)*
//! term    := signed_number ("*" factor)* | factor ("*" factor)*
//! factor  := coord ("^" signed_number)?
//! ```
//!
//! Accepted extensions: a leading `-` on a factor-first term, bare numbers
//! as factors, and parenthesized sub-expressions as factors. Form literals
//! append differentials to a term: `2*x1 d(x1,0.5) & d(x2,0.5) + ...`.

use crate::error::{Error, Result};
use crate::expr::{Context, Expr};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Comma,
    Amp,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Amp => "`&`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => out.push((Tok::Plus, start)),
            '-' => out.push((Tok::Minus, start)),
            '*' => out.push((Tok::Star, start)),
            '^' => out.push((Tok::Caret, start)),
            '(' => out.push((Tok::LParen, start)),
            ')' => out.push((Tok::RParen, start)),
            ',' => out.push((Tok::Comma, start)),
            '&' => out.push((Tok::Amp, start)),
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                // optional exponent part
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lit = &text[i..j];
                let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: format!("malformed number `{lit}`"),
                })?;
                out.push((Tok::Num(v), start));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(text[i..j].to_string()), start));
                i = j;
                continue;
            }
            other => {
                return Err(Error::Syntax { pos: start, msg: format!("unexpected character `{other}`") })
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

/// One additive piece of a form literal: coefficient and differentials
/// as `(coord, order)` pairs in the order written.
pub(crate) type RawFormTerm = (Expr, Vec<(usize, f64)>);

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'a Context,
    forms: bool,
}

impl<'a> Parser<'a> {
    fn new(text: &str, ctx: &'a Context, forms: bool) -> Result<Self> {
        Ok(Self { toks: lex(text)?, pos: 0, ctx, forms })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.offset(), msg: msg.into() })
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", describe(&want), describe(self.peek())))
        }
    }

    fn at_differential(&self) -> bool {
        self.forms && matches!(self.peek(), Tok::Ident(s) if s == "d") && *self.peek_at(1) == Tok::LParen
    }

    fn signed_number(&mut self) -> Result<f64> {
        let neg = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        match *self.peek() {
            Tok::Num(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            ref other => self.err(format!("expected a number, found {}", describe(other))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut sign = 1.0;
        while matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if self.bump() == Tok::Minus {
                sign = -sign;
            }
        }
        let mut acc = self.factor()?.scale(sign);
        while *self.peek() == Tok::Star {
            if self.forms && matches!(self.peek_at(1), Tok::Ident(s) if s == "d") && *self.peek_at(2) == Tok::LParen {
                break;
            }
            self.bump();
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::constant(v))
            }
            Tok::Ident(name) => {
                if self.at_differential() {
                    return self.err("expected a coefficient before the differential");
                }
                let coord = self.ctx.index_of(&name)?;
                self.bump();
                let p = if *self.peek() == Tok::Caret {
                    self.bump();
                    self.signed_number()?
                } else {
                    1.0
                };
                Ok(Expr::power(coord, p))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => self.err(format!("expected a number, coordinate or `(`, found {}", describe(&other))),
        }
    }

    fn differential(&mut self) -> Result<(usize, f64)> {
        self.bump(); // `d`
        self.expect(Tok::LParen)?;
        let coord = match self.bump() {
            Tok::Ident(name) => self.ctx.index_of(&name)?,
            other => {
                self.pos -= 1;
                return self.err(format!("expected a coordinate, found {}", describe(&other)));
            }
        };
        self.expect(Tok::Comma)?;
        let order = self.signed_number()?;
        self.expect(Tok::RParen)?;
        Ok((coord, order))
    }

    fn form_term(&mut self, mut sign: f64) -> Result<RawFormTerm> {
        while matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if self.bump() == Tok::Minus {
                sign = -sign;
            }
        }
        let coeff = if self.at_differential() {
            Expr::constant(sign)
        } else {
            self.term()?.scale(sign)
        };
        let mut diffs = Vec::new();
        if *self.peek() == Tok::Star && self.forms {
            self.bump();
            if !self.at_differential() {
                return self.err("expected a differential `d(coord,order)` after `*`");
            }
        }
        if self.at_differential() {
            diffs.push(self.differential()?);
            while *self.peek() == Tok::Amp {
                self.bump();
                if !self.at_differential() {
                    return self.err("expected a differential `d(coord,order)` after `&`");
                }
                diffs.push(self.differential()?);
            }
        }
        Ok((coeff, diffs))
    }

    fn form(&mut self) -> Result<Vec<RawFormTerm>> {
        let mut out = vec![self.form_term(1.0)?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    out.push(self.form_term(1.0)?);
                }
                Tok::Minus => {
                    self.bump();
                    out.push(self.form_term(-1.0)?);
                }
                _ => return Ok(out),
            }
        }
    }

    fn finish(&self) -> Result<()> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            self.err(format!("unexpected {}", describe(self.peek())))
        }
    }
}

/// Parses an expression over the coordinates of `ctx` and canonicalizes it.
pub fn parse_expr(text: &str, ctx: &Context) -> Result<Expr> {
    let mut p = Parser::new(text, ctx, false)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub(crate) fn parse_form_terms(text: &str, ctx: &Context) -> Result<Vec<RawFormTerm>> {
    let mut p = Parser::new(text, ctx, true)?;
    let terms = p.form()?;
    p.finish()?;
    Ok(terms)
}

/// Identifiers used as coordinates in `text`, in natural order
/// (`x2` before `x10`). Differential markers `d(` are skipped.
pub fn infer_coordinates(text: &str) -> Result<Vec<String>> {
    let toks = lex(text)?;
    let mut names: Vec<String> = Vec::new();
    for (i, (t, _)) in toks.iter().enumerate() {
        if let Tok::Ident(s) = t {
            if s == "d" && toks.get(i + 1).map(|t| &t.0) == Some(&Tok::LParen) {
                continue;
            }
            if !names.contains(s) {
                names.push(s.clone());
            }
        }
    }
    names.sort_by_key(|n| natural_key(n));
    Ok(names)
}

fn natural_key(s: &str) -> (String, u64, String) {
    let split = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, digits) = s.split_at(split);
    (head.to_string(), digits.parse().unwrap_or(0), s.to_string())
}
