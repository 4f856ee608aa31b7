//! Text grammar for polynomials.
//!
//! ```text
//! poly     := term (("+" | "-") term)*
//! term     := [coeff] [monomial]
//! coeff    := complex-literal | NAME
//! monomial := letter+
//! letter   := "x" INT ["_" INT] ["*"]
//! complex-literal := "(" FLOAT ("+" | "-") FLOAT "i" ")" | FLOAT
//! ```
//!
//! A `*` written directly before another factor (no whitespace) is read as
//! multiplication, so `x11*x21` is a product; otherwise a trailing `*` marks
//! the adjoint (`x11* x21`). Letters without `_` are split digit-by-digit when
//! both grid dimensions are at most 9; with a single column `x3` means `x31`.

use super::word::{Letter, Word};
use super::NcPoly;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use std::collections::BTreeMap;

/// Named matrix coefficients referenced by polynomial text.
pub type CoeffTable = BTreeMap<String, CMat>;

enum Coeff {
    Scalar(C64),
    Matrix(CMat),
}

struct Parser<'a> {
    s: Vec<char>,
    pos: usize,
    gprime: usize,
    g: usize,
    table: Option<&'a CoeffTable>,
}

/// Parse polynomial text over a `gprime x g` grid. Named coefficients are
/// looked up in `table`; the name `i` denotes the imaginary unit unless the
/// table defines it.
pub fn parse_poly(text: &str, gprime: usize, g: usize, table: Option<&CoeffTable>) -> Result<NcPoly> {
    let mut p = Parser { s: text.chars().collect(), pos: 0, gprime, g, table };
    let terms = p.poly()?;
    let mut shape: Option<(usize, usize)> = None;
    for (_, c, _) in &terms {
        if let Coeff::Matrix(m) = c {
            let sh = (m.nrows(), m.ncols());
            if shape.is_some_and(|s| s != sh) {
                return Err(Error::Shape(format!("coefficient shapes {:?} and {:?} disagree", shape.unwrap(), sh)));
            }
            shape = Some(sh);
        }
    }
    let (dp, d) = shape.unwrap_or((1, 1));
    let mut out = NcPoly::zero(gprime, g, dp, d);
    for (sign, c, w) in terms {
        let m = match c {
            Coeff::Matrix(m) => m,
            Coeff::Scalar(z) if dp == d => linalg::eye(d) * z,
            Coeff::Scalar(_) => {
                return Err(Error::Shape(format!("scalar term in a {dp}x{d} polynomial")));
            }
        };
        out.add_term(w, m * linalg::c(sign, 0.0));
    }
    Ok(out)
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos, msg: msg.into() })
    }

    fn peek(&self) -> Option<char> {
        self.s.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.s.get(self.pos + k).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn sign(&mut self) -> Option<f64> {
        match self.peek() {
            Some('+') => {
                self.pos += 1;
                Some(1.0)
            }
            Some('-') | Some('\u{2212}') => {
                self.pos += 1;
                Some(-1.0)
            }
            _ => None,
        }
    }

    fn at_letter(&self) -> bool {
        self.peek() == Some('x') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit())
    }

    fn poly(&mut self) -> Result<Vec<(f64, Coeff, Word)>> {
        let mut out = Vec::new();
        self.skip_ws();
        let mut sign = self.sign().unwrap_or(1.0);
        loop {
            self.skip_ws();
            let (c, w) = self.term()?;
            out.push((sign, c, w));
            self.skip_ws();
            if self.peek().is_none() {
                break;
            }
            match self.sign() {
                Some(s) => sign = s,
                None => return self.err(format!("expected `+` or `-`, found `{}`", self.peek().unwrap())),
            }
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(Coeff, Word)> {
        let start = self.pos;
        let coeff = match self.peek() {
            Some('(') => Some(Coeff::Scalar(self.complex_literal()?)),
            Some(c) if c.is_ascii_digit() || c == '.' => Some(Coeff::Scalar(linalg::c(self.float()?, 0.0))),
            Some(c) if (c.is_alphabetic() || c == '_') && !self.at_letter() => Some(self.named()?),
            _ => None,
        };
        self.skip_ws();
        if coeff.is_some() && self.peek() == Some('*') {
            self.pos += 1;
            self.skip_ws();
        }
        let mut letters = Vec::new();
        while self.at_letter() {
            letters.push(self.letter()?);
            self.skip_ws();
        }
        if coeff.is_none() && letters.is_empty() {
            self.pos = start;
            return self.err("expected a coefficient or a monomial");
        }
        Ok((coeff.unwrap_or(Coeff::Scalar(linalg::c(1.0, 0.0))), Word(letters)))
    }

    fn named(&mut self) -> Result<Coeff> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.s[start..self.pos].iter().collect();
        if let Some(m) = self.table.and_then(|t| t.get(&name)) {
            return Ok(Coeff::Matrix(m.clone()));
        }
        if name == "i" {
            return Ok(Coeff::Scalar(linalg::c(0.0, 1.0)));
        }
        Err(Error::UnknownCoefficient(name))
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.s[start..self.pos].iter().collect()
    }

    fn float(&mut self) -> Result<f64> {
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.pos += 1;
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e') | Some('E'))
            && (self.peek_at(1).is_some_and(|c| c.is_ascii_digit())
                || (matches!(self.peek_at(1), Some('+') | Some('-')) && self.peek_at(2).is_some_and(|c| c.is_ascii_digit())))
        {
            self.pos += 2;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text: String = self.s[start..self.pos].iter().collect();
        text.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("malformed number `{text}`"))
        })
    }

    fn complex_literal(&mut self) -> Result<C64> {
        self.pos += 1;
        self.skip_ws();
        let re = self.float()?;
        self.skip_ws();
        let sign = match self.sign() {
            Some(s) => s,
            None => return self.err("expected `+` or `-` inside complex literal"),
        };
        self.skip_ws();
        let im = self.float()?;
        self.skip_ws();
        if self.peek() != Some('i') {
            return self.err("expected `i` in complex literal");
        }
        self.pos += 1;
        self.skip_ws();
        if self.peek() != Some(')') {
            return self.err("expected `)`");
        }
        self.pos += 1;
        Ok(linalg::c(re, sign * im))
    }

    fn letter(&mut self) -> Result<Letter> {
        let start = self.pos;
        self.pos += 1;
        let first = self.digits();
        let second = if self.peek() == Some('_') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
            Some(self.digits())
        } else {
            None
        };
        let text: String = self.s[start..self.pos].iter().collect();
        let (row, col) = self.resolve(&first, second.as_deref(), &text)?;
        let mut star = false;
        if self.peek() == Some('*') {
            let next = self.peek_at(1);
            let multiplies = next.is_some_and(|c| c.is_alphanumeric() || c == '(' || c == '.');
            self.pos += 1;
            if !multiplies {
                star = true;
            } else {
                return Ok(Letter { row, col, star });
            }
        }
        if star && self.peek() == Some('*') && self.peek_at(1).is_some_and(|c| c.is_alphanumeric() || c == '(') {
            self.pos += 1;
        }
        Ok(Letter { row, col, star })
    }

    fn resolve(&self, first: &str, second: Option<&str>, text: &str) -> Result<(usize, usize)> {
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse { pos: self.pos, msg: format!("bad index in `{text}`") });
        let (gp, g) = (self.gprime, self.g);
        let (r, c) = match second {
            Some(sec) => (parse(first)?, parse(sec)?),
            None if first.len() == 1 && g == 1 => (parse(first)?, 1),
            None if first.len() == 1 && gp == 1 => (1, parse(first)?),
            None if first.len() == 2 && gp <= 9 && g <= 9 => (parse(&first[..1])?, parse(&first[1..])?),
            None if g == 1 => (parse(first)?, 1),
            None if gp == 1 => (1, parse(first)?),
            None => return self.err(format!("ambiguous letter `{text}`; write x<row>_<col>")),
        };
        if r == 0 || c == 0 || r > gp || c > g {
            return Err(Error::LetterOutOfGrid { letter: text.to_string(), grid: (gp, g) });
        }
        Ok((r - 1, c - 1))
    }
}

pub(crate) enum RenderedCoeff {
    Scalar(C64),
    Named(String),
}

pub(crate) fn render_scalar(z: C64) -> RenderedCoeff {
    RenderedCoeff::Scalar(z)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn render(p: &NcPoly, mut coeff: impl FnMut(&CMat) -> RenderedCoeff) -> String {
    let mut out = String::new();
    for (k, (w, a)) in p.terms().iter().enumerate() {
        let word = w.render(p.gprime, p.g);
        let (negative, ctext) = match coeff(a) {
            RenderedCoeff::Named(n) => (false, n),
            RenderedCoeff::Scalar(z) if z.im == 0.0 => {
                let mag = z.re.abs();
                let t = if mag == 1.0 && !w.is_empty() { String::new() } else { fmt_f64(mag) };
                (z.re < 0.0, t)
            }
            RenderedCoeff::Scalar(z) => {
                let sign = if z.im < 0.0 { '-' } else { '+' };
                (false, format!("({}{}{}i)", fmt_f64(z.re), sign, fmt_f64(z.im.abs())))
            }
        };
        let body = match (ctext.is_empty(), word.is_empty()) {
            (true, _) => word,
            (false, true) => ctext,
            (false, false) => format!("{ctext} {word}"),
        };
        if k == 0 {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}
