use super::tuple::MatrixTuple;
use super::word::{Letter, Word};
use super::NcPoly;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use std::collections::HashMap;

/// A power series truncated at `max_degree`, stored as the polynomial of its
/// homogeneous parts of degree `0..=max_degree`.
///
/// `truncated` records whether higher-degree parts were discarded (series
/// produced by inversion or composition) or the object is an exact
/// polynomial; sampling suites only add a tail allowance in the first case.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    pub poly: NcPoly,
    pub max_degree: usize,
    pub truncated: bool,
}

/// Result of the coefficient-norm test `sum_w ||a_w||^2 <= d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientBound {
    pub sum_sq: f64,
    pub bound: f64,
    pub holds: bool,
}

impl TruncatedSeries {
    /// An exact polynomial viewed as a series up to `max_degree`.
    pub fn from_poly(p: NcPoly, max_degree: usize) -> Result<Self> {
        if p.degree().is_some_and(|k| k > max_degree) {
            return Err(Error::Precondition(format!(
                "polynomial of degree {} exceeds truncation degree {max_degree}",
                p.degree().unwrap()
            )));
        }
        Ok(TruncatedSeries { poly: p, max_degree, truncated: false })
    }

    /// Exact polynomial using its own degree as truncation order.
    pub fn exact(p: NcPoly) -> Self {
        let d = p.degree().unwrap_or(0);
        TruncatedSeries { poly: p, max_degree: d, truncated: false }
    }

    pub fn truncated_from(p: NcPoly, max_degree: usize) -> Self {
        TruncatedSeries { poly: p.truncate(max_degree), max_degree, truncated: true }
    }

    pub fn grid(&self) -> (usize, usize) {
        self.poly.grid()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.poly.shape()
    }

    pub fn part(&self, k: usize) -> NcPoly {
        self.poly.homogeneous_part(k)
    }

    pub fn parts(&self) -> Vec<NcPoly> {
        (0..=self.max_degree).map(|k| self.part(k)).collect()
    }

    pub fn constant_term(&self) -> CMat {
        self.poly.constant_term()
    }

    /// `f(X) = sum_{k <= D} f^(k)(X)`, accumulated in increasing degree.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        self.poly.eval(x)
    }

    /// Exact evaluation at a tuple on which every word of length `beta`
    /// vanishes: the series terminates and only degrees `< beta` contribute.
    /// Fails with the offending word if the nilpotency claim is false.
    pub fn eval_nilpotent(&self, x: &MatrixTuple, beta: usize, tol: f64) -> Result<CMat> {
        if let Some((w, norm)) = nonvanishing_word(x, beta, tol) {
            return Err(Error::NotNilpotent { word: w.render(x.gprime, x.g), norm });
        }
        if beta > self.max_degree + 1 && self.truncated {
            return Err(Error::Precondition(format!("nilpotency order {beta} exceeds truncation degree {} + 1", self.max_degree)));
        }
        self.poly.filter(|w| w.len() < beta).eval(x)
    }

    /// Sum of coefficient operator norms of the top homogeneous part.
    pub fn top_part_norm(&self) -> f64 {
        self.part(self.max_degree).terms().values().map(linalg::op_norm).sum()
    }

    /// Heuristic remainder bound `top * rho^(D+1) / (1 - rho)` at sample radius
    /// `rho`; zero for exact polynomials.
    pub fn tail(&self, rho: f64) -> f64 {
        if !self.truncated {
            return 0.0;
        }
        if rho >= 1.0 {
            return f64::INFINITY;
        }
        self.top_part_norm() * rho.powi(self.max_degree as i32 + 1) / (1.0 - rho)
    }

    pub fn coefficient_bound(&self) -> CoefficientBound {
        let sum_sq: f64 = self.poly.terms().values().map(|a| linalg::op_norm(a).powi(2)).sum();
        let bound = self.poly.d as f64;
        CoefficientBound { sum_sq, bound, holds: sum_sq <= bound * (1.0 + 1e-12) }
    }

    pub fn add(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        let d = self.max_degree.min(other.max_degree);
        Ok(TruncatedSeries {
            poly: self.poly.truncate(d).checked_add(&other.poly.truncate(d))?,
            max_degree: d,
            truncated: self.truncated || other.truncated,
        })
    }

    pub fn sub(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.add(&other.scale(linalg::c(-1.0, 0.0)))
    }

    pub fn scale(&self, s: crate::linalg::C64) -> TruncatedSeries {
        TruncatedSeries { poly: self.poly.scale(s), ..self.clone() }
    }

    pub fn mul(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        let d = self.max_degree.min(other.max_degree);
        Ok(TruncatedSeries { poly: self.poly.mul_truncated(&other.poly, d)?, max_degree: d, truncated: self.truncated || other.truncated })
    }

    pub fn left_mul(&self, m: &CMat) -> TruncatedSeries {
        TruncatedSeries { poly: self.poly.left_mul(m), ..self.clone() }
    }

    pub fn right_mul(&self, m: &CMat) -> TruncatedSeries {
        TruncatedSeries { poly: self.poly.right_mul(m), ..self.clone() }
    }

    /// Series equal to the constant matrix `m`.
    pub fn constant_like(&self, m: CMat) -> TruncatedSeries {
        TruncatedSeries { poly: NcPoly::constant(self.poly.gprime, self.poly.g, m), max_degree: self.max_degree, truncated: false }
    }

    /// Largest coefficient-wise difference (Frobenius) from another series.
    pub fn distance(&self, other: &TruncatedSeries) -> Result<f64> {
        self.poly.compatible(&other.poly)?;
        let (a, b) = (self.poly.terms(), other.poly.terms());
        let gap = |w: &Word| match (a.get(w), b.get(w)) {
            (Some(x), Some(y)) => linalg::frob(&(x - y)),
            (Some(x), None) | (None, Some(x)) => linalg::frob(x),
            (None, None) => 0.0,
        };
        Ok(a.keys().chain(b.keys()).filter(|w| w.len() <= self.max_degree.min(other.max_degree)).map(gap).fold(0.0, f64::max))
    }
}

/// First word of length `beta` whose value has norm above `tol`, if any.
pub(crate) fn nonvanishing_word(x: &MatrixTuple, beta: usize, tol: f64) -> Option<(Word, f64)> {
    let letters: Vec<Letter> = (0..x.gprime).flat_map(|r| (0..x.g).map(move |c| Letter::new(r, c))).collect();
    let mut frontier: Vec<(Word, CMat)> = vec![(Word::empty(), linalg::eye(x.level))];
    for depth in 0..beta {
        let mut next = Vec::new();
        for (w, m) in &frontier {
            for &l in &letters {
                let v = m * x.get(l.row, l.col);
                let norm = linalg::op_norm(&v);
                if norm > tol {
                    let mut ww = w.0.clone();
                    ww.push(l);
                    if depth + 1 == beta {
                        return Some((Word(ww), norm));
                    }
                    next.push((Word(ww), v));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
    }
    if beta == 0 {
        return Some((Word::empty(), 1.0));
    }
    None
}

/// Formal substitution `h(f(x))`. `h` lives on the grid given by `f`'s
/// coefficient shape; each letter `x_{ij}` of `h` is replaced by the scalar
/// series formed from entry `(i, j)` of `f`'s coefficients. The result has
/// `f`'s grid and `h`'s shape and is truncated at the smaller degree.
pub fn compose_series(h: &TruncatedSeries, f: &TruncatedSeries) -> Result<TruncatedSeries> {
    let (p, q) = f.shape();
    if h.grid() != (p, q) {
        return Err(Error::Shape(format!("outer grid {:?} does not match inner shape {:?}", h.grid(), (p, q))));
    }
    if !h.poly.is_analytic() || !f.poly.is_analytic() {
        return Err(Error::Precondition("composition of starred series".into()));
    }
    let d = h.max_degree.min(f.max_degree);
    let (gp, g) = f.grid();
    let entries: Vec<NcPoly> = (0..p).flat_map(|i| (0..q).map(move |j| (i, j))).map(|(i, j)| f.poly.entry(i, j).truncate(d)).collect();
    let mut memo: HashMap<Word, NcPoly> = HashMap::new();
    let (hp, hq) = h.shape();
    let mut out = NcPoly::zero(gp, g, hp, hq);
    for (w, b) in h.poly.terms() {
        let s = substituted_word(w, &entries, q, gp, g, d, &mut memo)?;
        for (u, z) in s.terms() {
            out.add_term(u.clone(), b * z[(0, 0)]);
        }
    }
    Ok(TruncatedSeries { poly: out, max_degree: d, truncated: h.truncated || f.truncated })
}

fn substituted_word(
    w: &Word,
    entries: &[NcPoly],
    q: usize,
    gp: usize,
    g: usize,
    d: usize,
    memo: &mut HashMap<Word, NcPoly>,
) -> Result<NcPoly> {
    if w.is_empty() {
        return Ok(NcPoly::constant(gp, g, linalg::eye(1)));
    }
    if let Some(v) = memo.get(w) {
        return Ok(v.clone());
    }
    let prefix = Word(w.0[..w.len() - 1].to_vec());
    let last = w.0[w.len() - 1];
    let pv = substituted_word(&prefix, entries, q, gp, g, d, memo)?;
    let v = pv.mul_truncated(&entries[last.row * q + last.col], d)?;
    memo.insert(w.clone(), v.clone());
    Ok(v)
}
