//! Matrix-coefficient noncommutative polynomials in a rectangular grid of
//! variables, their evaluation on matrix tuples, and truncated power series.
//!
//! Evaluation uses the coefficient-left Kronecker convention
//! `p(X) = sum_w a_w (x) w(X)`, so `p(X)` is a `dprime x d` block matrix with
//! `level x level` blocks.

mod parse;
mod series;
mod tuple;
mod word;

pub use parse::{parse_poly, CoeffTable};
pub use series::{compose_series, CoefficientBound, TruncatedSeries};
pub use tuple::MatrixTuple;
pub use word::{Letter, Word};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

/// Coefficients with Frobenius norm at or below this are dropped.
pub const DROP_TOL: f64 = 1e-14;

/// A polynomial `sum_w a_w w` with `a_w` of shape `dprime x d`. Starred
/// letters are allowed, which makes this the free *-algebra as well.
#[derive(Clone, Debug, PartialEq)]
pub struct NcPoly {
    pub gprime: usize,
    pub g: usize,
    pub dprime: usize,
    pub d: usize,
    terms: BTreeMap<Word, CMat>,
}

impl NcPoly {
    pub fn zero(gprime: usize, g: usize, dprime: usize, d: usize) -> Self {
        NcPoly { gprime, g, dprime, d, terms: BTreeMap::new() }
    }

    pub fn scalar_zero(gprime: usize, g: usize) -> Self {
        Self::zero(gprime, g, 1, 1)
    }

    pub fn constant(gprime: usize, g: usize, a: CMat) -> Self {
        let mut p = Self::zero(gprime, g, a.nrows(), a.ncols());
        p.add_term(Word::empty(), a);
        p
    }

    pub fn monomial(gprime: usize, g: usize, w: Word, a: CMat) -> Self {
        let mut p = Self::zero(gprime, g, a.nrows(), a.ncols());
        p.add_term(w, a);
        p
    }

    /// Scalar polynomial `c * w`.
    pub fn scalar_monomial(gprime: usize, g: usize, w: Word, coef: C64) -> Self {
        Self::monomial(gprime, g, w, CMat::from_element(1, 1, coef))
    }

    /// The single letter `x_{row,col}` with unit coefficient.
    pub fn var(gprime: usize, g: usize, row: usize, col: usize) -> Self {
        Self::scalar_monomial(gprime, g, Word(vec![Letter::new(row, col)]), linalg::c(1.0, 0.0))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.dprime, self.d)
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.gprime, self.g)
    }

    pub fn terms(&self) -> &BTreeMap<Word, CMat> {
        &self.terms
    }

    pub fn coeff(&self, w: &Word) -> Option<&CMat> {
        self.terms.get(w)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Add `a * w` to the polynomial, dropping the result if it cancels.
    pub fn add_term(&mut self, w: Word, a: CMat) {
        assert_eq!((a.nrows(), a.ncols()), (self.dprime, self.d), "coefficient shape");
        for l in &w.0 {
            assert!(l.row < self.gprime && l.col < self.g, "letter outside grid");
        }
        let entry = self.terms.entry(w);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if linalg::frob(&a) > DROP_TOL {
                    v.insert(a);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += a;
                if linalg::frob(o.get()) <= DROP_TOL {
                    o.remove();
                }
            }
        }
    }

    /// Highest word length present; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|w| w.len()).max()
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.terms.keys().map(|w| w.len()).min()
    }

    pub fn homogeneous_part(&self, k: usize) -> NcPoly {
        self.filter(|w| w.len() == k)
    }

    pub fn truncate(&self, max_degree: usize) -> NcPoly {
        self.filter(|w| w.len() <= max_degree)
    }

    pub fn filter(&self, keep: impl Fn(&Word) -> bool) -> NcPoly {
        NcPoly { terms: self.terms.iter().filter(|(w, _)| keep(w)).map(|(w, a)| (w.clone(), a.clone())).collect(), ..*self }
    }

    pub fn constant_term(&self) -> CMat {
        self.terms.get(&Word::empty()).cloned().unwrap_or_else(|| linalg::zeros(self.dprime, self.d))
    }

    /// True when no letter is starred.
    pub fn is_analytic(&self) -> bool {
        self.terms.keys().all(|w| !w.has_star())
    }

    /// The involution: reverse words, adjoin letters, adjoint coefficients.
    pub fn adjoint(&self) -> NcPoly {
        let mut out = NcPoly::zero(self.gprime, self.g, self.d, self.dprime);
        for (w, a) in &self.terms {
            out.add_term(w.adjoint(), a.adjoint());
        }
        out
    }

    pub fn scale(&self, s: C64) -> NcPoly {
        let mut out = NcPoly::zero(self.gprime, self.g, self.dprime, self.d);
        for (w, a) in &self.terms {
            out.add_term(w.clone(), a * s);
        }
        out
    }

    /// Apply a constant matrix on the left of every coefficient.
    pub fn left_mul(&self, m: &CMat) -> NcPoly {
        let mut out = NcPoly::zero(self.gprime, self.g, m.nrows(), self.d);
        for (w, a) in &self.terms {
            out.add_term(w.clone(), m * a);
        }
        out
    }

    /// Apply a constant matrix on the right of every coefficient.
    pub fn right_mul(&self, m: &CMat) -> NcPoly {
        let mut out = NcPoly::zero(self.gprime, self.g, self.dprime, m.ncols());
        for (w, a) in &self.terms {
            out.add_term(w.clone(), a * m);
        }
        out
    }

    /// Map every coefficient through `f`, which may change the shape.
    pub fn map_coeffs(&self, dprime: usize, d: usize, f: impl Fn(&CMat) -> CMat) -> NcPoly {
        let mut out = NcPoly::zero(self.gprime, self.g, dprime, d);
        for (w, a) in &self.terms {
            out.add_term(w.clone(), f(a));
        }
        out
    }

    /// Scalar polynomial formed from entry `(i, j)` of every coefficient.
    pub fn entry(&self, i: usize, j: usize) -> NcPoly {
        self.map_coeffs(1, 1, |a| CMat::from_element(1, 1, a[(i, j)]))
    }

    pub fn checked_add(&self, other: &NcPoly) -> Result<NcPoly> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (w, a) in &other.terms {
            out.add_term(w.clone(), a.clone());
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &NcPoly) -> Result<NcPoly> {
        if self.grid() != other.grid() {
            return Err(Error::Shape(format!("grids {:?} and {:?} differ", self.grid(), other.grid())));
        }
        if self.d != other.dprime {
            return Err(Error::Shape(format!("cannot multiply {}x{} by {}x{} coefficients", self.dprime, self.d, other.dprime, other.d)));
        }
        let mut out = NcPoly::zero(self.gprime, self.g, self.dprime, other.d);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.concat(v), a * b);
            }
        }
        Ok(out)
    }

    /// Product truncated at the given degree.
    pub fn mul_truncated(&self, other: &NcPoly, max_degree: usize) -> Result<NcPoly> {
        if self.d != other.dprime || self.grid() != other.grid() {
            return Err(Error::Shape("incompatible product".into()));
        }
        let mut out = NcPoly::zero(self.gprime, self.g, self.dprime, other.d);
        for (u, a) in &self.terms {
            for (v, b) in other.terms.iter().take_while(|(v, _)| u.len() + v.len() <= max_degree) {
                out.add_term(u.concat(v), a * b);
            }
        }
        Ok(out)
    }

    pub(crate) fn compatible(&self, other: &NcPoly) -> Result<()> {
        if self.grid() != other.grid() || self.shape() != other.shape() {
            return Err(Error::Shape(format!("grid/shape {:?}/{:?} vs {:?}/{:?}", self.grid(), self.shape(), other.grid(), other.shape())));
        }
        Ok(())
    }

    fn check_tuple(&self, x: &MatrixTuple) -> Result<()> {
        if x.gprime != self.gprime || x.g != self.g {
            return Err(Error::Shape(format!("tuple grid {}x{} vs polynomial grid {}x{}", x.gprime, x.g, self.gprime, self.g)));
        }
        Ok(())
    }

    /// `p(X) = sum_w a_w (x) w(X)`, of size `dprime*n x d*n`.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        self.check_tuple(x)?;
        let n = x.level;
        let mut out = linalg::zeros(self.dprime * n, self.d * n);
        let mut memo: HashMap<Word, CMat> = HashMap::new();
        for (w, a) in &self.terms {
            let wx = word_value(x, w, &mut memo);
            out += linalg::kron(a, &wx);
        }
        Ok(out)
    }

    /// Maximum operator norm over coefficients.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// Text form in the polynomial grammar. Only scalar polynomials have a
    /// self-contained text form; see [`NcPoly::to_text_with_table`].
    pub fn to_text(&self) -> Result<String> {
        if self.shape() != (1, 1) {
            return Err(Error::Shape("matrix-coefficient polynomial needs a coefficient table".into()));
        }
        Ok(parse::render(self, |a| parse::render_scalar(a[(0, 0)])))
    }

    /// Text form with generated coefficient names `M0, M1, ...`.
    pub fn to_text_with_table(&self) -> (String, CoeffTable) {
        let mut table = CoeffTable::new();
        let text = parse::render(self, |a| {
            let name = format!("M{}", table.len());
            table.insert(name.clone(), a.clone());
            parse::RenderedCoeff::Named(name)
        });
        (text, table)
    }
}

fn word_value(x: &MatrixTuple, w: &Word, memo: &mut HashMap<Word, CMat>) -> CMat {
    if w.is_empty() {
        return linalg::eye(x.level);
    }
    if let Some(v) = memo.get(w) {
        return v.clone();
    }
    let prefix = Word(w.0[..w.len() - 1].to_vec());
    let pv = word_value(x, &prefix, memo);
    let v = pv * x.letter(*w.0.last().expect("non-empty"));
    memo.insert(w.clone(), v.clone());
    v
}

impl Add for &NcPoly {
    type Output = NcPoly;
    fn add(self, rhs: &NcPoly) -> NcPoly {
        self.checked_add(rhs).expect("compatible polynomials")
    }
}

impl Neg for &NcPoly {
    type Output = NcPoly;
    fn neg(self) -> NcPoly {
        self.scale(linalg::c(-1.0, 0.0))
    }
}

impl Sub for &NcPoly {
    type Output = NcPoly;
    fn sub(self, rhs: &NcPoly) -> NcPoly {
        self + &(-rhs)
    }
}

impl Mul for &NcPoly {
    type Output = NcPoly;
    fn mul(self, rhs: &NcPoly) -> NcPoly {
        self.checked_mul(rhs).expect("compatible polynomials")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::rng::seeded;
    use proptest::prelude::*;

    /// Independent evaluation: expand each word as an explicit product and
    /// place `a_w[i][j] * w(X)` into block `(i, j)` by hand.
    fn eval_by_blocks(p: &NcPoly, x: &MatrixTuple) -> CMat {
        let n = x.level;
        let mut out = linalg::zeros(p.dprime * n, p.d * n);
        for (w, a) in p.terms() {
            let mut wx = linalg::eye(n);
            for l in &w.0 {
                let m = x.get(l.row, l.col);
                wx *= if l.star { m.adjoint() } else { m.clone() };
            }
            for i in 0..p.dprime {
                for j in 0..p.d {
                    for r in 0..n {
                        for s in 0..n {
                            out[(i * n + r, j * n + s)] += a[(i, j)] * wx[(r, s)];
                        }
                    }
                }
            }
        }
        out
    }

    fn random_poly(gp: usize, g: usize, dp: usize, d: usize, deg: usize, star: bool, seed: u64) -> NcPoly {
        use rand::Rng;
        let mut rng = seeded(seed);
        let mut p = NcPoly::zero(gp, g, dp, d);
        for k in 0..=deg {
            for _ in 0..3 {
                let w = Word(
                    (0..k)
                        .map(|_| Letter { row: rng.gen_range(0..gp), col: rng.gen_range(0..g), star: star && rng.gen_bool(0.5) })
                        .collect(),
                );
                p.add_term(w, linalg::ginibre(dp, d, &mut rng));
            }
        }
        p
    }

    #[test]
    fn evaluation_fixture_is_exact() {
        let a = from_real(2, 3, &[-4.0, 3.0, 2.0, 2.0, -1.0, 0.0]);
        let p = NcPoly::monomial(2, 1, Word(vec![Letter::new(0, 0), Letter::new(1, 0)]), a);
        let x = MatrixTuple::new(2, 1, vec![from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]), from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])]).unwrap();
        let v = p.eval(&x).unwrap();
        let expected = from_real(
            4,
            6,
            &[
                0.0, 4.0, 0.0, -3.0, 0.0, -2.0, //
                -4.0, 0.0, 3.0, 0.0, 2.0, 0.0, //
                0.0, -2.0, 0.0, 1.0, 0.0, 0.0, //
                2.0, 0.0, -1.0, 0.0, 0.0, 0.0,
            ],
        );
        assert_eq!(v, expected);
    }

    #[test]
    fn empty_word_evaluates_to_identity() {
        let p = NcPoly::constant(1, 1, from_real(1, 1, &[2.0]));
        let x = MatrixTuple::zero(1, 1, 3);
        assert_eq!(p.eval(&x).unwrap(), linalg::eye(3) * c(2.0, 0.0));
    }

    #[test]
    fn level_one_is_substitution() {
        let p = random_poly(2, 2, 1, 1, 3, false, 11);
        let mut rng = seeded(12);
        let x = MatrixTuple::random_with_norm(2, 2, 1, 0.7, &mut rng);
        let mut direct = c(0.0, 0.0);
        for (w, a) in p.terms() {
            let mut v = a[(0, 0)];
            for l in &w.0 {
                v *= x.get(l.row, l.col)[(0, 0)];
            }
            direct += v;
        }
        assert!((p.eval(&x).unwrap()[(0, 0)] - direct).norm() < 1e-12);
    }

    #[test]
    fn cancelling_sum_is_zero() {
        let x1 = NcPoly::var(2, 1, 0, 0);
        let x2 = NcPoly::var(2, 1, 1, 0);
        let p = &(&x1 + &x2.scale(c(2.0, 0.0))) - &x1;
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coeff(&Word(vec![Letter::new(1, 0)])).unwrap()[(0, 0)], c(2.0, 0.0));
    }

    #[test]
    fn zero_polynomial_evaluates_to_zero_of_right_shape() {
        let p = NcPoly::zero(1, 2, 3, 2);
        let x = MatrixTuple::zero(1, 2, 4);
        let v = p.eval(&x).unwrap();
        assert_eq!((v.nrows(), v.ncols()), (12, 8));
        assert_eq!(linalg::max_abs(&v), 0.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let p = NcPoly::var(2, 1, 0, 0);
        assert!(p.eval(&MatrixTuple::zero(1, 2, 2)).is_err());
    }

    proptest! {
        #[test]
        fn prop_eval_matches_block_oracle(seed in 0u64..500, n in 1usize..4) {
            let p = random_poly(2, 2, 2, 3, 3, true, seed);
            let mut rng = seeded(seed ^ 0xabc);
            let x = MatrixTuple::random_with_norm(2, 2, n, 1.0, &mut rng);
            let a = p.eval(&x).unwrap();
            let b = eval_by_blocks(&p, &x);
            prop_assert!(linalg::max_abs(&(a - b)) < 1e-12);
        }

        #[test]
        fn prop_involution_matches_adjoint(seed in 0u64..500, n in 1usize..4) {
            let p = random_poly(2, 3, 2, 2, 3, true, seed);
            let mut rng = seeded(seed ^ 0x5a5a);
            let x = MatrixTuple::random_with_norm(2, 3, n, 1.0, &mut rng);
            let lhs = p.adjoint().eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap().adjoint();
            prop_assert!(linalg::max_abs(&(lhs - rhs)) < 1e-12);
            prop_assert_eq!(p.adjoint().adjoint(), p);
        }

        #[test]
        fn prop_product_is_multiplicative(seed in 0u64..300, n in 1usize..4) {
            let p = random_poly(2, 1, 2, 3, 2, false, seed);
            let q = random_poly(2, 1, 3, 1, 2, false, seed + 7);
            let mut rng = seeded(seed ^ 0x77);
            let x = MatrixTuple::random_with_norm(2, 1, n, 1.0, &mut rng);
            let lhs = (&p * &q).eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
            prop_assert!(linalg::max_abs(&(lhs - rhs)) < 1e-11);
        }

        #[test]
        fn prop_eval_is_linear(seed in 0u64..300) {
            let p = random_poly(1, 2, 2, 2, 2, false, seed);
            let q = random_poly(1, 2, 2, 2, 2, false, seed + 1);
            let mut rng = seeded(seed ^ 0x99);
            let x = MatrixTuple::random_with_norm(1, 2, 2, 1.0, &mut rng);
            let s = c(0.3, -1.2);
            let lhs = (&p + &q.scale(s)).eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() + q.eval(&x).unwrap() * s;
            prop_assert!(linalg::max_abs(&(lhs - rhs)) < 1e-12);
        }
    }
}
