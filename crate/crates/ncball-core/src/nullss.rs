//! Left Nullstellensatz for matrices of NC polynomials: when `P(X) v = 0`
//! forces `Q(X) v = 0`, find `G` with `Q = G P`.
//!
//! Polynomial matrices are [`NcPoly`] values over a `g x 1` grid whose
//! coefficients are `rows x cols` matrices. Exact mode works over the
//! Gaussian rationals; every finite `f64` converts exactly.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::ncpoly::{parse_poly, Letter, MatrixTuple, NcPoly, Word};
use crate::rng;
use nalgebra::DVector;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng as _;
use serde::Serialize;
use std::collections::BTreeMap;

/// Float-mode residual threshold.
pub const FLOAT_TOL: f64 = 1e-10;
/// Largest linear system (rows times unknowns) attempted.
pub const SYSTEM_BUDGET: usize = 4_000_000;

/// A Gaussian rational `re + i im`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn zero() -> Self {
        GaussRat { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn from_c64(z: C64) -> Result<Self> {
        let conv = |x: f64| BigRational::from_float(x).ok_or_else(|| Error::Precondition(format!("non-finite coefficient {x}")));
        Ok(GaussRat { re: conv(z.re)?, im: conv(z.im)? })
    }

    pub fn to_c64(&self) -> C64 {
        C64::new(self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        GaussRat { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Self) -> Self {
        GaussRat { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    pub fn mul(&self, o: &Self) -> Self {
        GaussRat { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }

    /// Panics on division by zero.
    pub fn div(&self, o: &Self) -> Self {
        let den = &o.re * &o.re + &o.im * &o.im;
        GaussRat { re: (&self.re * &o.re + &self.im * &o.im) / &den, im: (&self.im * &o.re - &self.re * &o.im) / &den }
    }

    pub fn from_int(n: i64) -> Self {
        GaussRat { re: BigRational::from_integer(BigInt::from(n)), im: BigRational::zero() }
    }
}

/// Exact polynomial matrix, row-major coefficients keyed by word.
#[derive(Clone, Debug, PartialEq)]
pub struct RatPolyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub terms: BTreeMap<Word, Vec<GaussRat>>,
}

impl RatPolyMatrix {
    pub fn from_poly(p: &NcPoly) -> Result<Self> {
        let mut terms = BTreeMap::new();
        for (w, a) in p.terms() {
            let mut v = Vec::with_capacity(p.dprime * p.d);
            for i in 0..p.dprime {
                for j in 0..p.d {
                    v.push(GaussRat::from_c64(a[(i, j)])?);
                }
            }
            terms.insert(w.clone(), v);
        }
        Ok(RatPolyMatrix { rows: p.dprime, cols: p.d, terms })
    }

    pub fn mul(&self, o: &RatPolyMatrix) -> RatPolyMatrix {
        let mut terms: BTreeMap<Word, Vec<GaussRat>> = BTreeMap::new();
        for (u, a) in &self.terms {
            for (v, b) in &o.terms {
                let entry = terms.entry(u.concat(v)).or_insert_with(|| vec![GaussRat::zero(); self.rows * o.cols]);
                for i in 0..self.rows {
                    for k in 0..self.cols {
                        let x = &a[i * self.cols + k];
                        if x.is_zero() {
                            continue;
                        }
                        for j in 0..o.cols {
                            let y = &b[k * o.cols + j];
                            if !y.is_zero() {
                                entry[i * o.cols + j] = entry[i * o.cols + j].add(&x.mul(y));
                            }
                        }
                    }
                }
            }
        }
        RatPolyMatrix { rows: self.rows, cols: o.cols, terms }.pruned()
    }

    pub fn sub(&self, o: &RatPolyMatrix) -> RatPolyMatrix {
        let mut terms = self.terms.clone();
        for (w, b) in &o.terms {
            let entry = terms.entry(w.clone()).or_insert_with(|| vec![GaussRat::zero(); self.rows * self.cols]);
            for (x, y) in entry.iter_mut().zip(b) {
                *x = x.sub(y);
            }
        }
        RatPolyMatrix { rows: self.rows, cols: self.cols, terms }.pruned()
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, v| v.iter().any(|x| !x.is_zero()));
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Parse a matrix of polynomial texts over `g` variables `x1..xg`; when `g`
/// is `None` it is the largest index used (at least 1).
pub fn poly_matrix_from_texts(texts: &[Vec<String>], g: Option<usize>) -> Result<NcPoly> {
    let rows = texts.len();
    let cols = texts.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || texts.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape("polynomial matrix must be a non-empty rectangle".into()));
    }
    let g = match g {
        Some(g) => g,
        None => {
            let mut maxrow = 0;
            for t in texts.iter().flatten() {
                let p = parse_poly(t, 9, 1, None)?;
                for w in p.terms().keys() {
                    for l in &w.0 {
                        maxrow = maxrow.max(l.row);
                    }
                }
            }
            maxrow + 1
        }
    };
    let mut out = NcPoly::zero(g, 1, rows, cols);
    for (i, row) in texts.iter().enumerate() {
        for (j, t) in row.iter().enumerate() {
            let p = parse_poly(t, g, 1, None)?;
            if !p.is_analytic() {
                return Err(Error::Precondition(format!("entry ({i},{j}) contains adjoint letters")));
            }
            for (w, a) in p.terms() {
                let mut m = linalg::zeros(rows, cols);
                m[(i, j)] = a[(0, 0)];
                out.add_term(w.clone(), m);
            }
        }
    }
    Ok(out)
}

/// Texts of the entries, for reports.
pub fn poly_matrix_texts(p: &NcPoly) -> Result<Vec<Vec<String>>> {
    (0..p.dprime).map(|i| (0..p.d).map(|j| p.entry(i, j).to_text()).collect()).collect()
}

fn check_pair(p: &NcPoly, q: &NcPoly) -> Result<usize> {
    if p.grid() != q.grid() || p.g != 1 {
        return Err(Error::Shape(format!("grids {:?} and {:?} must agree and be columns", p.grid(), q.grid())));
    }
    if p.d != q.d {
        return Err(Error::Shape(format!("P has {} columns, Q has {}", p.d, q.d)));
    }
    if !p.is_analytic() || !q.is_analytic() {
        return Err(Error::Precondition("adjoint letters are not allowed".into()));
    }
    Ok(p.gprime)
}

/// Row-reduce `a` over the columns listed in `order`, carrying any other
/// columns along; returns the pivot columns.
fn rref(a: &mut [Vec<GaussRat>], order: &[usize]) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for &c in order {
        if r == a.len() {
            break;
        }
        let Some(p) = (r..a.len()).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = GaussRat::from_int(1).div(&a[r][c]);
        for x in a[r].iter_mut() {
            if !x.is_zero() {
                *x = x.mul(&inv);
            }
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, pk) in row.iter_mut().zip(&pivot_row) {
                    if !pk.is_zero() {
                        *x = x.sub(&f.mul(pk));
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Debug, Serialize)]
pub struct CofactorResult {
    /// `n x m` cofactor with `Q = G P`.
    #[serde(skip)]
    pub g: NcPoly,
    pub degree_used: usize,
    /// `max_w ||(Q - G P)_w||`: computed exactly (and therefore 0) in exact
    /// mode, from the float re-expansion in float mode.
    pub residual: f64,
    /// Re-expansion through float polynomial arithmetic.
    pub float_residual: f64,
    pub mode: Mode,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    /// A sampled point has `P(X) v = 0` but `Q(X) v != 0`.
    HypothesisFalse { kernel_residual: f64 },
    /// No counterexample found; a larger degree might succeed.
    DegreeBudgetExhausted,
}

#[derive(Clone, Debug, Serialize)]
pub struct CofactorFailure {
    pub max_degree: usize,
    /// Smallest least-squares residual over the attempted degrees, relative
    /// to the largest coefficient of `Q`.
    pub min_residual: f64,
    pub kind: FailureKind,
}

/// Default degree budget `deg Q + deg P + 2`.
pub fn default_degree(p: &NcPoly, q: &NcPoly) -> usize {
    q.degree().unwrap_or(0) + p.degree().unwrap_or(0) + 2
}

struct System {
    /// Unknowns `(s, u)`.
    unknowns: Vec<(usize, Word)>,
    a: CMat,
    b: CMat,
}

fn build_system(p: &NcPoly, q: &NcPoly, deg: usize) -> Result<System> {
    let g = p.gprime;
    let (m, d, n) = (p.dprime, p.d, q.dprime);
    let words: Vec<Word> = Word::all_up_to(g, 1, deg);
    let unknowns: Vec<(usize, Word)> = (0..m).flat_map(|s| words.iter().map(move |u| (s, u.clone()))).collect();
    let mut row_index: BTreeMap<(Word, usize), usize> = BTreeMap::new();
    let mut entries: Vec<(usize, usize, C64)> = Vec::new();
    for (k, (s, u)) in unknowns.iter().enumerate() {
        for (v, a) in p.terms() {
            let w = u.concat(v);
            for c in 0..d {
                let z = a[(*s, c)];
                if z != C64::new(0.0, 0.0) {
                    let len = row_index.len();
                    let r = *row_index.entry((w.clone(), c)).or_insert(len);
                    entries.push((r, k, z));
                }
            }
        }
    }
    for (w, a) in q.terms() {
        for c in 0..d {
            if (0..n).any(|j| a[(j, c)] != C64::new(0.0, 0.0)) {
                let len = row_index.len();
                row_index.entry((w.clone(), c)).or_insert(len);
            }
        }
    }
    let nrows = row_index.len();
    if nrows.max(1) * (unknowns.len() + n) > SYSTEM_BUDGET {
        return Err(Error::Budget(format!("linear system {nrows} x {} exceeds the budget", unknowns.len())));
    }
    let mut a = linalg::zeros(nrows, unknowns.len());
    for (r, k, z) in entries {
        a[(r, k)] += z;
    }
    let mut b = linalg::zeros(nrows, n);
    for ((w, c), r) in &row_index {
        if let Some(qa) = q.coeff(w) {
            for j in 0..n {
                b[(*r, j)] = qa[(j, *c)];
            }
        }
    }
    Ok(System { unknowns, a, b })
}

fn assemble_g(sys: &System, sol: &CMat, n: usize, m: usize, g: usize) -> NcPoly {
    let mut out = NcPoly::zero(g, 1, n, m);
    for (k, (s, u)) in sys.unknowns.iter().enumerate() {
        let mut coeff = linalg::zeros(n, m);
        for j in 0..n {
            coeff[(j, *s)] = sol[(k, j)];
        }
        out.add_term(u.clone(), coeff);
    }
    out
}

fn solve_exact(sys: &System) -> Result<Option<Vec<Vec<GaussRat>>>> {
    let (nr, nu, n) = (sys.a.nrows(), sys.a.ncols(), sys.b.ncols());
    let mut aug: Vec<Vec<GaussRat>> = Vec::with_capacity(nr);
    for r in 0..nr {
        let mut row = Vec::with_capacity(nu + n);
        for k in 0..nu {
            row.push(GaussRat::from_c64(sys.a[(r, k)])?);
        }
        for j in 0..n {
            row.push(GaussRat::from_c64(sys.b[(r, j)])?);
        }
        aug.push(row);
    }
    let order: Vec<usize> = (0..nu).collect();
    let pivots = rref(&mut aug, &order);
    for row in aug.iter().skip(pivots.len()) {
        if row[nu..].iter().any(|x| !x.is_zero()) {
            return Ok(None);
        }
    }
    let mut sol = vec![vec![GaussRat::zero(); n]; nu];
    for (r, &c) in pivots.iter().enumerate() {
        for j in 0..n {
            sol[c][j] = aug[r][nu + j].clone();
        }
    }
    Ok(Some(sol))
}

fn lstsq(sys: &System) -> (CMat, f64) {
    let x = linalg::pinv(&sys.a, 1e-12) * &sys.b;
    let res = linalg::max_abs(&(&sys.a * &x - &sys.b));
    (x, res)
}

fn float_residual(p: &NcPoly, q: &NcPoly, g: &NcPoly) -> Result<f64> {
    let prod = g.checked_mul(p)?;
    let diff = q.checked_add(&prod.scale(C64::new(-1.0, 0.0)))?;
    Ok(diff.terms().values().map(linalg::max_abs).fold(0.0, f64::max))
}

/// Find `G` with `Q = G P`, escalating the degree of `G` from 0 to
/// `max_degree`. On failure, classify by a sampled kernel test.
pub fn cofactor_solve(
    p: &NcPoly,
    q: &NcPoly,
    max_degree: usize,
    mode: Mode,
) -> Result<std::result::Result<CofactorResult, CofactorFailure>> {
    let g = check_pair(p, q)?;
    let (m, n) = (p.dprime, q.dprime);
    let qscale = q.max_coeff_norm().max(f64::MIN_POSITIVE);
    let mut min_residual = f64::INFINITY;
    if q.is_zero() {
        return Ok(Ok(CofactorResult { g: NcPoly::zero(g, 1, n, m), degree_used: 0, residual: 0.0, float_residual: 0.0, mode }));
    }
    for deg in 0..=max_degree {
        let sys = build_system(p, q, deg)?;
        let (xf, res) = lstsq(&sys);
        min_residual = min_residual.min(res / qscale);
        match mode {
            Mode::Float => {
                if res <= FLOAT_TOL * qscale.max(1.0) {
                    let gpoly = assemble_g(&sys, &xf, n, m, g);
                    let fr = float_residual(p, q, &gpoly)?;
                    return Ok(Ok(CofactorResult { g: gpoly, degree_used: deg, residual: fr, float_residual: fr, mode }));
                }
            }
            Mode::Exact => {
                if let Some(sol) = solve_exact(&sys)? {
                    let mut xm = linalg::zeros(sys.unknowns.len(), n);
                    let mut grat = RatPolyMatrix { rows: n, cols: m, terms: BTreeMap::new() };
                    for (k, (s, u)) in sys.unknowns.iter().enumerate() {
                        for j in 0..n {
                            xm[(k, j)] = sol[k][j].to_c64();
                            if !sol[k][j].is_zero() {
                                let e = grat.terms.entry(u.clone()).or_insert_with(|| vec![GaussRat::zero(); n * m]);
                                e[j * m + s] = sol[k][j].clone();
                            }
                        }
                    }
                    let exact_diff = RatPolyMatrix::from_poly(q)?.sub(&grat.mul(&RatPolyMatrix::from_poly(p)?));
                    let residual = if exact_diff.is_zero() { 0.0 } else { f64::INFINITY };
                    let gpoly = assemble_g(&sys, &xm, n, m, g);
                    let fr = float_residual(p, q, &gpoly)?;
                    return Ok(Ok(CofactorResult { g: gpoly, degree_used: deg, residual, float_residual: fr, mode }));
                }
            }
        }
    }
    let check = sample_kernel(p, q, 3, 64, 0)?;
    let kind = if check.max_residual > 1e-6 {
        FailureKind::HypothesisFalse { kernel_residual: check.max_residual }
    } else {
        FailureKind::DegreeBudgetExhausted
    };
    Ok(Err(CofactorFailure { max_degree, min_residual, kind }))
}

struct KernelSample {
    max_residual: f64,
    with_kernel: usize,
    witness: Option<(MatrixTuple, DVector<C64>)>,
}

/// `X_j` of rank at most `n - 1`.
fn rank_deficient(n: usize, r: &mut rng::Rng) -> CMat {
    let m = linalg::ginibre(n, n, r);
    let (u, mut s, v) = linalg::svd(&m);
    if let Some(last) = s.last_mut() {
        *last = 0.0;
    }
    let sd = CMat::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|&x| C64::new(x, 0.0))));
    u * sd * v.adjoint()
}

fn sample_kernel(p: &NcPoly, q: &NcPoly, levels: usize, samples: usize, seed: u64) -> Result<KernelSample> {
    let g = p.gprime;
    let rows = crate::par::map_range(samples, |i| -> Result<Option<(f64, MatrixTuple, DVector<C64>)>> {
        let mut r = rng::sample_rng(seed, i as u64);
        let n = 1 + i % levels.max(1);
        let kind = (i / levels.max(1)) % 3;
        let mut entries: Vec<CMat> = (0..g).map(|_| linalg::ginibre(n, n, &mut r)).collect();
        match kind {
            1 => {
                for e in entries.iter_mut() {
                    if r.gen_bool(0.5) {
                        *e = rank_deficient(n, &mut r);
                    }
                }
            }
            2 => {
                let zeroed = r.gen_range(1..(1u64 << g).max(2));
                for (j, e) in entries.iter_mut().enumerate() {
                    if zeroed >> j & 1 == 1 {
                        *e = linalg::zeros(n, n);
                    }
                }
            }
            _ => {}
        }
        let x = MatrixTuple::new(g, 1, entries)?;
        let nx = x.norm();
        let x = if nx > 0.0 { x.scale(1.0 / nx) } else { x };
        let px = p.eval(&x)?;
        let k = linalg::null_space(&px, 1e-10);
        if k.ncols() == 0 {
            return Ok(None);
        }
        let qk = q.eval(&x)? * &k;
        let (_, s, vr) = linalg::svd(&qk);
        let top = s.first().copied().unwrap_or(0.0);
        let v = if vr.ncols() > 0 { &k * vr.column(0) } else { k.column(0).into_owned() };
        Ok(Some((top, x, v)))
    });
    let mut out = KernelSample { max_residual: 0.0, with_kernel: 0, witness: None };
    for row in rows {
        if let Some((res, x, v)) = row? {
            out.with_kernel += 1;
            if res > out.max_residual {
                out.max_residual = res;
                out.witness = Some((x, v));
            }
        }
    }
    Ok(out)
}

/// Degree-`N` quotient of row polynomials by the truncated submodule
/// generated by the rows of `P`, with left multiplication operators.
#[derive(Clone, Debug)]
pub struct QuotientModel {
    pub n: usize,
    /// Generator degree at which the truncated submodule stabilised.
    pub generator_degree: usize,
    pub stabilized: bool,
    /// Basis monomials `(w, c)` of the quotient, graded.
    pub basis: Vec<(Word, usize)>,
    /// `X_j` acting on the quotient (zero on the top degree).
    pub ops: MatrixTuple,
    /// `v = sum_c e_c (x) v_c` in `C^d (x) C^dim`.
    pub v: DVector<C64>,
    cols: Vec<(Word, usize)>,
    reducer: Vec<(usize, Vec<GaussRat>)>,
}

impl QuotientModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of the class of a row polynomial of degree at most `N`.
    pub fn reduce(&self, row: &BTreeMap<(Word, usize), GaussRat>) -> Vec<GaussRat> {
        let index: BTreeMap<&(Word, usize), usize> = self.cols.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut x = vec![GaussRat::zero(); self.cols.len()];
        for (k, z) in row {
            if let Some(&i) = index.get(k) {
                x[i] = x[i].add(z);
            }
        }
        for (pc, prow) in &self.reducer {
            if !x[*pc].is_zero() {
                let f = x[*pc].clone();
                for (k, y) in prow.iter().enumerate() {
                    if !y.is_zero() {
                        x[k] = x[k].sub(&f.mul(y));
                    }
                }
            }
        }
        self.basis.iter().map(|b| x[index[b]].clone()).collect()
    }
}

fn row_of(p: &RatPolyMatrix, s: usize, prefix: &Word) -> BTreeMap<(Word, usize), GaussRat> {
    let mut out = BTreeMap::new();
    for (w, a) in &p.terms {
        for c in 0..p.cols {
            let z = &a[s * p.cols + c];
            if !z.is_zero() {
                out.insert((prefix.concat(w), c), z.clone());
            }
        }
    }
    out
}

/// Column order for elimination: longest words first so that pivots take
/// the highest degrees and the quotient basis stays graded.
fn column_order(cols: &[(Word, usize)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cols.len()).collect();
    order.sort_by(|&a, &b| cols[b].0.len().cmp(&cols[a].0.len()).then(cols[a].cmp(&cols[b])));
    order
}

/// Column keys and reduced rows `(pivot column, entries)`.
type ReducedSpan = (Vec<(Word, usize)>, Vec<(usize, Vec<GaussRat>)>);

/// Span of `u P_s` with `|u| + deg P_s <= gen_deg`, intersected with rows of
/// degree at most `n`; returned reduced, with pivot columns.
fn truncated_submodule(p: &RatPolyMatrix, g: usize, d: usize, n: usize, gen_deg: usize) -> Result<ReducedSpan> {
    let cols: Vec<(Word, usize)> = Word::all_up_to(g, 1, gen_deg).into_iter().flat_map(|w| (0..d).map(move |c| (w.clone(), c))).collect();
    let index: BTreeMap<&(Word, usize), usize> = cols.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let pdeg: Vec<usize> = (0..p.rows)
        .map(|s| p.terms.iter().filter(|(_, a)| (0..p.cols).any(|c| !a[s * p.cols + c].is_zero())).map(|(w, _)| w.len()).max().unwrap_or(0))
        .collect();
    let mut gens: Vec<Vec<GaussRat>> = Vec::new();
    for s in 0..p.rows {
        if pdeg[s] > gen_deg || p.terms.values().all(|a| (0..p.cols).all(|c| a[s * p.cols + c].is_zero())) {
            continue;
        }
        for u in Word::all_up_to(g, 1, gen_deg - pdeg[s]) {
            let mut v = vec![GaussRat::zero(); cols.len()];
            for (k, z) in row_of(p, s, &u) {
                v[index[&k]] = z;
            }
            gens.push(v);
        }
    }
    if gens.len() * cols.len() > SYSTEM_BUDGET {
        return Err(Error::Budget(format!("submodule span {} x {} exceeds the budget", gens.len(), cols.len())));
    }
    let order = column_order(&cols);
    let pivots = rref(&mut gens, &order);
    gens.truncate(pivots.len());
    // Rows with every nonzero in degree <= n span the intersection.
    let low: Vec<usize> = (0..cols.len()).filter(|&i| cols[i].0.len() <= n).collect();
    let mut kept = Vec::new();
    for (row, &pc) in gens.iter().zip(&pivots) {
        if (0..cols.len()).all(|i| cols[i].0.len() <= n || row[i].is_zero()) {
            kept.push((pc, low.iter().map(|&i| row[i].clone()).collect::<Vec<_>>()));
        }
    }
    let low_cols: Vec<(Word, usize)> = low.iter().map(|&i| cols[i].clone()).collect();
    let remap: BTreeMap<usize, usize> = low.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    Ok((low_cols, kept.into_iter().map(|(pc, r)| (remap[&pc], r)).collect()))
}

/// Build the quotient model of degree `n`, escalating the generator degree
/// until the truncated submodule is unchanged for two steps (at most
/// `n + 4`).
pub fn quotient_model(p: &NcPoly, n: usize) -> Result<QuotientModel> {
    if p.g != 1 || !p.is_analytic() {
        return Err(Error::Shape("expected an analytic polynomial matrix on a column grid".into()));
    }
    let (g, d) = (p.gprime, p.d);
    if p.degree().unwrap_or(0) > n {
        return Err(Error::Precondition(format!("N = {n} is below deg P")));
    }
    let rp = RatPolyMatrix::from_poly(p)?;
    let mut dims = Vec::new();
    let mut last = None;
    let mut stabilized = false;
    let mut gen_deg = n;
    for step in 0..=4 {
        gen_deg = n + step;
        let (cols, rows) = truncated_submodule(&rp, g, d, n, gen_deg)?;
        dims.push(rows.len());
        last = Some((cols, rows));
        let k = dims.len();
        if k >= 3 && dims[k - 1] == dims[k - 2] && dims[k - 2] == dims[k - 3] {
            stabilized = true;
            break;
        }
    }
    let (cols, reducer) = last.expect("at least one step");
    let pivot_set: std::collections::BTreeSet<usize> = reducer.iter().map(|r| r.0).collect();
    let basis: Vec<(Word, usize)> = (0..cols.len()).filter(|i| !pivot_set.contains(i)).map(|i| cols[i].clone()).collect();
    let mut model = QuotientModel {
        n,
        generator_degree: gen_deg,
        stabilized,
        basis,
        ops: MatrixTuple::zero(g, 1, 1),
        v: DVector::zeros(0),
        cols,
        reducer,
    };
    let dim = model.dim();
    let mut ops = Vec::with_capacity(g);
    for j in 0..g {
        let mut m = linalg::zeros(dim, dim);
        for (b, (w, c)) in model.basis.iter().enumerate() {
            if w.len() >= n {
                continue;
            }
            let shifted = Word(std::iter::once(Letter::new(j, 0)).chain(w.0.iter().copied()).collect());
            let mut row = BTreeMap::new();
            row.insert((shifted, *c), GaussRat::from_int(1));
            for (a, z) in model.reduce(&row).iter().enumerate() {
                m[(a, b)] = z.to_c64();
            }
        }
        ops.push(m);
    }
    let mut v = DVector::<C64>::zeros(d * dim);
    for c in 0..d {
        let mut row = BTreeMap::new();
        row.insert((Word::empty(), c), GaussRat::from_int(1));
        for (a, z) in model.reduce(&row).iter().enumerate() {
            v[c * dim + a] = z.to_c64();
        }
    }
    model.ops = MatrixTuple::new(g, 1, ops)?;
    model.v = v;
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelCheck {
    pub dim: usize,
    pub generator_degree: usize,
    pub stabilized: bool,
    /// `||P(X) v||` at the model point; zero when the model is consistent.
    pub p_residual: f64,
    /// `||Q(X) v||` at the model point.
    pub q_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub sampled_max_residual: f64,
    pub samples_with_kernel: usize,
    pub samples: usize,
    pub model: Option<ModelCheck>,
    pub model_note: Option<String>,
    pub verdict: KernelVerdict,
    #[serde(skip)]
    pub counterexample: Option<(MatrixTuple, DVector<C64>)>,
}

/// Evidence for "`P(X) v = 0` implies `Q(X) v = 0`" from rank-deficient
/// sampling and from the quotient model of degree `max deg + 1`.
pub fn kernel_hypothesis_check(p: &NcPoly, q: &NcPoly, levels: usize, samples: usize, seed: u64) -> Result<KernelReport> {
    check_pair(p, q)?;
    let sampled = sample_kernel(p, q, levels, samples, seed)?;
    let n = p.degree().unwrap_or(0).max(q.degree().unwrap_or(0)) + 1;
    let (model, model_note, model_witness) = match quotient_model(p, n) {
        Ok(qm) => {
            let pv = p.eval(&qm.ops)? * &qm.v;
            let qv = q.eval(&qm.ops)? * &qm.v;
            let check = ModelCheck {
                dim: qm.dim(),
                generator_degree: qm.generator_degree,
                stabilized: qm.stabilized,
                p_residual: pv.norm(),
                q_residual: qv.norm(),
            };
            let witness = (check.p_residual <= 1e-9 && check.q_residual > 1e-6).then(|| (qm.ops.clone(), qm.v.clone()));
            (Some(check), None, witness)
        }
        Err(Error::Budget(msg)) => (None, Some(msg), None),
        Err(e) => return Err(e),
    };
    let model_holds = model.as_ref().map(|m| m.p_residual <= 1e-9 && m.q_residual <= 1e-9);
    let verdict = if sampled.max_residual > 1e-6 || model_witness.is_some() {
        KernelVerdict::Fails
    } else if sampled.max_residual <= 1e-8 && model_holds != Some(false) {
        KernelVerdict::Holds
    } else {
        KernelVerdict::Inconclusive
    };
    let counterexample = if sampled.max_residual > 1e-6 { sampled.witness } else { model_witness };
    Ok(KernelReport {
        sampled_max_residual: sampled.max_residual,
        samples_with_kernel: sampled.with_kernel,
        samples,
        model,
        model_note,
        verdict,
        counterexample,
    })
}

/// Random `Q = G0 P` instance with small Gaussian-integer coefficients.
pub fn random_product_pair(seed: u64) -> (NcPoly, NcPoly, NcPoly) {
    let mut r = rng::seeded(seed);
    let g = r.gen_range(1..=3);
    let d = r.gen_range(1..=2);
    let m = r.gen_range(1..=2);
    let n = r.gen_range(1..=2);
    let rand_poly = |rows: usize, cols: usize, deg: usize, r: &mut rng::Rng| {
        let mut p = NcPoly::zero(g, 1, rows, cols);
        for w in Word::all_up_to(g, 1, deg) {
            if r.gen_bool(0.5) {
                let c = CMat::from_fn(rows, cols, |_, _| {
                    C64::new(r.gen_range(-2..=2) as f64, if r.gen_bool(0.2) { r.gen_range(-1..=1) as f64 } else { 0.0 })
                });
                p.add_term(w, c);
            }
        }
        if p.is_zero() {
            p.add_term(Word::empty(), linalg::eye(rows.max(cols)).resize(rows, cols, C64::new(0.0, 0.0)));
        }
        p
    };
    let pdeg = r.gen_range(0..=2);
    let gdeg = r.gen_range(0..=2);
    let p = rand_poly(m, d, pdeg, &mut r);
    let g0 = rand_poly(n, m, gdeg, &mut r);
    let q = g0.checked_mul(&p).expect("shapes");
    (p, q, g0)
}
