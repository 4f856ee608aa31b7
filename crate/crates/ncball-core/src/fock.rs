//! Truncated full Fock space, creation operators and the nilpotent model
//! tuple `X_n = [S_j* (x) S_l]`.
//!
//! Everything combinatorial is exact: shifts are sparse integer matrices and
//! the model identities are compared entry by entry.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{MatrixTuple, NcPoly, TruncatedSeries};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

/// Sparse integer matrix stored by rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseInt {
    pub rows: usize,
    pub cols: usize,
    data: Vec<BTreeMap<usize, i64>>,
}

impl SparseInt {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseInt { rows, cols, data: vec![BTreeMap::new(); rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn diagonal(entries: &[i64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        if v == 0 {
            self.data[r].remove(&c);
        } else {
            self.data[r].insert(c, v);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r].get(&c).copied().unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(|r| r.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for (r, row) in self.data.iter().enumerate() {
            for (&c, &v) in row {
                t.set(c, r, v);
            }
        }
        t
    }

    pub fn mul(&self, other: &SparseInt) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for (r, row) in self.data.iter().enumerate() {
            let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
            for (&k, &a) in row {
                for (&c, &b) in &other.data[k] {
                    *acc.entry(c).or_insert(0) += a * b;
                }
            }
            acc.retain(|_, v| *v != 0);
            out.data[r] = acc;
        }
        out
    }

    pub fn add(&self, other: &SparseInt) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (r, row) in other.data.iter().enumerate() {
            for (&c, &v) in row {
                let cur = out.get(r, c);
                out.set(r, c, cur + v);
            }
        }
        out
    }

    pub fn sub(&self, other: &SparseInt) -> Self {
        let mut neg = other.clone();
        for row in &mut neg.data {
            for v in row.values_mut() {
                *v = -*v;
            }
        }
        self.add(&neg)
    }

    pub fn kron(&self, other: &SparseInt) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for (r1, row1) in self.data.iter().enumerate() {
            for (&c1, &a) in row1 {
                for (r2, row2) in other.data.iter().enumerate() {
                    for (&c2, &b) in row2 {
                        out.set(r1 * other.rows + r2, c1 * other.cols + c2, a * b);
                    }
                }
            }
        }
        out
    }

    /// Place `blocks[j][l]` at block position `(j, l)`.
    pub fn from_blocks(blocks: &[Vec<&SparseInt>]) -> Self {
        let br = blocks[0][0].rows;
        let bc = blocks[0][0].cols;
        let mut out = Self::zeros(blocks.len() * br, blocks[0].len() * bc);
        for (j, row) in blocks.iter().enumerate() {
            for (l, b) in row.iter().enumerate() {
                for (r, brow) in b.data.iter().enumerate() {
                    for (&c, &v) in brow {
                        out.set(j * br + r, l * bc + c, v);
                    }
                }
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        self.data.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |(&c, &v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = linalg::zeros(self.rows, self.cols);
        for (r, row) in self.data.iter().enumerate() {
            for (&c, &v) in row {
                m[(r, c)] = linalg::c(v as f64, 0.0);
            }
        }
        m
    }
}

/// Words of length at most `n` in `g` letters, in graded-lex order.
#[derive(Clone, Debug)]
pub struct TruncatedFock {
    pub g: usize,
    pub n: usize,
    pub basis: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl TruncatedFock {
    pub fn new(g: usize, n: usize) -> Self {
        let mut basis: Vec<Vec<usize>> = vec![Vec::new()];
        let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..n {
            let mut next = Vec::with_capacity(layer.len() * g);
            for w in &layer {
                for j in 0..g {
                    let mut v = w.clone();
                    v.push(j);
                    next.push(v);
                }
            }
            basis.extend(next.iter().cloned());
            layer = next;
        }
        let index = basis.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        TruncatedFock { g, n, basis, index }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, w: &[usize]) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Creation operator `S_j e_w = e_{x_j w}`; words of maximal length are
    /// sent to zero.
    pub fn shift(&self, j: usize) -> SparseInt {
        let mut s = SparseInt::zeros(self.dim(), self.dim());
        for (c, w) in self.basis.iter().enumerate() {
            if w.len() < self.n {
                let mut v = Vec::with_capacity(w.len() + 1);
                v.push(j);
                v.extend_from_slice(w);
                s.set(self.index[&v], c, 1);
            }
        }
        s
    }

    /// Projection onto the complement of the vacuum.
    pub fn proj_nonvacuum(&self) -> SparseInt {
        SparseInt::diagonal(&self.basis.iter().map(|w| i64::from(!w.is_empty())).collect::<Vec<_>>())
    }

    /// Projection onto words shorter than the truncation length.
    pub fn proj_short(&self) -> SparseInt {
        SparseInt::diagonal(&self.basis.iter().map(|w| i64::from(w.len() < self.n)).collect::<Vec<_>>())
    }

    pub fn proj_vacuum(&self) -> SparseInt {
        SparseInt::diagonal(&self.basis.iter().map(|w| i64::from(w.is_empty())).collect::<Vec<_>>())
    }
}

/// The model tuple `[S_j* (x) S_l]` on `F_{gprime}(n) (x) F_g(n)`.
#[derive(Clone, Debug)]
pub struct BigX {
    pub gprime: usize,
    pub g: usize,
    pub n: usize,
    pub level: usize,
    /// Row-major over `(j, l)`.
    pub entries: Vec<SparseInt>,
    left: TruncatedFock,
    right: TruncatedFock,
}

impl BigX {
    pub fn new(gprime: usize, g: usize, n: usize) -> Self {
        let left = TruncatedFock::new(gprime, n);
        let right = TruncatedFock::new(g, n);
        let ls: Vec<SparseInt> = (0..gprime).map(|j| left.shift(j).transpose()).collect();
        let rs: Vec<SparseInt> = (0..g).map(|l| right.shift(l)).collect();
        let entries = (0..gprime).flat_map(|j| (0..g).map(move |l| (j, l))).map(|(j, l)| ls[j].kron(&rs[l])).collect();
        BigX { gprime, g, n, level: left.dim() * right.dim(), entries, left, right }
    }

    pub fn get(&self, j: usize, l: usize) -> &SparseInt {
        &self.entries[j * self.g + l]
    }

    pub fn flatten(&self) -> SparseInt {
        let blocks: Vec<Vec<&SparseInt>> = (0..self.gprime).map(|j| (0..self.g).map(|l| self.get(j, l)).collect()).collect();
        SparseInt::from_blocks(&blocks)
    }

    /// Dense copy; only sensible for small `n`.
    pub fn to_tuple(&self) -> MatrixTuple {
        MatrixTuple::new(self.gprime, self.g, self.entries.iter().map(SparseInt::to_dense).collect()).expect("square entries")
    }

    /// Predicted `X*X = I_g (x) P_n (x) Q_n`.
    pub fn predicted_star_x_x(&self) -> SparseInt {
        SparseInt::identity(self.g).kron(&self.left.proj_nonvacuum().kron(&self.right.proj_short()))
    }

    /// Predicted `X X* = I_{gprime} (x) Q_n (x) P_n`.
    pub fn predicted_x_x_star(&self) -> SparseInt {
        SparseInt::identity(self.gprime).kron(&self.left.proj_short().kron(&self.right.proj_nonvacuum()))
    }

    /// Length of the shortest vanishing word length, i.e. the nilpotency
    /// order, searched up to `limit`.
    pub fn nilpotency_order(&self, limit: usize) -> Option<usize> {
        let mut frontier = vec![SparseInt::identity(self.level)];
        for k in 1..=limit {
            let mut next = Vec::new();
            for m in &frontier {
                for e in &self.entries {
                    let p = m.mul(e);
                    if !p.is_zero() {
                        next.push(p);
                    }
                }
            }
            if next.is_empty() {
                return Some(k);
            }
            frontier = next;
        }
        None
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FockIdentityReport {
    pub gprime: usize,
    pub g: usize,
    pub n: usize,
    pub level: usize,
    pub star_x_x_exact: bool,
    pub x_x_star_exact: bool,
    pub shift_relations_exact: bool,
    pub nilpotency_order: Option<usize>,
}

impl FockIdentityReport {
    pub fn passed(&self) -> bool {
        self.star_x_x_exact && self.x_x_star_exact && self.shift_relations_exact && self.nilpotency_order == Some(self.n + 1)
    }
}

/// Exact check of the model identities, the truncated shift relations and
/// nilpotency of order `n + 1`.
pub fn fock_identities(gprime: usize, g: usize, n: usize) -> FockIdentityReport {
    let x = BigX::new(gprime, g, n);
    let flat = x.flatten();
    let ft = flat.transpose();
    let star_x_x_exact = ft.mul(&flat) == x.predicted_star_x_x();
    let x_x_star_exact = flat.mul(&ft) == x.predicted_x_x_star();
    let mut shift_relations_exact = true;
    for f in [&x.left, &x.right] {
        let s: Vec<SparseInt> = (0..f.g).map(|j| f.shift(j)).collect();
        let mut sum = SparseInt::zeros(f.dim(), f.dim());
        for j in 0..f.g {
            sum = sum.add(&s[j].mul(&s[j].transpose()));
            for l in 0..f.g {
                let expected = if j == l { f.proj_short() } else { SparseInt::zeros(f.dim(), f.dim()) };
                shift_relations_exact &= s[j].transpose().mul(&s[l]) == expected;
            }
        }
        shift_relations_exact &= SparseInt::identity(f.dim()).sub(&sum) == f.proj_vacuum();
    }
    FockIdentityReport {
        gprime,
        g,
        n,
        level: x.level,
        star_x_x_exact,
        x_x_star_exact,
        shift_relations_exact,
        nilpotency_order: x.nilpotency_order(n + 2),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniqueWitness {
    pub n: usize,
    /// 1: `I - X*X - p(X)*p(X)`; 2: `I - XX* - p(X)p(X)*`.
    pub part: u8,
    pub min_eig: f64,
    #[serde(skip)]
    pub vector: nalgebra::DVector<linalg::C64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniqueReport {
    /// `(n, part, min_eig)` for each test performed.
    pub levels: Vec<(usize, u8, f64)>,
    pub witness: Option<UniqueWitness>,
}

impl UniqueReport {
    /// True when every tested matrix was positive semidefinite.
    pub fn all_psd(&self) -> bool {
        self.witness.is_none()
    }
}

/// Test `I - X_n* X_n - p(X_n)* p(X_n) >= 0` (when `p` has `g` columns) and
/// `I - X_n X_n* - p(X_n) p(X_n)* >= 0` (when `p` has `gprime` rows) for
/// `n = 1..=max_n`, stopping at the first violation. A nonzero `p` with
/// `p(0) = 0` always violates one of them.
pub fn unique_s_polynomial_test(p: &NcPoly, max_n: usize, tol: f64) -> Result<UniqueReport> {
    let (gp, g) = p.grid();
    let part1 = p.d == g;
    let part2 = p.dprime == gp;
    if !part1 && !part2 {
        return Err(Error::Shape(format!("{}x{} coefficients fit neither {gp} rows nor {g} columns of the grid", p.dprime, p.d)));
    }
    let mut levels = Vec::new();
    for n in 1..=max_n {
        let x = BigX::new(gp, g, n);
        let px = p.eval(&x.to_tuple())?;
        if part1 {
            let m = linalg::eye(px.ncols()) - x.predicted_star_x_x().to_dense() - px.adjoint() * &px;
            let (e, v) = linalg::min_eig_vec(&m)?;
            levels.push((n, 1, e));
            if e < -tol {
                return Ok(UniqueReport { levels, witness: Some(UniqueWitness { n, part: 1, min_eig: e, vector: v }) });
            }
        }
        if part2 {
            let m = linalg::eye(px.nrows()) - x.predicted_x_x_star().to_dense() - &px * px.adjoint();
            let (e, v) = linalg::min_eig_vec(&m)?;
            levels.push((n, 2, e));
            if e < -tol {
                return Ok(UniqueReport { levels, witness: Some(UniqueWitness { n, part: 2, min_eig: e, vector: v }) });
            }
        }
    }
    Ok(UniqueReport { levels, witness: None })
}

/// `||h(X_n)||` for `n = 1..=max_n`, evaluated exactly using nilpotency.
pub fn unique_s_series_test(h: &TruncatedSeries, max_n: usize) -> Result<Vec<f64>> {
    let (gp, g) = h.grid();
    (1..=max_n)
        .map(|n| {
            let x = BigX::new(gp, g, n).to_tuple();
            Ok(linalg::op_norm(&h.eval_nilpotent(&x, n + 1, 0.5)?))
        })
        .collect()
}

/// Truncation at word length `m` of the isometric dilation of a strict
/// column contraction `X` (grid `gprime x 1`):
/// `V h = sum_{|w| <= m} Delta w~(X) h (x) e_w`, where `w~` is the reversed
/// word and `Delta = (I - sum X_j* X_j)^{1/2}`.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub fock: TruncatedFock,
    /// One `level x level` block per basis word of the Fock space.
    pub blocks: Vec<CMat>,
    pub defect: f64,
    pub intertwining_residual: f64,
}

impl Dilation {
    /// The operator `V` as a matrix, word-major (`index = word * level + k`).
    pub fn matrix(&self) -> CMat {
        let n = self.blocks[0].nrows();
        let mut v = linalg::zeros(self.blocks.len() * n, n);
        for (i, b) in self.blocks.iter().enumerate() {
            linalg::set_block(&mut v, i * n, 0, b);
        }
        v
    }
}

pub fn truncated_dilation(x: &MatrixTuple, m: usize) -> Result<Dilation> {
    if x.g != 1 {
        return Err(Error::Shape("dilation needs a column tuple".into()));
    }
    let n = x.level;
    let col = x.flatten();
    let gram = col.adjoint() * &col;
    if linalg::op_norm(&gram) >= 1.0 {
        return Err(Error::NotInBall(linalg::op_norm(&col)));
    }
    let delta = linalg::psd_sqrt(&(linalg::eye(n) - gram))?;
    let fock = TruncatedFock::new(x.gprime, m);
    let mut blocks: Vec<CMat> = Vec::with_capacity(fock.dim());
    for w in &fock.basis {
        let b = if w.is_empty() {
            delta.clone()
        } else {
            let tail = fock.index_of(&w[1..]).expect("suffix is in the basis");
            &blocks[tail] * x.get(w[0], 0)
        };
        blocks.push(b);
    }
    let mut vv = linalg::zeros(n, n);
    for b in &blocks {
        vv += b.adjoint() * b;
    }
    let defect = linalg::op_norm(&(vv - linalg::eye(n)));

    let mut residual: f64 = 0.0;
    for j in 0..x.gprime {
        // (S_j* (x) I) V, applied block by block from the sparse shift.
        let mut shifted = vec![linalg::zeros(n, n); fock.dim()];
        for (r, c, val) in fock.shift(j).transpose().iter() {
            shifted[r] += blocks[c].scale(val as f64);
        }
        let mut gram = linalg::zeros(n, n);
        for (i, w) in fock.basis.iter().enumerate() {
            if w.len() < m {
                let diff = &blocks[i] * x.get(j, 0) - &shifted[i];
                gram += diff.adjoint() * diff;
            }
        }
        residual = residual.max(linalg::op_norm(&gram).sqrt());
    }
    Ok(Dilation { fock, blocks, defect, intertwining_residual: residual })
}
