//! Dense complex linear algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use crate::rng::Rng;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative threshold used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// Maximum tolerated asymmetry before a matrix is refused as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Condition numbers above this are logged on inversion.
pub const COND_WARN: f64 = 1e8;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(r: usize, cl: usize) -> CMat {
    CMat::zeros(r, cl)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(r: usize, cl: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(r, cl, data.iter().map(|&x| c(x, 0.0)))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn block(m: &CMat, r0: usize, c0: usize, r: usize, cl: usize) -> CMat {
    m.view((r0, c0), (r, cl)).into_owned()
}

pub fn set_block(m: &mut CMat, r0: usize, c0: usize, b: &CMat) {
    m.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(m).singular_values().expect("svd converges");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Operator (spectral) norm; zero for empty matrices.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Thin SVD `m = U diag(s) V*` with singular values sorted descending.
pub fn svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return (zeros(m.nrows(), 0), Vec::new(), zeros(m.ncols(), 0));
    }
    let f = to_faer(m).thin_svd().expect("svd converges");
    let (u, sv, v) = (from_faer(f.U()), f.S().column_vector(), from_faer(f.V()));
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| sv[b].re.total_cmp(&sv[a].re));
    let mut uu = zeros(m.nrows(), k);
    let mut vv = zeros(m.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in idx.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &v.column(src));
        s.push(sv[src].re);
    }
    (uu, s, vv)
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full right singular basis: columns of V (ncols x ncols) and the singular
/// values padded with zeros to length ncols.
fn full_right_svd(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.ncols();
    let padded = if m.nrows() < n { m.clone().resize(n, n, c(0.0, 0.0)) } else { m.clone() };
    let (_, mut s, v) = svd(&padded);
    s.resize(n, 0.0);
    (s, v)
}

/// Orthonormal basis (as columns) of the right null space, using a threshold
/// relative to the largest singular value.
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    if m.nrows() == 0 {
        return eye(n);
    }
    let (s, v) = full_right_svd(m);
    let thr = rel_tol * s[0];
    let cols: Vec<usize> = (0..n).filter(|&i| s[i] <= thr).collect();
    let mut out = zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &v.column(i));
    }
    out
}

pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&top) => s.iter().filter(|&&x| x > rel_tol * top).count(),
    }
}

/// Orthonormal basis of the column space.
pub fn range_basis(m: &CMat, rel_tol: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.nrows(), 0);
    }
    let (u, s, _) = svd(m);
    let r = s.iter().filter(|&&x| x > rel_tol * s[0]).count();
    block(&u, 0, 0, m.nrows(), r)
}

pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eig(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let scale = max_abs(m).max(1.0);
    let asym = hermitian_asymmetry(m);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(asym));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), zeros(0, 0)));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let e =
        to_faer(&sym).self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Singular(format!("eigensolver did not converge: {e:?}")))?;
    let (ev, u) = (e.S().column_vector(), from_faer(e.U()));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| ev[a].re.total_cmp(&ev[b].re));
    let mut vecs = zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in idx.iter().enumerate() {
        vecs.set_column(dst, &u.column(src));
        vals.push(ev[src].re);
    }
    Ok((vals, vecs))
}

pub fn min_eig(m: &CMat) -> Result<f64> {
    Ok(herm_eig(m)?.0.first().copied().unwrap_or(0.0))
}

/// Minimum eigenvalue together with a unit eigenvector.
pub fn min_eig_vec(m: &CMat) -> Result<(f64, nalgebra::DVector<C64>)> {
    let (vals, vecs) = herm_eig(m)?;
    Ok((vals[0], vecs.column(0).into_owned()))
}

/// Square root of a positive semidefinite matrix; small negative eigenvalues
/// are clamped to zero.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let (vals, vecs) = herm_eig(m)?;
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&x| c(x.max(0.0).sqrt(), 0.0))));
    Ok(&vecs * d * vecs.adjoint())
}

pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&a), Some(&b)) if b > 0.0 => a / b,
        _ => f64::INFINITY,
    }
}

/// LU inverse with a condition estimate; ill-conditioned inputs are logged.
pub fn inverse(m: &CMat) -> Result<(CMat, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("inverse of {}x{}", m.nrows(), m.ncols())));
    }
    let cond = condition_number(m);
    if !cond.is_finite() {
        return Err(Error::Singular("matrix has a zero singular value".into()));
    }
    if cond > COND_WARN {
        log::warn!("inverting matrix with condition number {cond:e}");
    }
    let inv = m.clone().lu().try_inverse().ok_or_else(|| Error::Singular("LU failed".into()))?;
    Ok((inv, cond))
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &CMat, rel_tol: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.ncols(), m.nrows());
    }
    let (u, s, v) = svd(m);
    let thr = rel_tol * s[0];
    let mut out = zeros(m.ncols(), m.nrows());
    for (i, &si) in s.iter().enumerate() {
        if si > thr {
            out += (v.column(i) * u.column(i).adjoint()).scale(1.0 / si);
        }
    }
    out
}

/// Polar factor `W Z*` of the thin SVD `m = W S Z*`; a partial isometry.
pub fn polar_factor(m: &CMat) -> CMat {
    let (u, _, v) = svd(m);
    u * v.adjoint()
}

/// Extend orthonormal columns to a unitary of the same row dimension.
pub fn complete_to_unitary(cols: &CMat) -> CMat {
    let n = cols.nrows();
    let mut basis: Vec<nalgebra::DVector<C64>> = (0..cols.ncols()).map(|j| cols.column(j).into_owned()).collect();
    while basis.len() < n {
        let mut best: Option<(f64, nalgebra::DVector<C64>)> = None;
        for k in 0..n {
            let mut v = nalgebra::DVector::<C64>::zeros(n);
            v[k] = c(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let p = b.dotc(&v);
                    v -= b * p;
                }
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| nv > *bn + 1e-12) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("n > 0");
        basis.push(v / c(nv, 0.0));
    }
    CMat::from_columns(&basis)
}

pub fn ginibre(r: usize, cl: usize, rng: &mut Rng) -> CMat {
    CMat::from_fn(r, cl, |_, _| {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        c(a, b) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary via QR with the usual phase correction.
pub fn random_unitary(n: usize, rng: &mut Rng) -> CMat {
    let g = ginibre(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        let col = out.column(j) * ph;
        out.set_column(j, &col);
    }
    out
}

/// Random matrix rescaled to have operator norm exactly `norm`.
pub fn random_with_norm(r: usize, cl: usize, norm: f64, rng: &mut Rng) -> CMat {
    let g = ginibre(r, cl, rng);
    let n = op_norm(&g);
    if n == 0.0 {
        return g;
    }
    g.scale(norm / n)
}

/// Matrix with prescribed singular values (missing ones are zero).
pub fn with_singular_values(r: usize, cl: usize, s: &[f64], rng: &mut Rng) -> CMat {
    let u = random_unitary(r, rng);
    let v = random_unitary(cl, rng);
    let mut d = zeros(r, cl);
    for (i, &x) in s.iter().enumerate().take(r.min(cl)) {
        d[(i, i)] = c(x, 0.0);
    }
    u * d * v.adjoint()
}

pub fn is_psd(m: &CMat, tol: f64) -> Result<bool> {
    Ok(min_eig(m)? >= -tol)
}

/// Multiply `v` by a global phase so that its largest-modulus entry inside
/// `over` becomes real positive. Returns the phase applied.
pub fn phase_normalize(v: &mut nalgebra::DVector<C64>, over: std::ops::Range<usize>) -> C64 {
    let mut best = over.start;
    for i in over.clone() {
        if v[i].norm() > v[best].norm() + 1e-14 {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() == 0.0 {
        return c(1.0, 0.0);
    }
    let ph = z.conj() / z.norm();
    *v *= ph;
    ph
}
