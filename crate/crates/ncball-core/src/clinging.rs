//! Clinging of column pencils `L(x) = sum_i A_i x_i` to the column ball.
//!
//! The defect `Delta_L(X) = I_d (x) sum X_i* X_i - L(X)* L(X)` equals
//! `sum_{ij} B_{ij} (x) X_i* X_j` with `B = I - [A_i* A_j]`, the Gram matrix.
//! `L` clings (at a level) when `Delta_L(X)` is singular for every `X`.

use crate::balls::LinearPencil;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::ncpoly::MatrixTuple;
use crate::par;
use crate::rng::{self, Rng};
use nalgebra::DVector;
use rand::Rng as _;
use serde::Serialize;

/// Relative threshold for a vanishing eigenvalue of the Gram matrix.
pub const KERNEL_TOL: f64 = 1e-10;
/// Matrix clinging holds at a sample when the relative minimum eigenvalue
/// of `Delta_L` is at most this.
pub const CLING_TOL: f64 = 1e-7;
/// A sample refutes clinging when the relative minimum eigenvalue exceeds this.
pub const REFUTE_TOL: f64 = 1e-6;
/// Number of projective lattice points for the sampled scalar test.
pub const LATTICE_POINTS: usize = 2048;

fn check_column(l: &LinearPencil) -> Result<()> {
    if l.g != 1 {
        return Err(Error::Shape(format!("clinging needs a column pencil, got grid {}x{}", l.gprime, l.g)));
    }
    Ok(())
}

/// `G = I_{gd} - [A_i* A_j]_{ij}`.
pub fn gram_of_delta(l: &LinearPencil) -> Result<CMat> {
    check_column(l)?;
    let (g, d) = (l.gprime, l.d);
    let mut out = linalg::eye(g * d);
    for i in 0..g {
        for j in 0..g {
            let b = linalg::block(&out, i * d, j * d, d, d) - l.coeff(i, 0).adjoint() * l.coeff(j, 0);
            linalg::set_block(&mut out, i * d, j * d, &b);
        }
    }
    Ok(out)
}

/// `Delta_L(X)` computed directly from its definition.
pub fn delta(l: &LinearPencil, x: &MatrixTuple) -> Result<CMat> {
    check_column(l)?;
    let lx = l.eval(x)?;
    let col = x.flatten();
    let id = linalg::eye(l.d);
    Ok(linalg::kron(&id, &(col.adjoint() * &col)) - lx.adjoint() * lx)
}

/// `Delta_L(X)` assembled from the Gram matrix blocks.
pub fn delta_from_gram(gram: &CMat, g: usize, d: usize, x: &MatrixTuple) -> CMat {
    let n = x.level;
    let mut out = linalg::zeros(d * n, d * n);
    for i in 0..g {
        for j in 0..g {
            let b = linalg::block(gram, i * d, j * d, d, d);
            out += linalg::kron(&b, &(x.get(i, 0).adjoint() * x.get(j, 0)));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PsdReport {
    pub min_eig: f64,
    pub psd: bool,
    /// Rank-one tuple at level `d` with `v* Delta_L(X) v = min_eig`, when
    /// the Gram matrix is not PSD.
    #[serde(skip)]
    pub witness: Option<(MatrixTuple, DVector<C64>)>,
}

/// Positive semidefiniteness of the Gram matrix; a negative direction `eta`
/// yields the witness `X_j = e_1 eta_j^T`, `v = sum_c e_c (x) e_c`.
pub fn delta_psd(gram: &CMat, g: usize, d: usize) -> Result<PsdReport> {
    let (e, eta) = linalg::min_eig_vec(gram)?;
    let scale = linalg::op_norm(gram).max(1.0);
    let psd = e >= -1e-9 * scale;
    let witness = if psd {
        None
    } else {
        let entries = (0..g)
            .map(|j| {
                let mut m = linalg::zeros(d, d);
                for c in 0..d {
                    m[(0, c)] = eta[j * d + c];
                }
                m
            })
            .collect();
        let x = MatrixTuple::new(g, 1, entries)?;
        let mut v = DVector::<C64>::zeros(d * d);
        for c in 0..d {
            v[c * d + c] = C64::new(1.0, 0.0);
        }
        Some((x, v))
    };
    Ok(PsdReport { min_eig: e, psd, witness })
}

/// Orthonormal basis of the numerical kernel of a PSD Gram matrix.
fn gram_kernel(gram: &CMat) -> Result<CMat> {
    let (vals, vecs) = linalg::herm_eig(gram)?;
    let thr = KERNEL_TOL * linalg::op_norm(gram).max(1.0);
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= thr).collect();
    let mut out = linalg::zeros(gram.nrows(), cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &vecs.column(i));
    }
    Ok(out)
}

/// Vectors `v` with `G (alpha (x) v) = 0`, as columns.
fn kernel_at(gram: &CMat, g: usize, d: usize, alpha: &[C64], rel_tol: f64) -> CMat {
    let mut t = linalg::zeros(g * d, d);
    for (j, &a) in alpha.iter().enumerate() {
        t += linalg::block(gram, 0, j * d, g * d, d) * a;
    }
    let thr = rel_tol * linalg::op_norm(gram).max(1.0);
    let (s, v) = {
        let padded = if t.nrows() < d { t.clone().resize(d, d, C64::new(0.0, 0.0)) } else { t.clone() };
        let (_, mut s, v) = linalg::svd(&padded);
        s.resize(d, 0.0);
        (s, v)
    };
    let cols: Vec<usize> = (0..d).filter(|&i| s[i] <= thr).collect();
    let mut out = linalg::zeros(d, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &v.column(i));
    }
    out
}

fn smallest_singular_values(gram: &CMat, g: usize, d: usize, alpha: &[C64]) -> Vec<f64> {
    let mut t = linalg::zeros(g * d, d);
    for (j, &a) in alpha.iter().enumerate() {
        t += linalg::block(gram, 0, j * d, g * d, d) * a;
    }
    let mut s = linalg::singular_values(&t);
    s.resize(d, 0.0);
    s.reverse();
    s
}

fn lift(alpha: &[C64], v: &DVector<C64>) -> DVector<C64> {
    let d = v.len();
    let mut out = DVector::<C64>::zeros(alpha.len() * d);
    for (j, &a) in alpha.iter().enumerate() {
        out.rows_mut(j * d, d).copy_from(&(v * a));
    }
    out
}

/// Deterministic quasi-uniform points on the unit sphere of `C^g`: an
/// additive recurrence with generalised golden ratios, Box-Muller, normalise.
pub fn projective_lattice(g: usize, count: usize) -> Vec<Vec<C64>> {
    let dims = 2 * g;
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dims as f64 + 1.0));
    }
    let steps: Vec<f64> = (1..=dims).map(|k| (1.0 / phi.powi(k as i32)).fract()).collect();
    (0..count)
        .map(|i| {
            let u: Vec<f64> = steps.iter().map(|s| (0.5 + s * (i as f64 + 1.0)).fract()).collect();
            let mut z: Vec<C64> = (0..g)
                .map(|j| {
                    let r = (-2.0 * (1.0 - u[2 * j]).max(1e-300).ln()).sqrt();
                    let th = 2.0 * std::f64::consts::PI * u[2 * j + 1];
                    C64::new(r * th.cos(), r * th.sin())
                })
                .collect();
            let n = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            for x in &mut z {
                *x /= n;
            }
            z
        })
        .collect()
}

/// A basis `eta_i = alpha_i (x) v_i` of the scalar binding kernel, ordered so
/// that `v_1..v_t` are independent and `v_{t+j} = sum_i gamma[j][i] v_i`.
#[derive(Clone, Debug, Serialize)]
pub struct BindingKernel {
    pub g: usize,
    pub d: usize,
    #[serde(skip)]
    pub alphas: Vec<Vec<C64>>,
    #[serde(skip)]
    pub vs: Vec<DVector<C64>>,
    pub t: usize,
    pub m: usize,
    #[serde(skip)]
    pub gamma: CMat,
    /// `max ||G eta_i||`.
    pub kernel_residual: f64,
}

impl BindingKernel {
    pub fn dim(&self) -> usize {
        self.t + self.m
    }
}

/// Whether the counting criterion `t (g - 2) < m` guarantees matrix clinging.
pub fn counting_criterion(k: &BindingKernel) -> bool {
    k.t * k.g.saturating_sub(2) < k.m
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalarClinging {
    pub clings: bool,
    /// `exact` for the two-variable pencil method, `sampled` otherwise.
    pub method: &'static str,
    /// Scalar point without a kernel vector, if clinging fails.
    #[serde(skip)]
    pub counterexample: Option<Vec<C64>>,
    pub kernel: Option<BindingKernel>,
}

/// Scalar clinging: for every `alpha` in `C^g` some `v != 0` has
/// `alpha (x) v` in `ker G`. Also extracts the binding kernel.
pub fn clinging_scalar(gram: &CMat, g: usize, d: usize) -> Result<ScalarClinging> {
    if gram.nrows() != g * d {
        return Err(Error::Shape(format!("gram is {}x{}, expected {}", gram.nrows(), gram.ncols(), g * d)));
    }
    let asym = linalg::hermitian_asymmetry(gram);
    if asym > linalg::HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    if g == 2 {
        clinging_two_variables(gram, d)
    } else {
        clinging_sampled(gram, g, d, LATTICE_POINTS)
    }
}

fn random_alpha(g: usize, r: &mut Rng) -> Vec<C64> {
    (0..g).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
}

/// Two variables: with `ker G = [K1; K2]`, `alpha (x) v` lies in the kernel
/// iff `(alpha_2 K1 - alpha_1 K2) c = 0`. Generic kernels come from random
/// points; the finitely many rank-drop points are the eigenvalues of a random
/// square compression of the pencil.
fn clinging_two_variables(gram: &CMat, d: usize) -> Result<ScalarClinging> {
    let kmat = gram_kernel(gram)?;
    let k = kmat.ncols();
    let k1 = linalg::block(&kmat, 0, 0, d, k);
    let k2 = linalg::block(&kmat, d, 0, d, k);
    let pencil = |a: &[C64]| &k1 * a[1] - &k2 * a[0];
    let mut r = rng::seeded(0x2a2a_2a2a);
    if k == 0 {
        return Ok(ScalarClinging { clings: false, method: "exact", counterexample: Some(random_alpha(2, &mut r)), kernel: None });
    }
    let generic: Vec<Vec<C64>> = (0..2 * k + 2).map(|_| random_alpha(2, &mut r)).collect();
    let rank_at = |a: &[C64]| linalg::rank(&pencil(a), 1e-9);
    let generic_rank = generic.iter().map(|a| rank_at(a)).max().unwrap_or(0);
    if generic_rank >= k {
        let alpha = generic.iter().find(|a| rank_at(a) >= k).cloned();
        return Ok(ScalarClinging { clings: false, method: "exact", counterexample: alpha, kernel: None });
    }
    let mut points = generic;
    points.push(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    points.push(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    if generic_rank > 0 {
        let rot = linalg::random_unitary(2, &mut r);
        let a_mat = &k1 * rot[(1, 0)] - &k2 * rot[(0, 0)];
        let b_mat = &k1 * rot[(1, 1)] - &k2 * rot[(0, 1)];
        let ql = linalg::ginibre(generic_rank, d, &mut r);
        let qr = linalg::ginibre(k, generic_rank, &mut r);
        let at = &ql * a_mat * &qr;
        let bt = &ql * b_mat * &qr;
        if let Ok((ainv, _)) = linalg::inverse(&at) {
            let prod = ainv * bt;
            if let Some(eigs) = nalgebra::Schur::new(prod).eigenvalues() {
                for mu in eigs.iter() {
                    let beta = [-*mu, C64::new(1.0, 0.0)];
                    points.push(vec![rot[(0, 0)] * beta[0] + rot[(0, 1)] * beta[1], rot[(1, 0)] * beta[0] + rot[(1, 1)] * beta[1]]);
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for a in &points {
        let kv = kernel_at(gram, 2, d, a, KERNEL_TOL);
        for c in 0..kv.ncols() {
            pairs.push((a.clone(), kv.column(c).into_owned()));
        }
    }
    let kernel = build_kernel(gram, 2, d, pairs)?;
    Ok(ScalarClinging { clings: true, method: "exact", counterexample: None, kernel: Some(kernel) })
}

fn clinging_sampled(gram: &CMat, g: usize, d: usize, count: usize) -> Result<ScalarClinging> {
    let lattice = projective_lattice(g, count);
    let svals: Vec<Vec<f64>> = par::map_range(lattice.len(), |i| smallest_singular_values(gram, g, d, &lattice[i]));
    let thr = KERNEL_TOL * linalg::op_norm(gram).max(1.0);
    if let Some(i) = svals.iter().position(|s| s[0] > thr) {
        return Ok(ScalarClinging { clings: false, method: "sampled", counterexample: Some(lattice[i].clone()), kernel: None });
    }
    let mut pairs = Vec::new();
    for a in lattice.iter().take(4 * g * d) {
        let kv = kernel_at(gram, g, d, a, KERNEL_TOL);
        for c in 0..kv.ncols() {
            pairs.push((a.clone(), kv.column(c).into_owned()));
        }
    }
    // Refine the points where a second kernel direction is closest to
    // appearing; rank-drop points contribute extra kernel vectors.
    let mut order: Vec<usize> = if d > 1 { (0..lattice.len()).collect() } else { Vec::new() };
    let next = |s: &Vec<f64>| s.iter().copied().find(|&x| x > thr).unwrap_or(f64::INFINITY);
    order.sort_by(|&a, &b| next(&svals[a]).total_cmp(&next(&svals[b])));
    let mut r = rng::seeded(0x7e7e);
    for &i in order.iter().take(16) {
        let mut a = lattice[i].clone();
        let mut best = next(&smallest_singular_values(gram, g, d, &a));
        let mut step = 0.1;
        for _ in 0..1500 {
            if best <= thr {
                break;
            }
            let mut trial: Vec<C64> = a.iter().map(|z| z + C64::new(r.gen_range(-step..step), r.gen_range(-step..step))).collect();
            let n = trial.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            trial.iter_mut().for_each(|z| *z /= n);
            let val = next(&smallest_singular_values(gram, g, d, &trial));
            if val < best {
                best = val;
                a = trial;
                step *= 1.5;
            } else {
                step *= 0.95;
            }
        }
        let kv = kernel_at(gram, g, d, &a, 1e-8);
        for c in 0..kv.ncols() {
            pairs.push((a.clone(), kv.column(c).into_owned()));
        }
    }
    let kernel = build_kernel(gram, g, d, pairs)?;
    Ok(ScalarClinging { clings: true, method: "sampled", counterexample: None, kernel: Some(kernel) })
}

/// Pick independent rank-one vectors spanning the collected kernel part and
/// order them as `v_1..v_t` independent, the rest expressed through them.
fn build_kernel(gram: &CMat, g: usize, d: usize, pairs: Vec<(Vec<C64>, DVector<C64>)>) -> Result<BindingKernel> {
    let mut chosen: Vec<(Vec<C64>, DVector<C64>)> = Vec::new();
    let mut etas: Vec<DVector<C64>> = Vec::new();
    for (a, v) in pairs {
        let eta = lift(&a, &v);
        let mut cand = etas.clone();
        cand.push(eta.clone());
        if linalg::rank(&CMat::from_columns(&cand), 1e-8) == cand.len() {
            etas.push(eta);
            chosen.push((a, v));
        }
    }
    let mut indep: Vec<usize> = Vec::new();
    for i in 0..chosen.len() {
        let mut cols: Vec<DVector<C64>> = indep.iter().map(|&k| chosen[k].1.clone()).collect();
        cols.push(chosen[i].1.clone());
        if linalg::rank(&CMat::from_columns(&cols), 1e-8) == cols.len() {
            indep.push(i);
        }
    }
    let rest: Vec<usize> = (0..chosen.len()).filter(|i| !indep.contains(i)).collect();
    let t = indep.len();
    let m = rest.len();
    let order: Vec<usize> = indep.iter().chain(rest.iter()).copied().collect();
    let alphas: Vec<Vec<C64>> = order.iter().map(|&i| chosen[i].0.clone()).collect();
    let vs: Vec<DVector<C64>> = order.iter().map(|&i| chosen[i].1.clone()).collect();
    let mut gamma = linalg::zeros(m, t);
    if t > 0 && m > 0 {
        let basis = CMat::from_columns(&vs[..t]);
        let pinv = linalg::pinv(&basis, 1e-12);
        for j in 0..m {
            let coeffs = &pinv * &vs[t + j];
            for i in 0..t {
                gamma[(j, i)] = coeffs[i];
            }
        }
    }
    let kernel_residual = alphas.iter().zip(&vs).map(|(a, v)| (gram * lift(a, v)).norm()).fold(0.0, f64::max);
    Ok(BindingKernel { g, d, alphas, vs, t, m, gamma, kernel_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct BindSolution {
    pub null_dim: usize,
    /// True when some solution gives `v = sum alpha_{i,1} v_i (x) r_i != 0`.
    pub solvable: bool,
    /// Residual of the reduced form `r_i = -sum_j b_ij r_{t+j}`, when every
    /// `alpha_{i,1} Z_k - alpha_{i,k}` is invertible.
    pub reduced_residual: Option<f64>,
    #[serde(skip)]
    pub solution: Option<Vec<DVector<C64>>>,
}

/// Solve the binding system
/// `(alpha_{i,1} Z_k - alpha_{i,k}) r_i + sum_j gamma_{ji} (alpha_{t+j,1} Z_k - alpha_{t+j,k}) r_{t+j} = 0`
/// for `i <= t`, `k = 2..g`, where `zs = [Z_2, ..., Z_g]`.
pub fn bind_system_solve(k: &BindingKernel, zs: &[CMat]) -> Result<BindSolution> {
    if zs.len() + 1 != k.g {
        return Err(Error::Shape(format!("expected {} matrices, got {}", k.g - 1, zs.len())));
    }
    let n = zs.first().map_or(1, |z| z.nrows());
    let (t, m) = (k.t, k.m);
    let id = linalg::eye(n);
    let op = |idx: usize, kk: usize| -> CMat { &zs[kk - 1] * k.alphas[idx][0] - &id * k.alphas[idx][kk] };
    let rows = t * n * (k.g - 1);
    let cols = (t + m) * n;
    let mut sys = linalg::zeros(rows.max(1), cols);
    for kk in 1..k.g {
        for i in 0..t {
            let r0 = ((kk - 1) * t + i) * n;
            linalg::set_block(&mut sys, r0, i * n, &op(i, kk));
            for j in 0..m {
                let blk = op(t + j, kk) * k.gamma[(j, i)];
                linalg::set_block(&mut sys, r0, (t + j) * n, &blk);
            }
        }
    }
    let null = linalg::null_space(&sys, 1e-10);
    let null_dim = null.ncols();
    let mut phi = linalg::zeros(k.d * n, cols);
    for i in 0..t + m {
        let vi = CMat::from_column_slice(k.d, 1, k.vs[i].as_slice()) * k.alphas[i][0];
        linalg::set_block(&mut phi, 0, i * n, &linalg::kron(&vi, &id));
    }
    let image = &phi * &null;
    let solvable = null_dim > 0 && linalg::op_norm(&image) > 1e-8;
    let mut solution = None;
    let mut reduced_residual = None;
    if null_dim > 0 {
        let col = (0..null_dim).max_by(|&a, &b| image.column(a).norm().total_cmp(&image.column(b).norm())).expect("non-empty");
        let r: Vec<DVector<C64>> = (0..t + m).map(|i| null.column(col).rows(i * n, n).into_owned()).collect();
        let mut worst: Option<f64> = Some(0.0);
        'outer: for kk in 1..k.g {
            for i in 0..t {
                let Ok((inv, _)) = linalg::inverse(&op(i, kk)) else {
                    worst = None;
                    break 'outer;
                };
                let mut rhs = DVector::<C64>::zeros(n);
                for j in 0..m {
                    rhs -= (&inv * op(t + j, kk) * &r[t + j]) * k.gamma[(j, i)];
                }
                worst = worst.map(|w| w.max((&r[i] - rhs).norm()));
            }
        }
        reduced_residual = worst;
        solution = Some(r);
    }
    Ok(BindSolution { null_dim, solvable, reduced_residual, solution })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClingVerdict {
    ProvedByCounting,
    VerifiedBySampling,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClingReport {
    pub verdict: ClingVerdict,
    /// Largest sampled `lambda_min(Delta_L(X)) / ||sum X_i* X_i||`.
    pub max_relative_min_eig: f64,
    pub samples: usize,
    pub scalar: ScalarClinging,
    pub counting_applies: bool,
    #[serde(skip)]
    pub refuting_point: Option<MatrixTuple>,
}

fn relative_min_eig(gram: &CMat, g: usize, d: usize, x: &MatrixTuple) -> Result<f64> {
    let dm = delta_from_gram(gram, g, d, x);
    let col = x.flatten();
    let scale = linalg::op_norm(&(col.adjoint() * col)).max(f64::MIN_POSITIVE);
    Ok(linalg::min_eig(&dm)? / scale)
}

/// Sample `Delta_L(X)` at levels `1..=levels` and report whether it stays
/// singular. Requires a PSD Gram matrix and scalar clinging.
pub fn matrix_clinging_sample(l: &LinearPencil, levels: usize, samples: usize, seed: u64) -> Result<ClingReport> {
    let gram = gram_of_delta(l)?;
    let (g, d) = (l.gprime, l.d);
    let psd = delta_psd(&gram, g, d)?;
    if !psd.psd {
        return Err(Error::Precondition(format!("Gram matrix has eigenvalue {}", psd.min_eig)));
    }
    let scalar = clinging_scalar(&gram, g, d)?;
    if !scalar.clings {
        return Err(Error::Precondition("pencil does not cling at scalar points".into()));
    }
    let counting_applies = scalar.kernel.as_ref().is_some_and(counting_criterion);
    let vals = par::map_range(samples, |i| {
        let mut r = rng::sample_rng(seed, i as u64);
        let n = 1 + i % levels.max(1);
        let x = MatrixTuple::random_with_norm(g, 1, n, 1.0, &mut r);
        relative_min_eig(&gram, g, d, &x).map(|v| (v, x))
    });
    let mut worst = (f64::NEG_INFINITY, None);
    for v in vals {
        let (val, x) = v?;
        if val > worst.0 {
            worst = (val, Some(x));
        }
    }
    let verdict = if counting_applies {
        ClingVerdict::ProvedByCounting
    } else if worst.0 <= CLING_TOL {
        ClingVerdict::VerifiedBySampling
    } else if worst.0 > REFUTE_TOL {
        ClingVerdict::Refuted
    } else {
        ClingVerdict::Inconclusive
    };
    let refuting_point = if worst.0 > REFUTE_TOL { worst.1 } else { None };
    Ok(ClingReport { verdict, max_relative_min_eig: worst.0, samples, scalar, counting_applies, refuting_point })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrthotropicReport {
    pub top_norm: f64,
    pub multiplicity: usize,
    /// `||(A_j)_{12}||` for `j = 2..g` after rotating `A_1` to diagonal form.
    pub off_diagonal: Vec<f64>,
    pub orthotropic: bool,
}

/// Rotate `A_1 = W S Z*` to diagonal form and measure the block of each
/// other `W* A_j Z` in the rows of the unit singular values and the
/// remaining columns.
pub fn orthotropic_check(l: &LinearPencil, tol: f64) -> Result<OrthotropicReport> {
    check_column(l)?;
    let (w, s, z) = {
        let a1 = l.coeff(0, 0);
        let dp = a1.nrows();
        let d = a1.ncols();
        let padded = a1.clone().resize(dp.max(d), dp.max(d), C64::new(0.0, 0.0));
        let (w, s, z) = linalg::svd(&padded);
        (linalg::block(&w, 0, 0, dp, dp.max(d)), s, linalg::block(&z, 0, 0, d, dp.max(d)))
    };
    let top = s[0];
    if (top - 1.0).abs() > tol {
        return Err(Error::Precondition(format!("||A_1|| = {top}, expected 1")));
    }
    let k = s.iter().filter(|&&x| (x - 1.0).abs() <= tol).count();
    let d = l.d;
    let off: Vec<f64> = (1..l.gprime)
        .map(|j| {
            let bj = w.adjoint() * l.coeff(j, 0) * &z;
            if k >= d {
                0.0
            } else {
                linalg::op_norm(&linalg::block(&bj, 0, k, k, d - k))
            }
        })
        .collect();
    let orthotropic = off.iter().all(|&x| x <= tol);
    Ok(OrthotropicReport { top_norm: top, multiplicity: k, off_diagonal: off, orthotropic })
}

/// The two-variable pencil with `4 x 3` coefficients used as the standard
/// clinging example.
pub fn two_variable_example() -> LinearPencil {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let a = linalg::from_real(4, 3, &[1.0, 0.0, 0.0, 0.0, h, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, h]);
    let b = linalg::from_real(4, 3, &[0.0, 0.0, 0.0, h, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, h]);
    LinearPencil::new(2, 1, vec![a, b]).expect("shapes")
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchCandidate {
    pub pencil_index: usize,
    pub pencil_seed: u64,
    pub level: usize,
    pub relative_min_eig: f64,
    #[serde(skip)]
    pub pencil: LinearPencil,
    #[serde(skip)]
    pub point: MatrixTuple,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub budget: usize,
    pub admissible: usize,
    pub candidates: Vec<SearchCandidate>,
}

/// Random three-variable pencil isometric on `span{alpha (x) K alpha}` and
/// strictly contractive, with orthogonal image, on the complement.
pub fn random_admissible_candidate(d: usize, r: &mut Rng) -> LinearPencil {
    let g = 3;
    let kmat = linalg::ginibre(d, g, r);
    let mut gens = Vec::new();
    for a in 0..g {
        for b in a..g {
            let mut v = DVector::<C64>::zeros(g * d);
            let ka = kmat.column(a).into_owned();
            let kb = kmat.column(b).into_owned();
            {
                let mut blk = v.rows_mut(a * d, d);
                blk += &kb;
            }
            let mut blk = v.rows_mut(b * d, d);
            blk += &ka;
            gens.push(v);
        }
    }
    let s_basis = linalg::range_basis(&CMat::from_columns(&gens), 1e-10);
    let full = linalg::complete_to_unitary(&s_basis);
    let s = s_basis.ncols();
    let rest = linalg::block(&full, 0, s, g * d, g * d - s);
    let c = linalg::random_with_norm(g * d - s, g * d - s, 0.7, r);
    let w = linalg::random_unitary(g * d, r);
    let m = linalg::block(&w, 0, 0, g * d, s) * s_basis.adjoint() + linalg::block(&w, 0, s, g * d, g * d - s) * c * rest.adjoint();
    let coeffs = (0..g).map(|j| linalg::block(&m, 0, j * d, g * d, d)).collect();
    LinearPencil::new(g, 1, coeffs).expect("shapes")
}

fn probe_pencil(l: &LinearPencil, r: &mut Rng) -> Result<Option<(usize, f64, MatrixTuple)>> {
    let gram = gram_of_delta(l)?;
    let (g, d) = (l.gprime, l.d);
    let mut best: Option<(usize, f64, MatrixTuple)> = None;
    for n in 2..=4 {
        let mut x = MatrixTuple::random_with_norm(g, 1, n, 1.0, r);
        let mut val = relative_min_eig(&gram, g, d, &x)?;
        let mut step = 0.3;
        for _ in 0..40 {
            let pert = MatrixTuple::random_with_norm(g, 1, n, step, r);
            let entries = x.entries.iter().zip(&pert.entries).map(|(a, b)| a + b).collect();
            let y = MatrixTuple::new(g, 1, entries)?;
            let y = y.scale(1.0 / y.norm());
            let v = relative_min_eig(&gram, g, d, &y)?;
            if v > val {
                x = y;
                val = v;
            } else {
                step *= 0.9;
            }
        }
        if best.as_ref().is_none_or(|b| val > b.1) {
            best = Some((n, val, x));
        }
    }
    Ok(best)
}

/// Search random admissible three-variable pencils (Gram PSD, scalar
/// clinging, orthotropic) for points where `Delta_L` is positive definite.
pub fn three_var_search(budget: usize, seed: u64) -> Result<SearchReport> {
    let outcomes = par::map_range(budget, |i| -> Result<Option<SearchCandidate>> {
        let pencil_seed = rng::mix(seed ^ rng::mix(i as u64));
        let mut r = rng::seeded(pencil_seed);
        let d = 3 + i % 2;
        let l = random_admissible_candidate(d, &mut r);
        if !is_admissible(&l)? {
            return Ok(None);
        }
        let Some((level, val, point)) = probe_pencil(&l, &mut r)? else { return Ok(None) };
        Ok(Some(SearchCandidate { pencil_index: i, pencil_seed, level, relative_min_eig: val, pencil: l, point }))
    });
    let mut admissible = 0;
    let mut candidates = Vec::new();
    for o in outcomes {
        if let Some(c) = o? {
            admissible += 1;
            if c.relative_min_eig > REFUTE_TOL {
                candidates.push(c);
            }
        }
    }
    Ok(SearchReport { budget, admissible, candidates })
}

/// Gram PSD, scalar clinging and orthotropic.
pub fn is_admissible(l: &LinearPencil) -> Result<bool> {
    let gram = gram_of_delta(l)?;
    if !delta_psd(&gram, l.gprime, l.d)?.psd {
        return Ok(false);
    }
    if !clinging_scalar(&gram, l.gprime, l.d)?.clings {
        return Ok(false);
    }
    Ok(orthotropic_check(l, 1e-9).map(|o| o.orthotropic).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn example_norms() {
        let l = two_variable_example();
        let x = MatrixTuple::new(2, 1, vec![from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]), from_real(2, 2, &[0.0, 0.0, 1.0, 0.0])]).unwrap();
        assert!((x.norm() - 2f64.sqrt()).abs() < 1e-12);
        assert!((linalg::op_norm(&l.eval(&x).unwrap()) - 1.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn example_gram_matches_displayed_defect() {
        let g = gram_of_delta(&two_variable_example()).unwrap();
        let expected = from_real(
            6,
            6,
            &[
                0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.5, 0.0, -0.5, 0.0, 0.0, //
                0.0, 0.0, 0.5, 0.0, 0.0, -0.5, //
                0.0, -0.5, 0.0, 0.5, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, -0.5, 0.0, 0.0, 0.5,
            ],
        );
        assert!(linalg::max_abs(&(g - expected)) < 1e-15);
    }

    #[test]
    fn delta_two_ways_agree() {
        let l = two_variable_example();
        let gram = gram_of_delta(&l).unwrap();
        let mut r = seeded(3);
        let x = MatrixTuple::random_with_norm(2, 1, 3, 1.0, &mut r);
        let a = delta(&l, &x).unwrap();
        let b = delta_from_gram(&gram, 2, 3, &x);
        assert!(linalg::max_abs(&(a - b)) < 1e-12);
    }

    #[test]
    fn example_clings() {
        let l = two_variable_example();
        let gram = gram_of_delta(&l).unwrap();
        assert!(delta_psd(&gram, 2, 3).unwrap().psd);
        let s = clinging_scalar(&gram, 2, 3).unwrap();
        assert!(s.clings);
        let k = s.kernel.as_ref().unwrap();
        assert!(k.kernel_residual < 1e-9);
        assert!(counting_criterion(k));
        let rep = matrix_clinging_sample(&l, 4, 60, 5).unwrap();
        assert!(rep.max_relative_min_eig <= CLING_TOL);
    }

    #[test]
    fn zero_gram_kernel_is_everything() {
        let (g, d) = (2, 2);
        let gram = linalg::zeros(g * d, g * d);
        let s = clinging_scalar(&gram, g, d).unwrap();
        let k = s.kernel.unwrap();
        assert_eq!((k.t, k.m), (d, (g - 1) * d));
        let s3 = clinging_scalar(&linalg::zeros(6, 6), 3, 2).unwrap();
        let k3 = s3.kernel.unwrap();
        assert_eq!((k3.t, k3.m), (2, 4));
    }

    #[test]
    fn identity_gram_does_not_cling() {
        let s = clinging_scalar(&linalg::eye(4), 2, 2).unwrap();
        assert!(!s.clings);
        let s = clinging_scalar(&linalg::eye(6), 3, 2).unwrap();
        assert!(!s.clings);
    }

    #[test]
    fn scaled_variable_gives_witness() {
        let l = LinearPencil::new(1, 1, vec![from_real(1, 1, &[2f64.sqrt()])]).unwrap();
        let gram = gram_of_delta(&l).unwrap();
        assert!((gram[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
        let p = delta_psd(&gram, 1, 1).unwrap();
        let (x, v) = p.witness.unwrap();
        let dv = delta(&l, &x).unwrap();
        let q = (v.adjoint() * dv * &v)[(0, 0)].re;
        assert!(q < 0.0);
    }

    #[test]
    fn planted_negative_direction_gives_witness() {
        let mut r = seeded(11);
        let (g, d) = (3, 2);
        let u = linalg::random_unitary(g * d, &mut r);
        let mut diag = linalg::eye(g * d);
        diag[(0, 0)] = c(-0.3, 0.0);
        let gram = &u * diag * u.adjoint();
        let p = delta_psd(&gram, g, d).unwrap();
        let (x, v) = p.witness.unwrap();
        let q = (v.adjoint() * delta_from_gram(&gram, g, d, &x) * &v)[(0, 0)].re;
        assert!((q - p.min_eig).abs() < 1e-12 && q < 0.0);
    }

    #[test]
    fn bind_system_examples() {
        // t = 1, m = 0 with generic Z: only the trivial solution.
        let k = BindingKernel {
            g: 3,
            d: 1,
            alphas: vec![vec![c(1.0, 0.0), c(0.3, 0.0), c(-0.2, 0.0)]],
            vs: vec![DVector::from_element(1, c(1.0, 0.0))],
            t: 1,
            m: 0,
            gamma: linalg::zeros(0, 1),
            kernel_residual: 0.0,
        };
        let mut r = seeded(2);
        let zs = vec![linalg::ginibre(2, 2, &mut r), linalg::ginibre(2, 2, &mut r)];
        assert!(!bind_system_solve(&k, &zs).unwrap().solvable);
        let zs = vec![linalg::eye(2) * c(0.3, 0.0), linalg::eye(2) * c(-0.2, 0.0)];
        let s = bind_system_solve(&k, &zs).unwrap();
        assert!(s.solvable && s.null_dim == 2);
    }

    #[test]
    fn two_variable_systems_are_solvable_with_spare_kernel() {
        let l = two_variable_example();
        let gram = gram_of_delta(&l).unwrap();
        let k = clinging_scalar(&gram, 2, 3).unwrap().kernel.unwrap();
        assert!(k.m > 0);
        let mut r = seeded(4);
        for n in 1..=3 {
            let s = bind_system_solve(&k, &[linalg::ginibre(n, n, &mut r)]).unwrap();
            assert!(s.solvable);
            if let Some(res) = s.reduced_residual {
                assert!(res < 1e-8);
            }
        }
    }

    #[test]
    fn orthotropic_planted_block_is_reported() {
        let a1 = from_real(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let a2 = from_real(2, 2, &[0.0, 0.3, 0.2, 0.1]);
        let rep = orthotropic_check(&LinearPencil::new(2, 1, vec![a1, a2]).unwrap(), 1e-9).unwrap();
        assert!(!rep.orthotropic);
        assert!((rep.off_diagonal[0] - 0.3).abs() < 1e-12);
        assert!(orthotropic_check(&two_variable_example(), 1e-9).unwrap().orthotropic);
    }

    #[test]
    fn exact_and_sampled_paths_agree_for_two_variables() {
        let gram = gram_of_delta(&two_variable_example()).unwrap();
        let exact = clinging_scalar(&gram, 2, 3).unwrap();
        let sampled = clinging_sampled(&gram, 2, 3, 512).unwrap();
        assert_eq!(exact.clings, sampled.clings);
        assert_eq!(exact.kernel.unwrap().dim(), sampled.kernel.unwrap().dim());
    }

    #[test]
    fn search_with_zero_budget_is_empty() {
        let r = three_var_search(0, 1).unwrap();
        assert!(r.candidates.is_empty() && r.admissible == 0);
    }

    #[test]
    fn lifted_two_variable_example_is_not_admissible() {
        let l = two_variable_example();
        let lifted = LinearPencil::new(3, 1, vec![l.coeffs[0].clone(), l.coeffs[1].clone(), linalg::zeros(4, 3)]).unwrap();
        assert!(!is_admissible(&lifted).unwrap());
    }

    #[test]
    fn generated_candidates_are_admissible() {
        let mut r = seeded(9);
        for d in [3, 4] {
            assert!(is_admissible(&random_admissible_candidate(d, &mut r)).unwrap());
        }
    }

    /// Two-variable clinging instance: kernel spanned by `alpha (x) K alpha`.
    fn two_variable_instance(seed: u64) -> (LinearPencil, usize) {
        let mut r = seeded(seed);
        let d = 2 + (seed % 2) as usize;
        let kmat = linalg::ginibre(d, 2, &mut r);
        let mut gens = Vec::new();
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let mut v = DVector::<C64>::zeros(2 * d);
            for (i, j) in [(a, b), (b, a)] {
                let mut blk = v.rows_mut(i * d, d);
                blk += kmat.column(j);
            }
            gens.push(v);
        }
        let sb = linalg::range_basis(&CMat::from_columns(&gens), 1e-10);
        let s = sb.ncols();
        let full = linalg::complete_to_unitary(&sb);
        let rest = linalg::block(&full, 0, s, 2 * d, 2 * d - s);
        let cm = linalg::random_with_norm(2 * d - s, 2 * d - s, 0.6, &mut r);
        let w = linalg::random_unitary(2 * d, &mut r);
        let m = linalg::block(&w, 0, 0, 2 * d, s) * sb.adjoint() + linalg::block(&w, 0, s, 2 * d, 2 * d - s) * cm * rest.adjoint();
        (LinearPencil::new(2, 1, vec![linalg::block(&m, 0, 0, 2 * d, d), linalg::block(&m, 0, d, 2 * d, d)]).unwrap(), d)
    }

    #[test]
    fn exact_and_sampled_agree_on_seeded_instances() {
        for seed in 0..50 {
            let (l, d) = two_variable_instance(seed);
            let gram = gram_of_delta(&l).unwrap();
            let exact = clinging_scalar(&gram, 2, d).unwrap();
            let sampled = clinging_sampled(&gram, 2, d, 512).unwrap();
            assert!(exact.clings && sampled.clings, "seed {seed}");
            assert_eq!(exact.kernel.unwrap().dim(), sampled.kernel.unwrap().dim(), "seed {seed}");
        }
    }

    #[test]
    fn counting_criterion_arithmetic() {
        let k = BindingKernel { g: 3, d: 2, alphas: vec![], vs: vec![], t: 2, m: 1, gamma: linalg::zeros(1, 2), kernel_residual: 0.0 };
        assert!(!counting_criterion(&k));
        let k2 = BindingKernel { g: 2, m: 1, ..k.clone() };
        assert!(counting_criterion(&k2));
    }

    #[test]
    fn non_hermitian_gram_is_rejected() {
        let mut gmat = linalg::zeros(2, 2);
        gmat[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(clinging_scalar(&gmat, 2, 1), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn seeded_search_is_deterministic() {
        let a = three_var_search(2, 7).unwrap();
        let b = three_var_search(2, 7).unwrap();
        assert_eq!(a.admissible, b.admissible);
        assert_eq!(
            a.candidates.iter().map(|c| (c.pencil_seed, c.relative_min_eig.to_bits())).collect::<Vec<_>>(),
            b.candidates.iter().map(|c| (c.pencil_seed, c.relative_min_eig.to_bits())).collect::<Vec<_>>()
        );
    }

    #[test]
    fn single_variable_orthotropic_is_vacuous() {
        let l = LinearPencil::new(1, 1, vec![from_real(2, 2, &[1.0, 0.0, 0.0, 0.2])]).unwrap();
        let rep = orthotropic_check(&l, 1e-9).unwrap();
        assert!(rep.orthotropic && rep.off_diagonal.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn prop_gram_assembly_matches_defect(seed in 0u64..10_000, g in 1usize..4, d in 1usize..3, n in 1usize..3) {
            let mut r = seeded(seed);
            let coeffs = (0..g).map(|_| linalg::ginibre(d + 1, d, &mut r)).collect();
            let l = LinearPencil::new(g, 1, coeffs).unwrap();
            let x = MatrixTuple::random_with_norm(g, 1, n, 1.0, &mut r);
            let a = delta(&l, &x).unwrap();
            let b = delta_from_gram(&gram_of_delta(&l).unwrap(), g, d, &x);
            prop_assert!(linalg::max_abs(&(a - b)) < 1e-12);
        }

        #[test]
        fn prop_scalar_clinging_gives_kernels(seed in 0u64..50) {
            let (l, d) = two_variable_instance(seed);
            let gram = gram_of_delta(&l).unwrap();
            for a in projective_lattice(2, 20) {
                prop_assert!(kernel_at(&gram, 2, d, &a, KERNEL_TOL).ncols() >= 1);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_gram_psd_iff_delta_psd(seed in 0u64..100, s in 0.5f64..1.5) {
            let mut r = seeded(seed);
            let m = linalg::random_with_norm(3, 4, s, &mut r);
            let l = LinearPencil::new(2, 1, vec![linalg::block(&m, 0, 0, 3, 2), linalg::block(&m, 0, 2, 3, 2)]).unwrap();
            let gram = gram_of_delta(&l).unwrap();
            let p = delta_psd(&gram, 2, 2).unwrap();
            prop_assert_eq!(p.psd, s <= 1.0 + 1e-9);
            for n in 1..=2 {
                let x = MatrixTuple::random_with_norm(2, 1, n, 1.0, &mut r);
                let e = linalg::min_eig(&delta(&l, &x).unwrap()).unwrap();
                if p.psd {
                    prop_assert!(e >= -1e-10);
                }
            }
        }
    }
}
