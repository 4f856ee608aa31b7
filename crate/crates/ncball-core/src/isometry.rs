//! Linear maps `psi(X) = sum A_{jl} (x) X_{jl}` between matrix balls:
//! complete-contractivity sampling and the complete-isometry certificate
//! `A_{jl} = V diag(E_{jl}, phi_{jl}) U*`.

use crate::balls::LinearPencil;
use crate::linalg::{self, CMat, C64};
use crate::ncpoly::MatrixTuple;
use crate::par;
use crate::rng;
use nalgebra::DVector;
use rand::Rng as _;
use serde::Serialize;

/// A linear map between matrix balls is stored exactly like a pencil.
pub type LinearMatrixMap = LinearPencil;

/// Number of random combinations tried when the top singular space of the
/// coefficient matrix is degenerate.
pub const DEGENERACY_TRIALS: usize = 32;

/// The `g dprime x gprime d` matrix whose `(j, l)` block is `A_{l j}`.
pub fn block_transpose(psi: &LinearMatrixMap) -> CMat {
    let (dp, d) = (psi.dprime, psi.d);
    let mut out = linalg::zeros(psi.g * dp, psi.gprime * d);
    for j in 0..psi.g {
        for l in 0..psi.gprime {
            linalg::set_block(&mut out, j * dp, l * d, psi.coeff(l, j));
        }
    }
    out
}

/// The `gprime dprime x g d` matrix whose `(a, s)` block is `A_{a s}`.
pub fn coefficient_matrix(psi: &LinearMatrixMap) -> CMat {
    let (dp, d) = (psi.dprime, psi.d);
    let mut out = linalg::zeros(psi.gprime * dp, psi.g * d);
    for a in 0..psi.gprime {
        for s in 0..psi.g {
            linalg::set_block(&mut out, a * dp, s * d, psi.coeff(a, s));
        }
    }
    out
}

/// `||block_transpose|| <= 1` is necessary (not sufficient) for complete
/// contractivity. Returns the norm and the verdict.
pub fn block_transpose_test(psi: &LinearMatrixMap, tol: f64) -> (f64, bool) {
    let n = linalg::op_norm(&block_transpose(psi));
    (n, n <= 1.0 + tol)
}

/// Adjoint of `X -> <B, psi(X)>`: the tuple `G` with
/// `<B, psi(X)> = sum_{jl} tr(G_{jl}* X_{jl})`.
fn adjoint_apply(psi: &LinearMatrixMap, b: &CMat, n: usize) -> MatrixTuple {
    let entries = psi
        .coeffs
        .iter()
        .map(|a| {
            let mut gm = linalg::zeros(n, n);
            for r in 0..psi.dprime {
                for c in 0..psi.d {
                    let z = a[(r, c)];
                    if z != C64::new(0.0, 0.0) {
                        gm += linalg::block(b, r * n, c * n, n, n) * z.conj();
                    }
                }
            }
            gm
        })
        .collect();
    MatrixTuple::new(psi.gprime, psi.g, entries).expect("square blocks")
}

/// Monotone ascent of `||psi(X)||` over the unit ball at fixed level: move to
/// the polar factor of the gradient of `u* psi(X) w` for the top singular
/// pair `(u, w)`.
pub fn ascend(psi: &LinearMatrixMap, start: &MatrixTuple, iterations: usize) -> (f64, MatrixTuple) {
    let n = start.level;
    let mut x = start.scale(1.0 / start.norm().max(f64::MIN_POSITIVE));
    let mut value = linalg::op_norm(&psi.eval(&x).expect("grid matches"));
    for _ in 0..iterations {
        let px = psi.eval(&x).expect("grid matches");
        let (u, s, w) = linalg::svd(&px);
        if s.is_empty() || s[0] == 0.0 {
            break;
        }
        let b = u.column(0) * w.column(0).adjoint();
        let grad = adjoint_apply(psi, &b, n).flatten();
        let next = MatrixTuple::from_flat(&linalg::polar_factor(&grad), psi.gprime, psi.g).expect("shape");
        let nv = linalg::op_norm(&psi.eval(&next).expect("grid matches"));
        if nv <= value + 1e-15 {
            if nv >= value - 1e-15 {
                x = next;
                value = value.max(nv);
            }
            break;
        }
        x = next;
        value = nv;
    }
    (value, x)
}

#[derive(Clone, Debug, Serialize)]
pub struct CcReport {
    /// `(level, best ratio)` for each level sampled.
    pub per_level: Vec<(usize, f64)>,
    pub max_ratio: f64,
    pub completely_contractive: bool,
    #[serde(skip)]
    pub argmax: MatrixTuple,
}

/// Sample `||psi(X)|| / ||X||` at levels `1..=min(g, d) + 1`, refining each
/// sample by ascent.
pub fn sample_complete_contractivity(psi: &LinearMatrixMap, samples: usize, seed: u64, tol: f64) -> CcReport {
    let top = psi.g.min(psi.d) + 1;
    let jobs: Vec<(usize, usize)> = (1..=top).flat_map(|n| (0..samples).map(move |i| (n, i))).collect();
    let results = par::map_range(jobs.len(), |k| {
        let (n, i) = jobs[k];
        let mut rng = rng::sample_rng(seed, (n * 1_000_003 + i) as u64);
        let x = MatrixTuple::random_with_norm(psi.gprime, psi.g, n, 1.0, &mut rng);
        ascend(psi, &x, 200)
    });
    let mut per_level: Vec<(usize, f64)> = (1..=top).map(|n| (n, 0.0)).collect();
    let mut best = (f64::NEG_INFINITY, MatrixTuple::zero(psi.gprime, psi.g, 1));
    for (k, (val, x)) in results.into_iter().enumerate() {
        let n = jobs[k].0;
        per_level[n - 1].1 = per_level[n - 1].1.max(val);
        if val > best.0 + 1e-12 {
            best = (val, x);
        }
    }
    CcReport { per_level, max_ratio: best.0, completely_contractive: best.0 <= 1.0 + tol, argmax: best.1 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectStage {
    Dimensions,
    NormTest,
    FVectors,
    OffDiagonal,
}

#[derive(Clone, Debug, Serialize)]
pub struct Rejection {
    pub stage: RejectStage,
    pub value: f64,
    pub detail: String,
    /// True when rejection is due to exhausting the degeneracy trials rather
    /// than a violated identity.
    pub inconclusive: bool,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    /// `d x d` unitary whose first `g` columns are the normalised `f_s`.
    pub u: CMat,
    /// `dprime x dprime` unitary whose first `gprime` columns are `h_a`.
    pub v: CMat,
    /// The residual map on the complementary blocks; `None` when `d = g` or
    /// `dprime = gprime`.
    pub phi: Option<LinearMatrixMap>,
    pub top_singular_sq: f64,
    pub f_residual: f64,
    pub residual: f64,
    pub trials: usize,
}

fn reject(stage: RejectStage, value: f64, detail: String) -> Rejection {
    Rejection { stage, value, detail, inconclusive: false }
}

/// Gram defect of the vectors `A_{a,s} f_u` against `delta_{ab} delta_{su} delta_{tv}`.
fn f_identity_residual(psi: &LinearMatrixMap, f: &[DVector<C64>]) -> f64 {
    let g = psi.g;
    let mut ys: Vec<((usize, usize, usize), DVector<C64>)> = Vec::new();
    for a in 0..psi.gprime {
        for s in 0..g {
            for (u, fu) in f.iter().enumerate().take(g) {
                ys.push(((a, s, u), psi.coeff(a, s) * fu));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for ((a, s, t), y1) in &ys {
        for ((b, u, v), y2) in &ys {
            // <A_{a,s} f_t, A_{b,u} f_v> should be 1 exactly when a = b,
            // s = t and u = v (both vectors equal h_a), else 0.
            let expected = if a == b && s == t && u == v { 1.0 } else { 0.0 };
            let z = y1.dotc(y2);
            worst = worst.max((z - C64::new(expected, 0.0)).norm());
        }
    }
    worst
}

/// Decide whether `psi` is a complete isometry onto a corner and produce the
/// unitaries `U, V` and the residual map `phi`.
pub fn certify_complete_isometry(psi: &LinearMatrixMap, tol: f64) -> Result<Certificate, Rejection> {
    let (gp, g, dp, d) = (psi.gprime, psi.g, psi.dprime, psi.d);
    let target = (g * gp) as f64;
    let m = coefficient_matrix(psi);
    let (_, s, vecs) = linalg::svd(&m);
    let top_sq = s[0] * s[0];
    if (top_sq - target).abs() > tol * target {
        return Err(reject(RejectStage::NormTest, top_sq, format!("largest squared singular value {top_sq} differs from g g' = {target}")));
    }
    if d < g || dp < gp {
        return Err(reject(RejectStage::Dimensions, 0.0, format!("need d >= g and d' >= g', got {dp}x{d} on {gp}x{g}")));
    }
    let mult = s.iter().filter(|&&x| x * x >= target * (1.0 - tol.max(1e-8))).count();
    let basis: Vec<DVector<C64>> = (0..mult).map(|k| vecs.column(k).into_owned()).collect();
    let mut candidates = basis.clone();
    if mult > 1 {
        let mut r = rng::seeded(0x5eed_f00d ^ (mult as u64));
        for _ in 0..DEGENERACY_TRIALS {
            let mut v = DVector::<C64>::zeros(g * d);
            for b in &basis {
                v += b * C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            }
            let nv = v.norm();
            if nv > 0.0 {
                candidates.push(v / C64::new(nv, 0.0));
            }
        }
    }
    let mut best_res = f64::INFINITY;
    let mut chosen: Option<(Vec<DVector<C64>>, f64, usize)> = None;
    for (trial, cand) in candidates.iter().enumerate() {
        let mut f = cand.clone();
        linalg::phase_normalize(&mut f, 0..d);
        let blocks: Vec<DVector<C64>> = (0..g).map(|s| f.rows(s * d, d).into_owned()).collect();
        let norms_ok = blocks.iter().all(|b| (b.norm_squared() - 1.0 / g as f64).abs() <= tol.max(1e-12));
        if !norms_ok {
            continue;
        }
        let scaled: Vec<DVector<C64>> = blocks.iter().map(|b| b * C64::new((g as f64).sqrt(), 0.0)).collect();
        let res = f_identity_residual(psi, &scaled);
        best_res = best_res.min(res);
        if res <= tol {
            chosen = Some((scaled, res, trial + 1));
            break;
        }
    }
    let Some((fs, f_residual, trials)) = chosen else {
        return Err(Rejection {
            stage: RejectStage::FVectors,
            value: best_res,
            detail: format!("no top singular vector satisfies the f-identities (best residual {best_res:e}, multiplicity {mult})"),
            inconclusive: mult > 1,
        });
    };
    let fmat = CMat::from_columns(&fs);
    let hs: Vec<DVector<C64>> = (0..gp).map(|a| psi.coeff(a, 0) * &fs[0]).collect();
    let hmat = CMat::from_columns(&hs);
    let orth =
        linalg::max_abs(&(fmat.adjoint() * &fmat - linalg::eye(g))).max(linalg::max_abs(&(hmat.adjoint() * &hmat - linalg::eye(gp))));
    if orth > tol {
        return Err(reject(RejectStage::FVectors, orth, format!("f or h vectors not orthonormal ({orth:e})")));
    }
    let u = linalg::complete_to_unitary(&fmat);
    let v = linalg::complete_to_unitary(&hmat);

    let mut phis = Vec::with_capacity(gp * g);
    let mut worst_off = (0.0, String::new());
    let mut corner_res: f64 = 0.0;
    for j in 0..gp {
        for l in 0..g {
            let sigma = v.adjoint() * psi.coeff(j, l) * &u;
            let mut e = linalg::zeros(gp, g);
            e[(j, l)] = C64::new(1.0, 0.0);
            corner_res = corner_res.max(linalg::max_abs(&(linalg::block(&sigma, 0, 0, gp, g) - e)));
            let up = linalg::op_norm(&linalg::block(&sigma, 0, g, gp, d - g));
            let lo = linalg::op_norm(&linalg::block(&sigma, gp, 0, dp - gp, g));
            if up > worst_off.0 {
                worst_off = (up, format!("upper-right block of A_{}{}", j + 1, l + 1));
            }
            if lo > worst_off.0 {
                worst_off = (lo, format!("lower-left block of A_{}{}", j + 1, l + 1));
            }
            phis.push(linalg::block(&sigma, gp, g, dp - gp, d - g));
        }
    }
    if worst_off.0 > tol || corner_res > tol {
        let (val, what) = if worst_off.0 >= corner_res { worst_off } else { (corner_res, "upper-left corner".to_string()) };
        return Err(reject(RejectStage::OffDiagonal, val, format!("{what} has norm {val:e}")));
    }
    let phi = if dp > gp && d > g { Some(LinearPencil::new(gp, g, phis).expect("consistent shapes")) } else { None };
    let cert = Certificate { u, v, phi, top_singular_sq: top_sq, f_residual, residual: 0.0, trials };
    let residual = reconstruction_residual(psi, &cert);
    Ok(Certificate { residual, ..cert })
}

/// `max_{jl} || A_{jl} - V diag(E_{jl}, phi_{jl}) U* ||` (entrywise).
pub fn reconstruction_residual(psi: &LinearMatrixMap, cert: &Certificate) -> f64 {
    let (gp, g, dp, d) = (psi.gprime, psi.g, psi.dprime, psi.d);
    let mut worst: f64 = 0.0;
    for j in 0..gp {
        for l in 0..g {
            let mut mid = linalg::zeros(dp, d);
            mid[(j, l)] = C64::new(1.0, 0.0);
            if let Some(phi) = &cert.phi {
                linalg::set_block(&mut mid, gp, g, phi.coeff(j, l));
            }
            let rebuilt = &cert.v * mid * cert.u.adjoint();
            worst = worst.max(linalg::max_abs(&(psi.coeff(j, l) - rebuilt)));
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateCheck {
    pub residual: f64,
    pub phi_ratio: Option<f64>,
    pub passed: bool,
}

/// Recompute the reconstruction and sample complete contractivity of `phi`.
pub fn verify_certificate(psi: &LinearMatrixMap, cert: &Certificate, samples: usize, seed: u64, tol: f64) -> CertificateCheck {
    let residual = reconstruction_residual(psi, cert);
    let phi_ratio = cert.phi.as_ref().map(|p| sample_complete_contractivity(p, samples, seed, tol).max_ratio);
    let passed = residual <= tol && phi_ratio.is_none_or(|r| r <= 1.0 + tol);
    CertificateCheck { residual, phi_ratio, passed }
}

/// The map `psi(Y) = V0 diag(Y, C Y D) U0*` for unitaries `U0, V0` and
/// contractions `C`, `D`; used to produce certifiable instances.
pub fn planted_isometry(
    gp: usize,
    g: usize,
    dp: usize,
    d: usize,
    phi_scale: f64,
    r: &mut rng::Rng,
) -> (LinearMatrixMap, CMat, CMat, Option<LinearMatrixMap>) {
    let u0 = linalg::random_unitary(d, r);
    let v0 = linalg::random_unitary(dp, r);
    let cm = linalg::random_with_norm(dp - gp, gp, phi_scale, r);
    let dm = linalg::random_with_norm(g, d - g, phi_scale, r);
    let mut coeffs = Vec::new();
    let mut phis = Vec::new();
    for j in 0..gp {
        for l in 0..g {
            let mut mid = linalg::zeros(dp, d);
            mid[(j, l)] = C64::new(1.0, 0.0);
            let phi = cm.column(j) * dm.row(l);
            linalg::set_block(&mut mid, gp, g, &phi);
            coeffs.push(&v0 * mid * u0.adjoint());
            phis.push(phi);
        }
    }
    let phi = if dp > gp && d > g { Some(LinearPencil::new(gp, g, phis).expect("shapes")) } else { None };
    (LinearPencil::new(gp, g, coeffs).expect("shapes"), u0, v0, phi)
}

/// The map `psi(X) = X_11 + X_22 + ... ` on a square grid; its block transpose
/// is the identity but it is not completely contractive.
pub fn trace_map(g: usize) -> LinearMatrixMap {
    let coeffs = (0..g)
        .flat_map(|j| (0..g).map(move |l| (j, l)))
        .map(|(j, l)| CMat::from_element(1, 1, C64::new(if j == l { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    LinearPencil::new(g, g, coeffs).expect("shapes")
}
