//! NC ball maps given as truncated series: canonical forms at zero and at a
//! general basepoint, pencil ball maps, the decomposition through the
//! isometric subspace of the linear part, and sampled Schwarz-type suites.

use crate::balls::LinearPencil;
use crate::error::{Error, Result};
use crate::fock::{self, BigX};
use crate::isometry::{self, Certificate, LinearMatrixMap, RejectStage};
use crate::linalg::{self, CMat, C64};
use crate::moebius::MoebiusParams;
use crate::ncpoly::{compose_series, MatrixTuple, NcPoly, TruncatedSeries, Word};
use crate::par;
use crate::report::CheckReport;
use crate::rng;
use rand::Rng as _;
use serde::Serialize;

/// Constant terms below this are treated as zero.
pub const BASEPOINT_TOL: f64 = 1e-12;
/// Slack added to every sampled matrix inequality.
pub const SAMPLE_SLACK: f64 = 1e-7;
/// Largest Fock model size used to confirm vanishing blocks.
pub const FOCK_LEVEL_CAP: usize = 300;
/// Points on the circle in the maximum-principle sampler.
pub const CIRCLE_POINTS: usize = 256;

/// The degree-one part of `h` as a linear matrix map.
pub fn linear_part(h: &TruncatedSeries) -> Result<LinearMatrixMap> {
    let c0 = linalg::max_abs(&h.constant_term());
    if c0 > BASEPOINT_TOL {
        return Err(Error::Precondition(format!("constant term has size {c0}")));
    }
    Ok(LinearPencil::from_linear_part(&h.poly))
}

/// `V diag(x, tilde(x)) U*` with `x` the `gprime x g` grid of variables.
pub fn assemble_canonical(
    u: &CMat,
    v: &CMat,
    gprime: usize,
    g: usize,
    tilde: Option<&TruncatedSeries>,
    max_degree: usize,
) -> Result<TruncatedSeries> {
    let (dp, d) = (v.nrows(), u.nrows());
    let x = LinearPencil::identity(gprime, g).to_poly();
    let mut mid = x.map_coeffs(dp, d, |a| {
        let mut m = linalg::zeros(dp, d);
        linalg::set_block(&mut m, 0, 0, a);
        m
    });
    let mut truncated = false;
    if let Some(t) = tilde {
        if t.grid() != (gprime, g) || t.shape() != (dp - gprime, d - g) {
            return Err(Error::Shape(format!("tilde has grid {:?} and shape {:?}", t.grid(), t.shape())));
        }
        truncated = t.truncated;
        let lifted = t.poly.map_coeffs(dp, d, |a| {
            let mut m = linalg::zeros(dp, d);
            linalg::set_block(&mut m, gprime, g, a);
            m
        });
        mid = mid.checked_add(&lifted)?;
    }
    let poly = mid.left_mul(v).right_mul(&u.adjoint()).truncate(max_degree);
    Ok(TruncatedSeries { poly, max_degree, truncated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OffBlock {
    B1,
    B2,
    B3,
}

impl std::fmt::Display for OffBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OffBlock::B1 => "b1",
            OffBlock::B2 => "b2",
            OffBlock::B3 => "b3",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CanonRejection {
    Basepoint { norm: f64 },
    LinearPart { stage: RejectStage, value: f64, detail: String },
    OffDiagonal { degree: usize, block: OffBlock, norm: f64 },
    RoundTrip { residual: f64 },
}

impl std::fmt::Display for CanonRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CanonRejection::Basepoint { norm } => write!(f, "basepoint norm {norm} is not below 1"),
            CanonRejection::LinearPart { stage, value, detail } => write!(f, "linear part rejected at {stage:?} ({value}): {detail}"),
            CanonRejection::OffDiagonal { degree, block, norm } => write!(f, "degree {degree} block {block} has norm {norm}"),
            CanonRejection::RoundTrip { residual } => write!(f, "round trip residual {residual}"),
        }
    }
}

/// Largest coefficient norm of `b1, b2, b3` in one homogeneous degree.
#[derive(Clone, Debug, Serialize)]
pub struct BlockNorms {
    pub degree: usize,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// Fock-model check of the top row block (`b2`) or left column block (`b3`).
#[derive(Clone, Debug, Serialize)]
pub struct FockConfirmation {
    pub block: OffBlock,
    pub max_level: usize,
    pub min_eig: f64,
    pub witness_level: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallMapAnalysis {
    pub grid: (usize, usize),
    pub shape: (usize, usize),
    pub max_degree: usize,
    pub truncated: bool,
    pub certificate_residual: Option<f64>,
    pub block_norms: Vec<BlockNorms>,
    pub fock: Vec<FockConfirmation>,
    /// `max_w ||h_w - (V diag(x, tilde) U*)_w||`.
    pub reconstruction_residual: Option<f64>,
    /// `||f(0)||` for the general form.
    pub basepoint_norm: Option<f64>,
    pub round_trip_residual: Option<f64>,
    pub rejection: Option<CanonRejection>,
    #[serde(skip)]
    pub u: Option<CMat>,
    #[serde(skip)]
    pub v: Option<CMat>,
    #[serde(skip)]
    pub tilde: Option<TruncatedSeries>,
    #[serde(skip)]
    pub phi: Option<TruncatedSeries>,
}

impl BallMapAnalysis {
    fn new(h: &TruncatedSeries) -> Self {
        BallMapAnalysis {
            grid: h.grid(),
            shape: h.shape(),
            max_degree: h.max_degree,
            truncated: h.truncated,
            certificate_residual: None,
            block_norms: Vec::new(),
            fock: Vec::new(),
            reconstruction_residual: None,
            basepoint_norm: None,
            round_trip_residual: None,
            rejection: None,
            u: None,
            v: None,
            tilde: None,
            phi: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.rejection.is_none()
    }
}

fn sub_block(p: &NcPoly, r0: usize, c0: usize, r: usize, c: usize) -> NcPoly {
    p.map_coeffs(r, c, |a| linalg::block(a, r0, c0, r, c))
}

fn block_max(p: &NcPoly) -> f64 {
    p.terms().values().map(linalg::op_norm).fold(0.0, f64::max)
}

fn fock_confirm(p: &NcPoly, block: OffBlock, max_degree: usize, tol: f64) -> Result<FockConfirmation> {
    let (gp, g) = p.grid();
    let mut max_level = 0;
    for n in 1..=max_degree.max(1) {
        if BigX::new(gp, g, n).level > FOCK_LEVEL_CAP {
            break;
        }
        max_level = n;
    }
    if max_level == 0 {
        return Ok(FockConfirmation { block, max_level, min_eig: f64::NAN, witness_level: None });
    }
    if block_max(p) <= tol {
        // the defect reduces to the exact projection I - X* X
        return Ok(FockConfirmation { block, max_level, min_eig: 0.0, witness_level: None });
    }
    let rep = fock::unique_s_polynomial_test(p, max_level, 1e-9)?;
    let min_eig = rep.levels.iter().map(|l| l.2).fold(f64::INFINITY, f64::min);
    Ok(FockConfirmation { block, max_level, min_eig, witness_level: rep.witness.map(|w| w.n) })
}

/// Canonical form of a ball map with `h(0) = 0`: certify the linear part,
/// conjugate by the certificate unitaries, check that the off-corner blocks
/// of every higher homogeneous part vanish and collect the lower-right block.
pub fn canonical_form_zero(h: &TruncatedSeries, tol: f64) -> Result<BallMapAnalysis> {
    let psi = linear_part(h)?;
    let mut out = BallMapAnalysis::new(h);
    let cert: Certificate = match isometry::certify_complete_isometry(&psi, tol) {
        Ok(c) => c,
        Err(rej) => {
            out.rejection = Some(CanonRejection::LinearPart { stage: rej.stage, value: rej.value, detail: rej.detail });
            return Ok(out);
        }
    };
    out.certificate_residual = Some(cert.residual);
    let (gp, g) = h.grid();
    let (dp, d) = h.shape();
    let k = h.poly.left_mul(&cert.v.adjoint()).right_mul(&cert.u);
    let mut row_part = NcPoly::zero(gp, g, gp, d - g);
    let mut col_part = NcPoly::zero(gp, g, dp - gp, g);
    for alpha in 2..=h.max_degree {
        let part = k.homogeneous_part(alpha);
        let b1 = sub_block(&part, 0, 0, gp, g);
        let b2 = sub_block(&part, 0, g, gp, d - g);
        let b3 = sub_block(&part, gp, 0, dp - gp, g);
        let norms = BlockNorms { degree: alpha, b1: block_max(&b1), b2: block_max(&b2), b3: block_max(&b3) };
        if out.rejection.is_none() {
            for (blk, nm) in [(OffBlock::B1, norms.b1), (OffBlock::B2, norms.b2), (OffBlock::B3, norms.b3)] {
                if nm > tol {
                    out.rejection = Some(CanonRejection::OffDiagonal { degree: alpha, block: blk, norm: nm });
                    break;
                }
            }
        }
        out.block_norms.push(norms);
        row_part = row_part.checked_add(&b2)?;
        col_part = col_part.checked_add(&b3)?;
    }
    if d > g {
        out.fock.push(fock_confirm(&row_part, OffBlock::B2, h.max_degree, tol)?);
    }
    if dp > gp {
        out.fock.push(fock_confirm(&col_part, OffBlock::B3, h.max_degree, tol)?);
    }
    let tilde = if dp > gp && d > g {
        let t = sub_block(&k.truncate(h.max_degree), gp, g, dp - gp, d - g).filter(|w| !w.is_empty());
        Some(TruncatedSeries { poly: t, max_degree: h.max_degree, truncated: h.truncated })
    } else {
        None
    };
    let rebuilt = assemble_canonical(&cert.u, &cert.v, gp, g, tilde.as_ref(), h.max_degree)?;
    if out.rejection.is_none() {
        out.reconstruction_residual = Some(rebuilt.distance(h)?);
    }
    out.u = Some(cert.u);
    out.v = Some(cert.v);
    out.tilde = tilde;
    Ok(out)
}

/// Canonical form at a basepoint `f(0)` inside the ball: pull back by the
/// automorphism exchanging `f(0)` and the origin, analyse at zero and check
/// the round trip `f = F_{f(0)} o phi`.
pub fn canonical_form_general(f: &TruncatedSeries, tol: f64) -> Result<BallMapAnalysis> {
    let c0 = f.constant_term();
    let norm = linalg::op_norm(&c0);
    if norm >= 1.0 {
        return Err(Error::Precondition(format!("basepoint norm {norm} is not below 1")));
    }
    if linalg::max_abs(&c0) <= BASEPOINT_TOL {
        let mut out = canonical_form_zero(f, tol)?;
        out.basepoint_norm = Some(norm);
        return Ok(out);
    }
    let mob = MoebiusParams::new(c0)?;
    let phi = mob.compose_series(f, f.max_degree)?;
    let phi = TruncatedSeries { truncated: f.truncated, ..phi };
    let phi0 = linalg::max_abs(&phi.constant_term());
    let phi = TruncatedSeries { poly: phi.poly.filter(|w| !w.is_empty()), ..phi };
    let back = mob.compose_series(&phi, f.max_degree)?;
    let round_trip = back.distance(f)?.max(phi0);
    let mut out = canonical_form_zero(&phi, tol)?;
    out.basepoint_norm = Some(norm);
    out.round_trip_residual = Some(round_trip);
    if out.rejection.is_none() && round_trip > tol {
        out.rejection = Some(CanonRejection::RoundTrip { residual: round_trip });
    }
    out.phi = Some(phi);
    Ok(out)
}

/// Analyse the pencil ball map `L o f`, dispatching on its basepoint.
pub fn pencil_ball_map_form(l: &LinearPencil, f: &TruncatedSeries, tol: f64) -> Result<BallMapAnalysis> {
    if f.shape() != (l.gprime, l.g) {
        return Err(Error::Shape(format!("series shape {:?} does not match pencil grid {:?}", f.shape(), (l.gprime, l.g))));
    }
    let outer = TruncatedSeries::exact(l.to_poly());
    let outer = TruncatedSeries { max_degree: f.max_degree, ..outer };
    let h = compose_series(&outer, f)?;
    let norm = linalg::op_norm(&h.constant_term());
    if norm >= 1.0 - 1e-12 {
        return Err(Error::Precondition(format!("||L o f(0)|| = {norm} is not below 1")));
    }
    canonical_form_general(&h, tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct BidiskDecomposition {
    pub gprime: usize,
    pub dprime: usize,
    pub d: usize,
    /// `[M_1 ... M_g']`, `dprime x d g'`.
    #[serde(skip)]
    pub m: CMat,
    /// Orthonormal basis of `S = ker(I - M* M)`.
    #[serde(skip)]
    pub s_basis: CMat,
    pub s_dim: usize,
    /// `P_alpha` for `alpha = 2..=D`, each `dprime x d g'`.
    #[serde(skip)]
    pub parts: Vec<(usize, NcPoly)>,
    pub factor_residuals: Vec<(usize, f64)>,
    pub isometry_residual: f64,
    /// `||M Pi_{S perp}||`.
    pub complement_norm: f64,
    pub orthogonality_residual: f64,
    pub max_complement_value: f64,
    pub tail: f64,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Decompose `h = M x + sum_alpha P_alpha Pi_{S perp} x` for a map on the
/// column ball with a contractive linear part, and sample the orthogonality
/// relations at levels `1..=3`.
pub fn bidisk_decompose(h: &TruncatedSeries, tol: f64, samples: usize, seed: u64) -> Result<BidiskDecomposition> {
    let (gp, g) = h.grid();
    if g != 1 {
        return Err(Error::Shape(format!("expected a column grid, got {gp}x{g}")));
    }
    let psi = linear_part(h)?;
    let (dp, d) = h.shape();
    let mut m = linalg::zeros(dp, d * gp);
    for j in 0..gp {
        linalg::set_block(&mut m, 0, j * d, psi.coeff(j, 0));
    }
    let mnorm = linalg::op_norm(&m);
    if mnorm > 1.0 + 1e-9 {
        return Err(Error::Precondition(format!("linear part has norm {mnorm} > 1")));
    }
    let gram = linalg::eye(d * gp) - m.adjoint() * &m;
    let (vals, vecs) = linalg::herm_eig(&gram)?;
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= 1e-9).collect();
    if keep.is_empty() {
        return Err(Error::Precondition("I - M* M is invertible: the isometric subspace is trivial".into()));
    }
    let mut s_basis = linalg::zeros(d * gp, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        s_basis.set_column(k, &vecs.column(i));
    }
    let proj_perp = linalg::eye(d * gp) - &s_basis * s_basis.adjoint();
    let mut parts = Vec::new();
    let mut factor_residuals = Vec::new();
    let mut notes = Vec::new();
    for alpha in 2..=h.max_degree {
        let part = h.poly.homogeneous_part(alpha);
        let mut c = NcPoly::zero(gp, 1, dp, d * gp);
        for (w, a) in part.terms() {
            let (prefix, last) = (Word(w.0[..w.len() - 1].to_vec()), w.0[w.len() - 1]);
            let mut blk = linalg::zeros(dp, d * gp);
            linalg::set_block(&mut blk, 0, last.row * d, a);
            c.add_term(prefix, blk);
        }
        let p = c.right_mul(&proj_perp);
        let res = c.terms().values().map(|a| linalg::op_norm(&(a - a * &proj_perp))).fold(0.0, f64::max);
        if res > tol {
            notes.push(format!("degree {alpha} does not factor through the complement: residual {res}"));
        }
        factor_residuals.push((alpha, res));
        parts.push((alpha, p));
    }
    let ms = &m * &s_basis;
    let isometry_residual = linalg::op_norm(&(ms.adjoint() * &ms - linalg::eye(keep.len())));
    let complement_norm = linalg::op_norm(&(&m * &proj_perp));
    let base_orth = linalg::op_norm(&(ms.adjoint() * &m * &proj_perp));
    let rho = 0.9;
    let tail = h.tail(rho);
    let sampled = par::map_range(samples, |i| -> Result<(f64, f64)> {
        let mut r = rng::sample_rng(seed, i as u64);
        let n = 1 + i % 3;
        let x = MatrixTuple::random_with_norm(gp, 1, n, r.gen_range(0.1..rho), &mut r);
        let id = linalg::eye(n);
        let perp = linalg::kron(&proj_perp, &id);
        let ms_n = linalg::kron(&ms, &id);
        let mut total = linalg::kron(&m, &id);
        let mut orth: f64 = 0.0;
        for (_, p) in &parts {
            let px = p.eval(&x)?;
            orth = orth.max(linalg::op_norm(&(ms_n.adjoint() * &px * &perp)));
            total += px;
        }
        Ok((orth, linalg::op_norm(&(total * perp))))
    });
    let mut orthogonality_residual = base_orth;
    let mut max_complement_value: f64 = 0.0;
    for s in sampled {
        let (o, v) = s?;
        orthogonality_residual = orthogonality_residual.max(o);
        max_complement_value = max_complement_value.max(v);
    }
    let factor_ok = factor_residuals.iter().all(|&(_, r)| r <= tol);
    let passed =
        factor_ok && isometry_residual <= 1e-9 && orthogonality_residual <= 1e-8 && max_complement_value <= 1.0 + tail + SAMPLE_SLACK;
    if complement_norm >= 1.0 - 1e-12 {
        notes.push(format!("M restricted to the complement has norm {complement_norm}"));
    }
    Ok(BidiskDecomposition {
        gprime: gp,
        dprime: dp,
        d,
        m,
        s_dim: keep.len(),
        s_basis,
        parts,
        factor_residuals,
        isometry_residual,
        complement_norm,
        orthogonality_residual,
        max_complement_value,
        tail,
        passed,
        notes,
    })
}

/// A column-grid map `h = M x + sum_alpha P_alpha Pi_{S perp} x` with a
/// prescribed isometric subspace `S` of dimension `s`: `M` is isometric on
/// `S`, has norm `0.5` on the complement, and every higher coefficient maps
/// into the orthogonal complement of `M S` with total norm at most `0.4`.
pub fn planted_clinging_map(gp: usize, d: usize, dp: usize, s: usize, max_degree: usize, r: &mut rng::Rng) -> Result<TruncatedSeries> {
    let n = d * gp;
    if s == 0 || s >= n || dp <= s {
        return Err(Error::Precondition(format!("need 0 < s < d g' and d' > s, got s = {s}, d g' = {n}, d' = {dp}")));
    }
    let q = linalg::random_unitary(n, r);
    let w = linalg::random_unitary(dp, r);
    let (qs, qp) = (linalg::block(&q, 0, 0, n, s), linalg::block(&q, 0, s, n, n - s));
    let (ws, wp) = (linalg::block(&w, 0, 0, dp, s), linalg::block(&w, 0, s, dp, dp - s));
    let m = &ws * qs.adjoint() + &wp * linalg::random_with_norm(dp - s, n - s, 0.5, r) * qp.adjoint();
    let mut p = NcPoly::zero(gp, 1, dp, d);
    for j in 0..gp {
        p.add_term(Word(vec![crate::ncpoly::Letter::new(j, 0)]), linalg::block(&m, 0, j * d, dp, d));
    }
    let prefixes: Vec<Word> = (1..max_degree).flat_map(|k| Word::all_of_length(gp, 1, k)).collect();
    if !prefixes.is_empty() {
        let picks: Vec<&Word> = prefixes.iter().filter(|_| r.gen_bool(0.5)).collect();
        let picks = if picks.is_empty() { vec![&prefixes[0]] } else { picks };
        let each = 0.4 / picks.len() as f64;
        for w0 in picks {
            let c = &wp * linalg::random_with_norm(dp - s, n - s, each, r) * qp.adjoint();
            for j in 0..gp {
                let mut word = w0.clone();
                word.0.push(crate::ncpoly::Letter::new(j, 0));
                p.add_term(word, linalg::block(&c, 0, j * d, dp, d));
            }
        }
    }
    Ok(TruncatedSeries { poly: p, max_degree: max_degree.max(1), truncated: false })
}

fn column_square(x: &MatrixTuple, d: usize) -> CMat {
    let col = x.flatten();
    linalg::kron(&linalg::eye(d), &(col.adjoint() * col))
}

/// Sampled Schwarz inequality `I_d (x) X* X - f(X)* f(X) >= 0` and
/// `||f(X)|| <= 1` on column contractions of norm in `[0.5, 0.9]`.
pub fn schwarz_suite(f: &TruncatedSeries, levels: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    let (gp, g) = f.grid();
    if g != 1 {
        return Err(Error::Shape(format!("expected a column grid, got {gp}x{g}")));
    }
    let c0 = linalg::max_abs(&f.constant_term());
    if c0 > BASEPOINT_TOL {
        return Err(Error::Precondition(format!("f(0) has size {c0}")));
    }
    let d = f.shape().1;
    let rows = par::map_range(samples, |i| -> Result<(f64, f64, f64)> {
        let mut r = rng::sample_rng(seed, i as u64);
        let n = 1 + i % levels.max(1);
        let rho = r.gen_range(0.5..0.9);
        let x = MatrixTuple::random_with_norm(gp, 1, n, rho, &mut r);
        let fx = f.eval(&x)?;
        let e = linalg::min_eig(&(column_square(&x, d) - fx.adjoint() * &fx))?;
        Ok((e, linalg::op_norm(&fx), f.tail(rho)))
    });
    let mut rep = CheckReport::new("schwarz");
    let mut min_margin = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    let mut max_tail: f64 = 0.0;
    let mut first_failure = None;
    for (i, row) in rows.into_iter().enumerate() {
        let (e, nm, tail) = row?;
        min_margin = min_margin.min(e + tail);
        max_norm = max_norm.max(nm);
        max_tail = max_tail.max(tail);
        if first_failure.is_none() && (e < -(tail + SAMPLE_SLACK) || nm > 1.0 + tail + SAMPLE_SLACK) {
            first_failure = Some(i);
        }
    }
    rep.metric("min_margin", min_margin).metric("max_norm", max_norm).metric("max_tail", max_tail).metric("samples", samples as f64);
    if let Some(i) = first_failure {
        rep.metric("first_failure", i as f64);
        rep.require(false, format!("sample {i} violates the Schwarz inequality"));
    }
    Ok(rep)
}

/// Bound on `sup ||sum_j H_j(X) X_j||` over the column ball: the sum over
/// degrees of the norm of the row of coefficients of that degree.
pub fn scott_bound(h: &[TruncatedSeries]) -> Result<f64> {
    let first = h.first().ok_or_else(|| Error::Shape("empty row".into()))?;
    let gp = h.len();
    let (dp, d) = first.shape();
    let mut by_degree: std::collections::BTreeMap<usize, Vec<CMat>> = Default::default();
    for (j, hj) in h.iter().enumerate() {
        if hj.grid() != (gp, 1) || hj.shape() != (dp, d) {
            return Err(Error::Shape(format!("entry {j} has grid {:?} and shape {:?}", hj.grid(), hj.shape())));
        }
        for (w, a) in hj.poly.terms() {
            by_degree.entry(w.len() + 1).or_default().push(a.clone());
        }
    }
    Ok(by_degree
        .values()
        .map(|cs| {
            let refs: Vec<&CMat> = cs.iter().collect();
            let mut row = linalg::zeros(dp, d * refs.len());
            for (k, c) in refs.iter().enumerate() {
                linalg::set_block(&mut row, 0, k * d, c);
            }
            linalg::op_norm(&row)
        })
        .sum())
}

/// Where `||sum_j H_j(X) (I_d (x) X_j)|| <= 1` holds at a sample, check
/// `||[H_1(X) ... H_g'(X)]|| <= 1`.
pub fn scott_suite(h: &[TruncatedSeries], levels: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    let bound = scott_bound(h)?;
    let gp = h.len();
    let (dp, d) = h[0].shape();
    let rows = par::map_range(samples, |i| -> Result<(bool, f64, f64)> {
        let mut r = rng::sample_rng(seed, i as u64);
        let n = 1 + i % levels.max(1);
        let rho = r.gen_range(0.1..0.95);
        let x = MatrixTuple::random_with_norm(gp, 1, n, rho, &mut r);
        let mut gx = linalg::zeros(dp * n, d * n);
        let mut row = linalg::zeros(dp * n, gp * d * n);
        let mut tail: f64 = 0.0;
        for (j, hj) in h.iter().enumerate() {
            let v = hj.eval(&x)?;
            gx += &v * linalg::kron(&linalg::eye(d), x.get(j, 0));
            linalg::set_block(&mut row, 0, j * d * n, &v);
            tail += hj.tail(rho);
        }
        let hyp = linalg::op_norm(&gx);
        Ok((hyp <= 1.0 + 1e-12, linalg::op_norm(&row), tail))
    });
    let mut rep = CheckReport::new("scott");
    let mut held = 0usize;
    let mut worst: f64 = 0.0;
    let mut violations = 0usize;
    for row in rows {
        let (hyp, nm, tail) = row?;
        if hyp {
            held += 1;
            worst = worst.max(nm);
            if nm > 1.0 + tail + SAMPLE_SLACK {
                violations += 1;
            }
        }
    }
    rep.metric("hypothesis_bound", bound)
        .metric("hypothesis_held", held as f64)
        .metric("max_conclusion_norm", worst)
        .metric("violations", violations as f64);
    if bound > 1.0 + 1e-12 {
        rep.note("the coefficient bound does not certify the hypothesis on the whole ball");
    }
    rep.require(violations == 0, format!("{violations} samples satisfy the hypothesis but not the conclusion"));
    Ok(rep)
}

/// A `gprime n x g n` matrix of norm one that is isometric on a subspace of
/// dimension at least `n k`.
pub fn random_partial_isometry(gprime: usize, g: usize, n: usize, k: usize, r: &mut rng::Rng) -> CMat {
    let (rows, cols) = (gprime * n, g * n);
    let m = rows.min(cols);
    let ones = (n * k).min(m);
    let s: Vec<f64> = (0..m).map(|i| if i < ones { 1.0 } else { r.gen_range(0.0..1.0) }).collect();
    linalg::with_singular_values(rows, cols, &s, r)
}

/// Sampled maximum principle: `||f(X)|| <= max_{|z| = 1} ||f(F_X(z U))||`
/// for interior `X` and random `U` isometric on a subspace of dimension
/// at least `N k`.
pub fn maximum_principle_sample(f: &TruncatedSeries, level: usize, k: usize, samples: usize, seed: u64) -> Result<CheckReport> {
    let (gp, g) = f.grid();
    if k == 0 || k > gp.min(g) {
        return Err(Error::Precondition(format!("k = {k} must lie in 1..={}", gp.min(g))));
    }
    let tail = f.tail(1.0);
    let rows = par::map_range(samples, |i| -> Result<(f64, f64)> {
        let mut r = rng::sample_rng(seed, i as u64);
        let x = MatrixTuple::random_with_norm(gp, g, level, r.gen_range(0.0..0.95), &mut r);
        let inner = linalg::op_norm(&f.eval(&x)?);
        let u = random_partial_isometry(gp, g, level, k, &mut r);
        let mob = MoebiusParams::new(x.flatten())?;
        let mut boundary: f64 = 0.0;
        for t in 0..CIRCLE_POINTS {
            let th = 2.0 * std::f64::consts::PI * t as f64 / CIRCLE_POINTS as f64;
            let z = C64::new(th.cos(), th.sin());
            let y = mob.apply(&(&u * z))?.value;
            let yt = MatrixTuple::from_flat(&y, gp, g)?;
            boundary = boundary.max(linalg::op_norm(&f.eval(&yt)?));
        }
        Ok((inner, boundary))
    });
    let mut rep = CheckReport::new("maximum_principle");
    let mut excess = f64::NEG_INFINITY;
    let mut max_inner: f64 = 0.0;
    let mut max_boundary: f64 = 0.0;
    for row in rows {
        let (a, b) = row?;
        excess = excess.max(a - b);
        max_inner = max_inner.max(a);
        max_boundary = max_boundary.max(b);
    }
    rep.metric("max_excess", excess).metric("max_interior", max_inner).metric("max_boundary", max_boundary).metric("tail", tail);
    rep.require(excess <= tail + SAMPLE_SLACK, format!("interior value exceeds the boundary maximum by {excess}"));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::parse_poly;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn series(text: &str, gp: usize, g: usize, deg: usize) -> TruncatedSeries {
        TruncatedSeries::from_poly(parse_poly(text, gp, g, None).unwrap(), deg).unwrap()
    }

    #[test]
    fn linear_part_read_off() {
        let h = series("2*x11 + x11*x11", 1, 1, 2);
        let l = linear_part(&h).unwrap();
        assert_eq!(l.coeff(0, 0)[(0, 0)], C64::new(2.0, 0.0));
        assert!(linear_part(&series("1 + x11", 1, 1, 1)).is_err());
        let id = TruncatedSeries::exact(LinearPencil::identity(2, 1).to_poly());
        let l = linear_part(&id).unwrap();
        assert!(linalg::max_abs(&(l.coeff(1, 0) - LinearPencil::identity(2, 1).coeff(1, 0))) == 0.0);
    }

    #[test]
    fn schwarz_examples() {
        assert!(schwarz_suite(&series("x1", 1, 1, 1), 3, 30, 1).unwrap().passed);
        let sq = schwarz_suite(&series("x1*x1", 1, 1, 2), 3, 30, 1).unwrap();
        assert!(sq.passed && sq.get("min_margin") >= -1e-12);
        assert!(schwarz_suite(&series("0.5*x1*x2 + 0.5*x2*x1", 2, 1, 2), 3, 60, 2).unwrap().passed);
        let bad = schwarz_suite(&series("1.2*x1", 1, 1, 1), 3, 30, 1).unwrap();
        assert!(!bad.passed && bad.get("first_failure") < 3.0);
    }

    #[test]
    fn scott_examples() {
        let one = vec![series("1", 1, 1, 0)];
        let rep = scott_suite(&one, 3, 40, 3).unwrap();
        assert!(rep.passed && (rep.get("max_conclusion_norm") - 1.0).abs() < 1e-12);
        let avg = vec![series("0.5", 2, 1, 0), series("0.5", 2, 1, 0)];
        let rep = scott_suite(&avg, 3, 40, 3).unwrap();
        assert!(rep.passed && (rep.get("max_conclusion_norm") - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scott_scaled_random_row() {
        let mut r = seeded(5);
        let mut row: Vec<TruncatedSeries> = (0..2)
            .map(|_| {
                let mut p = NcPoly::zero(2, 1, 2, 2);
                for w in Word::all_up_to(2, 1, 2) {
                    if !w.has_star() {
                        p.add_term(w, linalg::ginibre(2, 2, &mut r));
                    }
                }
                TruncatedSeries::exact(p)
            })
            .collect();
        let b = scott_bound(&row).unwrap();
        row = row.iter().map(|s| s.scale(C64::new(1.0 / b, 0.0))).collect();
        let rep = scott_suite(&row, 3, 60, 4).unwrap();
        assert!(rep.passed && rep.get("hypothesis_held") == 60.0);
    }

    #[test]
    fn canonical_round_trip_small() {
        let mut r = seeded(21);
        let u0 = linalg::random_unitary(2, &mut r);
        let v0 = linalg::random_unitary(2, &mut r);
        let tilde = series("0.5*x11*x11", 1, 1, 2);
        let h = assemble_canonical(&u0, &v0, 1, 1, Some(&tilde), 2).unwrap();
        let a = canonical_form_zero(&h, 1e-9).unwrap();
        assert!(a.passed(), "{:?}", a.rejection);
        assert!(a.reconstruction_residual.unwrap() <= 1e-9);
        let t = a.tilde.unwrap();
        let w = Word(vec![crate::ncpoly::Letter::new(0, 0); 2]);
        assert!((t.poly.coeff(&w).unwrap()[(0, 0)].norm() - 0.5).abs() < 1e-9);
        assert!(a.fock.iter().all(|f| f.witness_level.is_none()));
    }

    #[test]
    fn linear_isometry_has_empty_tilde() {
        let mut r = seeded(3);
        let q = linalg::random_unitary(3, &mut r);
        let m = linalg::block(&q, 0, 0, 3, 1);
        let h = TruncatedSeries::exact(LinearPencil::new(1, 1, vec![m]).unwrap().to_poly());
        let a = canonical_form_zero(&h, 1e-9).unwrap();
        assert!(a.passed() && a.tilde.is_none());
    }

    #[test]
    fn planted_off_diagonal_block_is_named() {
        let mut r = seeded(8);
        let u0 = linalg::random_unitary(2, &mut r);
        let v0 = linalg::random_unitary(2, &mut r);
        let base = assemble_canonical(&u0, &v0, 1, 1, None, 2).unwrap();
        let w = Word(vec![crate::ncpoly::Letter::new(0, 0); 2]);
        let mut planted = linalg::zeros(2, 2);
        planted[(0, 1)] = C64::new(0.1, 0.0);
        let extra = NcPoly::monomial(1, 1, w, &v0 * planted * u0.adjoint());
        let h = TruncatedSeries { poly: base.poly.checked_add(&extra).unwrap(), ..base };
        let a = canonical_form_zero(&h, 1e-9).unwrap();
        match a.rejection {
            Some(CanonRejection::OffDiagonal { degree, block, norm }) => {
                assert_eq!((degree, block), (2, OffBlock::B2));
                assert!((norm - 0.1).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        let b2 = a.fock.iter().find(|f| f.block == OffBlock::B2).unwrap();
        assert!(b2.witness_level.is_some());
    }

    #[test]
    fn general_basepoint_examples() {
        let mut r = seeded(12);
        let v = linalg::random_with_norm(2, 2, 0.4, &mut r);
        let constant = TruncatedSeries::from_poly(NcPoly::constant(1, 1, v.clone()), 3).unwrap();
        let a = canonical_form_general(&constant, 1e-8).unwrap();
        assert!(a.phi.as_ref().unwrap().poly.is_zero());
        assert!(a.round_trip_residual.unwrap() < 1e-12);
        let u0 = linalg::random_unitary(2, &mut r);
        let v0 = linalg::random_unitary(2, &mut r);
        let phi = assemble_canonical(&u0, &v0, 1, 1, None, 5).unwrap();
        let f = MoebiusParams::new(v).unwrap().compose_series(&phi, 5).unwrap();
        let a = canonical_form_general(&f, 1e-8).unwrap();
        assert!(a.passed(), "{:?}", a.rejection);
        assert!(a.round_trip_residual.unwrap() <= 1e-8);
        assert!(canonical_form_general(&TruncatedSeries::exact(NcPoly::constant(1, 1, linalg::eye(2))), 1e-8).is_err());
    }

    #[test]
    fn pencil_identity_reduces_to_plain_path() {
        let mut r = seeded(13);
        let u0 = linalg::random_unitary(3, &mut r);
        let v0 = linalg::random_unitary(3, &mut r);
        let tilde = series("0.3*x1*x2", 2, 1, 2).poly.map_coeffs(1, 2, |a| linalg::from_real(1, 2, &[a[(0, 0)].re, 0.0]));
        let tilde = TruncatedSeries { poly: tilde, max_degree: 2, truncated: false };
        let f = assemble_canonical(&u0, &v0, 2, 1, Some(&tilde), 2).unwrap();
        let plain = canonical_form_zero(&f, 1e-9).unwrap();
        let dp = 3;
        let d = 3;
        let coeffs = (0..dp).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| {
            let mut e = linalg::zeros(dp, d);
            e[(i, j)] = C64::new(1.0, 0.0);
            e
        });
        let l = LinearPencil::new(dp, d, coeffs.collect()).unwrap();
        let via = pencil_ball_map_form(&l, &f, 1e-9).unwrap();
        assert!(plain.passed() && via.passed());
        assert!(via.reconstruction_residual.unwrap() <= 1e-9);
        let l1 = LinearPencil::new(1, 1, vec![linalg::eye(1)]).unwrap();
        let boundary = TruncatedSeries::exact(NcPoly::constant(1, 1, linalg::eye(1)));
        assert!(matches!(pencil_ball_map_form(&l1, &boundary, 1e-9), Err(Error::Precondition(_))));
    }

    #[test]
    fn bidisk_examples() {
        let h = TruncatedSeries::exact(
            LinearPencil::new(2, 1, vec![linalg::from_real(2, 1, &[1.0, 0.0]), linalg::from_real(2, 1, &[0.0, 1.0])]).unwrap().to_poly(),
        );
        let b = bidisk_decompose(&h, 1e-10, 20, 1).unwrap();
        assert!(b.passed && b.s_dim == 2 && b.parts.is_empty());
        let mut p = parse_poly("x1", 2, 1, None).unwrap().map_coeffs(2, 1, |a| linalg::from_real(2, 1, &[a[(0, 0)].re, 0.0]));
        let q = parse_poly("0.5*x2*x2", 2, 1, None).unwrap().map_coeffs(2, 1, |a| linalg::from_real(2, 1, &[0.0, a[(0, 0)].re]));
        p = p.checked_add(&q).unwrap();
        let h = TruncatedSeries::exact(p);
        let b = bidisk_decompose(&h, 1e-10, 30, 2).unwrap();
        assert!(b.passed, "{:?}", b.notes);
        assert_eq!(b.s_dim, 1);
        assert!(b.factor_residuals.iter().all(|r| r.1 <= 1e-10));
        let x2 = crate::ncpoly::Letter::new(1, 0);
        let p2 = &b.parts[0].1;
        assert!((p2.coeff(&Word(vec![x2])).unwrap()[(1, 1)] - C64::new(0.5, 0.0)).norm() < 1e-12);
        let strict = TruncatedSeries::exact(LinearPencil::new(1, 1, vec![linalg::from_real(1, 1, &[0.5])]).unwrap().to_poly());
        assert!(bidisk_decompose(&strict, 1e-10, 5, 1).is_err());
    }

    #[test]
    fn bidisk_factor_failure_names_degree() {
        let p = parse_poly("x1 + 0.5*x1*x1", 1, 1, None).unwrap();
        let b = bidisk_decompose(&TruncatedSeries::exact(p), 1e-10, 5, 1).unwrap();
        assert!(!b.passed);
        assert_eq!(b.factor_residuals[0].0, 2);
        assert!((b.factor_residuals[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn planted_clinging_maps_decompose() {
        let mut r = seeded(31);
        for (gp, d, dp, s) in [(2, 1, 2, 1), (3, 1, 3, 2), (2, 2, 3, 2)] {
            let h = planted_clinging_map(gp, d, dp, s, 3, &mut r).unwrap();
            let b = bidisk_decompose(&h, 1e-10, 12, 4).unwrap();
            assert!(b.passed, "{:?}", b.notes);
            assert_eq!(b.s_dim, s);
            assert!(b.complement_norm <= 0.5 + 1e-12);
        }
        assert!(planted_clinging_map(2, 1, 1, 1, 3, &mut r).is_err());
    }

    #[test]
    fn maximum_principle_examples() {
        let c = TruncatedSeries::exact(NcPoly::constant(1, 1, linalg::from_real(1, 1, &[0.7])));
        let rep = maximum_principle_sample(&c, 2, 1, 10, 1).unwrap();
        assert!(rep.passed && rep.get("max_excess").abs() < 1e-12);
        let x = series("x11", 1, 1, 1);
        let rep = maximum_principle_sample(&x, 1, 1, 20, 2).unwrap();
        assert!(rep.passed && (rep.get("max_boundary") - 1.0).abs() < 1e-9 && rep.get("max_interior") < 1.0);
        let xy = series("x11*x22", 2, 2, 2);
        assert!(maximum_principle_sample(&xy, 2, 2, 20, 3).unwrap().passed);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prop_canonical_round_trip(seed in 0u64..1000) {
            let mut r = seeded(seed);
            let u0 = linalg::random_unitary(3, &mut r);
            let v0 = linalg::random_unitary(3, &mut r);
            let mut t = NcPoly::zero(1, 1, 2, 2);
            t.add_term(Word(vec![crate::ncpoly::Letter::new(0, 0); 2]), linalg::random_with_norm(2, 2, 0.4, &mut r));
            let tilde = TruncatedSeries::exact(t);
            let h = assemble_canonical(&u0, &v0, 1, 1, Some(&tilde), 2).unwrap();
            let a = canonical_form_zero(&h, 1e-9).unwrap();
            prop_assert!(a.passed());
            prop_assert!(a.reconstruction_residual.unwrap() <= 1e-8);
        }
    }
}
