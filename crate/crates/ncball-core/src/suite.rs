//! The aggregated verification suite: one named check per area, each with a
//! seed derived from the run seed and the check name, and an optional fault
//! that corrupts the check's input so that it must fail.

use crate::ballmap::{self, CanonRejection, OffBlock};
use crate::balls::{self, LinearPencil};
use crate::clinging;
use crate::error::Result;
use crate::fock;
use crate::isometry::{self, RejectStage};
use crate::linalg::{self, CMat, C64};
use crate::moebius::{self, MoebiusParams};
use crate::ncpoly::{Letter, MatrixTuple, NcPoly, TruncatedSeries, Word};
use crate::nullss::{self, KernelVerdict, Mode};
use crate::par;
use crate::report::CheckReport;
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng as _;
use std::time::{Duration, Instant};

/// Check names in report order.
pub const CHECKS: &[&str] = &[
    "bidisk",
    "canonical",
    "clinging",
    "eval_fixture",
    "fock_identities",
    "fock_uniqueness",
    "isometry",
    "lmi_embed",
    "maximum_principle",
    "moebius",
    "nullss",
    "schwarz",
    "scott",
];

pub fn check_seed(seed: u64, name: &str) -> u64 {
    seed ^ rng::stable_hash(name)
}

#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub report: CheckReport,
    pub runtime: Duration,
}

/// Run one check by name; `None` for an unknown name. Errors raised inside
/// a check become a failed report.
pub fn run_check(name: &str, seed: u64, fault: bool) -> Option<CheckReport> {
    let f: fn(u64, bool) -> Result<CheckReport> = match name {
        "bidisk" => bidisk,
        "canonical" => canonical,
        "clinging" => clinging_fixture,
        "eval_fixture" => eval_fixture,
        "fock_identities" => fock_identities,
        "fock_uniqueness" => fock_uniqueness,
        "isometry" => isometry_round_trip,
        "lmi_embed" => lmi_embed,
        "maximum_principle" => maximum_principle,
        "moebius" => |s, f| Ok(moebius::verify_suite(300, s, f)),
        "nullss" => nullstellensatz,
        "schwarz" => schwarz,
        "scott" => scott,
        _ => return None,
    };
    let mut rep = f(check_seed(seed, name), fault).unwrap_or_else(|e| {
        let mut r = CheckReport::new(name);
        r.require(false, format!("error: {e}"));
        r
    });
    rep.name = name.to_string();
    if fault {
        rep.note("fault injected");
    }
    Some(rep)
}

/// Run every check whose name contains `filter`, in name order. `fault`
/// names the check whose input is corrupted.
pub fn run_suite(seed: u64, filter: Option<&str>, fault: Option<&str>) -> Vec<SuiteEntry> {
    CHECKS
        .iter()
        .filter(|n| filter.is_none_or(|f| n.contains(f)))
        .map(|&n| {
            let start = Instant::now();
            let report = run_check(n, seed, fault == Some(n)).expect("listed check");
            SuiteEntry { report, runtime: start.elapsed() }
        })
        .collect()
}

fn eval_fixture(_seed: u64, fault: bool) -> Result<CheckReport> {
    let a = linalg::from_real(2, 3, &[-4.0, 3.0, 2.0, 2.0, -1.0, 0.0]);
    let p = NcPoly::monomial(2, 1, Word(vec![Letter::new(0, 0), Letter::new(1, 0)]), a);
    let mut x =
        MatrixTuple::new(2, 1, vec![linalg::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]), linalg::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])])?;
    if fault {
        x.get_mut(0, 0)[(0, 0)] = C64::new(1.0, 0.0);
    }
    #[rustfmt::skip]
    let expected = linalg::from_real(4, 6, &[
        0.0, 4.0, 0.0, -3.0, 0.0, -2.0,
        -4.0, 0.0, 3.0, 0.0, 2.0, 0.0,
        0.0, -2.0, 0.0, 1.0, 0.0, 0.0,
        2.0, 0.0, -1.0, 0.0, 0.0, 0.0,
    ]);
    let v = p.eval(&x)?;
    let mut rep = CheckReport::new("eval_fixture");
    rep.metric("max_abs_difference", linalg::max_abs(&(&v - &expected)));
    rep.require(v == expected, "evaluation differs from the fixture");
    Ok(rep)
}

fn clinging_fixture(seed: u64, fault: bool) -> Result<CheckReport> {
    let mut l = clinging::two_variable_example();
    if fault {
        l.coeffs[0] *= C64::new(1.01, 0.0);
    }
    let mut x = linalg::zeros(2, 2);
    x[(0, 0)] = C64::new(1.0, 0.0);
    let mut y = linalg::zeros(2, 2);
    y[(1, 0)] = C64::new(1.0, 0.0);
    let t = MatrixTuple::new(2, 1, vec![x, y])?;
    let col_norm = t.norm();
    let l_norm = linalg::op_norm(&l.eval(&t)?);
    let gram = clinging::gram_of_delta(&l)?;
    let psd = clinging::delta_psd(&gram, 2, l.d)?;
    let mut rep = CheckReport::new("clinging");
    rep.metric("column_norm", col_norm).metric("pencil_norm", l_norm).metric("gram_min_eig", psd.min_eig);
    rep.require((col_norm - 2f64.sqrt()).abs() <= 1e-12, format!("||[X;Y]|| = {col_norm}"))
        .require((l_norm - 1.5f64.sqrt()).abs() <= 1e-12, format!("||L(X,Y)|| = {l_norm}"))
        .require(psd.psd, format!("Gram matrix has eigenvalue {}", psd.min_eig));
    if !psd.psd {
        return Ok(rep);
    }
    let scalar = clinging::clinging_scalar(&gram, 2, l.d)?;
    rep.require(scalar.clings, "scalar clinging fails");
    if !scalar.clings {
        return Ok(rep);
    }
    let m = clinging::matrix_clinging_sample(&l, 4, 200, seed)?;
    rep.metric("max_relative_min_eig", m.max_relative_min_eig).metric("samples", m.samples as f64);
    rep.require(
        m.max_relative_min_eig <= clinging::CLING_TOL,
        format!("sampled minimum {} exceeds the clinging tolerance", m.max_relative_min_eig),
    );
    Ok(rep)
}

fn fock_identities(_seed: u64, fault: bool) -> Result<CheckReport> {
    let mut rep = CheckReport::new("fock_identities");
    let cases: Vec<(usize, usize, usize)> = (1..=3).flat_map(|gp| (1..=3).flat_map(move |g| (1..=3).map(move |n| (gp, g, n)))).collect();
    let results = par::map_range(cases.len(), |i| {
        let (gp, g, n) = cases[i];
        fock::fock_identities(gp, g, n)
    });
    let mut max_level = 0;
    for r in &results {
        max_level = max_level.max(r.level);
        let order = if fault { r.n + 2 } else { r.n + 1 };
        rep.require(r.passed(), format!("identities fail at g' = {}, g = {}, n = {}", r.gprime, r.g, r.n));
        rep.require(
            r.nilpotency_order == Some(order),
            format!("nilpotency order {:?} at g' = {}, g = {}, n = {}", r.nilpotency_order, r.gprime, r.g, r.n),
        );
    }
    rep.metric("cases", results.len() as f64).metric("max_level", max_level as f64);
    Ok(rep)
}

/// A nonzero analytic polynomial with `p(0) = 0`, degree at most 3, whose
/// coefficient shape fits the grid's rows or columns.
pub fn random_unique_candidate(r: &mut rng::Rng) -> NcPoly {
    let gp = r.gen_range(1..=2);
    let g = r.gen_range(1..=2);
    let (dp, d) = if r.gen_bool(0.5) { (r.gen_range(1..=2), g) } else { (gp, r.gen_range(1..=2)) };
    let words: Vec<Word> = (1..=3).flat_map(|k| Word::all_of_length(gp, g, k)).collect();
    let mut p = NcPoly::zero(gp, g, dp, d);
    let count = r.gen_range(1..=4);
    for w in words.choose_multiple(r, count) {
        let norm = r.gen_range(0.2..1.0);
        p.add_term(w.clone(), linalg::random_with_norm(dp, d, norm, r));
    }
    p
}

fn fock_uniqueness(seed: u64, fault: bool) -> Result<CheckReport> {
    let results = par::map_range(50, |i| -> Result<Option<f64>> {
        let mut r = rng::sample_rng(seed, i as u64);
        let mut p = random_unique_candidate(&mut r);
        if fault && i == 0 {
            p = NcPoly::zero(p.gprime, p.g, p.dprime, p.d);
        }
        let rep = fock::unique_s_polynomial_test(&p, 3, 1e-6)?;
        Ok(rep.witness.map(|w| w.min_eig))
    });
    let mut rep = CheckReport::new("fock_uniqueness");
    let mut weakest = f64::NEG_INFINITY;
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Some(e) => weakest = weakest.max(e),
            None => {
                rep.require(false, format!("polynomial {i} has no witness at levels <= 3"));
            }
        }
    }
    rep.metric("polynomials", 50.0).metric("weakest_witness", weakest);
    Ok(rep)
}

fn isometry_round_trip(seed: u64, fault: bool) -> Result<CheckReport> {
    let results = par::map_range(100, |i| -> std::result::Result<f64, String> {
        let mut r = rng::sample_rng(seed, i as u64);
        let gp = r.gen_range(1..=2);
        let g = r.gen_range(1..=2);
        let dp = gp + r.gen_range(0..=2);
        let d = g + r.gen_range(0..=2);
        let (mut psi, ..) = isometry::planted_isometry(gp, g, dp, d, 0.5, &mut r);
        if fault {
            psi.coeffs[0][(0, 0)] += C64::new(1e-3, 0.0);
        }
        match isometry::certify_complete_isometry(&psi, 1e-9) {
            Ok(cert) => Ok(isometry::reconstruction_residual(&psi, &cert)),
            Err(rej) => Err(format!("instance {i} rejected at {:?}: {}", rej.stage, rej.detail)),
        }
    });
    let mut rep = CheckReport::new("isometry");
    let mut worst: f64 = 0.0;
    let mut rejected = 0usize;
    for r in results {
        match r {
            Ok(res) => worst = worst.max(res),
            Err(msg) => {
                rejected += 1;
                if rejected <= 3 {
                    rep.note(msg);
                }
            }
        }
    }
    rep.metric("max_reconstruction_residual", worst).metric("rejected", rejected as f64);
    rep.require(rejected == 0, format!("{rejected} planted isometries rejected"));
    rep.require(worst <= 1e-8, format!("reconstruction residual {worst:e}"));

    let delta = isometry::trace_map(2);
    let stage = isometry::certify_complete_isometry(&delta, 1e-9).err().map(|r| r.stage);
    rep.require(stage == Some(RejectStage::NormTest), format!("trace map not rejected at the norm test: {stage:?}"));
    let cc = isometry::sample_complete_contractivity(&delta, 4, seed, 1e-9);
    rep.metric("trace_map_ratio", cc.max_ratio);
    rep.require((cc.max_ratio - 2.0).abs() <= 1e-9, format!("ascent reached {}", cc.max_ratio));
    let x = &cc.argmax;
    let diag = x.get(0, 0)[(0, 0)];
    let phase = diag / diag.norm();
    let mut dist: f64 = if x.level == 1 { 0.0 } else { f64::INFINITY };
    for j in 0..2 {
        for l in 0..2 {
            let want = if j == l { phase } else { C64::new(0.0, 0.0) };
            dist = dist.max((x.get(j, l)[(0, 0)] - want).norm());
        }
    }
    rep.metric("argmax_distance", dist);
    rep.require(dist <= 1e-9, format!("maximiser is {dist} away from a multiple of E11 + E22"));
    Ok(rep)
}

/// `V diag(x, tilde(x)) U*` with a random column-grid `tilde`.
fn schwarz_instance(r: &mut rng::Rng) -> Result<TruncatedSeries> {
    let gp = r.gen_range(1..=3);
    let (dp, d) = (gp + 1, 2);
    let u = linalg::random_unitary(d, r);
    let v = linalg::random_unitary(dp, r);
    let mut t = NcPoly::zero(gp, 1, 1, 1);
    let deg = r.gen_range(1..=3);
    let words = Word::all_of_length(gp, 1, deg);
    let w = words.choose(r).expect("nonempty").clone();
    t.add_term(w, CMat::from_element(1, 1, C64::from_polar(r.gen_range(0.3..1.0), r.gen_range(0.0..std::f64::consts::TAU))));
    let tilde = TruncatedSeries::exact(t);
    ballmap::assemble_canonical(&u, &v, gp, 1, Some(&tilde), deg.max(1))
}

fn schwarz(seed: u64, fault: bool) -> Result<CheckReport> {
    let mut rep = CheckReport::new("schwarz");
    let mut r = rng::seeded(seed);
    let mut min_margin = f64::INFINITY;
    for k in 0..5 {
        let f = schwarz_instance(&mut r)?;
        let sub = ballmap::schwarz_suite(&f, 3, 200, rng::mix(seed.wrapping_add(k)))?;
        min_margin = min_margin.min(sub.get("min_margin"));
        rep.require(sub.passed, format!("instance {k}: {}", sub.notes.join("; ")));
    }
    rep.metric("instances", 5.0).metric("samples_per_instance", 200.0).metric("min_margin", min_margin);
    let scale = if fault { 1.0 } else { 1.2 };
    let x = LinearPencil::identity(1, 1).to_poly().scale(C64::new(scale, 0.0));
    let bad = ballmap::schwarz_suite(&TruncatedSeries::exact(x), 3, 3, seed)?;
    rep.require(!bad.passed, format!("{scale} x passes the first 3 samples"));
    if !bad.passed {
        rep.metric("scaled_first_failure", bad.get("first_failure"));
    }
    Ok(rep)
}

fn random_tilde(gp: usize, g: usize, rows: usize, cols: usize, max_degree: usize, r: &mut rng::Rng) -> TruncatedSeries {
    let mut t = NcPoly::zero(gp, g, rows, cols);
    for k in 1..=max_degree {
        let words = Word::all_of_length(gp, g, k);
        let count = r.gen_range(0..=2);
        for w in words.choose_multiple(r, count) {
            t.add_term(w.clone(), linalg::random_with_norm(rows, cols, 0.3 / (gp * g) as f64, r));
        }
    }
    TruncatedSeries { poly: t, max_degree, truncated: false }
}

struct CanonInstance {
    gp: usize,
    g: usize,
    u: CMat,
    v: CMat,
    h: TruncatedSeries,
}

fn canon_instance(r: &mut rng::Rng) -> Result<CanonInstance> {
    let gp = r.gen_range(1..=2);
    let g = r.gen_range(1..=2);
    let dp = gp + r.gen_range(1..=2);
    let d = g + r.gen_range(1..=2);
    let u = linalg::random_unitary(d, r);
    let v = linalg::random_unitary(dp, r);
    let tilde = random_tilde(gp, g, dp - gp, d - g, 3, r);
    let h = ballmap::assemble_canonical(&u, &v, gp, g, Some(&tilde), 3)?;
    Ok(CanonInstance { gp, g, u, v, h })
}

/// Add a degree-2 term of norm `0.1` in the chosen off-corner block.
fn plant(inst: &CanonInstance, block: OffBlock) -> Result<TruncatedSeries> {
    let (dp, d) = (inst.v.nrows(), inst.u.nrows());
    let mut e = linalg::zeros(dp, d);
    let (i, j) = match block {
        OffBlock::B1 => (0, 0),
        OffBlock::B2 => (0, inst.g),
        OffBlock::B3 => (inst.gp, 0),
    };
    e[(i, j)] = C64::new(0.1, 0.0);
    let w = Word(vec![Letter::new(0, 0); 2]);
    let extra = NcPoly::monomial(inst.gp, inst.g, w, &inst.v * e * inst.u.adjoint());
    Ok(TruncatedSeries { poly: inst.h.poly.checked_add(&extra)?, ..inst.h.clone() })
}

fn unit_pencil(w1: &CMat, w2: &CMat, p: usize, q: usize) -> Result<LinearPencil> {
    let coeffs = (0..p)
        .flat_map(|i| (0..q).map(move |j| (i, j)))
        .map(|(i, j)| {
            let mut e = linalg::zeros(w1.ncols(), q);
            e[(i, j)] = C64::new(1.0, 0.0);
            w1 * e * w2
        })
        .collect();
    LinearPencil::new(p, q, coeffs)
}

fn canonical(seed: u64, fault: bool) -> Result<CheckReport> {
    const PER_CASE: usize = 50;
    let tol = 1e-8;
    let results = par::map_range(3 * PER_CASE, |i| -> Result<(usize, f64, Option<String>)> {
        let case = i / PER_CASE;
        let mut r = rng::sample_rng(seed, i as u64);
        let inst = canon_instance(&mut r)?;
        let h = if fault && case == 0 { plant(&inst, OffBlock::B1)? } else { inst.h.clone() };
        let a = match case {
            0 => ballmap::canonical_form_zero(&h, tol)?,
            1 => {
                let (dp, d) = h.shape();
                let b = linalg::random_with_norm(dp, d, r.gen_range(0.1..0.6), &mut r);
                let f = MoebiusParams::new(b)?.compose_series(&h, h.max_degree)?;
                ballmap::canonical_form_general(&f, tol)?
            }
            _ => {
                let (p, q) = h.shape();
                let w1 = linalg::random_unitary(p + i % 2, &mut r);
                let w2 = linalg::random_unitary(q, &mut r);
                let l = unit_pencil(&w1, &w2, p, q)?;
                let f = if i % 3 == 0 {
                    let b = linalg::random_with_norm(p, q, 0.3, &mut r);
                    MoebiusParams::new(b)?.compose_series(&h, h.max_degree)?
                } else {
                    h.clone()
                };
                ballmap::pencil_ball_map_form(&l, &f, tol)?
            }
        };
        let residual = a.reconstruction_residual.unwrap_or(f64::INFINITY).max(a.round_trip_residual.unwrap_or(0.0));
        Ok((case, residual, a.rejection.map(|x| x.to_string())))
    });
    let mut rep = CheckReport::new("canonical");
    let names = ["zero", "general", "pencil"];
    let mut worst = [0f64; 3];
    for row in results {
        let (case, res, rej) = row?;
        worst[case] = worst[case].max(res);
        if let Some(msg) = rej {
            rep.require(false, format!("{} case rejected: {msg}", names[case]));
        }
    }
    for (k, n) in names.iter().enumerate() {
        rep.metric(&format!("max_residual_{n}"), worst[k]);
        rep.require(worst[k] <= tol, format!("{n} case residual {:e}", worst[k]));
    }
    let mut r = rng::seeded(rng::mix(seed));
    let mut detected = 0usize;
    for k in 0..30 {
        let block = [OffBlock::B1, OffBlock::B2, OffBlock::B3][k % 3];
        let inst = canon_instance(&mut r)?;
        let a = ballmap::canonical_form_zero(&plant(&inst, block)?, tol)?;
        match a.rejection {
            Some(CanonRejection::OffDiagonal { degree: 2, block: b, norm }) if b == block && (norm - 0.1).abs() <= 1e-9 => detected += 1,
            other => {
                rep.require(false, format!("planted {block} block reported as {other:?}"));
            }
        }
    }
    rep.metric("planted_detected", detected as f64);
    Ok(rep)
}

fn bidisk(seed: u64, fault: bool) -> Result<CheckReport> {
    let results = par::map_range(20, |i| -> Result<(f64, f64, bool, Vec<String>)> {
        let mut r = rng::sample_rng(seed, i as u64);
        let gp = r.gen_range(2..=3);
        let d = r.gen_range(1..=2);
        let s = r.gen_range(1..d * gp);
        let dp = s + r.gen_range(1..=2);
        let mut h = ballmap::planted_clinging_map(gp, d, dp, s, 3, &mut r)?;
        if fault && i == 0 {
            let w = Word(vec![Letter::new(0, 0); 2]);
            h.poly.add_term(w, linalg::random_with_norm(dp, d, 0.1, &mut r));
        }
        let b = ballmap::bidisk_decompose(&h, 1e-10, 24, rng::mix(seed ^ i as u64))?;
        let factor = b.factor_residuals.iter().map(|x| x.1).fold(0.0, f64::max);
        Ok((factor, b.orthogonality_residual, b.passed, b.notes))
    });
    let mut rep = CheckReport::new("bidisk");
    let mut factor: f64 = 0.0;
    let mut orth: f64 = 0.0;
    for (i, row) in results.into_iter().enumerate() {
        let (f, o, passed, notes) = row?;
        factor = factor.max(f);
        orth = orth.max(o);
        rep.require(passed, format!("map {i}: {}", notes.join("; ")));
    }
    rep.metric("maps", 20.0).metric("max_factor_residual", factor).metric("max_orthogonality_residual", orth);
    rep.require(factor <= 1e-10, format!("factorization residual {factor:e}"));
    rep.require(orth <= 1e-8, format!("orthogonality residual {orth:e}"));
    Ok(rep)
}

fn nullstellensatz(seed: u64, fault: bool) -> Result<CheckReport> {
    let results = par::map_range(20, |i| -> Result<std::result::Result<usize, String>> {
        let (p, q, _) = nullss::random_product_pair(rng::mix(seed.wrapping_add(i as u64)));
        let (p, q) = if fault && i == 0 { (NcPoly::var(2, 1, 0, 0), NcPoly::var(2, 1, 1, 0)) } else { (p, q) };
        let max = nullss::default_degree(&p, &q);
        Ok(match nullss::cofactor_solve(&p, &q, max, Mode::Exact)? {
            Ok(sol) if sol.residual == 0.0 => Ok(sol.degree_used),
            Ok(sol) => Err(format!("pair {i}: exact residual {}", sol.residual)),
            Err(fail) => Err(format!("pair {i}: no cofactor up to degree {}", fail.max_degree)),
        })
    });
    let mut rep = CheckReport::new("nullss");
    let mut recovered = 0usize;
    let mut max_deg = 0usize;
    for row in results {
        match row? {
            Ok(deg) => {
                recovered += 1;
                max_deg = max_deg.max(deg);
            }
            Err(msg) => {
                rep.require(false, msg);
            }
        }
    }
    rep.metric("recovered", recovered as f64).metric("max_cofactor_degree", max_deg as f64);
    let p = NcPoly::var(2, 1, 0, 0);
    let q = NcPoly::var(2, 1, 1, 0);
    let solve = nullss::cofactor_solve(&p, &q, 3, Mode::Exact)?;
    rep.require(solve.is_err(), "x2 reported as a left multiple of x1");
    let k = nullss::kernel_hypothesis_check(&p, &q, 3, 64, seed)?;
    rep.metric("counterexample_residual", k.sampled_max_residual);
    rep.require(k.verdict == KernelVerdict::Fails && k.counterexample.is_some(), format!("kernel check verdict {:?}", k.verdict));
    if let Some((x, v)) = &k.counterexample {
        let pv = (p.eval(x)? * v).norm();
        let qv = (q.eval(x)? * v).norm();
        rep.metric("counterexample_p", pv).metric("counterexample_q", qv);
        rep.require(pv <= 1e-9 && qv > 1e-6, format!("counterexample has |P v| = {pv}, |Q v| = {qv}"));
    }
    Ok(rep)
}

fn lmi_embed(seed: u64, fault: bool) -> Result<CheckReport> {
    let results = par::map_range(200, |i| -> Result<(f64, bool)> {
        let mut r = rng::sample_rng(seed, i as u64);
        let gp = r.gen_range(1..=2);
        let g = r.gen_range(1..=2);
        let d = r.gen_range(1..=3);
        let coeffs = (0..gp * g).map(|_| linalg::ginibre(d, d, &mut r)).collect();
        let l = LinearPencil::new(gp, g, coeffs)?;
        let n = r.gen_range(1..=3);
        let x = MatrixTuple::random_with_norm(gp, g, n, r.gen_range(0.1..2.0), &mut r);
        let rep = balls::lmi_embed_check(&l, &x, 1e-9)?;
        let agree = rep.lmi_member == (rep.ball.status != balls::BallStatus::Exterior);
        let residual = if fault { rep.residual + rep.norm } else { rep.residual };
        Ok((residual, agree))
    });
    let mut rep = CheckReport::new("lmi_embed");
    let mut worst: f64 = 0.0;
    let mut disagree = 0usize;
    for row in results {
        let (res, agree) = row?;
        worst = worst.max(res);
        disagree += usize::from(!agree);
    }
    rep.metric("max_residual", worst).metric("disagreements", disagree as f64);
    rep.require(worst <= 1e-9, format!("min eigenvalue differs from 1 - ||L(X)|| by {worst:e}"));
    rep.require(disagree == 0, format!("{disagree} membership disagreements"));
    Ok(rep)
}

fn scott(seed: u64, fault: bool) -> Result<CheckReport> {
    let mut r = rng::seeded(seed);
    let gp = 2;
    let mut row: Vec<TruncatedSeries> = (0..gp)
        .map(|_| {
            let mut p = NcPoly::zero(gp, 1, 2, 2);
            for w in Word::all_up_to(gp, 1, 2) {
                p.add_term(w, linalg::ginibre(2, 2, &mut r));
            }
            TruncatedSeries::exact(p)
        })
        .collect();
    let bound = ballmap::scott_bound(&row)?;
    let scale = if fault { 3.0 / bound } else { 1.0 / bound };
    row = row.iter().map(|s| s.scale(C64::new(scale, 0.0))).collect();
    let mut rep = ballmap::scott_suite(&row, 3, 100, seed)?;
    let held = rep.get("hypothesis_held");
    rep.require(held >= 50.0, format!("hypothesis held at only {held} samples"));
    Ok(rep)
}

fn maximum_principle(seed: u64, fault: bool) -> Result<CheckReport> {
    let mut r = rng::seeded(seed);
    let u = linalg::random_unitary(3, &mut r);
    let v = linalg::random_unitary(3, &mut r);
    let tilde = random_tilde(2, 2, 1, 1, 2, &mut r);
    let f = ballmap::assemble_canonical(&u, &v, 2, 2, Some(&tilde), 2)?;
    let mut rep = if fault {
        let mut p = NcPoly::constant(1, 1, linalg::eye(1));
        p.add_term(Word(vec![Letter::starred(0, 0), Letter::new(0, 0)]), linalg::from_real(1, 1, &[-1.0]));
        ballmap::maximum_principle_sample(&TruncatedSeries::exact(p), 2, 1, 16, seed)?
    } else {
        ballmap::maximum_principle_sample(&f, 2, 1, 16, seed)?
    };
    rep.name = "maximum_principle".into();
    Ok(rep)
}
