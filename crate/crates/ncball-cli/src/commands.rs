use crate::{BallCmd, BallmapCmd, Cli, ClingCmd, Command, FockCmd, IsoCmd, MoebiusCmd, NullssCmd, PencilCmd, PolyInput};
use ncball_core::io::{JsonMatrix, JsonPencil, JsonPoly, JsonSeries, JsonTuple};
use ncball_core::ncpoly::{parse_poly, CoeffTable, MatrixTuple, NcPoly, TruncatedSeries};
use ncball_core::{ballmap, balls, clinging, fock, isometry, linalg, moebius, nullss, suite};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;

pub struct Outcome {
    pub report: Value,
    /// False for a mathematical rejection (exit code 1).
    pub ok: bool,
}

type CmdResult = Result<Outcome, String>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

fn done(report: Value, ok: bool) -> CmdResult {
    Ok(Outcome { report, ok })
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn err(e: ncball_core::Error) -> String {
    e.to_string()
}

fn load_tuple(path: &Path) -> Result<MatrixTuple, String> {
    read_json::<JsonTuple>(path)?.to_tuple().map_err(err)
}

fn load_pencil(path: &Path) -> Result<balls::LinearPencil, String> {
    read_json::<JsonPencil>(path)?.to_pencil().map_err(err)
}

fn load_matrix(path: &Path) -> Result<linalg::CMat, String> {
    read_json::<JsonMatrix>(path)?.to_matrix().map_err(err)
}

fn load_series(path: &Path) -> Result<TruncatedSeries, String> {
    read_json::<JsonSeries>(path)?.to_series().map_err(err)
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("grid `{s}` is not ROWS,COLS"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("grid `{s}` is not ROWS,COLS"));
    Ok((parse(a)?, parse(b)?))
}

fn load_poly(input: &PolyInput) -> Result<NcPoly, String> {
    if let Some(path) = &input.poly {
        return read_json::<JsonPoly>(path)?.to_poly().map_err(err);
    }
    let text = input.text.as_ref().ok_or("give --poly FILE or --text TEXT --grid ROWS,COLS")?;
    let (gp, g) = parse_grid(input.grid.as_deref().ok_or("--text needs --grid")?)?;
    let table: Option<CoeffTable> = match &input.coeffs {
        Some(path) => {
            let raw: BTreeMap<String, JsonMatrix> = read_json(path)?;
            Some(raw.iter().map(|(k, v)| Ok((k.clone(), v.to_matrix().map_err(err)?))).collect::<Result<_, String>>()?)
        }
        None => None,
    };
    parse_poly(text, gp, g, table.as_ref()).map_err(err)
}

fn poly_report(p: &NcPoly) -> Value {
    let (gp, g) = p.grid();
    let terms: Vec<Value> = p.terms().iter().map(|(w, a)| json!({ "word": w.render(gp, g), "coeff": JsonMatrix::from(a) })).collect();
    json!({
        "grid": [gp, g],
        "shape": [p.dprime, p.d],
        "degree": p.degree(),
        "analytic": p.is_analytic(),
        "canonical": JsonPoly::from_poly(p),
        "terms": terms,
    })
}

pub fn run(cli: &Cli) -> CmdResult {
    let seed = cli.global.seed;
    let tol = cli.global.tol;
    match &cli.command {
        Command::Parse(input) => done(poly_report(&load_poly(input)?), true),
        Command::Eval { poly, tuple } => {
            let p = load_poly(poly)?;
            let x = load_tuple(tuple)?;
            let v = p.eval(&x).map_err(err)?;
            done(json!({ "level": x.level, "value": JsonMatrix::from(&v) }), true)
        }
        Command::Ball(BallCmd::Classify { tuple }) => {
            let x = load_tuple(tuple)?;
            done(to_value(&balls::classify_ball(&x, tol.unwrap_or(balls::DEFAULT_TOL))), true)
        }
        Command::Pencil(PencilCmd::Member { pencil, tuple }) => {
            let l = load_pencil(pencil)?;
            let x = load_tuple(tuple)?;
            let v = balls::pencil_membership(&l, &x, tol.unwrap_or(balls::DEFAULT_TOL)).map_err(err)?;
            done(to_value(&v), v.status != balls::BallStatus::Exterior)
        }
        Command::Pencil(PencilCmd::Embed { pencil, tuple }) => {
            let l = load_pencil(pencil)?;
            let x = load_tuple(tuple)?;
            let rep = balls::lmi_embed_check(&l, &x, tol.unwrap_or(balls::DEFAULT_TOL)).map_err(err)?;
            let agree = rep.lmi_member == (rep.ball.status != balls::BallStatus::Exterior);
            done(to_value(&rep), agree)
        }
        Command::Moebius(MoebiusCmd::Apply { v, u }) => {
            let params = moebius::MoebiusParams::new(load_matrix(v)?).map_err(err)?;
            let value = params.apply(&load_matrix(u)?).map_err(err)?;
            done(
                json!({
                    "value": JsonMatrix::from(&value.value),
                    "norm": linalg::op_norm(&value.value),
                    "condition": value.condition,
                }),
                true,
            )
        }
        Command::Moebius(MoebiusCmd::Verify { samples }) => {
            let rep = moebius::verify_suite(*samples, seed, false);
            done(to_value(&rep), rep.passed)
        }
        Command::Fock(FockCmd::Identities { gprime, g, n }) => {
            if *gprime == 0 || *g == 0 {
                return Err("grid dimensions must be positive".into());
            }
            let rep = fock::fock_identities(*gprime, *g, *n);
            let mut v = to_value(&rep);
            v["passed"] = json!(rep.passed());
            done(v, rep.passed())
        }
        Command::Fock(FockCmd::Unique { poly, max_n }) => {
            let p = load_poly(poly)?;
            let rep = fock::unique_s_polynomial_test(&p, *max_n, tol.unwrap_or(1e-9)).map_err(err)?;
            let mut v = to_value(&rep);
            v["all_psd"] = json!(rep.all_psd());
            done(v, rep.all_psd())
        }
        Command::Iso(IsoCmd::Certify { map, samples }) => iso_certify(&load_pencil(map)?, tol.unwrap_or(1e-9), *samples, seed),
        Command::Cling(ClingCmd::Analyze { pencil, levels, samples }) => cling_analyze(&load_pencil(pencil)?, *levels, *samples, seed),
        Command::Cling(ClingCmd::Search3 { budget }) => {
            let rep = clinging::three_var_search(*budget, seed).map_err(err)?;
            let mut v = to_value(&rep);
            for (c, j) in rep.candidates.iter().zip(v["candidates"].as_array_mut().expect("array")) {
                j["pencil"] = to_value(&JsonPencil::from(&c.pencil));
                j["point"] = to_value(&JsonTuple::from(&c.point));
            }
            done(v, true)
        }
        Command::Ballmap(BallmapCmd::Canon { series, pencil }) => {
            let h = load_series(series)?;
            let t = tol.unwrap_or(1e-8);
            let a = match pencil {
                Some(path) => ballmap::pencil_ball_map_form(&load_pencil(path)?, &h, t),
                None => ballmap::canonical_form_general(&h, t),
            }
            .map_err(err)?;
            let mut v = to_value(&a);
            v["passed"] = json!(a.passed());
            v["u"] = json!(a.u.as_ref().map(JsonMatrix::from));
            v["v"] = json!(a.v.as_ref().map(JsonMatrix::from));
            v["tilde"] = json!(a.tilde.as_ref().map(JsonSeries::from_series));
            done(v, a.passed())
        }
        Command::Ballmap(BallmapCmd::Schwarz { series, levels, samples }) => {
            let rep = ballmap::schwarz_suite(&load_series(series)?, *levels, *samples, seed).map_err(err)?;
            done(to_value(&rep), rep.passed)
        }
        Command::Ballmap(BallmapCmd::Bidisk { series, samples }) => {
            let b = ballmap::bidisk_decompose(&load_series(series)?, tol.unwrap_or(1e-10), *samples, seed).map_err(err)?;
            let mut v = to_value(&b);
            v["m"] = to_value(&JsonMatrix::from(&b.m));
            v["s_basis"] = to_value(&JsonMatrix::from(&b.s_basis));
            done(v, b.passed)
        }
        Command::Nullss(NullssCmd::Solve { p, q, max_degree, mode, vars }) => nullss_solve(p, q, *max_degree, *mode, *vars, seed),
        Command::Suite { filter, inject_fault, timings } => run_suite(seed, filter.as_deref(), inject_fault.as_deref(), *timings),
    }
}

fn iso_certify(psi: &isometry::LinearMatrixMap, tol: f64, samples: usize, seed: u64) -> CmdResult {
    match isometry::certify_complete_isometry(psi, tol) {
        Ok(cert) => {
            let check = isometry::verify_certificate(psi, &cert, samples, seed, tol.max(1e-8));
            done(
                json!({
                    "certified": true,
                    "u": JsonMatrix::from(&cert.u),
                    "v": JsonMatrix::from(&cert.v),
                    "phi": cert.phi.as_ref().map(JsonPencil::from),
                    "top_singular_sq": cert.top_singular_sq,
                    "f_residual": cert.f_residual,
                    "residual": cert.residual,
                    "trials": cert.trials,
                    "check": check,
                }),
                check.passed,
            )
        }
        Err(rej) => {
            let cc = isometry::sample_complete_contractivity(psi, samples, seed, tol);
            let mut ccv = to_value(&cc);
            ccv["argmax"] = to_value(&JsonTuple::from(&cc.argmax));
            done(json!({ "certified": false, "rejection": rej, "complete_contractivity": ccv }), false)
        }
    }
}

fn cling_analyze(l: &balls::LinearPencil, levels: usize, samples: usize, seed: u64) -> CmdResult {
    let gram = clinging::gram_of_delta(l).map_err(err)?;
    let psd = clinging::delta_psd(&gram, l.gprime, l.d).map_err(err)?;
    let mut psd_v = to_value(&psd);
    if let Some((x, _)) = &psd.witness {
        psd_v["witness"] = to_value(&JsonTuple::from(x));
    }
    let ortho = clinging::orthotropic_check(l, 1e-9).ok();
    let mut report = json!({ "gram": JsonMatrix::from(&gram), "psd": psd_v, "orthotropic": ortho });
    if !psd.psd {
        return done(report, false);
    }
    let scalar = clinging::clinging_scalar(&gram, l.gprime, l.d).map_err(err)?;
    report["scalar"] = to_value(&scalar);
    if !scalar.clings {
        report["scalar"]["counterexample"] =
            json!(scalar.counterexample.as_ref().map(|a| a.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()));
        return done(report, false);
    }
    let m = clinging::matrix_clinging_sample(l, levels, samples, seed).map_err(err)?;
    let mut mv = to_value(&m);
    mv["refuting_point"] = json!(m.refuting_point.as_ref().map(JsonTuple::from));
    report["matrix"] = mv;
    done(report, m.verdict != clinging::ClingVerdict::Refuted)
}

fn load_poly_matrix(path: &Path, vars: Option<usize>) -> Result<NcPoly, String> {
    let texts: Vec<Vec<String>> = read_json(path)?;
    nullss::poly_matrix_from_texts(&texts, vars).map_err(err)
}

fn nullss_solve(p: &Path, q: &Path, max_degree: Option<usize>, mode: ModeArg, vars: Option<usize>, seed: u64) -> CmdResult {
    let pp = load_poly_matrix(p, vars)?;
    let qq = load_poly_matrix(q, vars)?;
    let g = pp.grid().0.max(qq.grid().0);
    let (pp, qq) =
        if vars.is_none() && pp.grid() != qq.grid() { (load_poly_matrix(p, Some(g))?, load_poly_matrix(q, Some(g))?) } else { (pp, qq) };
    let max = max_degree.unwrap_or_else(|| nullss::default_degree(&pp, &qq));
    let mode = match mode {
        ModeArg::Exact => nullss::Mode::Exact,
        ModeArg::Float => nullss::Mode::Float,
    };
    match nullss::cofactor_solve(&pp, &qq, max, mode).map_err(err)? {
        Ok(sol) => {
            let mut v = to_value(&sol);
            v["solved"] = json!(true);
            v["g"] = json!(nullss::poly_matrix_texts(&sol.g).map_err(err)?);
            done(v, true)
        }
        Err(fail) => {
            let k = nullss::kernel_hypothesis_check(&pp, &qq, 3, 64, seed).map_err(err)?;
            let mut kv = to_value(&k);
            if let Some((x, vec)) = &k.counterexample {
                kv["counterexample"] = json!({
                    "tuple": JsonTuple::from(x),
                    "vector": vec.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                });
            }
            done(json!({ "solved": false, "failure": fail, "kernel_check": kv }), false)
        }
    }
}

fn run_suite(seed: u64, filter: Option<&str>, fault: Option<&str>, timings: bool) -> CmdResult {
    if let Some(name) = fault {
        if !suite::CHECKS.contains(&name) {
            return Err(format!("unknown check `{name}`; known checks: {}", suite::CHECKS.join(", ")));
        }
    }
    let entries = suite::run_suite(seed, filter, fault);
    let passed = entries.iter().all(|e| e.report.passed);
    let checks: Vec<Value> = entries
        .iter()
        .map(|e| {
            let mut v = to_value(&e.report);
            if timings {
                v["runtime_ms"] = json!(e.runtime.as_secs_f64() * 1e3);
            }
            v
        })
        .collect();
    let failed: Vec<&str> = entries.iter().filter(|e| !e.report.passed).map(|e| e.report.name.as_str()).collect();
    done(json!({ "seed": seed, "passed": passed, "failed": failed, "checks": checks }), passed)
}
