//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use ncball_core::io::{JsonMatrix, JsonPoly, JsonTuple};
use ncball_core::report::CheckReport;
use ncball_core::suite;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

const SEED: u64 = 42;

/// A metric name and the bound it must satisfy.
type Bound = (&'static str, fn(f64) -> bool);
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Run a suite check and apply extra bounds to its metrics.
fn check(name: &str, limit: Duration, bounds: &[Bound]) -> Outcome {
    let start = Instant::now();
    let rep: CheckReport = suite::run_check(name, SEED, false).expect("known check");
    let elapsed = start.elapsed();
    let mut failures: Vec<String> = rep.notes.clone();
    if !rep.passed && failures.is_empty() {
        failures.push("check failed".into());
    }
    for (metric, ok) in bounds {
        match rep.metrics.get(*metric) {
            Some(&v) if ok(v) => {}
            Some(&v) => failures.push(format!("{metric} = {v:e}")),
            None => failures.push(format!("{metric} missing")),
        }
    }
    if elapsed > limit {
        failures.push(format!("took {elapsed:?}, limit {limit:?}"));
    }
    let shown: Vec<String> = bounds.iter().filter_map(|(m, _)| rep.metrics.get(*m).map(|v| format!("{m}={v:e}"))).collect();
    Outcome {
        passed: rep.passed && failures.is_empty(),
        detail: if failures.is_empty() { format!("{} [{elapsed:.2?}]", shown.join(" ")) } else { failures.join("; ") },
    }
}

fn eval_fixture() -> Outcome {
    let p = serde_json::from_str::<JsonPoly>(&fixture("eval_poly.ncp")).unwrap().to_poly().unwrap();
    let x = serde_json::from_str::<JsonTuple>(&fixture("eval_tuple.json")).unwrap().to_tuple().unwrap();
    let expected = serde_json::from_str::<JsonMatrix>(&fixture("eval_expected.json")).unwrap().to_matrix().unwrap();
    let start = Instant::now();
    let got = p.eval(&x).unwrap();
    let elapsed = start.elapsed();
    let exact = got == expected;
    Outcome {
        passed: exact && elapsed < Duration::from_millis(1),
        detail: format!("{}x{} exact={exact} [{elapsed:.2?}]", got.nrows(), got.ncols()),
    }
}

fn determinism() -> Outcome {
    let run = || {
        let start = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_ncball")).args(["suite", "--seed", &SEED.to_string()]).output().expect("run ncball");
        (out, start.elapsed())
    };
    let (a, ta) = run();
    let (b, tb) = run();
    let identical = a.stdout == b.stdout && !a.stdout.is_empty();
    let ok_exit = a.status.code() == Some(0) && b.status.code() == Some(0);
    let limit = Duration::from_secs(300);
    Outcome {
        passed: identical && ok_exit && ta < limit && tb < limit,
        detail: format!("identical={identical} exit={:?}/{:?} [{ta:.1?}, {tb:.1?}]", a.status.code(), b.status.code()),
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("evaluation fixture reproduces the 4x6 matrix", Box::new(eval_fixture)),
        (
            "two-variable pencil norms, Gram positivity and clinging",
            Box::new(|| {
                check(
                    "clinging",
                    secs(5),
                    &[
                        ("column_norm", |v| (v - 2f64.sqrt()).abs() <= 1e-12),
                        ("pencil_norm", |v| (v - 1.5f64.sqrt()).abs() <= 1e-12),
                        ("gram_min_eig", |v| v >= -1e-12),
                        ("max_relative_min_eig", |v| v <= 1e-7),
                        ("samples", |v| v == 200.0),
                    ],
                )
            }),
        ),
        (
            "Moebius maps preserve the ball and boundary and are involutions",
            Box::new(|| {
                check(
                    "moebius",
                    secs(10),
                    &[
                        ("samples", |v| v == 300.0),
                        ("max_norm_excess", |v| v <= 1e-10),
                        ("max_boundary_residual", |v| v <= 1e-8),
                        ("max_involution_residual", |v| v <= 1e-9),
                        ("rank_failures", |v| v == 0.0),
                    ],
                )
            }),
        ),
        ("shift model identities and nilpotency are exact", Box::new(|| check("fock_identities", secs(5), &[("cases", |v| v == 27.0)]))),
        (
            "nonzero perturbations of x are refuted by shift models",
            Box::new(|| check("fock_uniqueness", secs(10), &[("polynomials", |v| v == 50.0), ("weakest_witness", |v| v <= -1e-6)])),
        ),
        (
            "complete isometries certified and the trace map rejected",
            Box::new(|| {
                check(
                    "isometry",
                    secs(30),
                    &[
                        ("max_reconstruction_residual", |v| v <= 1e-8),
                        ("rejected", |v| v == 0.0),
                        ("trace_map_ratio", |v| (v - 2.0).abs() <= 1e-9),
                        ("argmax_distance", |v| v <= 1e-9),
                    ],
                )
            }),
        ),
        (
            "Schwarz inequality holds for contractions and fails for 1.2x",
            Box::new(|| {
                check(
                    "schwarz",
                    secs(20),
                    &[("samples_per_instance", |v| v == 200.0), ("min_margin", |v| v >= -1e-7), ("scaled_first_failure", |v| v < 3.0)],
                )
            }),
        ),
        (
            "canonical forms recovered and planted blocks detected",
            Box::new(|| {
                check(
                    "canonical",
                    secs(60),
                    &[
                        ("max_residual_zero", |v| v <= 1e-8),
                        ("max_residual_general", |v| v <= 1e-8),
                        ("max_residual_pencil", |v| v <= 1e-8),
                        ("planted_detected", |v| v == 30.0),
                    ],
                )
            }),
        ),
        (
            "left-ideal cofactors recovered exactly; x2 over x1 refuted",
            Box::new(|| {
                check(
                    "nullss",
                    secs(30),
                    &[("recovered", |v| v == 20.0), ("counterexample_p", |v| v <= 1e-9), ("counterexample_q", |v| v > 1e-6)],
                )
            }),
        ),
        (
            "clinging maps factor through the isometric part",
            Box::new(|| {
                check(
                    "bidisk",
                    secs(30),
                    &[("maps", |v| v >= 1.0), ("max_factor_residual", |v| v <= 1e-10), ("max_orthogonality_residual", |v| v <= 1e-8)],
                )
            }),
        ),
        ("suite reports are byte-identical across runs", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {:>2} {} {title}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
