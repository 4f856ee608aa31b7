//! Independent reference computations compared against the library.

use ncball_core::linalg::{self, CMat, C64};
use ncball_core::moebius::MoebiusParams;
use ncball_core::ncpoly::{parse_poly, MatrixTuple, NcPoly};
use ncball_core::nullss::{self, Mode};
use ncball_core::{clinging, rng};
use rand::Rng;

/// Entry-by-entry evaluation of `sum_w a_w (x) w(X)`.
fn eval_by_entries(p: &NcPoly, x: &MatrixTuple) -> CMat {
    let n = x.level;
    let (dp, d) = p.shape();
    let mut out = linalg::zeros(dp * n, d * n);
    for (w, a) in p.terms() {
        let mut m = linalg::eye(n);
        for l in &w.0 {
            let base = x.get(l.row, l.col);
            let f = if l.star { base.adjoint() } else { base.clone() };
            let mut next = linalg::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        next[(i, j)] += m[(i, k)] * f[(k, j)];
                    }
                }
            }
            m = next;
        }
        for r in 0..dp {
            for c in 0..d {
                for i in 0..n {
                    for j in 0..n {
                        out[(r * n + i, c * n + j)] += a[(r, c)] * m[(i, j)];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn evaluation_matches_entrywise_reference() {
    let p = parse_poly("(1+2i)*x11*x12 - x21* x11 + 3 + 0.5*x22*x22*x12", 2, 2, None).unwrap();
    let mut r = rng::seeded(4);
    for n in 1..=4 {
        let x = MatrixTuple::random_with_norm(2, 2, n, 0.8, &mut r);
        let d = linalg::max_abs(&(p.eval(&x).unwrap() - eval_by_entries(&p, &x)));
        assert!(d < 1e-13, "level {n}: {d}");
    }
}

#[test]
fn scalar_moebius_is_the_disk_automorphism() {
    let mut r = rng::seeded(5);
    for _ in 0..200 {
        let v = C64::from_polar(r.gen_range(0.0..0.95), r.gen_range(0.0..6.3));
        let u = C64::from_polar(r.gen_range(0.0..1.0), r.gen_range(0.0..6.3));
        let got = MoebiusParams::new(CMat::from_element(1, 1, v)).unwrap().apply(&CMat::from_element(1, 1, u)).unwrap().value[(0, 0)];
        let want = (v - u) / (C64::new(1.0, 0.0) - v.conj() * u);
        assert!((got - want).norm() < 1e-12);
    }
}

#[test]
fn defect_of_the_example_pencil_by_hand() {
    let l = clinging::two_variable_example();
    let mut r = rng::seeded(6);
    for n in 1..=3 {
        let x = MatrixTuple::random_with_norm(2, 1, n, 1.0, &mut r);
        let col = x.flatten();
        let lx = l.eval(&x).unwrap();
        let by_hand = linalg::kron(&linalg::eye(3), &(col.adjoint() * &col)) - lx.adjoint() * &lx;
        let lib = clinging::delta(&l, &x).unwrap();
        assert!(linalg::max_abs(&(by_hand - lib)) < 1e-13);
    }
}

#[test]
fn recovered_cofactors_reproduce_q_at_random_points() {
    let mut r = rng::seeded(7);
    for seed in 0..10 {
        let (p, q, _) = nullss::random_product_pair(seed);
        let max = nullss::default_degree(&p, &q);
        let sol = nullss::cofactor_solve(&p, &q, max, Mode::Exact).unwrap().expect("member");
        let (gp, g) = p.grid();
        for n in 1..=3 {
            let x = MatrixTuple::random_with_norm(gp, g, n, 1.0, &mut r);
            let lhs = q.eval(&x).unwrap();
            let rhs = sol.g.eval(&x).unwrap() * p.eval(&x).unwrap();
            let scale = linalg::op_norm(&lhs).max(1.0);
            assert!(linalg::max_abs(&(lhs - rhs)) < 1e-10 * scale, "seed {seed}, level {n}");
        }
    }
}
