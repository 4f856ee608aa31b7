//! Automorphisms of the matrix ball `{ ||U|| < 1 }` that exchange a point
//! `v` with the origin:
//!
//! `F_v(U) = v - (I - v v*)^{1/2} U (I - v* U)^{-1} (I - v* v)^{1/2}`.
//!
//! At level `n` the parameter and both defect roots act as `(.) (x) I_n`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::TruncatedSeries;
use crate::par;
use crate::report::CheckReport;
use crate::rng;
use rand::Rng as _;

#[derive(Clone, Debug)]
pub struct MoebiusParams {
    pub v: CMat,
    left_root: CMat,
    right_root: CMat,
}

#[derive(Clone, Debug)]
pub struct MoebiusValue {
    pub value: CMat,
    /// Condition number of `I - v* U` at the evaluation point.
    pub condition: f64,
}

impl MoebiusParams {
    pub fn new(v: CMat) -> Result<Self> {
        let norm = linalg::op_norm(&v);
        if norm >= 1.0 {
            return Err(Error::NotInBall(norm));
        }
        let left_root = linalg::psd_sqrt(&(linalg::eye(v.nrows()) - &v * v.adjoint()))?;
        let right_root = linalg::psd_sqrt(&(linalg::eye(v.ncols()) - v.adjoint() * &v))?;
        Ok(MoebiusParams { v, left_root, right_root })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.v.nrows(), self.v.ncols())
    }

    fn level_of(&self, u: &CMat) -> Result<usize> {
        let (dp, d) = self.shape();
        if !u.nrows().is_multiple_of(dp) || !u.ncols().is_multiple_of(d) || u.nrows() / dp != u.ncols() / d {
            return Err(Error::Shape(format!("{}x{} is not a level of {dp}x{d}", u.nrows(), u.ncols())));
        }
        Ok(u.nrows() / dp)
    }

    /// Evaluate `F_v(U)` for `U` at any level.
    pub fn apply(&self, u: &CMat) -> Result<MoebiusValue> {
        let n = self.level_of(u)?;
        let id = linalg::eye(n);
        let v = linalg::kron(&self.v, &id);
        let lr = linalg::kron(&self.left_root, &id);
        let rr = linalg::kron(&self.right_root, &id);
        let k = linalg::eye(u.ncols()) - v.adjoint() * u;
        let (kinv, condition) = linalg::inverse(&k)?;
        let value = &v - lr * u * kinv * rr;
        Ok(MoebiusValue { value, condition })
    }

    /// Formal composition `F_v o u` of a series with `||v* u(0)|| < 1`,
    /// truncated at `max_degree`.
    ///
    /// The constant part of `I - v* u` is inverted exactly and the rest by a
    /// Neumann expansion in the centred series, which terminates at the
    /// truncation degree.
    pub fn compose_series(&self, u: &TruncatedSeries, max_degree: usize) -> Result<TruncatedSeries> {
        if u.shape() != self.shape() {
            return Err(Error::Shape(format!("series shape {:?} vs parameter shape {:?}", u.shape(), self.shape())));
        }
        let dd = max_degree.min(u.max_degree);
        let u = TruncatedSeries { poly: u.poly.truncate(dd), max_degree: dd, truncated: u.truncated };
        let c0 = u.constant_term();
        let vstar = self.v.adjoint();
        let vc = &vstar * &c0;
        let vc_norm = linalg::op_norm(&vc);
        if vc_norm >= 1.0 {
            return Err(Error::Precondition(format!("Neumann expansion invalid: ||v* u(0)|| = {vc_norm}")));
        }
        let d = self.v.ncols();
        let (kinv, _) = linalg::inverse(&(linalg::eye(d) - vc))?;
        let centred = u.sub(&u.constant_like(c0))?;
        let t = centred.left_mul(&(&kinv * &vstar));
        let mut sum = u.constant_like(linalg::eye(d));
        let mut power = sum.clone();
        for _ in 0..dd {
            power = power.mul(&t)?;
            sum = sum.add(&power)?;
        }
        let inv = sum.right_mul(&kinv);
        let tail = u.left_mul(&self.left_root).mul(&inv)?.right_mul(&self.right_root);
        let out = u.constant_like(self.v.clone()).sub(&tail)?;
        Ok(TruncatedSeries { truncated: true, ..out })
    }
}

/// Number of singular values within `tol` of one.
pub fn isometric_rank(u: &CMat, tol: f64) -> usize {
    linalg::singular_values(u).iter().filter(|&&s| (s - 1.0).abs() <= tol).count()
}

/// Tolerances of the sampled invariant suite.
pub const BALL_TOL: f64 = 1e-10;
pub const BOUNDARY_TOL: f64 = 1e-8;
pub const INVOLUTION_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;
const ENDPOINT_TOL: f64 = 1e-12;

struct Sample {
    ball_excess: f64,
    boundary_residual: f64,
    involution_residual: f64,
    rank_ok: bool,
    endpoint_residual: f64,
}

fn one_sample(seed: u64, index: u64, fault: bool) -> Result<Sample> {
    let mut rng = rng::sample_rng(seed, index);
    let dp = rng.gen_range(1..=3);
    let d = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=4);
    let v = linalg::random_with_norm(dp, d, rng.gen_range(0.0..0.9), &mut rng);
    let params = MoebiusParams::new(v.clone())?;
    let m = (dp * n).min(d * n);

    let interior = linalg::random_with_norm(dp * n, d * n, rng.gen_range(0.0..0.99), &mut rng);
    let fu = params.apply(&interior)?.value;
    let ball_excess = linalg::op_norm(&fu) - 1.0;
    let back = params.apply(&fu)?.value;
    let involution_residual = linalg::max_abs(&(back - &interior));

    let k = rng.gen_range(1..=m);
    let mut s: Vec<f64> = vec![1.0; k];
    s.extend((k..m).map(|_| rng.gen_range(0.0..0.9)));
    let mut boundary = linalg::with_singular_values(dp * n, d * n, &s, &mut rng);
    if fault {
        boundary = boundary.scale(1.0 + 1e-6);
    }
    let fb = params.apply(&boundary)?.value;
    let boundary_residual = (linalg::op_norm(&fb) - 1.0).abs();
    let rank_ok = isometric_rank(&fb, RANK_TOL) == isometric_rank(&boundary, RANK_TOL);

    let id = linalg::eye(n);
    let zero = linalg::zeros(dp * n, d * n);
    let vn = linalg::kron(&v, &id);
    let endpoint_residual = linalg::max_abs(&(params.apply(&zero)?.value - &vn)).max(linalg::max_abs(&params.apply(&vn)?.value));
    Ok(Sample { ball_excess, boundary_residual, involution_residual, rank_ok, endpoint_residual })
}

/// Sampled check of ball preservation, boundary preservation, the involution
/// property, isometric-rank preservation and `F_v(0) = v`, `F_v(v) = 0`.
pub fn verify_suite(samples: usize, seed: u64, fault: bool) -> CheckReport {
    let results = par::map_range(samples, |i| one_sample(seed, i as u64, fault));
    let mut r = CheckReport::new("moebius");
    let mut ball = f64::NEG_INFINITY;
    let mut bnd: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut rank_failures = 0usize;
    let mut ends: f64 = 0.0;
    for (i, s) in results.into_iter().enumerate() {
        match s {
            Ok(s) => {
                ball = ball.max(s.ball_excess);
                bnd = bnd.max(s.boundary_residual);
                inv = inv.max(s.involution_residual);
                rank_failures += usize::from(!s.rank_ok);
                ends = ends.max(s.endpoint_residual);
            }
            Err(e) => {
                r.require(false, format!("sample {i}: {e}"));
            }
        }
    }
    r.metric("samples", samples as f64)
        .metric("max_norm_excess", ball)
        .metric("max_boundary_residual", bnd)
        .metric("max_involution_residual", inv)
        .metric("rank_failures", rank_failures as f64)
        .metric("max_endpoint_residual", ends);
    r.require(ball <= BALL_TOL, format!("image left the ball by {ball:e}"))
        .require(bnd <= BOUNDARY_TOL, format!("boundary residual {bnd:e}"))
        .require(inv <= INVOLUTION_TOL, format!("involution residual {inv:e}"))
        .require(rank_failures == 0, format!("{rank_failures} isometric-rank changes"))
        .require(ends <= ENDPOINT_TOL, format!("endpoint residual {ends:e}"));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::ncpoly::{parse_poly, Letter, MatrixTuple, NcPoly, Word};
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn scalar_value_matches_disc_automorphism() {
        let p = MoebiusParams::new(from_real(1, 1, &[0.5])).unwrap();
        let v = p.apply(&from_real(1, 1, &[0.25])).unwrap().value[(0, 0)];
        assert!((v - c(2.0 / 7.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn scalar_formula_agrees_for_complex_points() {
        let vz = c(0.3, -0.4);
        let p = MoebiusParams::new(CMat::from_element(1, 1, vz)).unwrap();
        for u in [c(0.1, 0.2), c(-0.7, 0.1), c(0.0, 0.99)] {
            let got = p.apply(&CMat::from_element(1, 1, u)).unwrap().value[(0, 0)];
            let want = (vz - u) / (c(1.0, 0.0) - u * vz.conj());
            assert!((got - want).norm() < 1e-14);
        }
    }

    #[test]
    fn series_of_half_shift() {
        let p = MoebiusParams::new(from_real(1, 1, &[0.5])).unwrap();
        let u = TruncatedSeries::from_poly(parse_poly("x1", 1, 1, None).unwrap(), 4).unwrap();
        let f = p.compose_series(&u, 4).unwrap();
        let w = |k: usize| Word(vec![Letter::new(0, 0); k]);
        let coeff = |k: usize| f.poly.coeff(&w(k)).map(|a| a[(0, 0)]).unwrap_or(c(0.0, 0.0));
        assert!((coeff(0) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((coeff(1) - c(-0.75, 0.0)).norm() < 1e-15);
        assert!((coeff(2) - c(-0.375, 0.0)).norm() < 1e-15);
        // (1/2 - x) / (1 - x/2): every higher coefficient is -3/2^(k+1).
        assert!((coeff(3) - c(-0.1875, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_parameter_outside_ball() {
        assert!(matches!(MoebiusParams::new(from_real(1, 1, &[1.0])), Err(Error::NotInBall(_))));
    }

    #[test]
    fn neumann_precondition_is_checked() {
        let p = MoebiusParams::new(from_real(1, 1, &[0.9])).unwrap();
        let u = TruncatedSeries::from_poly(parse_poly("1.2 + x1", 1, 1, None).unwrap(), 2).unwrap();
        assert!(matches!(p.compose_series(&u, 2), Err(Error::Precondition(_))));
    }

    fn strictly_upper(n: usize, rng: &mut crate::rng::Rng) -> CMat {
        let mut m = linalg::ginibre(n, n, rng);
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = c(0.0, 0.0);
            }
        }
        m
    }

    proptest! {
        #[test]
        fn prop_series_composition_matches_pointwise(seed in 0u64..120) {
            use rand::Rng;
            let mut rng = seeded(seed);
            let (dp, d) = (2, 2);
            let v = linalg::random_with_norm(dp, d, 0.6, &mut rng);
            let params = MoebiusParams::new(v).unwrap();
            let mut u = NcPoly::zero(1, 2, dp, d);
            u.add_term(Word::empty(), linalg::random_with_norm(dp, d, 0.3, &mut rng));
            for _ in 0..4 {
                let k = rng.gen_range(1..3);
                let w = Word((0..k).map(|_| Letter::new(0, rng.gen_range(0..2))).collect());
                u.add_term(w, linalg::ginibre(dp, d, &mut rng).scale(0.2));
            }
            let dd = 4;
            let us = TruncatedSeries::from_poly(u.clone(), dd).unwrap();
            let f = params.compose_series(&us, dd).unwrap();
            let n = 3;
            let x = MatrixTuple::new(1, 2, vec![strictly_upper(n, &mut rng).scale(0.3), strictly_upper(n, &mut rng).scale(0.3)]).unwrap();
            let pointwise = params.apply(&u.eval(&x).unwrap()).unwrap().value;
            let series = f.eval_nilpotent(&x, n, 1e-13).unwrap();
            prop_assert!(linalg::max_abs(&(pointwise - series)) < 1e-10);
        }

        #[test]
        fn prop_series_involution(seed in 0u64..80) {
            use rand::Rng;
            let mut rng = seeded(seed);
            let v = linalg::random_with_norm(2, 1, 0.7, &mut rng);
            let params = MoebiusParams::new(v).unwrap();
            let mut u = NcPoly::zero(2, 1, 2, 1);
            for _ in 0..4 {
                let k = rng.gen_range(1..3);
                let w = Word((0..k).map(|_| Letter::new(rng.gen_range(0..2), 0)).collect());
                u.add_term(w, linalg::ginibre(2, 1, &mut rng).scale(0.3));
            }
            let us = TruncatedSeries::from_poly(u, 3).unwrap();
            let back = params.compose_series(&params.compose_series(&us, 3).unwrap(), 3).unwrap();
            prop_assert!(back.distance(&us).unwrap() < 1e-11);
        }
    }

    #[test]
    fn suite_passes_and_detects_fault() {
        let ok = verify_suite(40, 7, false);
        assert!(ok.passed, "{:?}", ok.notes);
        let bad = verify_suite(40, 7, true);
        assert!(!bad.passed);
    }
}
