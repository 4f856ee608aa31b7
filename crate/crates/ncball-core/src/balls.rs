//! Matrix balls, linear pencils and their spectrahedral embedding.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{Letter, MatrixTuple, NcPoly, Word};
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BallStatus {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallVerdict {
    pub status: BallStatus,
    pub norm: f64,
    pub tol: f64,
}

fn status_of(norm: f64, tol: f64) -> BallStatus {
    if (norm - 1.0).abs() <= tol {
        BallStatus::Boundary
    } else if norm < 1.0 {
        BallStatus::Interior
    } else {
        BallStatus::Exterior
    }
}

/// Locate a tuple relative to the unit ball of the flattened block matrix.
pub fn classify_ball(x: &MatrixTuple, tol: f64) -> BallVerdict {
    let norm = x.norm();
    BallVerdict { status: status_of(norm, tol), norm, tol }
}

/// A homogeneous linear pencil `L(x) = sum A_{jl} x_{jl}` with
/// `dprime x d` coefficients on a `gprime x g` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPencil {
    pub gprime: usize,
    pub g: usize,
    pub dprime: usize,
    pub d: usize,
    /// Row-major over `(j, l)`.
    pub coeffs: Vec<CMat>,
}

impl LinearPencil {
    pub fn new(gprime: usize, g: usize, coeffs: Vec<CMat>) -> Result<Self> {
        if coeffs.len() != gprime * g || coeffs.is_empty() {
            return Err(Error::Shape(format!("expected {} coefficients, got {}", gprime * g, coeffs.len())));
        }
        let (dprime, d) = (coeffs[0].nrows(), coeffs[0].ncols());
        if coeffs.iter().any(|a| a.nrows() != dprime || a.ncols() != d) {
            return Err(Error::Shape("pencil coefficients differ in shape".into()));
        }
        Ok(LinearPencil { gprime, g, dprime, d, coeffs })
    }

    pub fn coeff(&self, j: usize, l: usize) -> &CMat {
        &self.coeffs[j * self.g + l]
    }

    /// The identity pencil `sum E_{jl} x_{jl}` whose ball is the matrix ball.
    pub fn identity(gprime: usize, g: usize) -> Self {
        let coeffs = (0..gprime)
            .flat_map(|j| (0..g).map(move |l| (j, l)))
            .map(|(j, l)| {
                let mut e = linalg::zeros(gprime, g);
                e[(j, l)] = linalg::c(1.0, 0.0);
                e
            })
            .collect();
        LinearPencil { gprime, g, dprime: gprime, d: g, coeffs }
    }

    /// `L(X) = sum A_{jl} (x) X_{jl}`.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        if (x.gprime, x.g) != (self.gprime, self.g) {
            return Err(Error::Shape(format!("tuple grid {}x{} vs pencil grid {}x{}", x.gprime, x.g, self.gprime, self.g)));
        }
        let n = x.level;
        let mut out = linalg::zeros(self.dprime * n, self.d * n);
        for (a, xm) in self.coeffs.iter().zip(&x.entries) {
            out += linalg::kron(a, xm);
        }
        Ok(out)
    }

    pub fn to_poly(&self) -> NcPoly {
        let mut p = NcPoly::zero(self.gprime, self.g, self.dprime, self.d);
        for j in 0..self.gprime {
            for l in 0..self.g {
                p.add_term(Word(vec![Letter::new(j, l)]), self.coeff(j, l).clone());
            }
        }
        p
    }

    /// Read off a pencil from the linear part of a polynomial.
    pub fn from_linear_part(p: &NcPoly) -> Self {
        let coeffs = (0..p.gprime)
            .flat_map(|j| (0..p.g).map(move |l| (j, l)))
            .map(|(j, l)| p.coeff(&Word(vec![Letter::new(j, l)])).cloned().unwrap_or_else(|| linalg::zeros(p.dprime, p.d)))
            .collect();
        LinearPencil { gprime: p.gprime, g: p.g, dprime: p.dprime, d: p.d, coeffs }
    }
}

/// Membership of `X` in the pencil ball `{ ||L(X)|| <= 1 }`.
pub fn pencil_membership(l: &LinearPencil, x: &MatrixTuple, tol: f64) -> Result<BallVerdict> {
    let norm = linalg::op_norm(&l.eval(x)?);
    Ok(BallVerdict { status: status_of(norm, tol), norm, tol })
}

#[derive(Clone, Debug, Serialize)]
pub struct LmiReport {
    /// Smallest eigenvalue of the Hermitian pencil at the embedded point.
    pub min_eig: f64,
    /// `||L(X)||` computed directly.
    pub norm: f64,
    /// `|min_eig - (1 - norm)|`.
    pub residual: f64,
    pub ball: BallVerdict,
    pub lmi_member: bool,
    pub lmi_boundary: bool,
}

/// Evaluate `I + L(Y) + L(Y)*` at `Y = [[0, X], [0, 0]]`, which is unitarily
/// similar to `[[I, L(X)], [L(X)*, I]]`, and compare with the ball verdict.
pub fn lmi_embed_check(l: &LinearPencil, x: &MatrixTuple, tol: f64) -> Result<LmiReport> {
    if l.dprime != l.d {
        return Err(Error::Shape(format!("embedding needs a square pencil, got {}x{}", l.dprime, l.d)));
    }
    let n = x.level;
    let entries = x
        .entries
        .iter()
        .map(|m| {
            let mut y = linalg::zeros(2 * n, 2 * n);
            linalg::set_block(&mut y, 0, n, m);
            y
        })
        .collect();
    let y = MatrixTuple::new(x.gprime, x.g, entries)?;
    let ly = l.eval(&y)?;
    let herm = linalg::eye(ly.nrows()) + &ly + ly.adjoint();
    let min_eig = linalg::min_eig(&herm)?;
    let ball = pencil_membership(l, x, tol)?;
    Ok(LmiReport {
        min_eig,
        norm: ball.norm,
        residual: (min_eig - (1.0 - ball.norm)).abs(),
        ball,
        lmi_member: min_eig >= -tol,
        lmi_boundary: min_eig.abs() <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn example_pencil() -> LinearPencil {
        LinearPencil::new(2, 1, vec![from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]), from_real(2, 2, &[0.0, 1.0, -1.0, 0.0])]).unwrap()
    }

    #[test]
    fn pencil_at_scalars_matches_entrywise_formula() {
        let l = example_pencil();
        let (a, b) = (c(0.3, 0.1), c(-0.7, 0.2));
        let x = MatrixTuple::new(2, 1, vec![CMat::from_element(1, 1, a), CMat::from_element(1, 1, b)]).unwrap();
        let v = l.eval(&x).unwrap();
        let expected = CMat::from_row_slice(2, 2, &[a, a * 2.0 + b, a * 3.0 - b, a * 4.0]);
        assert!(linalg::max_abs(&(v - expected)) < 1e-15);
    }

    #[test]
    fn classify_scaled_unitary() {
        let mut rng = seeded(2);
        let u = linalg::random_unitary(4, &mut rng);
        let x = MatrixTuple::from_flat(&u, 2, 2).unwrap();
        assert_eq!(classify_ball(&x, DEFAULT_TOL).status, BallStatus::Boundary);
        assert_eq!(classify_ball(&x.scale(0.5), DEFAULT_TOL).status, BallStatus::Interior);
        assert_eq!(classify_ball(&x.scale(1.5), DEFAULT_TOL).status, BallStatus::Exterior);
    }

    #[test]
    fn identity_pencil_recovers_matrix_ball() {
        let mut rng = seeded(9);
        let x = MatrixTuple::random_with_norm(2, 3, 2, 0.8, &mut rng);
        let l = LinearPencil::identity(2, 3);
        assert!((linalg::op_norm(&l.eval(&x).unwrap()) - x.norm()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn prop_lmi_min_eig_is_one_minus_norm(seed in 0u64..300, n in 1usize..4, scale in 0.1f64..2.0) {
            let mut rng = seeded(seed);
            let coeffs = (0..4).map(|_| linalg::ginibre(3, 3, &mut rng)).collect();
            let l = LinearPencil::new(2, 2, coeffs).unwrap();
            let x = MatrixTuple::random_with_norm(2, 2, n, 1.0, &mut rng);
            let norm = linalg::op_norm(&l.eval(&x).unwrap());
            let x = x.scale(scale / norm);
            let r = lmi_embed_check(&l, &x, DEFAULT_TOL).unwrap();
            prop_assert!(r.residual < 1e-9);
            prop_assert_eq!(r.lmi_member, r.ball.status != BallStatus::Exterior);
        }
    }

    #[test]
    fn lmi_boundary_agrees() {
        let mut rng = seeded(21);
        let l = example_pencil();
        let x = MatrixTuple::random_with_norm(2, 1, 2, 1.0, &mut rng);
        let norm = linalg::op_norm(&l.eval(&x).unwrap());
        let r = lmi_embed_check(&l, &x.scale(1.0 / norm), DEFAULT_TOL).unwrap();
        assert!(r.lmi_boundary);
        assert_eq!(r.ball.status, BallStatus::Boundary);
    }
}
