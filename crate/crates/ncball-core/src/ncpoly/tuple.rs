use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rng::Rng;

use super::word::{Letter, Word};

/// A `gprime x g` grid of `level x level` complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    pub gprime: usize,
    pub g: usize,
    pub level: usize,
    /// Row-major over `(row, col)`.
    pub entries: Vec<CMat>,
}

impl MatrixTuple {
    pub fn new(gprime: usize, g: usize, entries: Vec<CMat>) -> Result<Self> {
        if entries.len() != gprime * g || entries.is_empty() {
            return Err(Error::Shape(format!("expected {} entries, got {}", gprime * g, entries.len())));
        }
        let level = entries[0].nrows();
        if entries.iter().any(|m| m.nrows() != level || m.ncols() != level) {
            return Err(Error::Shape("tuple entries must be square of equal size".into()));
        }
        Ok(MatrixTuple { gprime, g, level, entries })
    }

    pub fn zero(gprime: usize, g: usize, level: usize) -> Self {
        MatrixTuple { gprime, g, level, entries: vec![linalg::zeros(level, level); gprime * g] }
    }

    pub fn get(&self, row: usize, col: usize) -> &CMat {
        &self.entries[row * self.g + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut CMat {
        &mut self.entries[row * self.g + col]
    }

    /// Value of a single letter, adjoined if starred.
    pub fn letter(&self, l: Letter) -> CMat {
        let m = self.get(l.row, l.col);
        if l.star {
            m.adjoint()
        } else {
            m.clone()
        }
    }

    pub fn word(&self, w: &Word) -> CMat {
        let mut acc = linalg::eye(self.level);
        for &l in &w.0 {
            acc *= self.letter(l);
        }
        acc
    }

    /// The block matrix `[X_{jl}]` of size `gprime*level x g*level`.
    pub fn flatten(&self) -> CMat {
        let n = self.level;
        let mut out = linalg::zeros(self.gprime * n, self.g * n);
        for j in 0..self.gprime {
            for l in 0..self.g {
                linalg::set_block(&mut out, j * n, l * n, self.get(j, l));
            }
        }
        out
    }

    pub fn from_flat(m: &CMat, gprime: usize, g: usize) -> Result<Self> {
        if gprime == 0 || g == 0 || !m.nrows().is_multiple_of(gprime) || !m.ncols().is_multiple_of(g) {
            return Err(Error::Shape(format!("cannot split {}x{} into a {gprime}x{g} grid", m.nrows(), m.ncols())));
        }
        let n = m.nrows() / gprime;
        if m.ncols() / g != n {
            return Err(Error::Shape("blocks are not square".into()));
        }
        let mut entries = Vec::with_capacity(gprime * g);
        for j in 0..gprime {
            for l in 0..g {
                entries.push(linalg::block(m, j * n, l * n, n, n));
            }
        }
        Ok(MatrixTuple { gprime, g, level: n, entries })
    }

    /// Operator norm of the flattened block matrix.
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.flatten())
    }

    pub fn scale(&self, s: f64) -> Self {
        MatrixTuple { entries: self.entries.iter().map(|m| m.scale(s)).collect(), ..self.clone() }
    }

    /// Random tuple with flattened norm exactly `norm`.
    pub fn random_with_norm(gprime: usize, g: usize, level: usize, norm: f64, rng: &mut Rng) -> Self {
        let m = linalg::random_with_norm(gprime * level, g * level, norm, rng);
        MatrixTuple::from_flat(&m, gprime, g).expect("shape is consistent")
    }

    /// Random tuple whose flattened matrix has the given singular values.
    pub fn random_with_singular_values(gprime: usize, g: usize, level: usize, s: &[f64], rng: &mut Rng) -> Self {
        let m = linalg::with_singular_values(gprime * level, g * level, s, rng);
        MatrixTuple::from_flat(&m, gprime, g).expect("shape is consistent")
    }
}
