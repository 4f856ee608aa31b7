//! JSON file formats for matrices, tuples, pencils, series and polynomials.

use crate::balls::LinearPencil;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::ncpoly::{parse_poly, CoeffTable, MatrixTuple, NcPoly, TruncatedSeries, Word};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Row-major complex matrix: `{"rows", "cols", "data": [[re, im], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JsonMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMat> for JsonMatrix {
    fn from(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        JsonMatrix { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl JsonMatrix {
    pub fn to_matrix(&self) -> Result<CMat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!("{}x{} matrix with {} entries", self.rows, self.cols, self.data.len())));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            C64::new(re, im)
        }))
    }
}

fn grid_of(entries: &[Vec<JsonMatrix>]) -> Result<Vec<CMat>> {
    let cols = entries.first().map_or(0, Vec::len);
    if entries.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape("ragged grid of matrices".into()));
    }
    entries.iter().flatten().map(JsonMatrix::to_matrix).collect()
}

fn to_grid(ms: &[CMat], gprime: usize, g: usize) -> Vec<Vec<JsonMatrix>> {
    (0..gprime).map(|j| (0..g).map(|l| JsonMatrix::from(&ms[j * g + l])).collect()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonTuple {
    pub gprime: usize,
    pub g: usize,
    pub level: usize,
    pub entries: Vec<Vec<JsonMatrix>>,
}

impl From<&MatrixTuple> for JsonTuple {
    fn from(x: &MatrixTuple) -> Self {
        JsonTuple { gprime: x.gprime, g: x.g, level: x.level, entries: to_grid(&x.entries, x.gprime, x.g) }
    }
}

impl JsonTuple {
    pub fn to_tuple(&self) -> Result<MatrixTuple> {
        if self.entries.len() != self.gprime {
            return Err(Error::Shape(format!("expected {} rows of entries, got {}", self.gprime, self.entries.len())));
        }
        let x = MatrixTuple::new(self.gprime, self.g, grid_of(&self.entries)?)?;
        if x.level != self.level {
            return Err(Error::Shape(format!("declared level {} but entries are {}x{}", self.level, x.level, x.level)));
        }
        Ok(x)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonPencil {
    pub gprime: usize,
    pub g: usize,
    pub dprime: usize,
    pub d: usize,
    pub coeffs: Vec<Vec<JsonMatrix>>,
}

impl From<&LinearPencil> for JsonPencil {
    fn from(l: &LinearPencil) -> Self {
        JsonPencil { gprime: l.gprime, g: l.g, dprime: l.dprime, d: l.d, coeffs: to_grid(&l.coeffs, l.gprime, l.g) }
    }
}

impl JsonPencil {
    pub fn to_pencil(&self) -> Result<LinearPencil> {
        if self.coeffs.len() != self.gprime {
            return Err(Error::Shape(format!("expected {} rows of coefficients, got {}", self.gprime, self.coeffs.len())));
        }
        let l = LinearPencil::new(self.gprime, self.g, grid_of(&self.coeffs)?)?;
        if (l.dprime, l.d) != (self.dprime, self.d) {
            return Err(Error::Shape(format!("declared {}x{} coefficients, found {}x{}", self.dprime, self.d, l.dprime, l.d)));
        }
        Ok(l)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonTerm {
    pub word: String,
    pub coeff: JsonMatrix,
}

/// A series file: homogeneous parts in degree order. The bare-list form
/// infers the grid from the largest letter indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonSeries {
    Full {
        gprime: usize,
        g: usize,
        #[serde(default)]
        truncated: bool,
        parts: Vec<Vec<JsonTerm>>,
    },
    Parts(Vec<Vec<JsonTerm>>),
}

fn parse_word(text: &str, gprime: usize, g: usize) -> Result<Word> {
    let t = text.trim();
    if t.is_empty() || t == "1" {
        return Ok(Word::empty());
    }
    let p = parse_poly(t, gprime, g, None)?;
    match p.terms().iter().next() {
        Some((w, c)) if p.num_terms() == 1 && c[(0, 0)] == C64::new(1.0, 0.0) => Ok(w.clone()),
        _ => Err(Error::Parse { pos: 0, msg: format!("`{t}` is not a single word") }),
    }
}

/// Largest row and column index among the letters `xRC` / `xR_C` in `text`.
fn letter_extent(text: &str) -> (usize, usize) {
    let mut ext = (1, 1);
    for tok in text.split(|c: char| c.is_whitespace() || c == '*') {
        let Some(rest) = tok.strip_prefix('x') else { continue };
        let (r, c) = match rest.split_once('_') {
            Some((r, c)) => (r.parse().unwrap_or(1), c.parse().unwrap_or(1)),
            None if rest.len() == 2 => (rest[..1].parse().unwrap_or(1), rest[1..].parse().unwrap_or(1)),
            None => (rest.parse().unwrap_or(1), 1),
        };
        ext = (ext.0.max(r), ext.1.max(c));
    }
    ext
}

impl JsonSeries {
    pub fn to_series(&self) -> Result<TruncatedSeries> {
        let (gprime, g, truncated, parts) = match self {
            JsonSeries::Full { gprime, g, truncated, parts } => (*gprime, *g, *truncated, parts),
            JsonSeries::Parts(parts) => {
                let (r, c) = parts.iter().flatten().map(|t| letter_extent(&t.word)).fold((1, 1), |a, b| (a.0.max(b.0), a.1.max(b.1)));
                (r, c, false, parts)
            }
        };
        let first = parts.iter().flatten().next().ok_or_else(|| Error::Shape("series has no terms".into()))?;
        let mut p = NcPoly::zero(gprime, g, first.coeff.rows, first.coeff.cols);
        for (k, part) in parts.iter().enumerate() {
            for t in part {
                let w = parse_word(&t.word, gprime, g)?;
                if w.len() != k {
                    return Err(Error::Shape(format!("word `{}` of length {} listed in part {k}", t.word, w.len())));
                }
                let c = t.coeff.to_matrix()?;
                if c.shape() != p.shape() {
                    return Err(Error::Shape(format!("coefficient of `{}` is {}x{}", t.word, c.nrows(), c.ncols())));
                }
                p.add_term(w, c);
            }
        }
        Ok(TruncatedSeries { poly: p, max_degree: parts.len().saturating_sub(1), truncated })
    }

    pub fn from_series(s: &TruncatedSeries) -> Self {
        let (gprime, g) = s.grid();
        let mut parts: Vec<Vec<JsonTerm>> = vec![Vec::new(); s.max_degree + 1];
        for (w, a) in s.poly.terms() {
            parts[w.len()].push(JsonTerm { word: w.render(gprime, g), coeff: JsonMatrix::from(a) });
        }
        JsonSeries::Full { gprime, g, truncated: s.truncated, parts }
    }
}

/// A polynomial file: text over a grid with optional named coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JsonPoly {
    pub gprime: usize,
    pub g: usize,
    pub text: String,
    #[serde(default)]
    pub coefficients: BTreeMap<String, JsonMatrix>,
}

impl JsonPoly {
    pub fn to_poly(&self) -> Result<NcPoly> {
        let table: CoeffTable = self.coefficients.iter().map(|(k, v)| Ok((k.clone(), v.to_matrix()?))).collect::<Result<_>>()?;
        parse_poly(&self.text, self.gprime, self.g, Some(&table))
    }

    pub fn from_poly(p: &NcPoly) -> Self {
        let (gprime, g) = p.grid();
        if p.shape() == (1, 1) {
            if let Ok(text) = p.to_text() {
                return JsonPoly { gprime, g, text, coefficients: BTreeMap::new() };
            }
        }
        let (text, table) = p.to_text_with_table();
        JsonPoly { gprime, g, text, coefficients: table.iter().map(|(k, v)| (k.clone(), JsonMatrix::from(v))).collect() }
    }
}
