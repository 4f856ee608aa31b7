//! Noncommutative polynomials, matrix balls and ball maps between them.

pub mod ballmap;
pub mod balls;
pub mod clinging;
pub mod error;
pub mod fock;
pub mod io;
pub mod isometry;
pub mod linalg;
pub mod moebius;
pub mod ncpoly;
pub mod nullss;
pub mod par;
pub mod report;
pub mod rng;
pub mod suite;

pub use error::{Error, Result};
