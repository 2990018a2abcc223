//! Unsatisfiable matrices and lower bounds for the Komlós conjecture.
//!
//! The crate turns unsatisfiable Boolean formulas (and the binary trees that
//! generate deficiency-one formulas) into sign matrices, normalizes them to
//! unit column norm, and computes or certifies the minimum row ℓ¹ norm δ,
//! which lower-bounds the discrepancy of any unsatisfiable matrix.
//!
//! Modules, bottom up:
//!
//! - [`boolean`]: CNF and NAE-CNF formulas, brute-force satisfiability, DIMACS I/O.
//! - [`tree`]: full binary trees and the formulas `F_T` they generate.
//! - [`matrix`]: clause-variable matrices, the Haar family, δ, exact discrepancy.
//! - [`normopt`]: the optimal-normalization cone program and its dual solver.
//! - [`resolution`]: tree resolution proofs, a DPLL refuter, variable splitting.
//! - [`certificates`]: dual certificates, the path-partition sampler, effective depths.
//! - [`stick`]: the stick game and its correspondence with tree normalizations.
//! - [`scan`]: seeded randomized scans producing JSON-lines records.

pub mod boolean;
pub mod certificates;
pub mod matrix;
pub mod normopt;
pub mod resolution;
pub mod scan;
pub mod sexpr;
pub mod stick;
pub mod tree;

mod error;

pub use error::{Error, Result};

/// 1 + √2, the supremum of every bound in this crate.
pub const ONE_PLUS_SQRT2: f64 = 1.0 + std::f64::consts::SQRT_2;

/// Largest number of variables any exhaustive enumeration accepts.
pub const ENUMERATION_LIMIT: usize = 24;

/// `2^{-k/2} + Σ_{a=1}^k 2^{-a/2}`, the row ℓ¹ norm of the normalized
/// complete-tree matrix of depth `k`.
pub fn complete_tree_value(k: u32) -> f64 {
    let tail: f64 = (1..=k).map(|a| 2f64.powf(-(a as f64) / 2.0)).sum();
    2f64.powf(-(k as f64) / 2.0) + tail
}
