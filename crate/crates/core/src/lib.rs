//! Similarity search over sparse binary codes.
//!
//! Unit vectors are pushed through a random linear map (a dense Gaussian
//! matrix, or random sign flips followed by a DCT-II) and every output
//! coordinate at or above a threshold `h` becomes an active dimension of the
//! document's code. Codes are stored in posting lists and queries are scored
//! by the number of active dimensions they share with each document.
//!
//! Besides the engine itself the crate carries the statistics needed to
//! predict its behaviour (sparsity, the joint-activation probability `mu`,
//! error bands `eps-`/`eps+`, Berry-Esseen bounds) and Monte Carlo harnesses
//! that check those predictions.
//!
//! ```
//! use sphx_core::{analysis, embedding::{self, TransformKind, UnitVector}};
//!
//! let m = 1 << 12;
//! let h = analysis::threshold_h(m, 0.5).unwrap();
//! let t = embedding::make_transform(TransformKind::Structured, 3, m, 7).unwrap();
//! let x = UnitVector::normalized(vec![1.0, 2.0, 2.0]).unwrap();
//! let code = embedding::map_vector(&t, &x, h).unwrap();
//! assert_eq!(embedding::score(&code, &code).unwrap(), code.k() as f64 / m as f64);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod engine;
mod error;
pub mod evaluate;
pub mod index;
pub mod rng;
pub mod simulate;

pub use embedding::{
    ProjectionVector, SparseCode, Transform, TransformKind, UnitVector,
};
pub use engine::SearchEngine;
pub use error::{Error, Result, Side};
pub use index::{Cutoff, IndexConfig, InvertedIndex, SearchResult};
