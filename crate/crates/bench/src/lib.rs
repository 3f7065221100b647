//! Shared fixtures for the benchmarks.

use sphx_core::rng::{random_unit, seeded};
use sphx_core::{IndexConfig, SearchEngine, TransformKind, UnitVector};

/// `n` random unit vectors of dimension `d`, labelled `x0`, `x1`, ...
pub fn unit_vectors(n: usize, d: usize, seed: u64) -> Vec<(String, UnitVector)> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|i| (format!("x{i}"), UnitVector::new(random_unit(&mut rng, d)).unwrap()))
        .collect()
}

pub fn engine(n: usize, d: usize, m: usize, r: f64, kind: TransformKind) -> SearchEngine {
    let docs = unit_vectors(n, d, 1);
    let config = IndexConfig::new(m, r, 1.0, kind, d, 7).unwrap();
    SearchEngine::build(&docs, config).unwrap()
}
