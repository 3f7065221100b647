//! Transform and index bundled together.

use rayon::prelude::*;

use crate::analysis;
use crate::embedding::{self, make_transform, SparseCode, Transform, TransformKind, UnitVector};
use crate::index::{build_index, Accumulator, Cutoff, IndexConfig, InvertedIndex, SearchOutcome};
use crate::{Error, Result};

/// Largest Gaussian matrix (in entries) kept in memory instead of regenerated.
const MATERIALIZE_LIMIT: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct SearchEngine {
    transform: Transform,
    index: InvertedIndex,
}

fn transform_for(config: &IndexConfig) -> Result<Transform> {
    let t = make_transform(config.kind, config.d, config.m, config.seed)?;
    Ok(if config.kind == TransformKind::Gaussian && config.d * config.m <= MATERIALIZE_LIMIT {
        t.materialize()
    } else {
        t
    })
}

/// Encode many vectors at threshold `h`, in input order.
pub fn encode_all(t: &Transform, xs: &[&UnitVector], h: f64) -> Result<Vec<SparseCode>> {
    if t.kind() == TransformKind::Gaussian && !t.is_materialized() {
        // Regenerating the matrix dominates; share each pass across a chunk.
        return xs
            .chunks(256)
            .map(|chunk| t.apply_batch(chunk))
            .collect::<Result<Vec<_>>>()
            .map(|batches| {
                batches
                    .into_iter()
                    .flatten()
                    .map(|p| embedding::encode(&p, h))
                    .collect()
            });
    }
    xs.par_iter().map(|x| embedding::map_vector(t, x, h)).collect()
}

impl SearchEngine {
    /// Encode every document at `h_index` and build the index.
    pub fn build(corpus: &[(String, UnitVector)], config: IndexConfig) -> Result<Self> {
        config.validate()?;
        let transform = transform_for(&config)?;
        let xs: Vec<&UnitVector> = corpus.iter().map(|(_, x)| x).collect();
        let codes = encode_all(&transform, &xs, config.h_index)?;
        let docs = corpus.iter().map(|(id, _)| id.clone()).zip(codes).collect();
        let index = build_index(docs, config)?;
        Ok(SearchEngine { transform, index })
    }

    /// Wrap a loaded index, regenerating its transform from the stored seed.
    pub fn from_index(index: InvertedIndex) -> Result<Self> {
        let transform = transform_for(index.config())?;
        Ok(SearchEngine { transform, index })
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn config(&self) -> &IndexConfig {
        self.index.config()
    }

    /// Query code at the index's `h_query`.
    pub fn encode_query(&self, x: &UnitVector) -> Result<SparseCode> {
        embedding::map_vector(&self.transform, x, self.config().h_query)
    }

    /// Query code at `h = sqrt(2 q r ln m)` for a per-request multiplier `q >= 1`.
    pub fn encode_query_with_multiplier(&self, x: &UnitVector, q: f64) -> Result<SparseCode> {
        if !(q >= 1.0) {
            return Err(Error::InvalidParams(format!("query multiplier {q} must be >= 1")));
        }
        let c = self.config();
        embedding::map_vector(&self.transform, x, analysis::threshold_h(c.m, q * c.r)?)
    }

    pub fn search_code(&self, query: &SparseCode, cutoff: Cutoff) -> Result<SearchOutcome> {
        self.index.search_with(query, cutoff, Accumulator::Auto)
    }

    pub fn search_vector(&self, x: &UnitVector, cutoff: Cutoff) -> Result<SearchOutcome> {
        self.search_code(&self.encode_query(x)?, cutoff)
    }

    /// Search with a stored document's code as the query.
    pub fn search_doc(&self, doc_id: &str, cutoff: Cutoff) -> Result<SearchOutcome> {
        let doc = self
            .index
            .find_doc(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        self.search_code(&self.index.code(doc), cutoff)
    }
}
