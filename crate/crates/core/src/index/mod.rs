//! Inverted index over sparse codes.
//!
//! Each of the `m` code dimensions owns a posting list of the documents that
//! activate it. A query walks only the lists of its own active dimensions and
//! accumulates one count per touched document; that count is `m` times the
//! overlap score.

mod format;
mod stats;
mod tokens;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use format::{load_index, save_index, MAGIC};
pub use stats::{index_stats, measure_search_cost, CostReport};
pub use tokens::{export_tokens, parse_token_line, parse_tokens, token_string, write_token_lines};

use crate::analysis::{self, phase_region, PhaseRegion};
use crate::embedding::{SparseCode, TransformKind};
use crate::{Error, Result};

/// Parameters fixed at build time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub m: usize,
    pub r: f64,
    /// Threshold used to encode documents.
    pub h_index: f64,
    /// Threshold used to encode queries; never below `h_index`.
    pub h_query: f64,
    pub kind: TransformKind,
    pub d: usize,
    pub seed: u64,
}

impl IndexConfig {
    /// `h_index = sqrt(2 r ln m)` and `h_query = sqrt(2 q r ln m)` for a query
    /// multiplier `q >= 1`.
    pub fn new(
        m: usize,
        r: f64,
        query_multiplier: f64,
        kind: TransformKind,
        d: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(query_multiplier >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "query multiplier {query_multiplier} must be >= 1"
            )));
        }
        let config = IndexConfig {
            m,
            r,
            h_index: analysis::threshold_h(m, r)?,
            h_query: analysis::threshold_h(m, query_multiplier * r)?,
            kind,
            d,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(Error::InvalidDimensions(format!("d = {}, m = {}", self.d, self.m)));
        }
        if !(self.h_index >= 0.0) || !(self.h_query >= self.h_index) {
            return Err(Error::InvalidParams(format!(
                "need 0 <= h_index <= h_query, got {} and {}",
                self.h_index, self.h_query
            )));
        }
        Ok(())
    }
}

/// How many results a search returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Cutoff {
    /// Every document with `raw_count >= m * mu(lambda)` (`mu` at `h_index`).
    ThresholdLambda { lambda: f64 },
    /// The `k` best documents that share at least one active dimension.
    TopK { k: usize },
    /// Threshold at `mu(lambda0 - eps-)`, with `eps-` solved for `eta`.
    NearestNeighbour { lambda0: f64, eta: f64 },
}

/// A cutoff turned into concrete numbers for one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedCutoff {
    pub cutoff: Cutoff,
    /// Similarity level the threshold is placed at.
    pub lambda: Option<f64>,
    /// `m * mu(lambda)`.
    pub m_mu: Option<f64>,
    /// Smallest integer count that passes, `ceil(m * mu)`.
    pub min_count: Option<u32>,
}

impl Cutoff {
    pub fn resolve(&self, config: &IndexConfig) -> Result<ResolvedCutoff> {
        let lambda = match *self {
            Cutoff::TopK { .. } => {
                return Ok(ResolvedCutoff {
                    cutoff: *self,
                    lambda: None,
                    m_mu: None,
                    min_count: None,
                })
            }
            Cutoff::ThresholdLambda { lambda } => {
                if !(-1.0..=1.0).contains(&lambda) {
                    return Err(Error::InvalidCutoff(format!("lambda = {lambda} outside [-1, 1]")));
                }
                lambda
            }
            Cutoff::NearestNeighbour { lambda0, eta } => {
                if phase_region(lambda0, config.r) != PhaseRegion::Gaussian || lambda0 >= 1.0 {
                    return Err(Error::InvalidCutoff(format!(
                        "lambda0 = {lambda0} outside ({}, 1)",
                        2.0 * config.r - 1.0
                    )));
                }
                let eps = analysis::solve_epsilons(lambda0, config.m, config.r, eta)?.minus()?;
                (lambda0 - eps).max(-1.0)
            }
        };
        let m_mu = config.m as f64 * analysis::mu(lambda, config.h_index)?.mu;
        let min_count = m_mu.ceil().min(u32::MAX as f64) as u32;
        Ok(ResolvedCutoff {
            cutoff: *self,
            lambda: Some(lambda),
            m_mu: Some(m_mu),
            min_count: Some(min_count),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Internal document number (rank of `doc_id` in sorted order).
    pub doc: u32,
    pub doc_id: String,
    /// Shared active dimensions, `m * score`.
    pub raw_count: u32,
    /// `raw_count / m`.
    pub score: f64,
    pub retrieved_by: Cutoff,
}

/// Results plus the work done to get them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub results: Vec<SearchResult>,
    pub cutoff: ResolvedCutoff,
    /// Posting entries traversed.
    pub examined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulator {
    /// Dense for small corpora or heavy posting traffic, sparse otherwise.
    #[default]
    Auto,
    /// One counter per document.
    Dense,
    /// Hash map keyed by touched documents.
    Sparse,
}

/// Posting lists for a fixed corpus. Immutable after [`build_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    config: IndexConfig,
    doc_ids: Vec<String>,
    postings: Vec<Vec<u32>>,
    doc_k: Vec<u32>,
}

/// Build posting lists. Documents are numbered by sorted `doc_id`, so the
/// result does not depend on input order.
pub fn build_index(codes: Vec<(String, SparseCode)>, config: IndexConfig) -> Result<InvertedIndex> {
    config.validate()?;
    let mut codes = codes;
    for (_, code) in &codes {
        if code.m() != config.m {
            return Err(Error::CodeLengthMismatch(config.m, code.m()));
        }
    }
    codes.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = codes.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateDocId(w[0].0.clone()));
    }
    if codes.len() > u32::MAX as usize {
        return Err(Error::InvalidParams("more than 2^32 documents".into()));
    }
    let mut postings = vec![Vec::new(); config.m];
    let mut doc_k = Vec::with_capacity(codes.len());
    let mut doc_ids = Vec::with_capacity(codes.len());
    for (doc, (id, code)) in codes.into_iter().enumerate() {
        for &i in code.support() {
            postings[i as usize].push(doc as u32);
        }
        doc_k.push(code.k() as u32);
        doc_ids.push(id);
    }
    Ok(InvertedIndex {
        config,
        doc_ids,
        postings,
        doc_k,
    })
}

impl InvertedIndex {
    pub(crate) fn from_parts(
        config: IndexConfig,
        doc_ids: Vec<String>,
        postings: Vec<Vec<u32>>,
    ) -> Self {
        let mut doc_k = vec![0u32; doc_ids.len()];
        for list in &postings {
            for &doc in list {
                doc_k[doc as usize] += 1;
            }
        }
        InvertedIndex {
            config,
            doc_ids,
            postings,
            doc_k,
        }
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    /// Number of documents.
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn find_doc(&self, doc_id: &str) -> Option<u32> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()
            .map(|i| i as u32)
    }

    pub fn postings(&self) -> &[Vec<u32>] {
        &self.postings
    }

    /// Active-dimension count of each document.
    pub fn doc_k(&self) -> &[u32] {
        &self.doc_k
    }

    pub fn total_postings(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    /// Code of one document, rebuilt from the posting lists.
    pub fn code(&self, doc: u32) -> SparseCode {
        let support = self
            .postings
            .iter()
            .enumerate()
            .filter(|(_, list)| list.binary_search(&doc).is_ok())
            .map(|(i, _)| i as u32)
            .collect();
        SparseCode::new(self.config.m, support).expect("posting lists are canonical")
    }

    /// All document codes, in document order.
    pub fn codes(&self) -> Vec<(String, SparseCode)> {
        let mut supports = vec![Vec::new(); self.len()];
        for (i, list) in self.postings.iter().enumerate() {
            for &doc in list {
                supports[doc as usize].push(i as u32);
            }
        }
        self.doc_ids
            .iter()
            .cloned()
            .zip(supports)
            .map(|(id, s)| (id, SparseCode::new(self.config.m, s).expect("ascending")))
            .collect()
    }

    pub fn search(&self, query: &SparseCode, cutoff: Cutoff) -> Result<Vec<SearchResult>> {
        Ok(self.search_with(query, cutoff, Accumulator::Auto)?.results)
    }

    pub fn search_with(
        &self,
        query: &SparseCode,
        cutoff: Cutoff,
        accumulator: Accumulator,
    ) -> Result<SearchOutcome> {
        if query.m() != self.config.m {
            return Err(Error::CodeLengthMismatch(self.config.m, query.m()));
        }
        let resolved = cutoff.resolve(&self.config)?;
        let examined: usize = query
            .support()
            .iter()
            .map(|&i| self.postings[i as usize].len())
            .sum();
        let n = self.len();
        let dense = match accumulator {
            Accumulator::Dense => true,
            Accumulator::Sparse => false,
            Accumulator::Auto => n <= 1 << 16 || examined.saturating_mul(8) >= n,
        };
        let mut hits = if dense {
            self.accumulate_dense(query)
        } else {
            self.accumulate_sparse(query)
        };

        if resolved.min_count == Some(0) {
            // Everything passes, including documents never touched.
            let mut all = vec![0u32; n];
            for &(doc, c) in &hits {
                all[doc as usize] = c;
            }
            hits = all.into_iter().enumerate().map(|(d, c)| (d as u32, c)).collect();
        }
        hits.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        match cutoff {
            Cutoff::TopK { k } => hits.truncate(k),
            _ => {
                let min = resolved.min_count.expect("threshold modes resolve a count");
                hits.retain(|&(_, c)| c >= min);
            }
        }
        let m = self.config.m as f64;
        let results = hits
            .into_iter()
            .map(|(doc, c)| SearchResult {
                doc,
                doc_id: self.doc_ids[doc as usize].clone(),
                raw_count: c,
                score: c as f64 / m,
                retrieved_by: cutoff,
            })
            .collect();
        Ok(SearchOutcome {
            results,
            cutoff: resolved,
            examined,
        })
    }

    fn accumulate_dense(&self, query: &SparseCode) -> Vec<(u32, u32)> {
        let mut counts = vec![0u32; self.len()];
        let mut touched = Vec::new();
        for &i in query.support() {
            for &doc in &self.postings[i as usize] {
                let c = &mut counts[doc as usize];
                if *c == 0 {
                    touched.push(doc);
                }
                *c += 1;
            }
        }
        touched.into_iter().map(|d| (d, counts[d as usize])).collect()
    }

    fn accumulate_sparse(&self, query: &SparseCode) -> Vec<(u32, u32)> {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for &i in query.support() {
            for &doc in &self.postings[i as usize] {
                *counts.entry(doc).or_default() += 1;
            }
        }
        counts.into_iter().collect()
    }
}
