//! Indexing and search cost counters.

use serde::{Deserialize, Serialize};

use super::{Cutoff, InvertedIndex};
use crate::embedding::SparseCode;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub m: usize,
    /// Sum of posting lengths, the indexing cost.
    pub total_postings: usize,
    pub mean_posting_len: f64,
    pub max_posting_len: usize,
    pub mean_k: f64,
    /// `n * mean_k`.
    pub model_nk: f64,
    /// `n * mean_k^2 / m`, expected postings touched per query.
    pub model_nk2_over_m: f64,
    pub queries: usize,
    /// Mean postings touched per measured query.
    pub measured_mean_examined: Option<f64>,
    pub measured_max_examined: Option<usize>,
}

pub fn index_stats(index: &InvertedIndex) -> CostReport {
    let n = index.len();
    let m = index.config().m;
    let total = index.total_postings();
    let mean_k = if n == 0 { 0.0 } else { total as f64 / n as f64 };
    CostReport {
        n,
        m,
        total_postings: total,
        mean_posting_len: if m == 0 { 0.0 } else { total as f64 / m as f64 },
        max_posting_len: index.postings().iter().map(Vec::len).max().unwrap_or(0),
        mean_k,
        model_nk: n as f64 * mean_k,
        model_nk2_over_m: if m == 0 { 0.0 } else { n as f64 * mean_k * mean_k / m as f64 },
        queries: 0,
        measured_mean_examined: None,
        measured_max_examined: None,
    }
}

/// [`index_stats`] plus counters from actually running `queries`.
pub fn measure_search_cost(index: &InvertedIndex, queries: &[SparseCode]) -> Result<CostReport> {
    let mut report = index_stats(index);
    let mut total = 0usize;
    let mut max = 0usize;
    for q in queries {
        let out = index.search_with(q, Cutoff::TopK { k: 1 }, Default::default())?;
        total += out.examined;
        max = max.max(out.examined);
    }
    report.queries = queries.len();
    if !queries.is_empty() {
        report.measured_mean_examined = Some(total as f64 / queries.len() as f64);
        report.measured_max_examined = Some(max);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{self, TransformKind};
    use crate::index::{build_index, IndexConfig};
    use crate::{analysis, rng};

    #[test]
    fn empty_index_is_all_zero() {
        let cfg = IndexConfig::new(64, 0.5, 1.0, TransformKind::Gaussian, 2, 0).unwrap();
        let r = index_stats(&build_index(vec![], cfg).unwrap());
        assert_eq!(r.n, 0);
        assert_eq!(r.total_postings, 0);
        assert_eq!(r.max_posting_len, 0);
        assert_eq!(r.mean_k, 0.0);
        assert_eq!(r.model_nk2_over_m, 0.0);
    }

    #[test]
    fn measured_examined_tracks_model() {
        let m = 1 << 12;
        let d = 32;
        let cfg = IndexConfig::new(m, 0.5, 1.0, TransformKind::Structured, d, 5).unwrap();
        let t = embedding::make_transform(cfg.kind, d, m, cfg.seed).unwrap();
        let mut g = rng::seeded(1);
        let code = |g: &mut rng::Rng| {
            let x = embedding::UnitVector::new(rng::random_unit(g, d)).unwrap();
            embedding::map_vector(&t, &x, cfg.h_index).unwrap()
        };
        let docs: Vec<_> = (0..2000).map(|i| (format!("{i}"), code(&mut g))).collect();
        let total_k: usize = docs.iter().map(|(_, c)| c.k()).sum();
        let index = build_index(docs, cfg).unwrap();
        let queries: Vec<_> = (0..50).map(|_| code(&mut g)).collect();
        let r = measure_search_cost(&index, &queries).unwrap();
        assert_eq!(r.total_postings, total_k);
        let measured = r.measured_mean_examined.unwrap();
        let model = r.model_nk2_over_m;
        assert!(measured <= 3.0 * model && measured >= model / 3.0, "{measured} vs {model}");
        let expected_k = analysis::expected_sparsity(m, 0.5).unwrap().exact;
        assert!((r.mean_k / expected_k - 1.0).abs() < 0.1);
    }
}
