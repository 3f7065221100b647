//! Retrieval quality against exact inner products.

use std::collections::HashSet;
use std::hash::Hash;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::embedding::UnitVector;
use crate::engine::SearchEngine;
use crate::index::Cutoff;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    /// Nothing was retrieved; precision set to 1.
    pub precision_undefined: bool,
    /// Nothing was relevant; recall set to 1.
    pub recall_undefined: bool,
}

pub fn precision_recall<T: Eq + Hash>(relevant: &HashSet<T>, retrieved: &HashSet<T>) -> PrecisionRecall {
    let hits = relevant.intersection(retrieved).count() as f64;
    let ratio = |den: usize| if den == 0 { 1.0 } else { hits / den as f64 };
    PrecisionRecall {
        precision: ratio(retrieved.len()),
        recall: ratio(relevant.len()),
        precision_undefined: retrieved.is_empty(),
        recall_undefined: relevant.is_empty(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    EpsRelevant,
    Gray,
    EpsIrrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub doc_id: String,
    pub true_inner: f64,
    /// `true_inner >= lambda`.
    pub relevant: bool,
    pub band: Band,
}

impl RelevanceJudgment {
    pub fn new(doc_id: String, true_inner: f64, lambda: f64, eps_minus: f64, eps_plus: f64) -> Self {
        let band = if true_inner >= lambda + eps_plus {
            Band::EpsRelevant
        } else if true_inner <= lambda - eps_minus {
            Band::EpsIrrelevant
        } else {
            Band::Gray
        };
        RelevanceJudgment {
            doc_id,
            true_inner,
            relevant: true_inner >= lambda,
            band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    /// Irrelevant documents that were retrieved.
    pub type_i: usize,
    /// Relevant documents that were missed.
    pub type_ii: usize,
    pub gray_retrieved: usize,
    pub gray_excluded: usize,
    /// Decisions outside the gray band that were right.
    pub correct: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.type_i + self.type_ii + self.gray_retrieved + self.gray_excluded + self.correct
    }
}

pub fn count_error_events(judgments: &[RelevanceJudgment], retrieved: &HashSet<String>) -> ErrorCounts {
    let mut c = ErrorCounts::default();
    for j in judgments {
        let got = retrieved.contains(&j.doc_id);
        match (j.band, got) {
            (Band::EpsIrrelevant, true) => c.type_i += 1,
            (Band::EpsRelevant, false) => c.type_ii += 1,
            (Band::Gray, true) => c.gray_retrieved += 1,
            (Band::Gray, false) => c.gray_excluded += 1,
            _ => c.correct += 1,
        }
    }
    c
}

/// Mean precision and recall over queries at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    /// Retrieval count threshold `m * mu(threshold)`.
    pub m_mu: f64,
    pub precision: f64,
    pub recall: f64,
    pub se_precision: f64,
    pub se_recall: f64,
    pub queries: usize,
    /// Queries where nothing was retrieved.
    pub undefined_precision: usize,
    /// Queries where nothing was relevant.
    pub undefined_recall: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact inner products of `query` with every corpus vector, clamped to `[-1, 1]`.
fn true_inners(query: &UnitVector, corpus: &[(String, UnitVector)]) -> Result<Vec<f64>> {
    corpus
        .iter()
        .map(|(_, x)| Ok(query.dot(x)?.clamp(-1.0, 1.0)))
        .collect()
}

/// Raw counts of every corpus document against `query`, in corpus order.
fn counts(engine: &SearchEngine, query: &UnitVector, corpus: &[(String, UnitVector)]) -> Result<Vec<u32>> {
    let index = engine.index();
    let code = engine.encode_query(query)?;
    let all = index.search_with(&code, Cutoff::ThresholdLambda { lambda: -1.0 }, Default::default())?;
    let mut by_doc = vec![0u32; index.len()];
    for r in all.results {
        by_doc[r.doc as usize] = r.raw_count;
    }
    corpus
        .iter()
        .map(|(id, _)| {
            index
                .find_doc(id)
                .map(|d| by_doc[d as usize])
                .ok_or_else(|| Error::UnknownDocId(id.clone()))
        })
        .collect()
}

/// For each `T`: relevant means `<x, y> >= T`, retrieved means
/// `raw_count >= m * mu(T)`. Averaged over queries.
pub fn pr_curve(
    engine: &SearchEngine,
    corpus: &[(String, UnitVector)],
    queries: &[UnitVector],
    thresholds: &[f64],
) -> Result<Vec<PrPoint>> {
    if queries.is_empty() {
        return Err(Error::EmptyInput);
    }
    let resolved = thresholds
        .iter()
        .map(|&t| Cutoff::ThresholdLambda { lambda: t }.resolve(engine.config()))
        .collect::<Result<Vec<_>>>()?;
    let per_query: Vec<Vec<PrecisionRecall>> = queries
        .par_iter()
        .map(|q| {
            let inner = true_inners(q, corpus)?;
            let count = counts(engine, q, corpus)?;
            Ok(thresholds
                .iter()
                .zip(&resolved)
                .map(|(&t, cut)| {
                    let min = cut.min_count.expect("threshold cutoff");
                    let relevant: HashSet<usize> = (0..corpus.len()).filter(|&i| inner[i] >= t).collect();
                    let retrieved: HashSet<usize> = (0..corpus.len()).filter(|&i| count[i] >= min).collect();
                    precision_recall(&relevant, &retrieved)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(thresholds
        .iter()
        .zip(&resolved)
        .enumerate()
        .map(|(j, (&t, cut))| {
            let ps: Vec<f64> = per_query.iter().map(|q| q[j].precision).collect();
            let rs: Vec<f64> = per_query.iter().map(|q| q[j].recall).collect();
            let (precision, se_precision) = mean_se(&ps);
            let (recall, se_recall) = mean_se(&rs);
            PrPoint {
                threshold: t,
                m_mu: cut.m_mu.expect("threshold cutoff"),
                precision,
                recall,
                se_precision,
                se_recall,
                queries: queries.len(),
                undefined_precision: per_query.iter().filter(|q| q[j].precision_undefined).count(),
                undefined_recall: per_query.iter().filter(|q| q[j].recall_undefined).count(),
            }
        })
        .collect())
}

/// Area under the interpolated precision curve `p*(r) = max{p_i : r_i >= r}`
/// over recall in `[0, 1]`, zero past the largest recall reached.
pub fn pr_auc(points: &[PrPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.recall.clamp(0.0, 1.0), p.precision.clamp(0.0, 1.0)))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut area = 0.0;
    let mut best = 0.0f64;
    for (i, &(r, p)) in pts.iter().enumerate() {
        best = best.max(p);
        let next = pts.get(i + 1).map_or(0.0, |q| q.0);
        area += best * (r - next);
    }
    area
}

/// Error events of one query at level `lambda`, with bands from `eta`.
pub fn query_errors(
    engine: &SearchEngine,
    corpus: &[(String, UnitVector)],
    query: &UnitVector,
    lambda: f64,
    eta: f64,
) -> Result<ErrorCounts> {
    let c = engine.config();
    let (eps_minus, eps_plus) = analysis::solve_epsilons(lambda, c.m, c.r, eta)?.both()?;
    let inner = true_inners(query, corpus)?;
    let judgments: Vec<_> = corpus
        .iter()
        .zip(inner)
        .map(|((id, _), t)| RelevanceJudgment::new(id.clone(), t, lambda, eps_minus, eps_plus))
        .collect();
    let retrieved = engine
        .search_vector(query, Cutoff::ThresholdLambda { lambda })?
        .results
        .into_iter()
        .map(|r| r.doc_id)
        .collect();
    Ok(count_error_events(&judgments, &retrieved))
}

pub fn write_pr_csv<W: Write>(points: &[PrPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::TransformKind;
    use crate::index::IndexConfig;

    fn set(xs: &[u32]) -> HashSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn pr_examples() {
        let r = precision_recall(&set(&[1, 2]), &set(&[1, 2]));
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
        let r = precision_recall(&set(&[1, 2]), &set(&[3]));
        assert_eq!((r.precision, r.recall), (0.0, 0.0));
        let r = precision_recall(&set(&[1, 2, 3, 4, 5, 6, 7, 8]), &set(&[1, 2, 9, 10]));
        assert_eq!((r.precision, r.recall), (0.5, 0.25));
        let r = precision_recall(&set(&[]), &set(&[]));
        assert!(r.precision_undefined && r.recall_undefined);
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
    }

    #[test]
    fn bands() {
        let j = |t| RelevanceJudgment::new("a".into(), t, 0.5, 0.1, 0.2).band;
        assert_eq!(j(0.7), Band::EpsRelevant);
        assert_eq!(j(0.69), Band::Gray);
        assert_eq!(j(0.41), Band::Gray);
        assert_eq!(j(0.4), Band::EpsIrrelevant);
    }

    #[test]
    fn error_events() {
        let js = vec![
            RelevanceJudgment::new("rel".into(), 0.9, 0.5, 0.1, 0.1),
            RelevanceJudgment::new("irr".into(), 0.1, 0.5, 0.1, 0.1),
            RelevanceJudgment::new("gray".into(), 0.5, 0.5, 0.1, 0.1),
        ];
        let got: HashSet<String> = ["rel".to_string()].into();
        let c = count_error_events(&js, &got);
        assert_eq!((c.type_i, c.type_ii, c.correct, c.gray_excluded), (0, 0, 2, 1));
        let got: HashSet<String> = ["irr".to_string(), "gray".to_string()].into();
        let c = count_error_events(&js, &got);
        assert_eq!((c.type_i, c.type_ii, c.gray_retrieved), (1, 1, 1));
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn auc_shapes() {
        let pt = |r: f64, p: f64| PrPoint {
            threshold: 0.0,
            m_mu: 0.0,
            precision: p,
            recall: r,
            se_precision: 0.0,
            se_recall: 0.0,
            queries: 1,
            undefined_precision: 0,
            undefined_recall: 0,
        };
        assert_eq!(pr_auc(&[pt(1.0, 1.0)]), 1.0);
        assert_eq!(pr_auc(&[pt(0.5, 1.0)]), 0.5);
        assert!((pr_auc(&[pt(0.5, 1.0), pt(1.0, 0.5)]) - 0.75).abs() < 1e-15);
        assert_eq!(pr_auc(&[]), 0.0);
    }

    #[test]
    fn single_document_corpus() {
        let x = UnitVector::normalized(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let corpus = vec![("only".to_string(), x.clone())];
        let cfg = IndexConfig::new(1 << 12, 0.45, 1.0, TransformKind::Structured, 4, 1).unwrap();
        let engine = SearchEngine::build(&corpus, cfg).unwrap();
        let pts = pr_curve(&engine, &corpus, &[x], &[-1.0, 0.0, 0.5, 0.9, 0.99]).unwrap();
        for p in pts {
            assert_eq!((p.precision, p.recall), (1.0, 1.0), "T = {}", p.threshold);
        }
    }
}
