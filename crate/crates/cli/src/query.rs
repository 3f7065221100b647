//! Search requests shared by the CLI and the HTTP service, so both produce
//! identical results for identical parameters.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sphx_core::index::{Cutoff, ResolvedCutoff};
use sphx_core::{Error, SearchEngine, SparseCode, UnitVector};

/// Query vectors within this relative distance of unit norm are rescaled.
pub const NORM_SLACK: f64 = 0.01;
pub const DEFAULT_TOP_K: usize = 10;
pub const DEFAULT_ETA: f64 = 1.645;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    TopK,
    Threshold,
    NearestNeighbour,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default)]
    pub mode: SearchMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Query threshold multiplier, `h = sqrt(2 q r ln m)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySource {
    Vector,
    /// The stored vector of a document, re-encoded at the query threshold.
    DocVector,
    /// The stored code of a document (no vectors available).
    DocCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInfo {
    pub source: QuerySource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    /// Active dimensions of the query code.
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub rank: usize,
    pub doc_id: String,
    pub raw_count: u32,
    pub score: f64,
    /// Exact inner product, when both vectors are known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_inner: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: QueryInfo,
    pub cutoff: ResolvedCutoff,
    pub examined: usize,
    /// Results beyond the service limit were dropped.
    pub truncated: bool,
    pub results: Vec<ResultRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryError {
    BadRequest { kind: String, message: String },
    NotFound { kind: String, message: String },
    Unprocessable { kind: String, message: String },
    Internal { kind: String, message: String },
}

impl QueryError {
    fn bad(message: impl Into<String>) -> Self {
        QueryError::BadRequest {
            kind: "InvalidRequest".into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            QueryError::BadRequest { kind, .. }
            | QueryError::NotFound { kind, .. }
            | QueryError::Unprocessable { kind, .. }
            | QueryError::Internal { kind, .. } => kind,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            QueryError::BadRequest { message, .. }
            | QueryError::NotFound { message, .. }
            | QueryError::Unprocessable { message, .. }
            | QueryError::Internal { message, .. } => message,
        }
    }

    /// Map a library error; `band_mode` marks requests whose cutoff needs an
    /// error band, where an unusable similarity level is not a syntax problem.
    fn from_core(e: Error, band_mode: bool) -> Self {
        let kind = e.kind().to_string();
        let message = e.to_string();
        match e {
            Error::UnknownDocId(_) => QueryError::NotFound { kind, message },
            Error::InvalidCutoff(_) | Error::OutOfPhaseRegion { .. } | Error::NoSolution { .. } if band_mode => {
                QueryError::Unprocessable { kind, message }
            }
            Error::DimensionMismatch { .. }
            | Error::NotUnitNorm(_)
            | Error::ZeroVector(_)
            | Error::EmptyInput
            | Error::InvalidParams(_)
            | Error::InvalidCutoff(_)
            | Error::InvalidLambda(_)
            | Error::OutOfPhaseRegion { .. }
            | Error::NoSolution { .. } => QueryError::BadRequest { kind, message },
            _ => QueryError::Internal { kind, message },
        }
    }
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for QueryError {}

/// Rescale a client vector that is within [`NORM_SLACK`] of unit norm.
pub fn accept_vector(raw: Vec<f64>, d: usize) -> Result<UnitVector, QueryError> {
    if raw.len() != d {
        return Err(QueryError::from_core(Error::DimensionMismatch { expected: d, got: raw.len() }, false));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(QueryError::bad("vector has non-finite entries"));
    }
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_SLACK {
        return Err(QueryError::from_core(Error::NotUnitNorm(norm), false));
    }
    UnitVector::normalized(raw).map_err(|e| QueryError::from_core(e, false))
}

/// A loaded engine plus, optionally, the original document vectors.
#[derive(Debug, Clone)]
pub struct Store {
    pub engine: SearchEngine,
    pub vectors: Option<HashMap<String, UnitVector>>,
}

impl Store {
    pub fn new(engine: SearchEngine, vectors: Option<HashMap<String, UnitVector>>) -> Self {
        Store { engine, vectors }
    }

    pub fn cutoff(req: &SearchRequest) -> Result<Cutoff, QueryError> {
        Ok(match req.mode {
            SearchMode::TopK => Cutoff::TopK {
                k: req.k.unwrap_or(DEFAULT_TOP_K),
            },
            SearchMode::Threshold => Cutoff::ThresholdLambda {
                lambda: req.lambda.ok_or_else(|| QueryError::bad("threshold mode needs lambda"))?,
            },
            SearchMode::NearestNeighbour => Cutoff::NearestNeighbour {
                lambda0: req
                    .lambda
                    .ok_or_else(|| QueryError::bad("nearest_neighbour mode needs lambda"))?,
                eta: req.eta.unwrap_or(DEFAULT_ETA),
            },
        })
    }

    fn encode(&self, x: &UnitVector, q: Option<f64>) -> Result<SparseCode, QueryError> {
        match q {
            Some(q) => self.engine.encode_query_with_multiplier(x, q),
            None => self.engine.encode_query(x),
        }
        .map_err(|e| QueryError::from_core(e, false))
    }

    pub fn search(&self, req: &SearchRequest, max_results: Option<usize>) -> Result<SearchResponse, QueryError> {
        let band_mode = req.mode == SearchMode::NearestNeighbour;
        let cutoff = Self::cutoff(req)?;
        let d = self.engine.config().d;
        let (code, source, query_vec) = match (&req.vector, &req.doc_id) {
            (Some(_), Some(_)) => return Err(QueryError::bad("give either vector or doc_id, not both")),
            (None, None) => return Err(QueryError::bad("give a vector or a doc_id")),
            (Some(raw), None) => {
                let x = accept_vector(raw.clone(), d)?;
                (self.encode(&x, req.q)?, QuerySource::Vector, Some(x))
            }
            (None, Some(id)) => {
                let index = self.engine.index();
                let doc = index
                    .find_doc(id)
                    .ok_or_else(|| QueryError::from_core(Error::UnknownDocId(id.clone()), false))?;
                match self.vectors.as_ref().and_then(|v| v.get(id)) {
                    Some(x) => (self.encode(x, req.q)?, QuerySource::DocVector, Some(x.clone())),
                    None if req.q.is_some() => {
                        return Err(QueryError::bad("q needs the document vector, which is not loaded"))
                    }
                    None => (index.code(doc), QuerySource::DocCode, None),
                }
            }
        };
        let outcome = self
            .engine
            .search_code(&code, cutoff)
            .map_err(|e| QueryError::from_core(e, band_mode))?;
        let total = outcome.results.len();
        let keep = max_results.unwrap_or(usize::MAX).min(total);
        let results = outcome
            .results
            .into_iter()
            .take(keep)
            .enumerate()
            .map(|(i, r)| {
                let true_inner = match (&query_vec, &self.vectors) {
                    (Some(q), Some(vs)) => vs.get(&r.doc_id).and_then(|v| q.dot(v).ok()),
                    _ => None,
                };
                ResultRow {
                    rank: i + 1,
                    doc_id: r.doc_id,
                    raw_count: r.raw_count,
                    score: r.score,
                    true_inner,
                }
            })
            .collect();
        Ok(SearchResponse {
            query: QueryInfo {
                source,
                doc_id: req.doc_id.clone(),
                k: code.k(),
            },
            cutoff: outcome.cutoff,
            examined: outcome.examined,
            truncated: keep < total,
            results,
        })
    }
}
