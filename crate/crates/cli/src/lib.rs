//! Command-line pipeline and HTTP search service on top of `sphx-core`.

pub mod commands;
pub mod query;
pub mod service;

pub use query::{QueryError, SearchRequest, SearchResponse, Store};
