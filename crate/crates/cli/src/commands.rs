//! Subcommands of the `sphx` binary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sphx_core::analysis;
use sphx_core::corpus::{self, Corpus, Format, RawCorpus};
use sphx_core::evaluate;
use sphx_core::index::{self, index_stats, load_index, save_index, IndexConfig};
use sphx_core::simulate::{self, ExperimentSpec, Mode, Sampler};
use sphx_core::{SearchEngine, TransformKind, UnitVector};

use crate::query::{QueryError, SearchMode, SearchRequest, Store};
use crate::service::{self, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "sphx", version, about = "Sparse-code similarity search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a vector corpus (CSV, JSONL, price series or raw values to bin).
    Ingest(IngestArgs),
    /// Encode a vector store and write an index file.
    Index(IndexArgs),
    /// Query an index with a vector or a stored document.
    Search(SearchArgs),
    /// Write one `doc_id<TAB>tokens` line per indexed document.
    ExportTokens(ExportArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Tabulate mu, sigma, error bands and Berry-Esseen bounds over a grid.
    Tabulate(TabulateArgs),
    /// Precision-recall evaluation against exact inner products.
    Eval(EvalArgs),
    /// Start the HTTP search service.
    Serve(ServeArgs),
}

/// A failure with its exit code and a stable error name.
#[derive(Debug)]
pub struct CliError {
    pub exit: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }

    fn missing(path: &Path) -> Self {
        CliError {
            exit: 2,
            kind: "MissingInput".into(),
            message: format!("no such file: {}", path.display()),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError {
            exit: 2,
            kind: "UsageError".into(),
            message: message.into(),
        }
    }
}

impl From<sphx_core::Error> for CliError {
    fn from(e: sphx_core::Error) -> Self {
        CliError {
            exit: 1,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> Self {
        CliError {
            exit: 1,
            kind: e.kind().into(),
            message: e.message().into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            exit: 1,
            kind: "Io".into(),
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Accepts `65536` or `2^16`.
pub fn parse_m(s: &str) -> Result<usize, String> {
    match s.split_once('^') {
        Some(("2", e)) => e
            .trim()
            .parse::<u32>()
            .ok()
            .filter(|&e| e < usize::BITS)
            .map(|e| 1usize << e)
            .ok_or_else(|| format!("bad exponent in {s:?}")),
        Some(_) => Err(format!("only powers of two may use ^, got {s:?}")),
        None => s.trim().parse().map_err(|_| format!("not an integer: {s:?}")),
    }
}

fn parse_kind(s: &str) -> Result<TransformKind, String> {
    s.parse().map_err(|e: sphx_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: sphx_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SamplerArg {
    Transform,
    ActiveRows,
}

fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    if !path.is_file() {
        return Err(CliError::missing(path));
    }
    Ok(BufReader::new(File::open(path)?))
}

fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write to `path`, or stdout when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult {
    match path {
        Some(p) => create_output(p)?.write_all(bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    emit(path, text.as_bytes())
}

/// Configuration for data files that cannot carry it themselves.
fn write_meta(path: &Path, meta: &Value) -> CliResult {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.json");
    emit_json(Some(Path::new(&p)), meta)
}

fn read_corpus(path: &Path, format: Option<FormatArg>) -> CliResult<Corpus> {
    let format = format.map(Format::from).unwrap_or_else(|| Format::from_path(path));
    Ok(corpus::load_vectors(open_input(path)?, format)?)
}

fn load_store(index_path: &Path, vectors: Option<&Path>) -> CliResult<Store> {
    let index = load_index(open_input(index_path)?)?;
    let engine = SearchEngine::from_index(index)?;
    let vectors = match vectors {
        Some(p) => {
            let c = read_corpus(p, None)?;
            if c.d != engine.config().d && !c.is_empty() {
                return Err(sphx_core::Error::DimensionMismatch {
                    expected: engine.config().d,
                    got: c.d,
                }
                .into());
            }
            Some(c.records.into_iter().collect::<HashMap<_, _>>())
        }
        None => None,
    };
    Ok(Store::new(engine, vectors))
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Treat the input as `date,close` rows and emit windowed relative differences.
    #[arg(long, conflicts_with = "edges")]
    pub series: bool,
    #[arg(long, default_value_t = 5)]
    pub half_window: usize,
    /// Bin each record's values into a histogram with these edges.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub edges: Option<Vec<f64>>,
    /// Output vector store; `.jsonl` for JSON lines, CSV otherwise.
    #[arg(long)]
    pub output: PathBuf,
}

fn ingest(a: IngestArgs) -> CliResult {
    let mut meta = json!({
        "command": "ingest",
        "input": a.input.display().to_string(),
    });
    let raw: RawCorpus = if a.series {
        let series = corpus::read_series(open_input(&a.input)?)?;
        meta["mode"] = json!("series");
        meta["half_window"] = json!(a.half_window);
        corpus::window_series(&series, a.half_window)?
    } else {
        let format = a.format.map(Format::from).unwrap_or_else(|| Format::from_path(&a.input));
        let raw = corpus::read_raw(open_input(&a.input)?, format)?;
        match &a.edges {
            None => {
                meta["mode"] = json!("vectors");
                raw
            }
            Some(edges) => {
                let mut dropped = 0;
                let mut records = Vec::with_capacity(raw.records.len());
                for (id, values) in raw.records {
                    let h = corpus::histogram_bin(&values, edges)?;
                    dropped += h.dropped;
                    records.push((id, h.counts));
                }
                meta["mode"] = json!("histogram");
                meta["edges"] = json!(edges);
                meta["dropped_values"] = json!(dropped);
                RawCorpus {
                    d: edges.len() - 1,
                    records,
                }
            }
        }
    };
    let corpus = raw.normalize()?;
    meta["d"] = json!(corpus.d);
    meta["n"] = json!(corpus.len());
    let out_format = Format::from_path(&a.output);
    corpus::save_vectors(&corpus, out_format, create_output(&a.output)?)?;
    write_meta(&a.output, &meta)?;
    emit_json(None, &meta)
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Code length, a power of two for structured kinds (`65536` or `2^16`).
    #[arg(long, value_parser = parse_m)]
    pub m: usize,
    #[arg(long)]
    pub r: f64,
    /// Query threshold multiplier q >= 1: `h_query = sqrt(2 q r ln m)`.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, value_parser = parse_kind, default_value = "structured")]
    pub kind: TransformKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the cost report here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

fn build(a: IndexArgs) -> CliResult {
    let corpus = read_corpus(&a.vectors, a.format)?;
    if corpus.is_empty() {
        return Err(sphx_core::Error::EmptyInput.into());
    }
    let config = IndexConfig::new(a.m, a.r, a.q, a.kind, corpus.d, a.seed)?;
    let engine = SearchEngine::build(&corpus.records, config)?;
    save_index(engine.index(), create_output(&a.output)?)?;
    let report = json!({
        "command": "index",
        "vectors": a.vectors.display().to_string(),
        "query_multiplier": a.q,
        "config": config,
        "stats": index_stats(engine.index()),
    });
    if let Some(p) = &a.stats {
        emit_json(Some(p), &report)?;
    }
    emit_json(None, &report)
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Original vectors; enables re-encoding stored documents and true inner products.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long, conflicts_with = "query")]
    pub query_id: Option<String>,
    /// Comma-separated query vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub query: Option<Vec<f64>>,
    #[arg(long, group = "cut")]
    pub top_k: Option<usize>,
    /// Threshold at m mu(lambda).
    #[arg(long, group = "cut", allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Nearest-neighbour cutoff at m mu(lambda0 - eps-).
    #[arg(long, group = "cut")]
    pub nn_lambda: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Query threshold multiplier for this search.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl SearchArgs {
    fn request(&self) -> CliResult<SearchRequest> {
        let (mode, lambda, k) = match (self.top_k, self.lambda, self.nn_lambda) {
            (_, Some(l), _) => (SearchMode::Threshold, Some(l), None),
            (_, _, Some(l)) => (SearchMode::NearestNeighbour, Some(l), None),
            (k, _, _) => (SearchMode::TopK, None, k),
        };
        if self.query.is_none() && self.query_id.is_none() {
            return Err(CliError::usage("give --query or --query-id"));
        }
        Ok(SearchRequest {
            vector: self.query.clone(),
            doc_id: self.query_id.clone(),
            mode,
            lambda,
            k,
            q: self.q,
            eta: self.eta,
        })
    }
}

fn search(a: SearchArgs) -> CliResult {
    let req = a.request()?;
    let store = load_store(&a.index, a.vectors.as_deref())?;
    let resp = store.search(&req, None)?;
    match a.format {
        OutputFormat::Json => emit_json(
            a.output.as_deref(),
            &json!({
                "command": "search",
                "index": a.index.display().to_string(),
                "config": store.engine.config(),
                "request": req,
                "response": resp,
            }),
        ),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &resp.results {
                w.serialize(row).map_err(|e| CliError::from(std::io::Error::other(e)))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::from(std::io::Error::other(e.to_string())))?;
            if let Some(p) = &a.output {
                write_meta(
                    p,
                    &json!({
                        "command": "search",
                        "index": a.index.display().to_string(),
                        "config": store.engine.config(),
                        "request": req,
                        "cutoff": resp.cutoff,
                        "query": resp.query,
                    }),
                )?;
            }
            emit(a.output.as_deref(), &bytes)
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn export_tokens(a: ExportArgs) -> CliResult {
    let idx = load_index(open_input(&a.index)?)?;
    let mut buf = Vec::new();
    index::write_token_lines(&idx.codes(), &mut buf)?;
    if let Some(p) = &a.output {
        write_meta(
            p,
            &json!({
                "command": "export-tokens",
                "index": a.index.display().to_string(),
                "config": idx.config(),
                "documents": idx.len(),
            }),
        )?;
    }
    emit(a.output.as_deref(), &buf)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// type1, type2, cdf, sparsity, phase or domination.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, value_parser = parse_kind, default_value = "gaussian")]
    pub kind: TransformKind,
    /// Input dimension; 2 for Gaussian and 100 otherwise when omitted.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_m, default_value = "65536")]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.45")]
    pub r: Vec<f64>,
    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_hi: Option<f64>,
    #[arg(long, default_value_t = 1.645)]
    pub eta: f64,
    #[arg(long, default_value_t = 20_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "transform")]
    pub sampler: SamplerArg,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the cells as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn run_simulation(a: SimulateArgs) -> CliResult {
    let spec = ExperimentSpec {
        mode: a.mode,
        kind: a.kind,
        d: a.d.unwrap_or_else(|| simulate::default_dim(a.kind)),
        m: a.m,
        r: a.r,
        lambda: a.lambda,
        lambda_hi: a.lambda_hi,
        eta: a.eta,
        trials: a.trials,
        seed: a.seed,
        sampler: match a.sampler {
            SamplerArg::Transform => Sampler::Transform,
            SamplerArg::ActiveRows => Sampler::ActiveRows,
        },
    };
    let report = simulate::run(&spec)?;
    if let Some(p) = &a.csv {
        report.write_csv(create_output(p)?)?;
        write_meta(p, &json!({ "command": "simulate", "spec": report.spec, "flags": report.flags }))?;
    }
    emit_json(
        a.output.as_deref(),
        &json!({ "command": "simulate", "passed": report.passed(), "report": report }),
    )
}

#[derive(Debug, Args)]
pub struct TabulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.45")]
    pub r: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_m, default_value = "2^14,2^16,2^18,2^20")]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 1.645)]
    pub eta: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn tabulate(a: TabulateArgs) -> CliResult {
    let rows = analysis::tabulate(a.lambda, &a.r, &a.m, a.eta)?;
    let params = json!({ "command": "tabulate", "lambda": a.lambda, "r": a.r, "m": a.m, "eta": a.eta });
    match a.format {
        OutputFormat::Json => emit_json(a.output.as_deref(), &json!({ "params": params, "rows": rows })),
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            analysis::write_tabulation_csv(&rows, &mut buf)?;
            if let Some(p) = &a.output {
                write_meta(p, &params)?;
            }
            emit(a.output.as_deref(), &buf)
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// The indexed corpus; relevance comes from its exact inner products.
    #[arg(long)]
    pub vectors: PathBuf,
    /// Query vectors.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    /// Also count type I/II errors at this similarity level.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1.645)]
    pub eta: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the precision-recall points as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn eval(a: EvalArgs) -> CliResult {
    let engine = SearchEngine::from_index(load_index(open_input(&a.index)?)?)?;
    let corpus = read_corpus(&a.vectors, None)?;
    let queries = read_corpus(&a.queries, None)?;
    let qs: Vec<UnitVector> = queries.records.iter().map(|(_, v)| v.clone()).collect();
    let thresholds = a
        .thresholds
        .clone()
        .unwrap_or_else(|| (1..=19).map(|i| i as f64 * 0.05).collect());
    let points = evaluate::pr_curve(&engine, &corpus.records, &qs, &thresholds)?;
    let auc = evaluate::pr_auc(&points);
    let errors = match a.lambda {
        Some(lambda) => {
            let mut rows = Vec::new();
            for (id, q) in &queries.records {
                let c = evaluate::query_errors(&engine, &corpus.records, q, lambda, a.eta)?;
                rows.push(json!({ "query": id, "counts": c }));
            }
            Some(rows)
        }
        None => None,
    };
    let params = json!({
        "command": "eval",
        "index": a.index.display().to_string(),
        "vectors": a.vectors.display().to_string(),
        "queries": a.queries.display().to_string(),
        "config": engine.config(),
        "thresholds": thresholds,
        "lambda": a.lambda,
        "eta": a.eta,
    });
    if let Some(p) = &a.csv {
        evaluate::write_pr_csv(&points, create_output(p)?)?;
        write_meta(p, &params)?;
    }
    emit_json(
        a.output.as_deref(),
        &json!({ "params": params, "auc": auc, "points": points, "errors": errors }),
    )
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, default_value_t = 100)]
    pub max_results: usize,
    /// Allowed browser origins, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cors: Vec<String>,
}

fn serve(a: ServeArgs) -> CliResult {
    let store = load_store(&a.index, a.vectors.as_deref())?;
    let config = ServiceConfig {
        bind: a.bind,
        max_results: a.max_results,
        cors_allowlist: a.cors,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(store, config))?;
    Ok(())
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Index(a) => build(a),
        Command::Search(a) => search(a),
        Command::ExportTokens(a) => export_tokens(a),
        Command::Simulate(a) => run_simulation(a),
        Command::Tabulate(a) => tabulate(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}
