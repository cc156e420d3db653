//! Clients for the three metadata sources and their composition into a
//! [`Snapshot`].
//!
//! This is the only module that opens network connections. Everything is
//! synchronous: each source gets a rate-limited [`http::SourceClient`] and a
//! small worker pool, and results are merged in key order.

pub mod altmetric;
pub mod datasets;
pub mod graph;
pub mod http;
pub mod mock;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{Snapshot, SnapshotBuilder};

pub use altmetric::{fetch_altmetric, fetch_altmetric_with, is_valid_doi, AltmetricFetch, AltmetricTarget};
pub use datasets::{load_ad_datasets, normalize_arxiv, normalize_doi, parse_ad_datasets, DatasetLoad, FieldMapping};
pub use graph::{fetch_paper_graph, fetch_paper_graph_with, GraphDelta, ResumePoint, ResumeTarget};
pub use http::{HttpCache, HttpError, RateLimit, RetryPolicy, SourceClient, SourceConfig, TokenBucket};

/// Environment variable holding the academic-graph API key.
pub const SS_API_KEY: &str = "SS_API_KEY";
/// Environment variable holding the altmetrics API key.
pub const ALTMETRIC_KEY: &str = "ALTMETRIC_KEY";

pub const DEFAULT_GRAPH_URL: &str = "https://api.semanticscholar.org/graph/v1";
pub const DEFAULT_ALTMETRIC_URL: &str = "https://api.altmetric.com/v1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("dataset catalogue: {0}")]
    Catalogue(String),
    #[error("dataset catalogue record {record} has no key {key:?}")]
    MissingKey { record: usize, key: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("invalid fetch plan: {0}")]
    InvalidPlan(String),
}

/// What to fetch, from where, and how politely.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchPlan {
    pub fetch_references: bool,
    pub fetch_citations: bool,
    pub fetch_author_papers: bool,
    pub graph: SourceConfig,
    pub altmetric: SourceConfig,
    pub retry: RetryPolicy,
    /// Hard cap on citation and on reference entries kept per paper.
    pub max_edges_per_paper: usize,
    /// Concurrent requests per source.
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    /// Serve every request from `cache_dir`; never touch the network.
    pub offline: bool,
}

impl FetchPlan {
    pub fn new(graph_base_url: impl Into<String>, altmetric_base_url: impl Into<String>) -> Self {
        Self {
            fetch_references: true,
            fetch_citations: true,
            fetch_author_papers: true,
            graph: SourceConfig::new(graph_base_url),
            altmetric: SourceConfig::new(altmetric_base_url),
            retry: RetryPolicy::default(),
            max_edges_per_paper: 10_000,
            workers: 4,
            cache_dir: None,
            offline: false,
        }
    }

    /// Reads API keys from [`SS_API_KEY`] and [`ALTMETRIC_KEY`] when set.
    pub fn with_env_keys(mut self) -> Self {
        let key = |name| std::env::var(name).ok().filter(|v: &String| !v.is_empty());
        self.graph.api_key = key(SS_API_KEY).or(self.graph.api_key);
        self.altmetric.api_key = key(ALTMETRIC_KEY).or(self.altmetric.api_key);
        self
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (name, src) in [("academic-graph", &self.graph), ("altmetric", &self.altmetric)] {
            if !(src.rate.requests_per_second > 0.0) || src.rate.burst == 0 {
                return Err(IngestError::InvalidPlan(format!("{name} rate limit must be positive")));
            }
        }
        if self.max_edges_per_paper == 0 {
            return Err(IngestError::InvalidPlan("edge cap must be positive".into()));
        }
        if self.offline && self.cache_dir.is_none() {
            return Err(IngestError::InvalidPlan("offline mode needs a cache directory".into()));
        }
        Ok(())
    }

    fn cache(&self) -> Option<HttpCache> {
        self.cache_dir.as_ref().map(HttpCache::new)
    }

    fn client(&self, name: &str, config: &SourceConfig) -> SourceClient {
        SourceClient::new(name, config, self.retry, self.cache(), self.offline)
    }

    pub fn graph_client(&self) -> SourceClient {
        self.client("academic-graph", &self.graph)
    }

    pub fn altmetric_client(&self) -> SourceClient {
        self.client("altmetric", &self.altmetric)
    }

    #[cfg(test)]
    pub(crate) fn for_tests(graph: &str, altmetric: &str) -> Self {
        let mut plan = Self::new(graph, altmetric);
        plan.retry = RetryPolicy {
            max_attempts: 3,
            base_delay: std::time::Duration::from_millis(1),
            max_delay: std::time::Duration::from_millis(5),
        };
        plan.graph.rate = RateLimit::new(2000.0, 50);
        plan.altmetric.rate = RateLimit::new(2000.0, 50);
        plan
    }
}

/// Where the dataset catalogue comes from and how to read it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSource {
    /// File path or http(s) URL.
    pub location: String,
    pub mapping: FieldMapping,
    /// Timestamp stored in the snapshot header.
    pub created_at: String,
}

impl CorpusSource {
    pub fn new(location: impl Into<String>, created_at: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            mapping: FieldMapping::default(),
            created_at: created_at.into(),
        }
    }
}

/// Per-source counts and miss lists of one ingest run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub datasets: usize,
    pub datasets_skipped: usize,
    pub catalogue_warnings: Vec<String>,
    pub non_ingestible: Vec<String>,
    pub linked: usize,
    pub graph_misses: Vec<String>,
    pub graph_failures: Vec<String>,
    pub truncated: Vec<String>,
    pub resume: Vec<ResumePoint>,
    pub graph_requests: usize,
    pub graph_retries: usize,
    pub altmetric_records: usize,
    pub altmetric_misses: Vec<String>,
    pub altmetric_invalid: Vec<String>,
    pub altmetric_requests: usize,
    pub altmetric_retries: usize,
    /// Set when the altmetrics source could not be used at all.
    pub altmetric_error: Option<String>,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ad-datasets: {} datasets, {} skipped, {} without DOI or arXiv id",
            self.datasets,
            self.datasets_skipped,
            self.non_ingestible.len()
        )?;
        writeln!(
            f,
            "academic-graph: {} linked, {} not found, {} failed, {} truncated, {} unfinished ({} requests, {} retries)",
            self.linked,
            self.graph_misses.len(),
            self.graph_failures.len(),
            self.truncated.len(),
            self.resume.len(),
            self.graph_requests,
            self.graph_retries
        )?;
        for m in &self.graph_misses {
            writeln!(f, "  not found: {m}")?;
        }
        match &self.altmetric_error {
            Some(e) => writeln!(f, "altmetric: unavailable ({e})"),
            None => {
                writeln!(
                    f,
                    "altmetric: {} records, {} not tracked, {} invalid ({} requests, {} retries)",
                    self.altmetric_records,
                    self.altmetric_misses.len(),
                    self.altmetric_invalid.len(),
                    self.altmetric_requests,
                    self.altmetric_retries
                )?;
                for m in &self.altmetric_misses {
                    writeln!(f, "  not tracked: {m}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub snapshot: Snapshot,
    /// Some source could not be read completely.
    pub partial: bool,
    pub report: IngestReport,
}

fn catalogue_label(location: &str) -> String {
    match datasets::split_url(location) {
        Some((_, request)) => request,
        None => Path::new(location)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| location.to_string()),
    }
}

fn load_catalogue(corpus: &CorpusSource, plan: &FetchPlan) -> Result<DatasetLoad, IngestError> {
    match datasets::split_url(&corpus.location) {
        Some((origin, request)) => {
            let client = SourceClient::new(
                "ad-datasets",
                &SourceConfig::new(origin),
                plan.retry,
                plan.cache(),
                plan.offline,
            );
            let text = datasets::fetch_catalogue(&client, &request)?;
            parse_ad_datasets(&text, &corpus.mapping)
        }
        None => load_ad_datasets(&corpus.location, &corpus.mapping),
    }
}

/// Loads the catalogue, fetches the graph around every dataset paper and the
/// attention data of those papers, and merges all of it into one snapshot.
///
/// Dataset papers are looked up by DOI first and by arXiv id for datasets
/// whose DOI is unknown to the source. An unreachable graph or altmetrics
/// source yields a snapshot flagged partial; a catalogue failure or a
/// rejected API key is an error.
pub fn ingest_all(corpus: &CorpusSource, plan: &FetchPlan) -> Result<IngestOutcome, IngestError> {
    plan.validate()?;
    let catalogue = load_catalogue(corpus, plan)?;
    let mut report = IngestReport {
        datasets: catalogue.entries.len(),
        datasets_skipped: catalogue.skipped,
        catalogue_warnings: catalogue.warnings.clone(),
        non_ingestible: catalogue.non_ingestible.clone(),
        ..IngestReport::default()
    };

    let doi_lookup = |e: &crate::corpus::DatasetEntry| e.doi.as_ref().map(|d| format!("DOI:{d}"));
    let arxiv_lookup = |e: &crate::corpus::DatasetEntry| e.arxiv_id.as_ref().map(|a| format!("ARXIV:{a}"));
    let first: Vec<String> = catalogue
        .entries
        .iter()
        .filter_map(|e| doi_lookup(e).or_else(|| arxiv_lookup(e)))
        .collect();

    let gclient = plan.graph_client();
    let mut delta = fetch_paper_graph_with(&gclient, &first, plan)?;
    let fallback: Vec<String> = catalogue
        .entries
        .iter()
        .filter(|e| doi_lookup(e).is_some_and(|l| delta.misses.contains(&l)))
        .filter_map(arxiv_lookup)
        .collect();
    if !fallback.is_empty() {
        let second = fetch_paper_graph_with(&gclient, &fallback, plan)?;
        delta.absorb(second);
    }
    // a DOI miss recovered through the arXiv id is not a miss
    let recovered: BTreeSet<String> = catalogue
        .entries
        .iter()
        .filter(|e| arxiv_lookup(e).is_some_and(|l| delta.resolved.contains_key(&l)))
        .filter_map(doi_lookup)
        .collect();
    delta.misses.retain(|m| !recovered.contains(m));
    report.graph_requests = gclient.requests_sent();
    report.graph_retries = gclient.retries();

    let mut entries = catalogue.entries;
    let mut link = BTreeMap::new();
    for e in &mut entries {
        let resolved = [doi_lookup(e), arxiv_lookup(e)]
            .into_iter()
            .flatten()
            .find_map(|l| delta.resolved.get(&l).cloned());
        if let Some(pid) = resolved {
            link.insert(pid.clone(), e.doi.clone());
            e.paper_id = Some(pid);
        }
    }
    report.linked = entries.iter().filter(|e| e.paper_id.is_some()).count();
    report.graph_misses = delta.misses.clone();
    report.graph_failures = delta.failures.clone();
    report.truncated = delta.truncated.clone();
    report.resume = delta.resume.clone();

    let targets: Vec<AltmetricTarget> = link
        .iter()
        .filter_map(|(pid, doi)| {
            let paper_doi = delta.paper(pid).and_then(|p| p.external_ids.get("DOI")).and_then(|d| normalize_doi(d));
            doi.clone().or(paper_doi).map(|d| AltmetricTarget::new(pid.clone(), d))
        })
        .collect();
    let aclient = plan.altmetric_client();
    let attention = match fetch_altmetric_with(&aclient, &targets, plan) {
        Ok(a) => Some(a),
        Err(e) if e.is_unreachable() => {
            log::warn!("altmetric source unavailable: {e}");
            report.altmetric_error = Some(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };
    report.altmetric_requests = aclient.requests_sent();
    report.altmetric_retries = aclient.retries();

    let mut b = SnapshotBuilder::new(corpus.created_at.clone());
    b.source_version(format!(
        "ad-datasets: {}; {} records, {} skipped, {} without identifiers",
        catalogue_label(&corpus.location),
        report.datasets,
        report.datasets_skipped,
        report.non_ingestible.len()
    ));
    let mut graph_line = format!(
        "academic-graph: {} of {} datasets linked, {} lookups not found; edge cap {}",
        report.linked,
        report.datasets,
        report.graph_misses.len(),
        plan.max_edges_per_paper
    );
    if !delta.truncated.is_empty() {
        graph_line.push_str(&format!("; truncated: {}", delta.truncated.join(" ")));
    }
    if !delta.resume.is_empty() {
        graph_line.push_str(&format!("; {} requests unfinished", delta.resume.len()));
    }
    b.source_version(graph_line);
    match &attention {
        Some(a) => {
            report.altmetric_records = a.records.len();
            report.altmetric_misses = a.misses.clone();
            report.altmetric_invalid = a.invalid.clone();
            b.source_version(format!(
                "altmetric: {} records, {} not tracked",
                a.records.len(),
                a.misses.len()
            ));
        }
        None => {
            b.source_version("altmetric: unavailable");
        }
    }
    let partial = attention.is_none() || !delta.is_complete();
    if partial {
        b.source_version("partial: true");
    }
    for e in entries {
        b.dataset(e);
    }
    delta.apply_to(&mut b);
    if let Some(a) = attention {
        for r in a.records {
            b.altmetric(r);
        }
    }
    Ok(IngestOutcome {
        snapshot: b.build(),
        partial,
        report,
    })
}
