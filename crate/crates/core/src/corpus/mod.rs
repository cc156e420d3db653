//! Entity model and the on-disk snapshot.
//!
//! A [`Snapshot`] is an immutable, fully indexed view of one frozen corpus
//! state. Mutation goes through [`SnapshotBuilder`]; everything downstream
//! (features, scoring, regression, clustering) reads snapshots only.

mod snapshot_io;
mod timeline;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Datelike};
use serde::{Deserialize, Serialize};

pub use snapshot_io::{
    load_snapshot, parse_snapshot, save_snapshot, SaveOptions, SnapshotError, FORMAT_VERSION,
};
pub(crate) use snapshot_io::write_atomic;
pub use timeline::{build_publication_timeline, Timeline, TimelineRow};

/// Calendar year.
pub type Year = i32;

/// One autonomous-driving dataset as listed by the dataset catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub dataset_id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arxiv_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_frames: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sensors: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publication_year: Option<Year>,
    /// Key of the paper describing this dataset. Several datasets may share one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_id: Option<String>,
}

impl DatasetEntry {
    pub fn new(dataset_id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            name: name.into(),
            doi: None,
            arxiv_id: None,
            n_frames: None,
            n_sensors: None,
            publication_year: None,
            paper_id: None,
        }
    }

    /// Whether the entry carries an identifier the paper sources can resolve.
    pub fn is_ingestible(&self) -> bool {
        self.doi.is_some() || self.arxiv_id.is_some()
    }
}

/// A scholarly paper.
///
/// `reference_ids == None` means the reference list was never fetched, which
/// is different from a fetched, empty list. `citations_fetched` says whether
/// the incoming citation edges for this paper are in the snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publication_year: Option<Year>,
    #[serde(default)]
    pub author_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_ids: Option<Vec<String>>,
    #[serde(default)]
    pub citations_fetched: bool,
    #[serde(default)]
    pub external_ids: BTreeMap<String, String>,
}

impl PaperRecord {
    pub fn new(paper_id: impl Into<String>) -> Self {
        Self {
            paper_id: paper_id.into(),
            title: String::new(),
            publication_year: None,
            author_ids: Vec::new(),
            reference_ids: None,
            citations_fetched: false,
            external_ids: BTreeMap::new(),
        }
    }

    /// Fold another observation of the same paper into this one. Fetched
    /// lists win over unfetched ones and known values over unknown ones.
    pub fn merge(&mut self, other: PaperRecord) {
        debug_assert_eq!(self.paper_id, other.paper_id);
        if self.title.is_empty() {
            self.title = other.title;
        }
        if self.publication_year.is_none() {
            self.publication_year = other.publication_year;
        }
        if self.author_ids.is_empty() {
            self.author_ids = other.author_ids;
        }
        match (&mut self.reference_ids, other.reference_ids) {
            (None, theirs) => self.reference_ids = theirs,
            (Some(ours), Some(theirs)) if ours.is_empty() => *ours = theirs,
            _ => {}
        }
        self.citations_fetched |= other.citations_fetched;
        for (k, v) in other.external_ids {
            self.external_ids.entry(k).or_insert(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub author_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub paper_ids: Vec<String>,
}

/// `citing_paper_id` cites `cited_paper_id`. The citing year may predate the
/// cited paper's publication year when the citation was made to a preprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationEdge {
    pub citing_paper_id: String,
    pub cited_paper_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citing_year: Option<Year>,
}

impl CitationEdge {
    pub fn new(citing: impl Into<String>, cited: impl Into<String>, year: Option<Year>) -> Self {
        Self {
            citing_paper_id: citing.into(),
            cited_paper_id: cited.into(),
            citing_year: year,
        }
    }
}

/// Online attention data for one paper, as delivered by the altmetrics source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltmetricRecord {
    pub paper_key: String,
    pub aas_curr: f64,
    /// Percentile of the attention score three months after publication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aas_3m: Option<f64>,
    #[serde(default)]
    pub readers_by_service: BTreeMap<String, u64>,
    pub n_readers: u64,
}

impl AltmetricRecord {
    /// Builds a record with `n_readers` summed over the services.
    pub fn new(
        paper_key: impl Into<String>,
        aas_curr: f64,
        aas_3m: Option<f64>,
        readers_by_service: BTreeMap<String, u64>,
    ) -> Self {
        let n_readers = readers_by_service.values().sum();
        Self {
            paper_key: paper_key.into(),
            aas_curr,
            aas_3m,
            readers_by_service,
            n_readers,
        }
    }
}

/// A reference from one entity to a key that is not present in the snapshot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DanglingRef {
    pub kind: &'static str,
    pub id: String,
    pub field: &'static str,
    pub target: String,
}

impl fmt::Display for DanglingRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:?}: {} references missing key {:?}",
            self.kind, self.id, self.field, self.target
        )
    }
}

/// Immutable, indexed corpus state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    created_at: String,
    source_versions: Vec<String>,
    datasets: BTreeMap<String, DatasetEntry>,
    papers: BTreeMap<String, PaperRecord>,
    authors: BTreeMap<String, AuthorRecord>,
    // sorted by (cited, citing)
    citations: Vec<CitationEdge>,
    altmetrics: BTreeMap<String, AltmetricRecord>,
    warnings: Vec<DanglingRef>,
}

impl Default for Snapshot {
    fn default() -> Self {
        SnapshotBuilder::new(DEFAULT_CREATED_AT).build()
    }
}

pub const DEFAULT_CREATED_AT: &str = "1970-01-01T00:00:00Z";

impl Snapshot {
    pub fn created_at(&self) -> &str {
        &self.created_at
    }

    /// Last calendar year the snapshot can have complete data for.
    pub fn coverage_year(&self) -> Year {
        DateTime::parse_from_rfc3339(&self.created_at)
            .map(|t| t.year())
            .unwrap_or(1970)
    }

    pub fn source_versions(&self) -> &[String] {
        &self.source_versions
    }

    pub fn datasets(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.datasets.values()
    }

    pub fn dataset(&self, id: &str) -> Option<&DatasetEntry> {
        self.datasets.get(id)
    }

    pub fn papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.papers.values()
    }

    pub fn paper(&self, id: &str) -> Option<&PaperRecord> {
        self.papers.get(id)
    }

    pub fn authors(&self) -> impl Iterator<Item = &AuthorRecord> {
        self.authors.values()
    }

    pub fn author(&self, id: &str) -> Option<&AuthorRecord> {
        self.authors.get(id)
    }

    pub fn citations(&self) -> &[CitationEdge] {
        &self.citations
    }

    /// All edges whose cited side is `paper_id`, sorted by citing key.
    pub fn citations_to(&self, paper_id: &str) -> &[CitationEdge] {
        let start = self
            .citations
            .partition_point(|e| e.cited_paper_id.as_str() < paper_id);
        let len = self.citations[start..]
            .partition_point(|e| e.cited_paper_id.as_str() == paper_id);
        &self.citations[start..start + len]
    }

    pub fn altmetrics(&self) -> impl Iterator<Item = &AltmetricRecord> {
        self.altmetrics.values()
    }

    pub fn altmetric(&self, paper_key: &str) -> Option<&AltmetricRecord> {
        self.altmetrics.get(paper_key)
    }

    /// The paper linked to a dataset, when both the link and the record exist.
    pub fn dataset_paper(&self, dataset: &DatasetEntry) -> Option<&PaperRecord> {
        dataset.paper_id.as_deref().and_then(|id| self.paper(id))
    }

    /// Publication year of a dataset: its linked paper's year, else the
    /// catalogue year.
    pub fn dataset_year(&self, dataset: &DatasetEntry) -> Option<Year> {
        self.dataset_paper(dataset)
            .and_then(|p| p.publication_year)
            .or(dataset.publication_year)
    }

    pub fn entity_count(&self) -> usize {
        self.datasets.len()
            + self.papers.len()
            + self.authors.len()
            + self.citations.len()
            + self.altmetrics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity_count() == 0
    }

    /// Dangling references found when the snapshot was built.
    pub fn warnings(&self) -> &[DanglingRef] {
        &self.warnings
    }

    /// Fraction of citation edges without a citing year. Such edges never
    /// count towards windowed features.
    pub fn yearless_edge_fraction(&self) -> f64 {
        if self.citations.is_empty() {
            return 0.0;
        }
        let missing = self.citations.iter().filter(|e| e.citing_year.is_none()).count();
        missing as f64 / self.citations.len() as f64
    }

    /// Referential-integrity check. Pure; calling it twice gives the same list.
    ///
    /// The citing side of an edge is not required to resolve: leaf citing
    /// papers are only known through the year they cite in.
    pub fn validate(&self) -> Vec<DanglingRef> {
        let mut out = Vec::new();
        let mut dangling = |kind, id: &str, field, target: &str| {
            out.push(DanglingRef {
                kind,
                id: id.to_owned(),
                field,
                target: target.to_owned(),
            })
        };
        for d in self.datasets.values() {
            if let Some(p) = &d.paper_id {
                if !self.papers.contains_key(p) {
                    dangling("dataset", &d.dataset_id, "paper_id", p);
                }
            }
        }
        for p in self.papers.values() {
            for a in &p.author_ids {
                if !self.authors.contains_key(a) {
                    dangling("paper", &p.paper_id, "author_ids", a);
                }
            }
            for r in p.reference_ids.iter().flatten() {
                if !self.papers.contains_key(r) {
                    dangling("paper", &p.paper_id, "reference_ids", r);
                }
            }
        }
        for a in self.authors.values() {
            for p in &a.paper_ids {
                if !self.papers.contains_key(p) {
                    dangling("author", &a.author_id, "paper_ids", p);
                }
            }
        }
        for e in &self.citations {
            if !self.papers.contains_key(&e.cited_paper_id) {
                dangling(
                    "citation",
                    &format!("{}->{}", e.citing_paper_id, e.cited_paper_id),
                    "cited_paper_id",
                    &e.cited_paper_id,
                );
            }
        }
        for m in self.altmetrics.values() {
            if !self.papers.contains_key(&m.paper_key) {
                dangling("altmetric", &m.paper_key, "paper_key", &m.paper_key);
            }
        }
        out
    }

    /// Opens a builder seeded with this snapshot's content.
    pub fn to_builder(&self) -> SnapshotBuilder {
        SnapshotBuilder {
            created_at: self.created_at.clone(),
            source_versions: self.source_versions.clone(),
            datasets: self.datasets.clone(),
            papers: self.papers.clone(),
            authors: self.authors.clone(),
            citations: self
                .citations
                .iter()
                .map(|e| ((e.cited_paper_id.clone(), e.citing_paper_id.clone()), e.clone()))
                .collect(),
            altmetrics: self.altmetrics.clone(),
        }
    }
}

/// Single-writer accumulator for snapshot content.
#[derive(Debug, Clone, Default)]
pub struct SnapshotBuilder {
    created_at: String,
    source_versions: Vec<String>,
    datasets: BTreeMap<String, DatasetEntry>,
    papers: BTreeMap<String, PaperRecord>,
    authors: BTreeMap<String, AuthorRecord>,
    citations: BTreeMap<(String, String), CitationEdge>,
    altmetrics: BTreeMap<String, AltmetricRecord>,
}

impl SnapshotBuilder {
    pub fn new(created_at: impl Into<String>) -> Self {
        Self {
            created_at: created_at.into(),
            ..Self::default()
        }
    }

    pub fn created_at(&mut self, created_at: impl Into<String>) -> &mut Self {
        self.created_at = created_at.into();
        self
    }

    pub fn source_version(&mut self, provenance: impl Into<String>) -> &mut Self {
        self.source_versions.push(provenance.into());
        self
    }

    pub fn dataset(&mut self, dataset: DatasetEntry) -> &mut Self {
        self.datasets.insert(dataset.dataset_id.clone(), dataset);
        self
    }

    pub fn paper(&mut self, paper: PaperRecord) -> &mut Self {
        match self.papers.get_mut(&paper.paper_id) {
            Some(existing) => existing.merge(paper),
            None => {
                self.papers.insert(paper.paper_id.clone(), paper);
            }
        }
        self
    }

    pub fn author(&mut self, author: AuthorRecord) -> &mut Self {
        match self.authors.get_mut(&author.author_id) {
            Some(existing) => {
                if existing.name.is_empty() {
                    existing.name = author.name;
                }
                for p in author.paper_ids {
                    if !existing.paper_ids.contains(&p) {
                        existing.paper_ids.push(p);
                    }
                }
            }
            None => {
                self.authors.insert(author.author_id.clone(), author);
            }
        }
        self
    }

    /// Adds an edge; a repeated (citing, cited) pair keeps the earliest known
    /// year, so the result does not depend on insertion order. A paper citing
    /// itself is dropped with a warning.
    pub fn citation(&mut self, edge: CitationEdge) -> &mut Self {
        if edge.citing_paper_id == edge.cited_paper_id {
            log::warn!("dropping self-loop citation of {:?}", edge.cited_paper_id);
            return self;
        }
        let key = (edge.cited_paper_id.clone(), edge.citing_paper_id.clone());
        match self.citations.get_mut(&key) {
            Some(existing) => {
                existing.citing_year = match (existing.citing_year, edge.citing_year) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            None => {
                self.citations.insert(key, edge);
            }
        }
        self
    }

    pub fn altmetric(&mut self, record: AltmetricRecord) -> &mut Self {
        self.altmetrics.insert(record.paper_key.clone(), record);
        self
    }

    pub fn datasets_mut(&mut self) -> impl Iterator<Item = &mut DatasetEntry> {
        self.datasets.values_mut()
    }

    pub fn remove_paper(&mut self, paper_id: &str) -> Option<PaperRecord> {
        self.papers.remove(paper_id)
    }

    pub fn build(self) -> Snapshot {
        let mut snapshot = Snapshot {
            created_at: self.created_at,
            source_versions: self.source_versions,
            datasets: self.datasets,
            papers: self.papers,
            authors: self.authors,
            citations: self.citations.into_values().collect(),
            altmetrics: self.altmetrics,
            warnings: Vec::new(),
        };
        snapshot.warnings = snapshot.validate();
        snapshot
    }
}

/// Returns the first repeated element, if any.
pub(crate) fn first_duplicate(items: &[String]) -> Option<&str> {
    let mut seen = BTreeSet::new();
    items.iter().find(|i| !seen.insert(i.as_str())).map(String::as_str)
}
