//! Academic-graph source: papers, their references, citations and authors.
//!
//! For every dataset paper three nested lists are collected: the referenced
//! papers with their citing papers, the authors with their publications and
//! those publications' citing papers, and the citing papers with their own
//! citing papers. Requests run on a bounded worker pool; results are merged
//! in key order so the outcome does not depend on response timing.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::http::{encode_path_id, HttpError, SourceClient};
use super::FetchPlan;
use crate::corpus::{AuthorRecord, CitationEdge, PaperRecord, SnapshotBuilder, Year};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AuthorRef {
    pub author_id: String,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CitingRef {
    pub paper_id: String,
    #[serde(default)]
    pub year: Option<Year>,
}

/// One page of `/paper/{id}`. Metadata repeats on every page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PaperPage {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub year: Option<Year>,
    #[serde(default)]
    pub external_ids: BTreeMap<String, String>,
    #[serde(default)]
    pub authors: Vec<AuthorRef>,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default)]
    pub citations: Vec<CitingRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AuthorPaper {
    pub paper_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub year: Option<Year>,
    #[serde(default)]
    pub citations: Vec<CitingRef>,
}

/// One page of `/author/{id}/papers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AuthorPage {
    pub author_id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub papers: Vec<AuthorPaper>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
}

/// What a [`ResumePoint`] refers to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResumeTarget {
    Paper(String),
    Author(String),
}

/// Where pagination stopped after the source became unreachable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResumePoint {
    pub target: ResumeTarget,
    /// Cursor of the first page not received; `None` means nothing arrived.
    pub cursor: Option<String>,
}

/// Everything learned from the academic-graph source in one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphDelta {
    papers: BTreeMap<String, PaperRecord>,
    authors: BTreeMap<String, AuthorRecord>,
    citations: BTreeMap<(String, String), CitationEdge>,
    /// Requested lookup id to resolved paper id.
    pub resolved: BTreeMap<String, String>,
    /// Lookup ids the source does not know.
    pub misses: Vec<String>,
    /// Requests rejected for reasons other than absence or throttling.
    pub failures: Vec<String>,
    /// Papers whose citation or reference list hit the edge cap.
    pub truncated: Vec<String>,
    pub resume: Vec<ResumePoint>,
}

impl GraphDelta {
    pub fn papers(&self) -> impl Iterator<Item = &PaperRecord> {
        self.papers.values()
    }

    pub fn paper(&self, id: &str) -> Option<&PaperRecord> {
        self.papers.get(id)
    }

    pub fn authors(&self) -> impl Iterator<Item = &AuthorRecord> {
        self.authors.values()
    }

    /// Edges ordered by (cited, citing).
    pub fn citations(&self) -> impl Iterator<Item = &CitationEdge> {
        self.citations.values()
    }

    pub fn citation_count(&self) -> usize {
        self.citations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty() && self.authors.is_empty() && self.citations.is_empty()
    }

    /// True when no request was abandoned.
    pub fn is_complete(&self) -> bool {
        self.resume.is_empty()
    }

    fn add_paper(&mut self, paper: PaperRecord) {
        match self.papers.get_mut(&paper.paper_id) {
            Some(existing) => existing.merge(paper),
            None => {
                self.papers.insert(paper.paper_id.clone(), paper);
            }
        }
    }

    fn add_citations(&mut self, cited: &str, citing: &[CitingRef]) {
        for c in citing {
            let key = (cited.to_string(), c.paper_id.clone());
            let edge = self
                .citations
                .entry(key)
                .or_insert_with(|| CitationEdge::new(c.paper_id.clone(), cited, None));
            if edge.citing_year.is_none() {
                edge.citing_year = c.year;
            }
        }
    }

    /// Folds a later delta into this one.
    pub(crate) fn absorb(&mut self, other: GraphDelta) {
        for p in other.papers.into_values() {
            self.add_paper(p);
        }
        for (id, a) in other.authors {
            self.authors.entry(id).or_insert(a);
        }
        for (key, e) in other.citations {
            let edge = self.citations.entry(key).or_insert_with(|| e.clone());
            if edge.citing_year.is_none() {
                edge.citing_year = e.citing_year;
            }
        }
        self.resolved.extend(other.resolved);
        self.misses.extend(other.misses);
        let resolved = &self.resolved;
        self.misses.retain(|m| !resolved.contains_key(m));
        self.failures.extend(other.failures);
        self.truncated.extend(other.truncated);
        self.resume.extend(other.resume);
        for v in [&mut self.misses, &mut self.failures, &mut self.truncated] {
            v.sort();
            v.dedup();
        }
        self.resume.sort();
        self.resume.dedup();
    }

    pub fn apply_to(self, builder: &mut SnapshotBuilder) {
        for p in self.papers.into_values() {
            builder.paper(p);
        }
        for a in self.authors.into_values() {
            builder.author(a);
        }
        for e in self.citations.into_values() {
            builder.citation(e);
        }
    }
}

/// A paper with all its pages collected.
#[derive(Debug, Clone)]
struct FetchedPaper {
    meta: PaperPage,
    references: Vec<String>,
    citations: Vec<CitingRef>,
    /// Pagination ran to the end or to the cap.
    finished: bool,
    truncated: bool,
    resume: Option<String>,
}

impl FetchedPaper {
    fn record(&self, with_citations: bool) -> PaperRecord {
        let mut p = PaperRecord::new(self.meta.paper_id.clone());
        p.title = self.meta.title.clone();
        p.publication_year = self.meta.year;
        p.external_ids = self.meta.external_ids.clone();
        p.citations_fetched = with_citations && self.finished;
        p
    }
}

/// Outcome of one request chain that may fail without spoiling the run.
enum Step<T> {
    Done(T),
    Missing,
    Failed(String),
    Abandoned(ResumePoint),
}

struct Fetcher<'a> {
    client: &'a SourceClient,
    plan: &'a FetchPlan,
}

impl Fetcher<'_> {
    fn paper_request(lookup: &str, cursor: Option<&str>) -> String {
        match cursor {
            None => format!("/paper/{}", encode_path_id(lookup)),
            Some(c) => format!("/paper/{}?cursor={}", encode_path_id(lookup), encode_path_id(c)),
        }
    }

    fn fetch_paper(&self, lookup: &str) -> Result<Step<FetchedPaper>, HttpError> {
        let cap = self.plan.max_edges_per_paper;
        let mut cursor: Option<String> = None;
        let mut acc: Option<FetchedPaper> = None;
        loop {
            let request = Self::paper_request(lookup, cursor.as_deref());
            let page: PaperPage = match self.client.get_json(&request) {
                Ok(Some(page)) => page,
                Ok(None) if acc.is_none() => return Ok(Step::Missing),
                Ok(None) => {
                    // the paper vanished between pages; keep what arrived
                    let mut fetched = acc.unwrap();
                    fetched.finished = false;
                    return Ok(Step::Done(fetched));
                }
                Err(e) if e.is_unreachable() => {
                    let point = ResumePoint {
                        target: ResumeTarget::Paper(lookup.to_string()),
                        cursor: cursor.clone(),
                    };
                    return Ok(match acc {
                        None => Step::Abandoned(point),
                        Some(mut fetched) => {
                            fetched.finished = false;
                            fetched.resume = point.cursor;
                            Step::Done(fetched)
                        }
                    });
                }
                Err(e @ (HttpError::Status { .. } | HttpError::Decode { .. })) => {
                    return Ok(Step::Failed(e.to_string()))
                }
                Err(e) => return Err(e),
            };
            let next = page.next.clone();
            let fetched = acc.get_or_insert_with(|| FetchedPaper {
                meta: PaperPage {
                    references: Vec::new(),
                    citations: Vec::new(),
                    next: None,
                    ..page.clone()
                },
                references: Vec::new(),
                citations: Vec::new(),
                finished: false,
                truncated: false,
                resume: None,
            });
            for r in page.references {
                if fetched.references.len() < cap {
                    fetched.references.push(r);
                } else {
                    fetched.truncated = true;
                }
            }
            for c in page.citations {
                if fetched.citations.len() < cap {
                    fetched.citations.push(c);
                } else {
                    fetched.truncated = true;
                }
            }
            let full = fetched.references.len() >= cap && fetched.citations.len() >= cap;
            match next {
                Some(n) if !full => cursor = Some(n),
                Some(_) => {
                    fetched.truncated = true;
                    fetched.finished = true;
                    break;
                }
                None => {
                    fetched.finished = true;
                    break;
                }
            }
        }
        Ok(Step::Done(acc.expect("at least one page")))
    }

    fn fetch_author(&self, id: &str) -> Result<Step<AuthorPage>, HttpError> {
        let mut cursor: Option<String> = None;
        let mut acc: Option<AuthorPage> = None;
        loop {
            let mut request = format!("/author/{}/papers", encode_path_id(id));
            if let Some(c) = &cursor {
                request.push_str(&format!("?cursor={}", encode_path_id(c)));
            }
            let page: AuthorPage = match self.client.get_json(&request) {
                Ok(Some(p)) => p,
                Ok(None) => return Ok(Step::Missing),
                Err(e) if e.is_unreachable() => {
                    return Ok(Step::Abandoned(ResumePoint {
                        target: ResumeTarget::Author(id.to_string()),
                        cursor,
                    }))
                }
                Err(e @ (HttpError::Status { .. } | HttpError::Decode { .. })) => {
                    return Ok(Step::Failed(e.to_string()))
                }
                Err(e) => return Err(e),
            };
            let next = page.next.clone();
            match &mut acc {
                None => acc = Some(AuthorPage { next: None, ..page }),
                Some(a) => a.papers.extend(page.papers),
            }
            match next {
                Some(n) => cursor = Some(n),
                None => break,
            }
        }
        Ok(Step::Done(acc.expect("at least one page")))
    }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .thread_name(|i| format!("graph-fetch-{i}"))
        .build()
        .expect("worker pool")
}

/// Fetches the paper graph around `ids`.
///
/// Ids are paper ids or prefixed external ids (`DOI:…`, `ARXIV:…`). Unknown
/// ids are recorded as misses. If the source stops answering, the delta is
/// returned with what arrived and resume points for the rest. Only
/// authentication and cache failures abort the run.
pub fn fetch_paper_graph(ids: &[String], plan: &FetchPlan) -> Result<GraphDelta, HttpError> {
    let client = plan.graph_client();
    fetch_paper_graph_with(&client, ids, plan)
}

/// [`fetch_paper_graph`] over an existing client, so callers can read its
/// request and retry counters afterwards.
pub fn fetch_paper_graph_with(
    client: &SourceClient,
    ids: &[String],
    plan: &FetchPlan,
) -> Result<GraphDelta, HttpError> {
    let mut delta = GraphDelta::default();
    let lookups: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if lookups.is_empty() {
        return Ok(delta);
    }
    let fetcher = Fetcher { client, plan };
    let pool = pool(plan.workers);

    let roots: Vec<(String, Step<FetchedPaper>)> = pool.install(|| {
        lookups
            .par_iter()
            .map(|id| fetcher.fetch_paper(id).map(|s| (id.clone(), s)))
            .collect::<Result<_, _>>()
    })?;

    let mut fetched_roots = Vec::new();
    for (lookup, step) in roots {
        match step {
            Step::Done(p) => {
                delta.resolved.insert(lookup, p.meta.paper_id.clone());
                fetched_roots.push(p);
            }
            Step::Missing => delta.misses.push(lookup),
            Step::Failed(msg) => delta.failures.push(msg),
            Step::Abandoned(point) => delta.resume.push(point),
        }
    }
    fetched_roots.sort_by(|a, b| a.meta.paper_id.cmp(&b.meta.paper_id));
    fetched_roots.dedup_by(|a, b| a.meta.paper_id == b.meta.paper_id);
    let root_ids: BTreeSet<String> = fetched_roots.iter().map(|p| p.meta.paper_id.clone()).collect();

    let mut secondary = BTreeSet::new();
    let mut author_ids = BTreeSet::new();
    for p in &fetched_roots {
        if plan.fetch_references {
            secondary.extend(p.references.iter().cloned());
        }
        if plan.fetch_citations {
            secondary.extend(p.citations.iter().map(|c| c.paper_id.clone()));
        }
        if plan.fetch_author_papers {
            author_ids.extend(p.meta.authors.iter().map(|a| a.author_id.clone()));
        }
    }
    let secondary: Vec<String> = secondary.difference(&root_ids).cloned().collect();
    let author_ids: Vec<String> = author_ids.into_iter().collect();

    let (papers, authors) = pool.install(|| {
        let papers = secondary
            .par_iter()
            .map(|id| fetcher.fetch_paper(id).map(|s| (id.clone(), s)))
            .collect::<Result<Vec<_>, _>>();
        let authors = author_ids
            .par_iter()
            .map(|id| fetcher.fetch_author(id).map(|s| (id.clone(), s)))
            .collect::<Result<Vec<_>, _>>();
        (papers, authors)
    });
    let (papers, authors) = (papers?, authors?);

    let mut available: BTreeSet<String> = root_ids.clone();
    for (id, step) in papers {
        match step {
            Step::Done(p) => {
                if p.truncated {
                    delta.truncated.push(p.meta.paper_id.clone());
                }
                if let Some(cursor) = &p.resume {
                    delta.resume.push(ResumePoint {
                        target: ResumeTarget::Paper(id.clone()),
                        cursor: Some(cursor.clone()),
                    });
                }
                available.insert(p.meta.paper_id.clone());
                delta.add_citations(&p.meta.paper_id, &p.citations);
                delta.add_paper(p.record(true));
            }
            Step::Missing => delta.misses.push(id),
            Step::Failed(msg) => delta.failures.push(msg),
            Step::Abandoned(point) => delta.resume.push(point),
        }
    }

    let mut authors_ok = BTreeSet::new();
    for (id, step) in authors {
        match step {
            Step::Done(page) => {
                let mut record = AuthorRecord {
                    author_id: page.author_id.clone(),
                    name: page.name.clone(),
                    paper_ids: Vec::new(),
                };
                for pub_ in page.papers {
                    let mut p = PaperRecord::new(pub_.paper_id.clone());
                    p.title = pub_.title;
                    p.publication_year = pub_.year;
                    p.citations_fetched = true;
                    let mut cits = pub_.citations;
                    if cits.len() > plan.max_edges_per_paper {
                        cits.truncate(plan.max_edges_per_paper);
                        delta.truncated.push(pub_.paper_id.clone());
                    }
                    delta.add_citations(&pub_.paper_id, &cits);
                    if !record.paper_ids.contains(&pub_.paper_id) {
                        record.paper_ids.push(pub_.paper_id);
                    }
                    delta.add_paper(p);
                }
                authors_ok.insert(id);
                delta.authors.insert(record.author_id.clone(), record);
            }
            Step::Missing => delta.misses.push(format!("author:{id}")),
            Step::Failed(msg) => delta.failures.push(msg),
            Step::Abandoned(point) => delta.resume.push(point),
        }
    }

    for p in &fetched_roots {
        let id = &p.meta.paper_id;
        if p.truncated {
            delta.truncated.push(id.clone());
        }
        if let Some(cursor) = &p.resume {
            delta.resume.push(ResumePoint {
                target: ResumeTarget::Paper(id.clone()),
                cursor: Some(cursor.clone()),
            });
        }
        let mut record = p.record(plan.fetch_citations);
        if plan.fetch_references && p.finished {
            // unresolvable references are left out rather than kept dangling
            let mut refs: Vec<String> = Vec::new();
            for r in &p.references {
                if available.contains(r) && !refs.contains(r) {
                    refs.push(r.clone());
                }
            }
            record.reference_ids = Some(refs);
        }
        if plan.fetch_author_papers {
            let all: Vec<String> = p.meta.authors.iter().map(|a| a.author_id.clone()).collect();
            if all.iter().all(|a| authors_ok.contains(a)) {
                record.author_ids = all;
            }
        }
        if plan.fetch_citations {
            delta.add_citations(id, &p.citations);
        }
        delta.add_paper(record);
    }

    delta.misses.sort();
    delta.misses.dedup();
    delta.failures.sort();
    delta.truncated.sort();
    delta.truncated.dedup();
    delta.resume.sort();
    Ok(delta)
}
