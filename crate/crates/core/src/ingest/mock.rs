//! In-process HTTP servers that impersonate the three metadata sources.
//!
//! A [`MockWorld`] describes a small bibliographic universe. Citations are
//! derived from the reference lists unless a paper scripts its own citer
//! list. The servers add scripted misbehaviour on top: an initial run of error
//! statuses, a permanently failing mode, a required API key and small pages.

use std::collections::BTreeMap;
use std::io;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};
use tiny_http::{Header, Response, Server};

use super::altmetric::AltmetricBody;
use super::graph::{AuthorPage, AuthorPaper, AuthorRef, CitingRef, PaperPage};
use crate::corpus::Year;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockPaper {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub year: Option<Year>,
    #[serde(default)]
    pub doi: Option<String>,
    #[serde(default)]
    pub arxiv: Option<String>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub references: Vec<String>,
    /// Citing papers as served, overriding the list derived from references.
    /// Real sources are not always consistent; this scripts such a source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cited_by: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockAuthor {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub papers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockAltmetric {
    pub score: f64,
    #[serde(default)]
    pub readers: BTreeMap<String, u64>,
    #[serde(default)]
    pub percentile_3m: Option<f64>,
}

/// Everything the three mock sources know.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockWorld {
    /// Document served verbatim as the dataset catalogue.
    #[serde(default)]
    pub datasets: serde_json::Value,
    #[serde(default)]
    pub papers: BTreeMap<String, MockPaper>,
    #[serde(default)]
    pub authors: BTreeMap<String, MockAuthor>,
    /// Keyed by DOI.
    #[serde(default)]
    pub altmetric: BTreeMap<String, MockAltmetric>,
}

impl MockWorld {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Papers citing `paper_id` with their years, ordered by id.
    pub fn citers(&self, paper_id: &str) -> Vec<(String, Option<Year>)> {
        if let Some(list) = self.papers.get(paper_id).and_then(|p| p.cited_by.as_ref()) {
            let mut out: Vec<_> = list
                .iter()
                .map(|id| (id.clone(), self.papers.get(id).and_then(|p| p.year)))
                .collect();
            out.sort();
            return out;
        }
        self.papers
            .iter()
            .filter(|(_, p)| p.references.iter().any(|r| r == paper_id))
            .map(|(id, p)| (id.clone(), p.year))
            .collect()
    }

    fn resolve(&self, lookup: &str) -> Option<&str> {
        let find = |pred: &dyn Fn(&MockPaper) -> bool| {
            self.papers.iter().find(|(_, p)| pred(p)).map(|(id, _)| id.as_str())
        };
        if let Some(doi) = lookup.strip_prefix("DOI:") {
            let doi = doi.to_lowercase();
            find(&|p| p.doi.as_deref().map(str::to_lowercase).as_deref() == Some(doi.as_str()))
        } else if let Some(ax) = lookup.strip_prefix("ARXIV:") {
            find(&|p| p.arxiv.as_deref() == Some(ax))
        } else {
            self.papers.get_key_value(lookup).map(|(k, _)| k.as_str())
        }
    }
}

/// Which source a server impersonates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockKind {
    /// Serves the catalogue at `/datasets.json`.
    Datasets,
    /// `/paper/{id}` and `/author/{id}/papers`.
    Graph,
    /// `/doi/{doi}`.
    Altmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockOptions {
    /// Entries per list and page.
    pub page_size: usize,
    /// Statuses returned, in order, to the first requests before normal service.
    pub script: Vec<u16>,
    /// Answer every request with 503.
    pub down: bool,
    /// Reject requests whose `x-api-key` header differs.
    pub require_key: Option<String>,
    pub threads: usize,
}

impl Default for MockOptions {
    fn default() -> Self {
        Self {
            page_size: 100,
            script: Vec::new(),
            down: false,
            require_key: None,
            threads: 4,
        }
    }
}

/// One request as seen by the server.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestRecord {
    pub at: Instant,
    pub path: String,
    pub status: u16,
}

struct Shared {
    kind: MockKind,
    world: Arc<MockWorld>,
    options: MockOptions,
    script: Mutex<std::collections::VecDeque<u16>>,
    log: Mutex<Vec<RequestRecord>>,
}

/// A running mock source. Dropping it closes the port.
pub struct MockServer {
    url: String,
    stop: Arc<AtomicBool>,
    shared: Arc<Shared>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(kind: MockKind, world: Arc<MockWorld>, options: MockOptions) -> io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| io::Error::other("mock server has no IP address"))?;
        let server = Arc::new(server);
        let stop = Arc::new(AtomicBool::new(false));
        let shared = Arc::new(Shared {
            kind,
            world,
            script: Mutex::new(options.script.iter().copied().collect()),
            options,
            log: Mutex::new(Vec::new()),
        });
        let workers = (0..shared.options.threads.max(1))
            .map(|_| {
                let (server, stop, shared) = (server.clone(), stop.clone(), shared.clone());
                thread::spawn(move || {
                    while !stop.load(Ordering::Relaxed) {
                        match server.recv_timeout(Duration::from_millis(20)) {
                            Ok(Some(req)) => shared.handle(req),
                            Ok(None) => {}
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Ok(Self {
            url: format!("http://127.0.0.1:{port}"),
            stop,
            shared,
            workers,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Requests received so far, in arrival order.
    pub fn requests(&self) -> Vec<RequestRecord> {
        let mut log = self.shared.log.lock().unwrap().clone();
        log.sort_by_key(|r| r.at);
        log
    }

    pub fn shutdown(mut self) {
        self.stop_workers();
    }

    fn stop_workers(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop_workers();
    }
}

fn json_response(status: u16, body: String) -> Response<io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").unwrap();
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn page<T: Clone>(items: &[T], offset: usize, size: usize) -> (Vec<T>, bool) {
    let start = offset.min(items.len());
    let end = (start + size).min(items.len());
    (items[start..end].to_vec(), end < items.len())
}

impl Shared {
    fn handle(&self, req: tiny_http::Request) {
        let at = Instant::now();
        let raw = req.url().to_string();
        let (status, body) = self.respond(&req, &raw);
        self.log.lock().unwrap().push(RequestRecord {
            at,
            path: raw,
            status,
        });
        let _ = req.respond(json_response(status, body));
    }

    fn respond(&self, req: &tiny_http::Request, raw: &str) -> (u16, String) {
        if self.options.down {
            return (503, String::new());
        }
        if let Some(status) = self.script.lock().unwrap().pop_front() {
            return (status, String::new());
        }
        if let Some(key) = &self.options.require_key {
            let sent = req
                .headers()
                .iter()
                .find(|h| h.field.equiv("x-api-key"))
                .map(|h| h.value.as_str());
            if sent != Some(key.as_str()) {
                return (401, String::new());
            }
        }
        let (path, query) = raw.split_once('?').unwrap_or((raw, ""));
        let path = percent_decode_str(path).decode_utf8_lossy().into_owned();
        let cursor: usize = url::form_urlencoded::parse(query.as_bytes())
            .find(|(k, _)| k == "cursor")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(0);
        let found = match self.kind {
            MockKind::Datasets => (path == "/datasets.json").then(|| self.world.datasets.to_string()),
            MockKind::Graph => self.graph(&path, cursor),
            MockKind::Altmetric => path.strip_prefix("/doi/").and_then(|doi| self.altmetric(doi)),
        };
        match found {
            Some(body) => (200, body),
            None => (404, String::new()),
        }
    }

    fn graph(&self, path: &str, cursor: usize) -> Option<String> {
        let size = self.options.page_size.max(1);
        if let Some(rest) = path.strip_prefix("/author/") {
            let id = rest.strip_suffix("/papers")?;
            let author = self.world.authors.get(id)?;
            let (ids, more) = page(&author.papers, cursor, size);
            let papers = ids
                .iter()
                .filter_map(|pid| {
                    let p = self.world.papers.get(pid)?;
                    Some(AuthorPaper {
                        paper_id: pid.clone(),
                        title: p.title.clone(),
                        year: p.year,
                        citations: self.citing_refs(pid),
                    })
                })
                .collect();
            let body = AuthorPage {
                author_id: id.to_string(),
                name: author.name.clone(),
                papers,
                next: more.then(|| (cursor + size).to_string()),
            };
            return Some(serde_json::to_string(&body).unwrap());
        }
        let lookup = path.strip_prefix("/paper/")?;
        let id = self.world.resolve(lookup)?;
        let p = &self.world.papers[id];
        let citations = self.citing_refs(id);
        let (references, more_refs) = page(&p.references, cursor, size);
        let (citations, more_cits) = page(&citations, cursor, size);
        let mut external_ids = BTreeMap::new();
        if let Some(doi) = &p.doi {
            external_ids.insert("DOI".to_string(), doi.clone());
        }
        if let Some(ax) = &p.arxiv {
            external_ids.insert("ArXiv".to_string(), ax.clone());
        }
        let authors = p
            .authors
            .iter()
            .map(|a| AuthorRef {
                author_id: a.clone(),
                name: self.world.authors.get(a).map(|x| x.name.clone()).unwrap_or_default(),
            })
            .collect();
        let body = PaperPage {
            paper_id: id.to_string(),
            title: p.title.clone(),
            year: p.year,
            external_ids,
            authors,
            references,
            citations,
            next: (more_refs || more_cits).then(|| (cursor + size).to_string()),
        };
        Some(serde_json::to_string(&body).unwrap())
    }

    fn citing_refs(&self, id: &str) -> Vec<CitingRef> {
        self.world
            .citers(id)
            .into_iter()
            .map(|(paper_id, year)| CitingRef { paper_id, year })
            .collect()
    }

    fn altmetric(&self, doi: &str) -> Option<String> {
        let doi = doi.to_lowercase();
        let rec = self.world.altmetric.iter().find(|(k, _)| k.to_lowercase() == doi)?.1;
        let body = AltmetricBody {
            score: rec.score,
            readers: rec.readers.clone(),
            percentile_3m: rec.percentile_3m,
        };
        Some(serde_json::to_string(&body).unwrap())
    }
}
