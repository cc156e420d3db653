//! Blocking JSON-over-HTTP client shared by the source adapters.
//!
//! Every request passes through a per-source [`TokenBucket`], is retried on
//! throttling and transient failures according to a [`RetryPolicy`], and is
//! optionally mirrored into an [`HttpCache`] so that a later `offline` run
//! can replay it without touching the network.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, AsciiSet, CONTROLS};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::write_atomic;

/// Characters escaped inside an id that is placed in a URL path. `/` and `:`
/// stay literal because DOIs and prefixed ids such as `DOI:10.1/x` use them.
const PATH_ID: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'<')
    .add(b'>')
    .add(b'?')
    .add(b'`')
    .add(b'{')
    .add(b'}')
    .add(b'&')
    .add(b'+');

pub(crate) fn encode_path_id(id: &str) -> String {
    utf8_percent_encode(id, PATH_ID).to_string()
}

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("{source_name}: authentication rejected (HTTP {status}) for {path}")]
    Auth {
        source_name: String,
        status: u16,
        path: String,
    },
    #[error("{source_name}: gave up on {path} after {attempts} attempts ({last})")]
    Exhausted {
        source_name: String,
        path: String,
        attempts: u32,
        last: String,
    },
    #[error("{source_name}: unexpected HTTP {status} for {path}")]
    Status {
        source_name: String,
        status: u16,
        path: String,
    },
    #[error("{source_name}: {path} is not in the offline cache")]
    OfflineMiss { source_name: String, path: String },
    #[error("{source_name}: malformed response for {path}: {message}")]
    Decode {
        source_name: String,
        path: String,
        message: String,
    },
    #[error("response cache at {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HttpError {
    /// Whether the source as a whole is unusable (as opposed to one bad request).
    pub fn is_unreachable(&self) -> bool {
        matches!(self, HttpError::Exhausted { .. } | HttpError::OfflineMiss { .. })
    }
}

/// Request budget of one source: a refill rate and a burst allowance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimit {
    pub requests_per_second: f64,
    pub burst: u32,
}

impl RateLimit {
    pub fn new(requests_per_second: f64, burst: u32) -> Self {
        assert!(
            requests_per_second > 0.0 && requests_per_second.is_finite(),
            "rate limit must be a positive number of requests per second"
        );
        assert!(burst >= 1, "burst must allow at least one request");
        Self {
            requests_per_second,
            burst,
        }
    }

    /// Most requests any window of length `window` may contain.
    pub fn max_in_window(&self, window: Duration) -> f64 {
        self.burst as f64 + self.requests_per_second * window.as_secs_f64()
    }
}

impl Default for RateLimit {
    fn default() -> Self {
        Self::new(10.0, 1)
    }
}

/// Token bucket shared by all workers talking to one source.
#[derive(Debug)]
pub struct TokenBucket {
    limit: RateLimit,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(limit: RateLimit) -> Self {
        Self {
            limit,
            state: Mutex::new((limit.burst as f64, Instant::now())),
        }
    }

    pub fn limit(&self) -> RateLimit {
        self.limit
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let now = Instant::now();
                let (tokens, last) = *state;
                let refilled = (tokens + now.duration_since(last).as_secs_f64() * self.limit.requests_per_second)
                    .min(self.limit.burst as f64);
                if refilled >= 1.0 {
                    *state = (refilled - 1.0, now);
                    return;
                }
                *state = (refilled, now);
                (1.0 - refilled) / self.limit.requests_per_second
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Bounded exponential backoff with multiplicative jitter in `[0.5, 1.0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts per request, first try included.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << retry.min(16));
        let capped = exp.min(self.max_delay);
        capped.mul_f64(rand::thread_rng().gen_range(0.5..=1.0))
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

/// A cached or received response. Only 200 and 404 are ever stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub status: u16,
    pub body: String,
}

/// Response store on disk, one file per `(source, request)`.
#[derive(Debug, Clone)]
pub struct HttpCache {
    dir: PathBuf,
}

impl HttpCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn file_for(&self, source: &str, request: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(source.as_bytes());
        h.update([0u8]);
        h.update(request.as_bytes());
        self.dir.join(format!("{}.json", hex::encode(h.finalize())))
    }

    pub fn get(&self, source: &str, request: &str) -> Result<Option<CachedResponse>, HttpError> {
        let path = self.file_for(source, request);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| HttpError::Cache {
                path,
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(HttpError::Cache { path, source }),
        }
    }

    pub fn put(&self, source: &str, request: &str, response: &CachedResponse) -> Result<(), HttpError> {
        let path = self.file_for(source, request);
        let io = |source| HttpError::Cache {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(&self.dir).map_err(io)?;
        let bytes = serde_json::to_vec(response).expect("cached response serializes");
        write_atomic(&path, &bytes).map_err(io)
    }
}

/// Connection settings of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub rate: RateLimit,
}

impl SourceConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            rate: RateLimit::default(),
        }
    }
}

/// Outcome of a GET that did not fail outright.
#[derive(Debug, Clone, PartialEq)]
pub enum Fetched {
    Body(String),
    NotFound,
}

/// Rate-limited, retrying, caching client for one source.
#[derive(Debug)]
pub struct SourceClient {
    name: String,
    base_url: String,
    api_key: Option<String>,
    bucket: TokenBucket,
    retry: RetryPolicy,
    cache: Option<HttpCache>,
    offline: bool,
    agent: ureq::Agent,
    requests: AtomicUsize,
    retries: AtomicUsize,
}

impl SourceClient {
    pub fn new(
        name: impl Into<String>,
        config: &SourceConfig,
        retry: RetryPolicy,
        cache: Option<HttpCache>,
        offline: bool,
    ) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout(Duration::from_secs(30))
            .build();
        Self {
            name: name.into(),
            base_url: config.base_url.trim_end_matches('/').to_string(),
            api_key: config.api_key.clone(),
            bucket: TokenBucket::new(config.rate),
            retry,
            cache,
            offline,
            agent,
            requests: AtomicUsize::new(0),
            retries: AtomicUsize::new(0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Requests sent over the network so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> usize {
        self.retries.load(Ordering::Relaxed)
    }

    /// GET `request` (path plus query, relative to the base URL).
    pub fn get(&self, request: &str) -> Result<Fetched, HttpError> {
        if self.offline {
            let cache = self.cache.as_ref();
            return match cache.map(|c| c.get(&self.name, request)).transpose()?.flatten() {
                Some(hit) => Ok(to_fetched(hit)),
                None => Err(HttpError::OfflineMiss {
                    source_name: self.name.clone(),
                    path: request.to_string(),
                }),
            };
        }
        let response = self.get_network(request)?;
        if let Some(cache) = &self.cache {
            cache.put(&self.name, request, &response)?;
        }
        Ok(to_fetched(response))
    }

    /// GET and decode a JSON body.
    pub fn get_json<T: serde::de::DeserializeOwned>(&self, request: &str) -> Result<Option<T>, HttpError> {
        match self.get(request)? {
            Fetched::NotFound => Ok(None),
            Fetched::Body(body) => serde_json::from_str(&body).map(Some).map_err(|e| HttpError::Decode {
                source_name: self.name.clone(),
                path: request.to_string(),
                message: e.to_string(),
            }),
        }
    }

    fn get_network(&self, request: &str) -> Result<CachedResponse, HttpError> {
        let url = format!("{}{}", self.base_url, request);
        let max = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..max {
            if attempt > 0 {
                self.retries.fetch_add(1, Ordering::Relaxed);
                log::warn!("{}: retry {attempt} for {request} after {last}", self.name);
                thread::sleep(self.retry.delay(attempt - 1));
            }
            self.bucket.acquire();
            self.requests.fetch_add(1, Ordering::Relaxed);
            let mut req = self.agent.get(&url);
            if let Some(key) = &self.api_key {
                req = req.set("x-api-key", key);
            }
            match req.call() {
                Ok(resp) => {
                    let status = resp.status();
                    match resp.into_string() {
                        Ok(body) => return Ok(CachedResponse { status, body }),
                        Err(e) => last = format!("body read failed: {e}"),
                    }
                }
                Err(ureq::Error::Status(404, _)) => {
                    return Ok(CachedResponse {
                        status: 404,
                        body: String::new(),
                    })
                }
                Err(ureq::Error::Status(status @ (401 | 403), _)) => {
                    return Err(HttpError::Auth {
                        source_name: self.name.clone(),
                        status,
                        path: request.to_string(),
                    })
                }
                Err(ureq::Error::Status(status, _)) if status == 429 || status >= 500 => {
                    last = format!("HTTP {status}");
                }
                Err(ureq::Error::Status(status, _)) => {
                    return Err(HttpError::Status {
                        source_name: self.name.clone(),
                        status,
                        path: request.to_string(),
                    })
                }
                Err(ureq::Error::Transport(t)) => last = t.to_string(),
            }
        }
        Err(HttpError::Exhausted {
            source_name: self.name.clone(),
            path: request.to_string(),
            attempts: max,
            last,
        })
    }
}

fn to_fetched(r: CachedResponse) -> Fetched {
    if r.status == 404 {
        Fetched::NotFound
    } else {
        Fetched::Body(r.body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_spaces_requests() {
        let bucket = TokenBucket::new(RateLimit::new(200.0, 1));
        let start = Instant::now();
        for _ in 0..11 {
            bucket.acquire();
        }
        // first token is free, ten more at 5 ms each
        assert!(start.elapsed() >= Duration::from_millis(48));
    }

    #[test]
    fn burst_is_immediate() {
        let bucket = TokenBucket::new(RateLimit::new(1.0, 5));
        let start = Instant::now();
        for _ in 0..5 {
            bucket.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(200));
    }

    #[test]
    fn backoff_is_bounded_and_jittered() {
        let p = RetryPolicy {
            max_attempts: 4,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(300),
        };
        for retry in 0..6 {
            let d = p.delay(retry);
            let full = Duration::from_millis(100 << retry).min(Duration::from_millis(300));
            assert!(d <= full && d >= full / 2, "{d:?} vs {full:?}");
        }
    }

    #[test]
    fn cache_round_trip_and_key_separation() {
        let dir = tempfile::tempdir().unwrap();
        let cache = HttpCache::new(dir.path().join("c"));
        let r = CachedResponse {
            status: 200,
            body: "{\"a\":1}".into(),
        };
        assert_eq!(cache.get("s", "/x").unwrap(), None);
        cache.put("s", "/x", &r).unwrap();
        assert_eq!(cache.get("s", "/x").unwrap(), Some(r));
        assert_eq!(cache.get("t", "/x").unwrap(), None);
    }

    #[test]
    fn offline_without_cache_entry_fails() {
        let dir = tempfile::tempdir().unwrap();
        let c = SourceClient::new(
            "s",
            &SourceConfig::new("http://127.0.0.1:9"),
            RetryPolicy::default(),
            Some(HttpCache::new(dir.path())),
            true,
        );
        assert!(matches!(c.get("/nope"), Err(HttpError::OfflineMiss { .. })));
        assert_eq!(c.requests_sent(), 0);
    }

    #[test]
    fn path_ids_keep_doi_shape() {
        assert_eq!(encode_path_id("DOI:10.1109/cvpr.2020"), "DOI:10.1109/cvpr.2020");
        assert_eq!(encode_path_id("a b?c"), "a%20b%3Fc");
    }
}
