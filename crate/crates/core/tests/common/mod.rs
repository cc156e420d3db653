#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use ad_influence::ingest::mock::{MockKind, MockOptions, MockServer, MockWorld};
use ad_influence::ingest::{CorpusSource, FetchPlan, RateLimit, RetryPolicy};

pub const CREATED_AT: &str = "2023-01-04T00:00:00Z";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn world() -> Arc<MockWorld> {
    let text = std::fs::read_to_string(fixture("mock_world.json")).unwrap();
    Arc::new(MockWorld::from_json(&text).unwrap())
}

pub struct Trio {
    pub datasets: MockServer,
    pub graph: MockServer,
    pub altmetric: MockServer,
}

impl Trio {
    pub fn start(graph: MockOptions, altmetric: MockOptions) -> Self {
        let w = world();
        Self {
            datasets: MockServer::start(MockKind::Datasets, w.clone(), MockOptions::default()).unwrap(),
            graph: MockServer::start(MockKind::Graph, w.clone(), graph).unwrap(),
            altmetric: MockServer::start(MockKind::Altmetric, w, altmetric).unwrap(),
        }
    }

    pub fn default_pair() -> Self {
        Self::start(MockOptions::default(), MockOptions::default())
    }

    pub fn corpus(&self) -> CorpusSource {
        CorpusSource::new(format!("{}/datasets.json", self.datasets.url()), CREATED_AT)
    }

    /// Fast retries and a generous rate limit.
    pub fn plan(&self) -> FetchPlan {
        let mut plan = FetchPlan::new(self.graph.url(), self.altmetric.url());
        plan.retry = RetryPolicy {
            max_attempts: 4,
            base_delay: Duration::from_millis(2),
            max_delay: Duration::from_millis(10),
        };
        plan.graph.rate = RateLimit::new(2000.0, 50);
        plan.altmetric.rate = RateLimit::new(2000.0, 50);
        plan
    }
}
