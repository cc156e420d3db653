//! Ingest against local mock servers, then replay the same run offline
//! from the response cache.
//!
//! `cargo run --example mock_ingest`

use std::sync::Arc;

use ad_influence::ingest::mock::{MockKind, MockOptions, MockServer, MockWorld};
use ad_influence::ingest::{ingest_all, CorpusSource, FetchPlan, RateLimit};

fn main() {
    let world = Arc::new(MockWorld::from_json(include_str!("../tests/fixtures/mock_world.json")).unwrap());
    let catalogue = MockServer::start(MockKind::Datasets, world.clone(), MockOptions::default()).unwrap();
    let graph = MockServer::start(MockKind::Graph, world.clone(), MockOptions::default()).unwrap();
    let altmetric = MockServer::start(MockKind::Altmetric, world, MockOptions::default()).unwrap();

    let cache = tempfile::tempdir().unwrap();
    let corpus = CorpusSource::new(format!("{}/datasets.json", catalogue.url()), "2023-01-04T00:00:00Z");
    let mut plan = FetchPlan::new(graph.url(), altmetric.url());
    plan.graph.rate = RateLimit::new(100.0, 10);
    plan.cache_dir = Some(cache.path().to_path_buf());

    let online = ingest_all(&corpus, &plan).expect("mock ingest");
    let r = &online.report;
    println!("datasets {} linked {} graph requests {} altmetric records {}", r.datasets, r.linked, r.graph_requests, r.altmetric_records);
    println!("not ingestible {:?}", r.non_ingestible);
    println!("graph misses {:?}", r.graph_misses);
    println!("partial: {}", online.partial);

    plan.offline = true;
    let offline = ingest_all(&corpus, &plan).expect("offline replay");
    println!(
        "offline replay identical: {}",
        offline.snapshot.to_canonical_string() == online.snapshot.to_canonical_string()
    );
    print!("\n{}", online.snapshot.to_canonical_string());
}
