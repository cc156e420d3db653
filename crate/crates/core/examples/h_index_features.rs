//! h-index basics and a full feature vector for a hand-built dataset.
//!
//! `cargo run --example h_index_features`

use ad_influence::corpus::{AltmetricRecord, AuthorRecord, CitationEdge, DatasetEntry, PaperRecord, SnapshotBuilder};
use ad_influence::metrics::{h_index, FeatureExtractor, Window3};
use std::collections::BTreeMap;

fn paper(id: &str, year: i32) -> PaperRecord {
    let mut p = PaperRecord::new(id);
    p.publication_year = Some(year);
    p.citations_fetched = true;
    p
}

fn main() {
    for counts in [vec![10, 8, 5, 4, 3], vec![25, 8, 5, 3, 3], vec![0, 0], vec![]] {
        println!("h_index({counts:?}) = {}", h_index(&counts));
    }

    let mut b = SnapshotBuilder::new("2023-01-04T00:00:00Z");
    let mut ds = DatasetEntry::new("demo", "Demo Driving Set");
    ds.paper_id = Some("P".into());
    ds.n_frames = Some(120_000);
    ds.n_sensors = Some(3);
    b.dataset(ds);

    let mut root = paper("P", 2020);
    root.reference_ids = Some(vec!["R1".into(), "R2".into()]);
    root.author_ids = vec!["au".into()];
    b.paper(root);
    b.paper(paper("R1", 2017));
    b.paper(paper("R2", 2016));
    b.author(AuthorRecord {
        author_id: "au".into(),
        name: "A. Author".into(),
        paper_ids: vec!["P".into(), "R1".into()],
    });

    // citers spread over a few years; only 2020..=2022 counts for 2022
    for (i, year) in [2019, 2020, 2021, 2021, 2022, 2022, 2022].into_iter().enumerate() {
        b.citation(CitationEdge::new(format!("C{i}"), "P", Some(year)));
    }
    for i in 0..4 {
        b.citation(CitationEdge::new(format!("C{i}"), "R1", Some(2021)));
    }
    b.citation(CitationEdge::new("C0", "R2", Some(2022)));
    b.altmetric(AltmetricRecord::new("P", 42.5, Some(12.0), BTreeMap::from([("mendeley".into(), 80)])));
    let snapshot = b.build();

    let extractor = FeatureExtractor::new(&snapshot);
    let window = Window3::ending(2022);
    println!("window {:?}", window.years());
    println!("n_cit3(P) = {}", extractor.windowed_citations("P", window).unwrap());
    let fv = extractor.extract_features("demo", 2022).unwrap();
    println!("{}", serde_json::to_string_pretty(&fv).unwrap());
}
