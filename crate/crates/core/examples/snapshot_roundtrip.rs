//! Build, save and reload a snapshot; the reload is byte-identical.
//!
//! `cargo run --example snapshot_roundtrip`

use ad_influence::corpus::{load_snapshot, save_snapshot, CitationEdge, DatasetEntry, PaperRecord, SaveOptions, SnapshotBuilder};

fn main() {
    let mut b = SnapshotBuilder::new("2023-01-04T00:00:00Z");
    b.source_version("hand-built example");
    let mut d = DatasetEntry::new("tiny", "Tiny Set");
    d.paper_id = Some("P".into());
    b.dataset(d);
    let mut p = PaperRecord::new("P");
    p.publication_year = Some(2021);
    p.citations_fetched = true;
    b.paper(p);
    // insertion order does not matter; repeats collapse to one edge
    b.citation(CitationEdge::new("Z", "P", Some(2022)));
    b.citation(CitationEdge::new("A", "P", Some(2021)));
    b.citation(CitationEdge::new("A", "P", None));
    let snapshot = b.build();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snapshot.jsonl");
    save_snapshot(&snapshot, &path, SaveOptions::default()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    print!("{text}");

    let reloaded = load_snapshot(&path).unwrap();
    println!("\nentities: {}", reloaded.entity_count());
    println!("byte-identical after reload: {}", reloaded.to_canonical_string() == text);
}
