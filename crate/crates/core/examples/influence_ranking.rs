//! Influence Score ranking of a small snapshot, and a score rebuilt from
//! published percentiles.
//!
//! `cargo run --example influence_ranking`

use std::collections::BTreeMap;

use ad_influence::corpus::load_snapshot;
use ad_influence::influence::ranking_to_markdown;
use ad_influence::influence::{rank_datasets, FeatureSet, InfluenceResult, RankFilter};
use ad_influence::metrics::Feature;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden_snapshot.jsonl");
    let snapshot = load_snapshot(path).expect("fixture loads");

    for year in [2020, snapshot.coverage_year()] {
        let ranking = rank_datasets(&snapshot, year, &RankFilter::default(), &FeatureSet::default());
        println!("## {year}\n\n{}", ranking_to_markdown(&ranking));
    }

    // percentiles as printed for one dataset in the 2022 ranking table
    let percentiles = BTreeMap::from([
        (Feature::NCit3, 0.92),
        (Feature::CitH3, 0.92),
        (Feature::RefH3, 0.85),
        (Feature::AutMuH3, 0.82),
        (Feature::NFrames, 0.43),
        (Feature::NSensors, 0.64),
        (Feature::AasCurr, 1.0),
    ]);
    for (label, set) in [("all features", FeatureSet::default()), ("published 2022", FeatureSet::published_2022())] {
        let r = InfluenceResult::from_percentiles("example", 2022, percentiles.clone(), &set);
        println!("IS over {label}: {:.4}", r.is_score.unwrap());
    }
}
