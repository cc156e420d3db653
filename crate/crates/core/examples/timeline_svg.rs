//! Publication timeline and a score history rendered as SVG.
//!
//! `cargo run --example timeline_svg [out.svg]`

use ad_influence::cli::svg::{LineChart, Series};
use ad_influence::corpus::{build_publication_timeline, load_snapshot};
use ad_influence::influence::{score_history, FeatureSet};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden_snapshot.jsonl");
    let snapshot = load_snapshot(path).unwrap();
    let timeline = build_publication_timeline(&snapshot);
    print!("{}", timeline.to_csv());

    let end = snapshot.coverage_year();
    let history = score_history("bravo", &snapshot, 2016..=end, &FeatureSet::default()).unwrap();
    let chart = LineChart {
        title: "bravo".into(),
        x_labels: history.iter().map(|r| r.eval_year.to_string()).collect(),
        y_label: "Influence Score".into(),
        y_max: Some(1.0),
        series: vec![Series::new("IS", history.iter().map(|r| r.is_score).collect())],
    };
    let svg = chart.to_svg();
    match std::env::args().nth(1) {
        Some(out) => {
            std::fs::write(&out, svg).unwrap();
            println!("wrote {out}");
        }
        None => println!("\n{svg}"),
    }
}
