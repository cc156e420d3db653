//! Early-citation regression on a synthetic corpus with a planted
//! attention effect.
//!
//! `cargo run --release --example early_citation_regression [seed]`

use ad_influence::regression::regression_to_markdown;
use ad_influence::regression::{paper_regression_table, run_paper_regression};
use ad_influence::synth::{regression_corpus, RegressionCorpusConfig};

fn main() {
    let seed = std::env::args().nth(1).map_or(7, |s| s.parse().expect("seed is an integer"));
    let config = RegressionCorpusConfig::default();
    let snapshot = regression_corpus(seed, &config);
    let table = paper_regression_table(&snapshot);
    let result = run_paper_regression(&table).expect("complete synthetic table");
    println!(
        "planted: intercept {} linear {} quadratic {} (all other terms zero)\n",
        config.intercept, config.linear, config.quadratic
    );
    println!("{}", regression_to_markdown(&result));
    let significant: Vec<&str> = result
        .terms
        .iter()
        .filter(|t| t.name != "intercept" && t.p < 0.01)
        .map(|t| t.name.as_str())
        .collect();
    println!("significant at 0.01: {significant:?}");
}
