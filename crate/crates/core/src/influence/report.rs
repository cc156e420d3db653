use serde::Serialize;

use super::{InfluenceResult, Ranking, INFLUENCE_FEATURES};

const ABSENT: &str = "--";

fn header_names() -> Vec<&'static str> {
    let mut names = vec!["IS"];
    names.extend(INFLUENCE_FEATURES.iter().map(|f| f.name()));
    names
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

/// Ranked table as Markdown; the three highest values per column are bold.
pub fn ranking_to_markdown(ranking: &Ranking) -> String {
    let mut out = format!("| Dataset | {} |\n", header_names().join(" | "));
    out.push_str(&format!("|---|{}\n", "---|".repeat(INFLUENCE_FEATURES.len() + 1)));
    for row in &ranking.rows {
        let mut cells = vec![
            row.name.replace('|', "\\|"),
            row.result.is_score.map(fmt2).unwrap_or_else(|| ABSENT.into()),
        ];
        for f in INFLUENCE_FEATURES {
            cells.push(match row.result.percentile(f) {
                Some(p) if row.top3.contains(&f) => format!("**{}**", fmt2(p)),
                Some(p) => fmt2(p),
                None => ABSENT.into(),
            });
        }
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

/// Ranked table as CSV; top-3 cells carry a trailing `*`.
pub fn ranking_to_csv(ranking: &Ranking) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset"];
    header.extend(header_names());
    w.write_record(&header).unwrap();
    for row in &ranking.rows {
        let mut cells = vec![
            row.name.clone(),
            row.result.is_score.map(fmt2).unwrap_or_else(|| ABSENT.into()),
        ];
        for f in INFLUENCE_FEATURES {
            cells.push(match row.result.percentile(f) {
                Some(p) if row.top3.contains(&f) => format!("{}*", fmt2(p)),
                Some(p) => fmt2(p),
                None => ABSENT.into(),
            });
        }
        w.write_record(&cells).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn ranking_to_json(ranking: &Ranking) -> String {
    let mut s = serde_json::to_string_pretty(ranking).unwrap();
    s.push('\n');
    s
}

/// Per-year score and percentile series for one dataset.
pub fn history_to_csv(history: &[InfluenceResult]) -> String {
    let mut out = String::from("year,");
    out.push_str(&header_names().join(","));
    out.push('\n');
    for r in history {
        let mut cells = vec![r.eval_year.to_string(), r.is_score.map(|v| v.to_string()).unwrap_or_default()];
        cells.extend(
            INFLUENCE_FEATURES
                .iter()
                .map(|&f| r.percentile(f).map(|v| v.to_string()).unwrap_or_default()),
        );
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Score distribution over equal-width bins on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub unscored: usize,
}

impl Histogram {
    pub fn of(results: &[InfluenceResult], bins: usize) -> Self {
        assert!(bins > 0, "histogram needs at least one bin");
        let mut counts = vec![0; bins];
        let mut unscored = 0;
        for r in results {
            match r.is_score {
                Some(s) => counts[((s * bins as f64) as usize).min(bins - 1)] += 1,
                None => unscored += 1,
            }
        }
        let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        Self { edges, counts, unscored }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.unscored
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:.2},{:.2},{c}\n", self.edges[i], self.edges[i + 1]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::{FeatureSet, RankedRow};
    use crate::metrics::Feature;
    use std::collections::{BTreeMap, BTreeSet};

    fn ranking() -> Ranking {
        let p = BTreeMap::from([(Feature::NCit3, 0.7), (Feature::RefH3, 0.96)]);
        let result = InfluenceResult::from_percentiles("w", 2022, p, &FeatureSet::default());
        Ranking {
            eval_year: 2022,
            rows: vec![RankedRow {
                rank: 1,
                name: "Waymo".into(),
                result,
                top3: BTreeSet::from([Feature::NCit3]),
            }],
        }
    }

    #[test]
    fn markdown_marks_top3_and_absences() {
        let md = ranking_to_markdown(&ranking());
        let row = md.lines().nth(2).unwrap();
        assert_eq!(row, "| Waymo | 0.83 | **0.70** | -- | 0.96 | -- | -- | -- | -- | -- |");
    }

    #[test]
    fn empty_ranking_is_header_only() {
        let empty = Ranking { eval_year: 2022, rows: vec![] };
        assert_eq!(ranking_to_markdown(&empty).lines().count(), 2);
        assert_eq!(ranking_to_csv(&empty).lines().count(), 1);
    }

    #[test]
    fn histogram_sums_to_corpus() {
        let mk = |s: Option<f64>| InfluenceResult {
            dataset_id: "x".into(),
            eval_year: 2022,
            percentiles: BTreeMap::new(),
            included: FeatureSet::default(),
            n_available: usize::from(s.is_some()),
            is_score: s,
        };
        let rs = vec![mk(Some(1.0)), mk(Some(0.05)), mk(Some(0.1)), mk(None)];
        let h = Histogram::of(&rs, 10);
        assert_eq!(h.total(), 4);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[9], 1);
    }
}
