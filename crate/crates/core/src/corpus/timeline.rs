use std::collections::{BTreeMap, BTreeSet};

use super::{Snapshot, Year};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineRow {
    pub year: Year,
    pub datasets: u64,
    pub citations: u64,
    pub cumulative_datasets: u64,
    pub cumulative_citations: u64,
}

/// Yearly dataset releases and citations received by dataset papers, over
/// the contiguous range of years that have any count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Timeline {
    pub rows: Vec<TimelineRow>,
}

impl Timeline {
    pub fn get(&self, year: Year) -> Option<&TimelineRow> {
        self.rows.iter().find(|r| r.year == year)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,datasets,citations,cumulative_datasets,cumulative_citations\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.year, r.datasets, r.citations, r.cumulative_datasets, r.cumulative_citations
            ));
        }
        out
    }
}

pub fn build_publication_timeline(snapshot: &Snapshot) -> Timeline {
    let mut datasets: BTreeMap<Year, u64> = BTreeMap::new();
    let mut citations: BTreeMap<Year, u64> = BTreeMap::new();

    let mut dataset_papers = BTreeSet::new();
    for d in snapshot.datasets() {
        if let Some(y) = d.publication_year.or_else(|| snapshot.dataset_year(d)) {
            *datasets.entry(y).or_default() += 1;
        }
        if let Some(p) = &d.paper_id {
            dataset_papers.insert(p.as_str());
        }
    }
    // a paper shared by several datasets counts its citations once
    for p in dataset_papers {
        for e in snapshot.citations_to(p) {
            if let Some(y) = e.citing_year {
                *citations.entry(y).or_default() += 1;
            }
        }
    }

    let years = datasets.keys().chain(citations.keys());
    let (Some(&lo), Some(&hi)) = (years.clone().min(), years.max()) else {
        return Timeline::default();
    };
    let mut rows = Vec::with_capacity((hi - lo + 1) as usize);
    let (mut cum_d, mut cum_c) = (0, 0);
    for year in lo..=hi {
        let d = datasets.get(&year).copied().unwrap_or(0);
        let c = citations.get(&year).copied().unwrap_or(0);
        cum_d += d;
        cum_c += c;
        rows.push(TimelineRow {
            year,
            datasets: d,
            citations: c,
            cumulative_datasets: cum_d,
            cumulative_citations: cum_c,
        });
    }
    Timeline { rows }
}
