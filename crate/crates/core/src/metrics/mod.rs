//! Scientometric features per dataset and evaluation year.
//!
//! The three h3 features apply the h-index formula to citation counts
//! restricted to a trailing three-year window:
//!
//! * `ref_h3`: over the dataset paper's references,
//! * `aut_mu_h3`: per author over their publications, then averaged,
//! * `cit_h3`: over the papers citing the dataset paper.
//!
//! Missing source data always yields an absent feature, never zero.

mod export;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PaperRecord, Snapshot, Year};

pub use export::{features_from_csv, features_to_csv, CSV_HEADER};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("unknown paper {0:?}")]
    UnknownPaper(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
}

/// The ten catalogue features, in catalogue order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    NFrames,
    NSensors,
    APub,
    RefH3,
    AutMuH3,
    NCit3,
    CitH3,
    AasCurr,
    Aas3m,
    NReaders,
}

impl Feature {
    pub const ALL: [Feature; 10] = [
        Feature::NFrames,
        Feature::NSensors,
        Feature::APub,
        Feature::RefH3,
        Feature::AutMuH3,
        Feature::NCit3,
        Feature::CitH3,
        Feature::AasCurr,
        Feature::Aas3m,
        Feature::NReaders,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::NFrames => "n_frames",
            Feature::NSensors => "n_sensors",
            Feature::APub => "a_pub",
            Feature::RefH3 => "ref_h3",
            Feature::AutMuH3 => "aut_mu_h3",
            Feature::NCit3 => "n_cit3",
            Feature::CitH3 => "cit_h3",
            Feature::AasCurr => "aas_curr",
            Feature::Aas3m => "aas_3m",
            Feature::NReaders => "n_readers",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Data-quality notes attached to a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    /// `cit_h3` computed less than three years after publication.
    CitH3BeforeAvailability,
    /// Attention and reader counts have no history; they are as of the
    /// snapshot, later than the evaluation year.
    AltmetricStale,
    /// The dataset has no linked paper record.
    NoLinkedPaper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dataset_id: String,
    pub eval_year: Year,
    pub n_frames: Option<u64>,
    pub n_sensors: Option<u32>,
    pub a_pub: Option<Year>,
    pub ref_h3: Option<u32>,
    pub aut_mu_h3: Option<f64>,
    pub n_cit3: Option<u32>,
    pub cit_h3: Option<u32>,
    pub aas_curr: Option<f64>,
    pub aas_3m: Option<f64>,
    pub n_readers: Option<u64>,
    #[serde(default)]
    pub flags: Vec<QualityFlag>,
}

impl FeatureVector {
    pub fn empty(dataset_id: impl Into<String>, eval_year: Year) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            eval_year,
            n_frames: None,
            n_sensors: None,
            a_pub: None,
            ref_h3: None,
            aut_mu_h3: None,
            n_cit3: None,
            cit_h3: None,
            aas_curr: None,
            aas_3m: None,
            n_readers: None,
            flags: Vec::new(),
        }
    }

    pub fn get(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::NFrames => self.n_frames.map(|v| v as f64),
            Feature::NSensors => self.n_sensors.map(f64::from),
            Feature::APub => self.a_pub.map(f64::from),
            Feature::RefH3 => self.ref_h3.map(f64::from),
            Feature::AutMuH3 => self.aut_mu_h3,
            Feature::NCit3 => self.n_cit3.map(f64::from),
            Feature::CitH3 => self.cit_h3.map(f64::from),
            Feature::AasCurr => self.aas_curr,
            Feature::Aas3m => self.aas_3m,
            Feature::NReaders => self.n_readers.map(|v| v as f64),
        }
    }

    /// Sets a feature from a real value; integer features are rounded.
    pub fn set(&mut self, feature: Feature, value: Option<f64>) {
        let int = |v: f64| v.round().max(0.0);
        match feature {
            Feature::NFrames => self.n_frames = value.map(|v| int(v) as u64),
            Feature::NSensors => self.n_sensors = value.map(|v| int(v) as u32),
            Feature::APub => self.a_pub = value.map(|v| v.round() as Year),
            Feature::RefH3 => self.ref_h3 = value.map(|v| int(v) as u32),
            Feature::AutMuH3 => self.aut_mu_h3 = value,
            Feature::NCit3 => self.n_cit3 = value.map(|v| int(v) as u32),
            Feature::CitH3 => self.cit_h3 = value.map(|v| int(v) as u32),
            Feature::AasCurr => self.aas_curr = value,
            Feature::Aas3m => self.aas_3m = value,
            Feature::NReaders => self.n_readers = value.map(|v| int(v) as u64),
        }
    }

    pub fn has_flag(&self, flag: QualityFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Three consecutive calendar years ending at `end_year`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window3 {
    pub end_year: Year,
}

impl Window3 {
    pub fn ending(end_year: Year) -> Self {
        Self { end_year }
    }

    pub fn years(&self) -> RangeInclusive<Year> {
        self.end_year - 2..=self.end_year
    }

    pub fn contains(&self, year: Year) -> bool {
        self.years().contains(&year)
    }
}

/// Largest `h` such that at least `h` entries are `>= h`.
pub fn h_index(citation_counts: &[u32]) -> u32 {
    let mut sorted = citation_counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .iter()
        .enumerate()
        .take_while(|&(i, &c)| c as usize > i)
        .count() as u32
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricsConfig {
    /// Ignore citations from papers sharing an author with the cited paper.
    /// Off by default; only papers with known author lists can be detected.
    pub exclude_self_citations: bool,
}

/// Feature computations over one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor<'a> {
    snapshot: &'a Snapshot,
    config: MetricsConfig,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(snapshot: &'a Snapshot) -> Self {
        Self {
            snapshot,
            config: MetricsConfig::default(),
        }
    }

    pub fn with_config(mut self, config: MetricsConfig) -> Self {
        self.config = config;
        self
    }

    fn paper(&self, id: &str) -> Result<&'a PaperRecord, MetricsError> {
        self.snapshot
            .paper(id)
            .ok_or_else(|| MetricsError::UnknownPaper(id.to_owned()))
    }

    // Works for keys without a paper record, e.g. author publications that
    // were never materialized.
    fn count_in_window(&self, paper_id: &str, window: Window3) -> u32 {
        let edges = self.snapshot.citations_to(paper_id);
        let authors: BTreeSet<&str> = if self.config.exclude_self_citations {
            self.snapshot
                .paper(paper_id)
                .map(|p| p.author_ids.iter().map(String::as_str).collect())
                .unwrap_or_default()
        } else {
            BTreeSet::new()
        };
        edges
            .iter()
            .filter(|e| e.citing_year.is_some_and(|y| window.contains(y)))
            .filter(|e| {
                authors.is_empty()
                    || !self
                        .snapshot
                        .paper(&e.citing_paper_id)
                        .is_some_and(|c| c.author_ids.iter().any(|a| authors.contains(a.as_str())))
            })
            .count() as u32
    }

    fn citations_complete(&self, paper_id: &str) -> bool {
        self.snapshot.paper(paper_id).is_some_and(|p| p.citations_fetched)
    }

    pub fn windowed_citations(&self, paper_id: &str, window: Window3) -> Result<u32, MetricsError> {
        self.paper(paper_id)?;
        Ok(self.count_in_window(paper_id, window))
    }

    /// `None` when the reference list, or any reference's citations, were
    /// never fetched.
    pub fn ref_h3(&self, paper_id: &str, window: Window3) -> Result<Option<u32>, MetricsError> {
        let paper = self.paper(paper_id)?;
        let Some(refs) = &paper.reference_ids else {
            return Ok(None);
        };
        if !refs.iter().all(|r| self.citations_complete(r)) {
            return Ok(None);
        }
        let counts: Vec<u32> = refs.iter().map(|r| self.count_in_window(r, window)).collect();
        Ok(Some(h_index(&counts)))
    }

    /// Mean of the authors' h3-indices. `None` without author data.
    pub fn aut_mu_h3(&self, paper_id: &str, window: Window3) -> Result<Option<f64>, MetricsError> {
        let paper = self.paper(paper_id)?;
        if paper.author_ids.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for author_id in &paper.author_ids {
            let Some(author) = self.snapshot.author(author_id) else {
                return Ok(None);
            };
            let counts: Vec<u32> = author
                .paper_ids
                .iter()
                .map(|p| self.count_in_window(p, window))
                .collect();
            total += f64::from(h_index(&counts));
        }
        Ok(Some(total / paper.author_ids.len() as f64))
    }

    /// h3-index over the citing papers. `None` when the paper's citations or
    /// the citing papers' own citations were never fetched.
    pub fn cit_h3(&self, paper_id: &str, window: Window3) -> Result<Option<u32>, MetricsError> {
        let paper = self.paper(paper_id)?;
        if !paper.citations_fetched {
            return Ok(None);
        }
        let citing = self.snapshot.citations_to(paper_id);
        if !citing.iter().all(|e| self.citations_complete(&e.citing_paper_id)) {
            return Ok(None);
        }
        let counts: Vec<u32> = citing
            .iter()
            .map(|e| self.count_in_window(&e.citing_paper_id, window))
            .collect();
        Ok(Some(h_index(&counts)))
    }

    pub fn extract_features(&self, dataset_id: &str, eval_year: Year) -> Result<FeatureVector, MetricsError> {
        let dataset = self
            .snapshot
            .dataset(dataset_id)
            .ok_or_else(|| MetricsError::UnknownDataset(dataset_id.to_owned()))?;
        let mut fv = FeatureVector::empty(dataset_id, eval_year);
        fv.n_frames = dataset.n_frames;
        fv.n_sensors = dataset.n_sensors;

        let Some(paper) = self.snapshot.dataset_paper(dataset) else {
            fv.flags.push(QualityFlag::NoLinkedPaper);
            return Ok(fv);
        };
        let window = Window3::ending(eval_year);
        let id = paper.paper_id.as_str();
        fv.a_pub = paper.publication_year;
        fv.ref_h3 = self.ref_h3(id, window)?;
        fv.aut_mu_h3 = self.aut_mu_h3(id, window)?;
        fv.n_cit3 = paper.citations_fetched.then(|| self.count_in_window(id, window));
        fv.cit_h3 = self.cit_h3(id, window)?;

        if let Some(m) = self.snapshot.altmetric(id) {
            fv.aas_curr = Some(m.aas_curr);
            fv.aas_3m = m.aas_3m;
            fv.n_readers = Some(m.n_readers);
            if eval_year < self.snapshot.coverage_year() {
                fv.flags.push(QualityFlag::AltmetricStale);
            }
        }
        if let (Some(_), Some(a_pub)) = (fv.cit_h3, fv.a_pub) {
            if eval_year < a_pub + 3 {
                fv.flags.push(QualityFlag::CitH3BeforeAvailability);
            }
        }
        Ok(fv)
    }

    /// Feature vectors for every dataset in the snapshot, in dataset-key order.
    pub fn extract_all(&self, eval_year: Year) -> Vec<FeatureVector> {
        self.snapshot
            .datasets()
            .map(|d| {
                self.extract_features(&d.dataset_id, eval_year)
                    .expect("dataset key comes from the snapshot")
            })
            .collect()
    }
}

pub fn windowed_citations(paper_id: &str, window: Window3, snapshot: &Snapshot) -> Result<u32, MetricsError> {
    FeatureExtractor::new(snapshot).windowed_citations(paper_id, window)
}

pub fn ref_h3(paper_id: &str, window: Window3, snapshot: &Snapshot) -> Result<Option<u32>, MetricsError> {
    FeatureExtractor::new(snapshot).ref_h3(paper_id, window)
}

pub fn aut_mu_h3(paper_id: &str, window: Window3, snapshot: &Snapshot) -> Result<Option<f64>, MetricsError> {
    FeatureExtractor::new(snapshot).aut_mu_h3(paper_id, window)
}

pub fn cit_h3(paper_id: &str, window: Window3, snapshot: &Snapshot) -> Result<Option<u32>, MetricsError> {
    FeatureExtractor::new(snapshot).cit_h3(paper_id, window)
}

pub fn extract_features(dataset_id: &str, eval_year: Year, snapshot: &Snapshot) -> Result<FeatureVector, MetricsError> {
    FeatureExtractor::new(snapshot).extract_features(dataset_id, eval_year)
}
