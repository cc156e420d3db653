//! Influence Score: every available feature is turned into a percentile
//! against the peer group, and the score is the plain mean of those
//! percentiles. Features a dataset lacks are left out of the mean rather
//! than counted as zero.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Snapshot, Year};
use crate::metrics::{Feature, FeatureExtractor, FeatureVector};

pub use report::{history_to_csv, ranking_to_csv, ranking_to_json, ranking_to_markdown, Histogram};

#[derive(Debug, Error, PartialEq)]
pub enum InfluenceError {
    #[error("empty peer group")]
    EmptyPeerGroup,
    #[error("percentile table is for {table}, feature vector for {vector}")]
    YearMismatch { table: Year, vector: Year },
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
}

/// Features eligible for the score, in report column order.
pub const INFLUENCE_FEATURES: [Feature; 8] = [
    Feature::NCit3,
    Feature::CitH3,
    Feature::RefH3,
    Feature::AutMuH3,
    Feature::NFrames,
    Feature::NSensors,
    Feature::AasCurr,
    Feature::NReaders,
];

/// Which of the eligible features enter the mean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet(BTreeSet<Feature>);

impl Default for FeatureSet {
    fn default() -> Self {
        Self(INFLUENCE_FEATURES.into_iter().collect())
    }
}

impl FeatureSet {
    /// All eight features except `n_sensors`. The 2022 ranked table of the
    /// original study displays `n_sensors` percentiles but its published
    /// scores are the means of the other seven columns.
    pub fn published_2022() -> Self {
        Self::default().without(Feature::NSensors)
    }

    pub fn without(mut self, feature: Feature) -> Self {
        self.0.remove(&feature);
        self
    }

    pub fn contains(&self, feature: Feature) -> bool {
        self.0.contains(&feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = Feature> + '_ {
        self.0.iter().copied()
    }
}

/// Weak-inequality percentile: the share of peers at or below `value`.
/// The maximum always scores 1.0 and the minimum `1/N`.
pub fn percentile_rank(value: f64, peer_values: &[f64]) -> Result<f64, InfluenceError> {
    if peer_values.is_empty() {
        return Err(InfluenceError::EmptyPeerGroup);
    }
    debug_assert!(peer_values.windows(2).all(|w| w[0] <= w[1]));
    let at_or_below = peer_values.partition_point(|&v| v <= value);
    Ok(at_or_below as f64 / peer_values.len() as f64)
}

/// Sorted per-feature value lists over one peer group.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileTable {
    pub eval_year: Year,
    lists: BTreeMap<Feature, Vec<f64>>,
}

impl PercentileTable {
    pub fn build(vectors: &[FeatureVector], eval_year: Year) -> Self {
        let lists = INFLUENCE_FEATURES
            .iter()
            .map(|&f| {
                let mut values: Vec<f64> = vectors.iter().filter_map(|v| v.get(f)).collect();
                values.sort_by(f64::total_cmp);
                (f, values)
            })
            .collect();
        Self { eval_year, lists }
    }

    pub fn values(&self, feature: Feature) -> &[f64] {
        self.lists.get(&feature).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn build_percentile_table(vectors: &[FeatureVector], eval_year: Year) -> PercentileTable {
    PercentileTable::build(vectors, eval_year)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult {
    pub dataset_id: String,
    pub eval_year: Year,
    /// Percentile of every eligible feature the dataset has.
    pub percentiles: BTreeMap<Feature, f64>,
    /// Features that entered the mean.
    pub included: FeatureSet,
    pub n_available: usize,
    /// `None` exactly when no included feature is available.
    pub is_score: Option<f64>,
}

impl InfluenceResult {
    pub fn from_percentiles(
        dataset_id: impl Into<String>,
        eval_year: Year,
        percentiles: BTreeMap<Feature, f64>,
        included: &FeatureSet,
    ) -> Self {
        let used: Vec<f64> = percentiles
            .iter()
            .filter(|(f, _)| included.contains(**f))
            .map(|(_, &p)| p)
            .collect();
        let n_available = used.len();
        let is_score = (n_available > 0).then(|| used.iter().sum::<f64>() / n_available as f64);
        Self {
            dataset_id: dataset_id.into(),
            eval_year,
            percentiles,
            included: included.clone(),
            n_available,
            is_score,
        }
    }

    fn absent(dataset_id: &str, eval_year: Year, included: &FeatureSet) -> Self {
        Self::from_percentiles(dataset_id, eval_year, BTreeMap::new(), included)
    }

    pub fn percentile(&self, feature: Feature) -> Option<f64> {
        self.percentiles.get(&feature).copied()
    }
}

pub fn influence_score(fv: &FeatureVector, table: &PercentileTable) -> Result<InfluenceResult, InfluenceError> {
    influence_score_with(fv, table, &FeatureSet::default())
}

pub fn influence_score_with(
    fv: &FeatureVector,
    table: &PercentileTable,
    included: &FeatureSet,
) -> Result<InfluenceResult, InfluenceError> {
    if fv.eval_year != table.eval_year {
        return Err(InfluenceError::YearMismatch {
            table: table.eval_year,
            vector: fv.eval_year,
        });
    }
    let mut percentiles = BTreeMap::new();
    for f in INFLUENCE_FEATURES {
        if let Some(v) = fv.get(f) {
            percentiles.insert(f, percentile_rank(v, table.values(f))?);
        }
    }
    Ok(InfluenceResult::from_percentiles(&fv.dataset_id, fv.eval_year, percentiles, included))
}

/// Feature vectors of every dataset published by `eval_year`.
pub fn peer_group(extractor: &FeatureExtractor<'_>, snapshot: &Snapshot, eval_year: Year) -> Vec<FeatureVector> {
    let ids: Vec<&str> = snapshot
        .datasets()
        .filter(|d| snapshot.dataset_year(d).is_some_and(|y| y <= eval_year))
        .map(|d| d.dataset_id.as_str())
        .collect();
    ids.par_iter()
        .map(|id| extractor.extract_features(id, eval_year).expect("dataset key from snapshot"))
        .collect()
}

/// Report filter; the peer group is unaffected by it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankFilter {
    pub released_in: Option<Year>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRow {
    pub rank: usize,
    pub name: String,
    pub result: InfluenceResult,
    /// Columns where this row holds one of the three highest distinct values.
    pub top3: BTreeSet<Feature>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub eval_year: Year,
    pub rows: Vec<RankedRow>,
}

/// Descending by score, unscored last, ties by dataset key.
pub fn rank_results(mut results: Vec<InfluenceResult>) -> Vec<InfluenceResult> {
    results.sort_by(|a, b| match (a.is_score, b.is_score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.dataset_id.cmp(&b.dataset_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.dataset_id.cmp(&b.dataset_id),
    });
    results
}

pub fn rank_datasets(
    snapshot: &Snapshot,
    eval_year: Year,
    filter: &RankFilter,
    included: &FeatureSet,
) -> Ranking {
    let extractor = FeatureExtractor::new(snapshot);
    let peers = peer_group(&extractor, snapshot, eval_year);
    let table = PercentileTable::build(&peers, eval_year);
    let selected: Vec<InfluenceResult> = peers
        .iter()
        .filter(|fv| {
            let ds = snapshot.dataset(&fv.dataset_id).expect("peer from snapshot");
            filter.released_in.is_none_or(|y| snapshot.dataset_year(ds) == Some(y))
        })
        .map(|fv| influence_score_with(fv, &table, included).expect("table matches year"))
        .collect();
    let ranked = rank_results(selected);

    let mut thresholds = BTreeMap::new();
    for f in INFLUENCE_FEATURES {
        let mut distinct: Vec<f64> = ranked.iter().filter_map(|r| r.percentile(f)).collect();
        distinct.sort_by(|a, b| b.total_cmp(a));
        distinct.dedup();
        if let Some(&t) = distinct.get(2).or(distinct.last()) {
            thresholds.insert(f, t);
        }
    }
    let rows = ranked
        .into_iter()
        .enumerate()
        .map(|(i, result)| {
            let top3 = result
                .percentiles
                .iter()
                .filter(|(f, p)| thresholds.get(f).is_some_and(|t| *p >= t))
                .map(|(f, _)| *f)
                .collect();
            let name = snapshot
                .dataset(&result.dataset_id)
                .map(|d| d.name.clone())
                .unwrap_or_default();
            RankedRow { rank: i + 1, name, result, top3 }
        })
        .collect();
    Ranking { eval_year, rows }
}

/// One result per year, each against that year's peer group. Years before
/// the dataset's publication give an absent score.
pub fn score_history(
    dataset_id: &str,
    snapshot: &Snapshot,
    years: RangeInclusive<Year>,
    included: &FeatureSet,
) -> Result<Vec<InfluenceResult>, InfluenceError> {
    let dataset = snapshot
        .dataset(dataset_id)
        .ok_or_else(|| InfluenceError::UnknownDataset(dataset_id.to_owned()))?;
    let published = snapshot.dataset_year(dataset);
    let extractor = FeatureExtractor::new(snapshot);
    let years: Vec<Year> = years.collect();
    Ok(years
        .par_iter()
        .map(|&year| {
            if published.is_none_or(|p| year < p) {
                return InfluenceResult::absent(dataset_id, year, included);
            }
            let peers = peer_group(&extractor, snapshot, year);
            let table = PercentileTable::build(&peers, year);
            let own = peers
                .iter()
                .find(|fv| fv.dataset_id == dataset_id)
                .expect("published datasets are in their own peer group");
            influence_score_with(own, &table, included).expect("table matches year")
        })
        .collect())
}
