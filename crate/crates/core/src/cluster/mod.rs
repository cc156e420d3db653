//! k-means clustering of early citation trajectories.
//!
//! A trajectory samples, at a few year offsets around publication, how many
//! citations a paper received in the trailing three-year window. Trajectories
//! are grouped by plain k-means (k-means++ seeding, Lloyd iterations) and the
//! per-k inertia series is reported so a number of clusters can be picked by
//! eye from the elbow.

mod report;

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Snapshot, Year};
use crate::metrics::Window3;

pub use report::{assignments_to_csv, centroids_to_csv, elbow_to_csv};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot form {k} clusters from {points} points")]
    TooFewPoints { k: usize, points: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
}

/// Windowed citation counts of one paper at fixed offsets from publication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub paper_id: String,
    pub a_pub: Year,
    pub offsets: Vec<i32>,
    pub values: Vec<u64>,
}

impl Trajectory {
    pub fn point(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Which papers get a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajectoryScope {
    /// Papers linked from a dataset.
    #[default]
    DatasetPapers,
    /// Every paper with a year and fetched citations.
    AllPapers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    /// Strictly increasing year offsets relative to publication.
    pub offsets: Vec<i32>,
    pub scope: TrajectoryScope,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            offsets: vec![-1, 0, 1, 2],
            scope: TrajectoryScope::DatasetPapers,
        }
    }
}

/// One trajectory per eligible paper, ordered by paper id.
///
/// Papers without a year or without fetched citations are skipped, as are
/// papers whose last offset lies beyond the snapshot's coverage year.
pub fn build_trajectories(snapshot: &Snapshot, config: &TrajectoryConfig) -> Vec<Trajectory> {
    assert!(
        config.offsets.windows(2).all(|w| w[0] < w[1]),
        "trajectory offsets must be strictly increasing"
    );
    let last = config.offsets.last().copied().unwrap_or(0);
    let coverage = snapshot.coverage_year();
    let ids: BTreeSet<&str> = match config.scope {
        TrajectoryScope::DatasetPapers => snapshot
            .datasets()
            .filter_map(|d| d.paper_id.as_deref())
            .collect(),
        TrajectoryScope::AllPapers => snapshot.papers().map(|p| p.paper_id.as_str()).collect(),
    };
    ids.into_iter()
        .filter_map(|id| snapshot.paper(id))
        .filter(|p| p.citations_fetched)
        .filter_map(|p| {
            let a_pub = p.publication_year?;
            if a_pub + last > coverage {
                return None;
            }
            let edges = snapshot.citations_to(&p.paper_id);
            let values = config
                .offsets
                .iter()
                .map(|&t| {
                    let w = Window3::ending(a_pub + t);
                    edges
                        .iter()
                        .filter(|e| e.citing_year.is_some_and(|y| w.contains(y)))
                        .count() as u64
                })
                .collect();
            Some(Trajectory {
                paper_id: p.paper_id.clone(),
                a_pub,
                offsets: config.offsets.clone(),
                values,
            })
        })
        .collect()
}

/// Result of one k-means run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point, in input order.
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step; non-increasing.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeans {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

pub const DEFAULT_MAX_ITER: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > points.len() {
        return Err(ClusterError::TooFewPoints { k, points: points.len() });
    }
    let dim = points[0].len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                found: p.len(),
                expected: dim,
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite { index });
        }
    }
    Ok(())
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.gen_range(0..points.len()),
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeans {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        let mut inertia = 0.0;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
            dists[i] = d;
            inertia += d;
        }
        if let Some(&prev) = history.last() {
            debug_assert!(
                inertia <= prev + 1e-9 * prev.abs().max(1.0),
                "k-means inertia rose from {prev} to {inertia}"
            );
        }
        history.push(inertia);
        if !changed && iterations > 1 {
            converged = true;
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken = BTreeSet::new();
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // reseed to the point worst served by the current centroids
                let far = (0..points.len())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken.insert(far);
                centroids[j] = points[far].clone();
                dists[far] = 0.0;
            }
        }
    }
    // final centroids are the means of the final assignment
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(&labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    KMeans {
        centroids,
        labels,
        inertia,
        history,
        iterations,
        converged,
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// k-means with k-means++ seeding, reproducible from `seed`.
///
/// Points are processed in lexicographic order and clusters are numbered by
/// their first member in that order, so the result does not depend on the
/// order of `points`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans, ClusterError> {
    kmeans_with(points, k, seed, DEFAULT_MAX_ITER)
}

pub fn kmeans_with(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeans, ClusterError> {
    check_points(points, k)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids = seed_plus_plus(&sorted, k, &mut rng);
    let fit = lloyd(&sorted, centroids, max_iter.max(1));

    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &fit.labels {
        if relabel[l] == usize::MAX {
            relabel[l] = next;
            next += 1;
        }
    }
    for r in relabel.iter_mut().filter(|r| **r == usize::MAX) {
        *r = next;
        next += 1;
    }
    let mut centroids = vec![Vec::new(); k];
    for (old, c) in fit.centroids.into_iter().enumerate() {
        centroids[relabel[old]] = c;
    }
    let mut labels = vec![0; points.len()];
    for (pos, &orig) in order.iter().enumerate() {
        labels[orig] = relabel[fit.labels[pos]];
    }
    Ok(KMeans {
        centroids,
        labels,
        inertia: fit.inertia,
        history: fit.history,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// splitmix64 finalizer, used to derive independent restart seeds.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lowest-inertia fit among `restarts` runs; ties go to the earliest restart.
pub fn best_of(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeans, ClusterError> {
    check_points(points, k)?;
    let fits: Vec<KMeans> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| kmeans(points, k, derive_seed(seed, ((k as u64) << 32) | r)))
        .collect::<Result<_, _>>()?;
    Ok(fits
        .into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .expect("at least one restart"))
}

/// Per-k best-of-restarts inertia.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowSeries {
    pub points: Vec<(usize, f64)>,
    /// Values of k whose inertia exceeds that of the previous k; these
    /// indicate an insufficient restart budget, not a property of the data.
    pub violations: Vec<usize>,
}

impl ElbowSeries {
    pub fn inertia(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

pub const DEFAULT_RESTARTS: usize = 10;

pub fn elbow(
    points: &[Vec<f64>],
    ks: impl IntoIterator<Item = usize>,
    seed: u64,
    restarts: usize,
) -> Result<ElbowSeries, ClusterError> {
    let mut ks: Vec<usize> = ks.into_iter().collect();
    ks.sort_unstable();
    ks.dedup();
    let mut series = Vec::with_capacity(ks.len());
    for k in ks {
        series.push((k, best_of(points, k, seed, restarts)?.inertia));
    }
    let violations = series
        .windows(2)
        .filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-12) + 1e-12)
        .map(|w| w[1].0)
        .collect::<Vec<_>>();
    for k in &violations {
        log::warn!("elbow series rises at k={k}; consider more restarts");
    }
    Ok(ElbowSeries {
        points: series,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    /// Range of k for the elbow series; values above the point count are dropped.
    pub k_range: std::ops::RangeInclusive<usize>,
    pub restarts: usize,
    pub seed: u64,
    /// Scale each coordinate to unit variance before clustering.
    pub standardize: bool,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 6,
            k_range: 1..=10,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            standardize: false,
        }
    }
}

/// A clustering of trajectories plus the elbow data behind the choice of k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    pub offsets: Vec<i32>,
    /// In the space of raw counts, even when clustering was standardized.
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub assignments: BTreeMap<String, usize>,
    pub inertia: f64,
    pub per_k_inertia: BTreeMap<usize, f64>,
    pub elbow_violations: Vec<usize>,
}

fn standardize_columns(points: &mut [Vec<f64>]) {
    let n = points.len() as f64;
    let dim = points.first().map_or(0, Vec::len);
    for j in 0..dim {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in points.iter_mut() {
            p[j] = if sd > 0.0 { (p[j] - mean) / sd } else { 0.0 };
        }
    }
}

pub fn cluster_trajectories(trajectories: &[Trajectory], config: &ClusterConfig) -> Result<ClusterModel, ClusterError> {
    let mut points: Vec<Vec<f64>> = trajectories.iter().map(Trajectory::point).collect();
    check_points(&points, config.k)?;
    if config.standardize {
        standardize_columns(&mut points);
    }
    let fit = best_of(&points, config.k, config.seed, config.restarts)?;
    let ks = config.k_range.clone().filter(|&k| k >= 1 && k <= points.len());
    let series = elbow(&points, ks, config.seed, config.restarts)?;

    let dim = trajectories[0].values.len();
    let mut centroids = vec![vec![0.0; dim]; config.k];
    let sizes = fit.sizes();
    for (t, &l) in trajectories.iter().zip(&fit.labels) {
        for (c, v) in centroids[l].iter_mut().zip(&t.values) {
            *c += *v as f64 / sizes[l] as f64;
        }
    }
    let inertia = if config.standardize {
        fit.inertia
    } else {
        trajectories
            .iter()
            .zip(&fit.labels)
            .map(|(t, &l)| sq_dist(&t.point(), &centroids[l]))
            .sum()
    };
    Ok(ClusterModel {
        k: config.k,
        offsets: trajectories[0].offsets.clone(),
        centroids,
        sizes,
        assignments: trajectories
            .iter()
            .zip(&fit.labels)
            .map(|(t, &l)| (t.paper_id.clone(), l))
            .collect(),
        inertia,
        per_k_inertia: series.points.iter().copied().collect(),
        elbow_violations: series.violations,
    })
}

/// Whether two labelings describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ab = BTreeMap::new();
    let mut ba = BTreeMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *ab.entry(*x).or_insert(*y) == *y && *ba.entry(*y).or_insert(*x) == *x)
}
