//! Synthetic corpora with known ground truth.
//!
//! Two generators: one plants an early-citation model with a linear and a
//! quadratic attention effect (everything else null), the other plants six
//! distinct citation-trajectory shapes. Both emit complete snapshots that go
//! through the same pipeline as ingested data.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};

use crate::corpus::{AltmetricRecord, AuthorRecord, CitationEdge, DatasetEntry, PaperRecord, Snapshot, SnapshotBuilder, Year};

/// Snapshot timestamp used by all generators.
pub const SYNTH_CREATED_AT: &str = "2023-01-04T00:00:00Z";

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).unwrap().sample(rng) as u64
    }
}

/// Parameters of the planted early-citation model.
///
/// `log1p(citations one year after publication) = intercept + linear·z + quadratic·z² + ε`
/// where `z` is the attention percentile standardized with its population
/// moments and `ε ~ N(0, noise_sd²)`. No other feature affects citations.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionCorpusConfig {
    pub datasets: usize,
    pub intercept: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub noise_sd: f64,
    pub first_year: Year,
    pub last_year: Year,
}

impl Default for RegressionCorpusConfig {
    fn default() -> Self {
        Self {
            datasets: 300,
            intercept: 2.64,
            linear: 0.8,
            quadratic: 0.34,
            noise_sd: 0.6,
            first_year: 2010,
            last_year: 2021,
        }
    }
}

/// Attention percentile moments of `U(0, 100)`.
const AAS3M_MEAN: f64 = 50.0;
const AAS3M_SD: f64 = 28.867_513_459_481_287;

/// Draws citing years around publication: 10% the year before, the rest
/// split between the publication year and the one after.
fn early_year(rng: &mut ChaCha8Rng, a_pub: Year) -> Year {
    match rng.gen_range(0..20) {
        0 | 1 => a_pub - 1,
        2..=10 => a_pub,
        _ => a_pub + 1,
    }
}

/// Corpus with a planted attention effect on early citations.
///
/// Each dataset paper gets references and authors with random, outcome
/// independent citation counts, so ref_h3, aut_mu_h3, a_pub and n_sensors
/// are genuinely null. Authors' publication lists exclude the dataset paper
/// for the same reason.
pub fn regression_corpus(seed: u64, config: &RegressionCorpusConfig) -> Snapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.noise_sd).unwrap();
    let attention = LogNormal::new(2.0, 1.2).unwrap();
    let mut b = SnapshotBuilder::new(SYNTH_CREATED_AT);
    b.source_version(format!("synthetic regression corpus: seed {seed}"));
    for i in 0..config.datasets {
        let a_pub = rng.gen_range(config.first_year..=config.last_year);
        let eval = a_pub + 1;
        let pid = format!("p{i:04}");
        let mut d = DatasetEntry::new(format!("ds{i:04}"), format!("Synthetic {i}"));
        d.doi = Some(format!("10.5555/ds{i:04}"));
        d.n_frames = Some(rng.gen_range(1_000..2_000_000));
        d.n_sensors = Some(rng.gen_range(1..=6));
        d.publication_year = Some(a_pub);
        d.paper_id = Some(pid.clone());
        b.dataset(d);

        let mut paper = PaperRecord::new(pid.clone());
        paper.title = format!("Synthetic dataset paper {i}");
        paper.publication_year = Some(a_pub);
        paper.citations_fetched = true;

        let mut refs = Vec::new();
        for j in 0..rng.gen_range(3..=15usize) {
            let rid = format!("{pid}-r{j}");
            let mut r = PaperRecord::new(rid.clone());
            r.publication_year = Some(a_pub - rng.gen_range(1..=8));
            r.citations_fetched = true;
            let scale = rng.gen_range(0.5..12.0);
            for c in 0..poisson(&mut rng, scale) {
                b.citation(CitationEdge::new(format!("{rid}-c{c}"), rid.clone(), Some(eval - rng.gen_range(0..3))));
            }
            b.paper(r);
            refs.push(rid);
        }
        paper.reference_ids = Some(refs);

        for j in 0..rng.gen_range(1..=4usize) {
            let aid = format!("a{i:04}-{j}");
            let mut pubs = Vec::new();
            for k in 0..rng.gen_range(1..=8usize) {
                let qid = format!("{aid}-q{k}");
                let mut q = PaperRecord::new(qid.clone());
                q.publication_year = Some(a_pub - rng.gen_range(0..=6));
                q.citations_fetched = true;
                let scale = rng.gen_range(0.5..10.0);
                for c in 0..poisson(&mut rng, scale) {
                    b.citation(CitationEdge::new(format!("{qid}-c{c}"), qid.clone(), Some(eval - rng.gen_range(0..3))));
                }
                b.paper(q);
                pubs.push(qid);
            }
            paper.author_ids.push(aid.clone());
            b.author(AuthorRecord {
                author_id: aid,
                name: format!("Author {i}.{j}"),
                paper_ids: pubs,
            });
        }

        let aas_3m: f64 = rng.gen_range(0.0..100.0);
        let z = (aas_3m - AAS3M_MEAN) / AAS3M_SD;
        let lin = config.intercept + config.linear * z + config.quadratic * z * z + noise.sample(&mut rng);
        let early = (lin.exp() - 1.0).round().max(0.0) as u64;
        for c in 0..early {
            b.citation(CitationEdge::new(format!("{pid}-c{c}"), pid.clone(), Some(early_year(&mut rng, a_pub))));
        }
        // later citations fall outside the early window
        for c in 0..poisson(&mut rng, early as f64 * 0.5) {
            let year = rng.gen_range(a_pub + 2..=a_pub + 4);
            b.citation(CitationEdge::new(format!("{pid}-l{c}"), pid.clone(), Some(year)));
        }
        b.paper(paper);

        let readers = BTreeMap::from([
            ("mendeley".to_string(), poisson(&mut rng, 40.0)),
            ("citeulike".to_string(), poisson(&mut rng, 2.0)),
        ]);
        let aas_curr: f64 = (attention.sample(&mut rng) * 10.0_f64).round() / 10.0;
        let aas_3m = (aas_3m * 100.0).round() / 100.0;
        b.altmetric(AltmetricRecord::new(pid, aas_curr, Some(aas_3m), readers));
    }
    b.build()
}

/// Expected citations per year, from three years before publication to two
/// after, of the six planted trajectory groups.
pub const TRAJECTORY_PROFILES: [[f64; 6]; 6] = [
    // never cited
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    // slow riser
    [0.0, 0.0, 3.0, 12.0, 24.0, 36.0],
    // strong riser
    [0.0, 0.0, 5.0, 35.0, 70.0, 105.0],
    // steady, cited as a preprint long before publication
    [25.0, 25.0, 25.0, 25.0, 25.0, 25.0],
    // sharp peak right after publication
    [0.0, 2.0, 15.0, 110.0, 160.0, 60.0],
    // attention mostly before publication, then fading
    [50.0, 70.0, 90.0, 60.0, 35.0, 20.0],
];

/// Corpus of dataset papers drawn from the six [`TRAJECTORY_PROFILES`] with
/// Poisson yearly counts, and the planted group of every paper.
pub fn trajectory_corpus(seed: u64, per_group: usize) -> (Snapshot, BTreeMap<String, usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = SnapshotBuilder::new(SYNTH_CREATED_AT);
    b.source_version(format!("synthetic trajectory corpus: seed {seed}"));
    let mut truth = BTreeMap::new();
    for (g, profile) in TRAJECTORY_PROFILES.iter().enumerate() {
        for i in 0..per_group {
            let pid = format!("g{g}-p{i:03}");
            let a_pub = rng.gen_range(2012..=2018);
            let mut d = DatasetEntry::new(format!("g{g}-d{i:03}"), format!("Group {g} dataset {i}"));
            d.paper_id = Some(pid.clone());
            b.dataset(d);
            let mut p = PaperRecord::new(pid.clone());
            p.publication_year = Some(a_pub);
            p.citations_fetched = true;
            b.paper(p);
            for (y, mean) in profile.iter().enumerate() {
                let year = a_pub - 3 + y as Year;
                for c in 0..poisson(&mut rng, *mean) {
                    b.citation(CitationEdge::new(format!("{pid}-y{y}-c{c}"), pid.clone(), Some(year)));
                }
            }
            truth.insert(pid, g);
        }
    }
    (b.build(), truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{build_trajectories, TrajectoryConfig};
    use crate::regression::paper_regression_table;

    #[test]
    fn regression_corpus_is_complete_and_reproducible() {
        let config = RegressionCorpusConfig {
            datasets: 20,
            ..RegressionCorpusConfig::default()
        };
        let a = regression_corpus(9, &config);
        assert!(a.validate().is_empty());
        assert_eq!(a.to_canonical_string(), regression_corpus(9, &config).to_canonical_string());
        let table = paper_regression_table(&a);
        assert_eq!(table.len(), 20);
        for fv in &table {
            assert!(fv.ref_h3.is_some() && fv.aut_mu_h3.is_some() && fv.aas_3m.is_some() && fv.n_cit3.is_some());
        }
    }

    #[test]
    fn trajectory_corpus_keeps_every_paper() {
        let (s, truth) = trajectory_corpus(1, 4);
        let t = build_trajectories(&s, &TrajectoryConfig::default());
        assert_eq!(t.len(), 24);
        assert_eq!(truth.len(), 24);
        let never = t.iter().find(|t| truth[&t.paper_id] == 0).unwrap();
        assert_eq!(never.values, vec![0; 4]);
    }
}
