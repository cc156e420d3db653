//! Online-attention source, queried by DOI.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::http::{encode_path_id, HttpError, SourceClient};
use super::FetchPlan;
use crate::corpus::AltmetricRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AltmetricBody {
    pub score: f64,
    #[serde(default)]
    pub readers: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentile_3m: Option<f64>,
}

/// A DOI to look up and the paper key its record is stored under.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AltmetricTarget {
    pub paper_key: String,
    pub doi: String,
}

impl AltmetricTarget {
    pub fn new(paper_key: impl Into<String>, doi: impl Into<String>) -> Self {
        Self {
            paper_key: paper_key.into(),
            doi: doi.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AltmetricFetch {
    /// Ordered by paper key.
    pub records: Vec<AltmetricRecord>,
    /// DOIs the source does not track.
    pub misses: Vec<String>,
    /// DOIs rejected before any request, or answered with an unusable body.
    pub invalid: Vec<String>,
}

/// Minimal syntactic DOI check: a `10.` registrant prefix, a slash and a suffix.
pub fn is_valid_doi(doi: &str) -> bool {
    match doi.split_once('/') {
        Some((prefix, suffix)) => {
            prefix.starts_with("10.")
                && prefix.len() > 3
                && prefix[3..].chars().all(|c| c.is_ascii_digit() || c == '.')
                && !suffix.is_empty()
                && !doi.chars().any(char::is_whitespace)
        }
        None => false,
    }
}

/// Fetches one attention record per tracked DOI.
///
/// A failed authentication aborts the whole call; so does an unreachable
/// source, which the caller may then treat as a partial run.
pub fn fetch_altmetric(targets: &[AltmetricTarget], plan: &FetchPlan) -> Result<AltmetricFetch, HttpError> {
    let client = plan.altmetric_client();
    fetch_altmetric_with(&client, targets, plan)
}

pub fn fetch_altmetric_with(
    client: &SourceClient,
    targets: &[AltmetricTarget],
    plan: &FetchPlan,
) -> Result<AltmetricFetch, HttpError> {
    let mut out = AltmetricFetch::default();
    let mut valid = Vec::new();
    for t in targets {
        if is_valid_doi(&t.doi) {
            valid.push(t.clone());
        } else {
            out.invalid.push(t.doi.clone());
        }
    }
    valid.sort();
    valid.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .expect("worker pool");
    let answers = pool.install(|| {
        valid
            .par_iter()
            .map(|t| {
                let request = format!("/doi/{}", encode_path_id(&t.doi));
                match client.get_json::<AltmetricBody>(&request) {
                    Ok(b) => Ok((t, Some(b))),
                    Err(HttpError::Decode { .. }) => Ok((t, None)),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>, _>>()
    });
    for (t, body) in answers? {
        match body {
            None => out.invalid.push(t.doi.clone()),
            Some(None) => out.misses.push(t.doi.clone()),
            Some(Some(b)) => {
                let pct = b.percentile_3m.filter(|p| (0.0..=100.0).contains(p));
                if b.score < 0.0 || !b.score.is_finite() {
                    out.invalid.push(t.doi.clone());
                    continue;
                }
                out.records
                    .push(AltmetricRecord::new(t.paper_key.clone(), b.score, pct, b.readers));
            }
        }
    }
    out.records.sort_by(|a, b| a.paper_key.cmp(&b.paper_key));
    out.misses.sort();
    out.invalid.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::mock::{MockAltmetric, MockKind, MockOptions, MockServer, MockWorld};
    use std::sync::Arc;

    fn world() -> Arc<MockWorld> {
        let mut w = MockWorld::default();
        w.altmetric.insert(
            "10.1/a".into(),
            MockAltmetric {
                score: 12.5,
                readers: BTreeMap::from([("svcA".into(), 100), ("svcB".into(), 20)]),
                percentile_3m: Some(88.0),
            },
        );
        Arc::new(w)
    }

    fn plan(url: &str) -> FetchPlan {
        FetchPlan::for_tests("http://127.0.0.1:9", url)
    }

    #[test]
    fn doi_syntax() {
        assert!(is_valid_doi("10.1109/CVPR42600.2020.01164"));
        assert!(!is_valid_doi("11.1/x"));
        assert!(!is_valid_doi("10.1"));
        assert!(!is_valid_doi("10.ab/x"));
    }

    #[test]
    fn empty_input() {
        let out = fetch_altmetric(&[], &plan("http://127.0.0.1:9")).unwrap();
        assert_eq!(out, AltmetricFetch::default());
    }

    #[test]
    fn readers_sum_and_misses() {
        let server = MockServer::start(MockKind::Altmetric, world(), MockOptions::default()).unwrap();
        let targets = [AltmetricTarget::new("pa", "10.1/A"), AltmetricTarget::new("pb", "10.1/b")];
        let out = fetch_altmetric(&targets, &plan(server.url())).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].paper_key, "pa");
        assert_eq!(out.records[0].n_readers, 120);
        assert_eq!(out.records[0].aas_3m, Some(88.0));
        assert_eq!(out.misses, vec!["10.1/b".to_string()]);
    }

    #[test]
    fn auth_failure_is_fatal() {
        let opts = MockOptions {
            require_key: Some("secret".into()),
            ..MockOptions::default()
        };
        let server = MockServer::start(MockKind::Altmetric, world(), opts).unwrap();
        let err = fetch_altmetric(&[AltmetricTarget::new("pa", "10.1/a")], &plan(server.url())).unwrap_err();
        assert!(matches!(err, HttpError::Auth { status: 401, .. }));

        let mut keyed = plan(server.url());
        keyed.altmetric.api_key = Some("secret".into());
        assert_eq!(fetch_altmetric(&[AltmetricTarget::new("pa", "10.1/a")], &keyed).unwrap().records.len(), 1);
    }
}
