//! Dataset catalogue loading.
//!
//! The catalogue is a JSON document listing datasets with loosely typed
//! fields. A [`FieldMapping`] says which keys hold what; values that cannot be
//! read as the expected type are left absent and reported as warnings.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

use super::http::SourceClient;
use super::IngestError;
use crate::corpus::{DatasetEntry, Year};

/// Key names of the catalogue fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMapping {
    pub id: String,
    pub name: String,
    pub doi: String,
    pub arxiv: String,
    pub frames: String,
    pub sensors: String,
    pub year: String,
    /// Key of the record array when the document is an object wrapping it.
    pub records: Option<String>,
    /// Fail on records lacking a mapped key instead of leaving it absent.
    pub strict: bool,
}

impl Default for FieldMapping {
    fn default() -> Self {
        Self {
            id: "id".into(),
            name: "title".into(),
            doi: "doi".into(),
            arxiv: "arxiv".into(),
            frames: "frames".into(),
            sensors: "sensors".into(),
            year: "year".into(),
            records: None,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetLoad {
    /// Ordered by dataset id.
    pub entries: Vec<DatasetEntry>,
    pub warnings: Vec<String>,
    /// Records dropped entirely (no usable id, or a repeated id).
    pub skipped: usize,
    /// Ids of entries without DOI or arXiv id, which cannot be looked up.
    pub non_ingestible: Vec<String>,
}

/// Normalizes a DOI: strips resolver prefixes and lowercases.
pub fn normalize_doi(raw: &str) -> Option<String> {
    let s = raw.trim();
    let s = ["https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "doi:", "DOI:"]
        .iter()
        .find_map(|p| s.strip_prefix(p))
        .unwrap_or(s)
        .trim();
    (!s.is_empty()).then(|| s.to_lowercase())
}

/// Normalizes an arXiv id: strips URL and `arXiv:` prefixes and a version suffix.
pub fn normalize_arxiv(raw: &str) -> Option<String> {
    let s = raw.trim();
    let s = ["https://arxiv.org/abs/", "http://arxiv.org/abs/", "https://arxiv.org/pdf/", "arXiv:", "arxiv:"]
        .iter()
        .find_map(|p| s.strip_prefix(p))
        .unwrap_or(s)
        .trim_end_matches(".pdf");
    let s = match s.rfind('v') {
        Some(i) if i > 0 && s[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < s.len() => &s[..i],
        _ => s,
    };
    (!s.is_empty()).then(|| s.to_string())
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_count(v: &Value) -> Result<Option<u64>, ()> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => match (n.as_u64(), n.as_f64()) {
            (Some(u), _) => Ok(Some(u)),
            (None, Some(f)) if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 => Ok(Some(f as u64)),
            _ => Err(()),
        },
        Value::String(s) => {
            let digits: String = s.trim().chars().filter(|c| *c != ',' && *c != '_').collect();
            if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                digits.parse().map(Some).map_err(|_| ())
            } else {
                Err(())
            }
        }
        _ => Err(()),
    }
}

fn parse_sensors(v: &Value) -> Result<Option<u32>, ()> {
    let n = match v {
        Value::Null => return Ok(None),
        Value::Array(items) => items.iter().filter(|i| !i.is_null()).count() as u64,
        Value::String(s) if s.contains(',') => s.split(',').filter(|p| !p.trim().is_empty()).count() as u64,
        other => parse_count(other)?.ok_or(())?,
    };
    match u32::try_from(n) {
        Ok(n) if n >= 1 => Ok(Some(n)),
        _ => Err(()),
    }
}

fn parse_year(v: &Value) -> Result<Option<Year>, ()> {
    let y = match v {
        Value::Null => return Ok(None),
        Value::Number(n) => n.as_i64().ok_or(())?,
        Value::String(s) => {
            let head: String = s.trim().chars().take(4).collect();
            if head.len() == 4 && head.chars().all(|c| c.is_ascii_digit()) {
                head.parse().map_err(|_| ())?
            } else {
                return Err(());
            }
        }
        _ => return Err(()),
    };
    if (1000..=9999).contains(&y) {
        Ok(Some(y as Year))
    } else {
        Err(())
    }
}

struct RecordReader<'a> {
    record: &'a Map<String, Value>,
    index: usize,
    mapping: &'a FieldMapping,
}

impl RecordReader<'_> {
    fn field(&self, key: &str) -> Result<Option<&Value>, IngestError> {
        match self.record.get(key) {
            Some(v) => Ok(Some(v)),
            None if self.mapping.strict => Err(IngestError::MissingKey {
                record: self.index,
                key: key.to_string(),
            }),
            None => Ok(None),
        }
    }
}

/// Parses a catalogue document.
pub fn parse_ad_datasets(text: &str, mapping: &FieldMapping) -> Result<DatasetLoad, IngestError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::Catalogue(e.to_string()))?;
    let records: Vec<(Option<String>, &Value)> = match (&doc, &mapping.records) {
        (Value::Array(items), _) => items.iter().map(|v| (None, v)).collect(),
        (Value::Object(obj), Some(key)) => match obj.get(key) {
            Some(Value::Array(items)) => items.iter().map(|v| (None, v)).collect(),
            _ => return Err(IngestError::Catalogue(format!("no record array under key {key:?}"))),
        },
        // an object without a records key maps ids to records
        (Value::Object(obj), None) => obj.iter().map(|(k, v)| (Some(k.clone()), v)).collect(),
        _ => return Err(IngestError::Catalogue("expected a JSON array or object of records".into())),
    };

    let mut out = DatasetLoad::default();
    let mut seen = BTreeSet::new();
    for (index, (outer_key, value)) in records.into_iter().enumerate() {
        let Value::Object(record) = value else {
            out.warnings.push(format!("record {index}: not an object, skipped"));
            out.skipped += 1;
            continue;
        };
        let r = RecordReader {
            record,
            index,
            mapping,
        };
        let id = match (r.field(&mapping.id)?.and_then(as_text), outer_key) {
            (Some(id), _) | (None, Some(id)) => id,
            (None, None) => {
                out.warnings.push(format!("record {index}: no usable {:?} field, skipped", mapping.id));
                out.skipped += 1;
                continue;
            }
        };
        if !seen.insert(id.clone()) {
            out.warnings.push(format!("record {index}: repeated id {id:?}, skipped"));
            out.skipped += 1;
            continue;
        }
        let name = r.field(&mapping.name)?.and_then(as_text).unwrap_or_else(|| id.clone());
        let mut entry = DatasetEntry::new(id.clone(), name);
        entry.doi = r.field(&mapping.doi)?.and_then(as_text).and_then(|s| normalize_doi(&s));
        entry.arxiv_id = r.field(&mapping.arxiv)?.and_then(as_text).and_then(|s| normalize_arxiv(&s));
        let mut warn = |field: &str, v: &Value| {
            out.warnings.push(format!("dataset {id}: unreadable {field} value {v}, left absent"));
        };
        if let Some(v) = r.field(&mapping.frames)? {
            entry.n_frames = parse_count(v).unwrap_or_else(|_| {
                warn("frames", v);
                None
            });
        }
        if let Some(v) = r.field(&mapping.sensors)? {
            entry.n_sensors = parse_sensors(v).unwrap_or_else(|_| {
                warn("sensors", v);
                None
            });
        }
        if let Some(v) = r.field(&mapping.year)? {
            entry.publication_year = parse_year(v).unwrap_or_else(|_| {
                warn("year", v);
                None
            });
        }
        if !entry.is_ingestible() {
            out.non_ingestible.push(id);
        }
        out.entries.push(entry);
    }
    out.entries.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
    out.non_ingestible.sort();
    for w in &out.warnings {
        log::warn!("{w}");
    }
    Ok(out)
}

/// Splits an http(s) URL into its origin and the request path with query.
pub(crate) fn split_url(raw: &str) -> Option<(String, String)> {
    let url = url::Url::parse(raw).ok()?;
    if !matches!(url.scheme(), "http" | "https") {
        return None;
    }
    let origin = url.origin().ascii_serialization();
    let mut request = url.path().to_string();
    if let Some(q) = url.query() {
        request.push('?');
        request.push_str(q);
    }
    Some((origin, request))
}

/// Loads the catalogue from a file path or an http(s) URL.
pub fn load_ad_datasets(path_or_url: &str, mapping: &FieldMapping) -> Result<DatasetLoad, IngestError> {
    let text = match split_url(path_or_url) {
        Some((origin, request)) => {
            let client = SourceClient::new(
                "ad-datasets",
                &super::http::SourceConfig::new(origin),
                Default::default(),
                None,
                false,
            );
            fetch_catalogue(&client, &request)?
        }
        None => std::fs::read_to_string(path_or_url).map_err(|source| IngestError::Io {
            path: path_or_url.to_string(),
            source,
        })?,
    };
    parse_ad_datasets(&text, mapping)
}

pub(crate) fn fetch_catalogue(client: &SourceClient, request: &str) -> Result<String, IngestError> {
    match client.get(request)? {
        super::http::Fetched::Body(b) => Ok(b),
        super::http::Fetched::NotFound => Err(IngestError::Catalogue(format!("{request} not found"))),
    }
}
