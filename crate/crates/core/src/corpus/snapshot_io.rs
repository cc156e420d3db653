//! Line-delimited JSON snapshot format.
//!
//! Line 1 is a header `{created_at, format_version, source_versions}`. Every
//! further line is one entity tagged with `kind`. Keys are sorted, numbers
//! never use exponent notation and entities are ordered by `(kind, id)`, so
//! equal logical content always produces equal bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{
    first_duplicate, AltmetricRecord, AuthorRecord, CitationEdge, DanglingRef, DatasetEntry,
    PaperRecord, Snapshot, SnapshotBuilder,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line} (last complete line {last_complete_line}): {message}")]
    Parse {
        line: usize,
        last_complete_line: usize,
        message: String,
    },
    #[error("unsupported snapshot format version {found} (supported: {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("invalid record at line {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("snapshot has {} dangling reference(s), first: {}", .0.len(), .0[0])]
    Integrity(Vec<DanglingRef>),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SaveOptions {
    /// Write even when references do not resolve.
    pub allow_dangling: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    created_at: String,
    format_version: u64,
    #[serde(default)]
    source_versions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Altmetric(AltmetricRecord),
    Author(AuthorRecord),
    Citation(CitationEdge),
    Dataset(DatasetEntry),
    Paper(PaperRecord),
}

impl Snapshot {
    /// Canonical serialized form.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let header = Header {
            created_at: self.created_at.clone(),
            format_version: u64::from(FORMAT_VERSION),
            source_versions: self.source_versions.clone(),
        };
        push_line(&mut out, &header);
        // kind names sort as altmetric < author < citation < dataset < paper
        for r in self.altmetrics.values() {
            push_line(&mut out, &Record::Altmetric(r.clone()));
        }
        for r in self.authors.values() {
            push_line(&mut out, &Record::Author(r.clone()));
        }
        for r in &self.citations {
            push_line(&mut out, &Record::Citation(r.clone()));
        }
        for r in self.datasets.values() {
            push_line(&mut out, &Record::Dataset(r.clone()));
        }
        for r in self.papers.values() {
            push_line(&mut out, &Record::Paper(r.clone()));
        }
        out
    }
}

fn push_line<T: Serialize>(out: &mut String, item: &T) {
    let value = serde_json::to_value(item).expect("snapshot records are always representable");
    write_canonical(&value, out);
    out.push('\n');
}

/// Writes `value` as compact JSON with sorted keys and plain decimal numbers.
pub(crate) fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else {
                out.push_str(&format_f64(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// Shortest round-tripping decimal, never in exponent form. Integral values
/// keep a `.0` so they read back as floats.
pub(crate) fn format_f64(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

/// Parses snapshot text. Dangling references become warnings on the result.
pub fn parse_snapshot(text: &str) -> Result<Snapshot, SnapshotError> {
    let mut lines = text.split_inclusive('\n').enumerate();
    let parse_err = |line: usize, message: String| SnapshotError::Parse {
        line,
        last_complete_line: line - 1,
        message,
    };

    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header line".into()))?;
    let header_value: Value = serde_json::from_str(first.trim_end_matches('\n'))
        .map_err(|e| parse_err(1, e.to_string()))?;
    if let Some(v) = header_value.get("format_version").and_then(Value::as_u64) {
        if v != u64::from(FORMAT_VERSION) {
            return Err(SnapshotError::UnsupportedVersion { found: v });
        }
    }
    let header: Header =
        serde_json::from_value(header_value).map_err(|e| parse_err(1, e.to_string()))?;
    if !first.ends_with('\n') {
        return Err(parse_err(1, "header line is not terminated".into()));
    }
    if DateTime::parse_from_rfc3339(&header.created_at).is_err() {
        return Err(SnapshotError::InvalidRecord {
            line: 1,
            reason: format!("created_at {:?} is not an RFC 3339 timestamp", header.created_at),
        });
    }

    let mut builder = SnapshotBuilder::new(header.created_at);
    for v in header.source_versions {
        builder.source_version(v);
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        let body = raw.trim_end_matches('\n');
        if body.trim().is_empty() && raw.ends_with('\n') {
            continue;
        }
        let record: Record = serde_json::from_str(body).map_err(|e| parse_err(line, e.to_string()))?;
        if !raw.ends_with('\n') {
            return Err(parse_err(line, "record is not terminated".into()));
        }
        check_record(&record).map_err(|reason| SnapshotError::InvalidRecord { line, reason })?;
        match record {
            Record::Altmetric(r) => builder.altmetric(r),
            Record::Author(r) => builder.author(r),
            Record::Citation(r) => builder.citation(r),
            Record::Dataset(r) => builder.dataset(r),
            Record::Paper(r) => builder.paper(r),
        };
    }
    Ok(builder.build())
}

fn check_record(record: &Record) -> Result<(), String> {
    match record {
        Record::Dataset(d) => {
            if d.n_sensors == Some(0) {
                return Err(format!("dataset {:?}: n_sensors must be >= 1", d.dataset_id));
            }
        }
        Record::Paper(p) => {
            if let Some(dup) = first_duplicate(&p.author_ids) {
                return Err(format!("paper {:?}: duplicate author {dup:?}", p.paper_id));
            }
            if let Some(dup) = p.reference_ids.as_deref().and_then(first_duplicate) {
                return Err(format!("paper {:?}: duplicate reference {dup:?}", p.paper_id));
            }
        }
        Record::Author(a) => {
            if let Some(dup) = first_duplicate(&a.paper_ids) {
                return Err(format!("author {:?}: duplicate paper {dup:?}", a.author_id));
            }
        }
        Record::Citation(e) => {
            if e.citing_paper_id == e.cited_paper_id {
                return Err(format!("paper {:?} cites itself", e.cited_paper_id));
            }
        }
        Record::Altmetric(m) => {
            if !(m.aas_curr.is_finite() && m.aas_curr >= 0.0) {
                return Err(format!("altmetric {:?}: aas_curr must be >= 0", m.paper_key));
            }
            if let Some(p) = m.aas_3m {
                if !(0.0..=100.0).contains(&p) {
                    return Err(format!("altmetric {:?}: aas_3m {p} outside [0,100]", m.paper_key));
                }
            }
            let sum: u64 = m.readers_by_service.values().sum();
            if sum != m.n_readers {
                return Err(format!(
                    "altmetric {:?}: n_readers {} != service sum {sum}",
                    m.paper_key, m.n_readers
                ));
            }
        }
    }
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot, SnapshotError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SnapshotError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let snapshot = parse_snapshot(&text)?;
    for w in snapshot.warnings() {
        log::warn!("{}: {w}", path.display());
    }
    Ok(snapshot)
}

/// Writes the canonical form atomically (temp file in the target directory,
/// then rename).
pub fn save_snapshot(
    snapshot: &Snapshot,
    path: impl AsRef<Path>,
    options: SaveOptions,
) -> Result<(), SnapshotError> {
    let path = path.as_ref();
    if !options.allow_dangling {
        let issues = snapshot.validate();
        if !issues.is_empty() {
            return Err(SnapshotError::Integrity(issues));
        }
    }
    write_atomic(path, snapshot.to_canonical_string().as_bytes()).map_err(|source| {
        SnapshotError::Io {
            path: path.display().to_string(),
            source,
        }
    })
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DEFAULT_CREATED_AT;

    fn one_of_each() -> Snapshot {
        let mut b = SnapshotBuilder::new("2023-01-04T00:00:00Z");
        let mut d = DatasetEntry::new("d1", "Dataset One");
        d.paper_id = Some("p1".into());
        d.n_frames = Some(118_000);
        b.dataset(d);
        let mut p = PaperRecord::new("p1");
        p.publication_year = Some(2021);
        b.paper(p);
        b.build()
    }

    #[test]
    fn empty_snapshot_is_header_only() {
        let text = Snapshot::default().to_canonical_string();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(
            text,
            format!("{{\"created_at\":\"{DEFAULT_CREATED_AT}\",\"format_version\":1,\"source_versions\":[]}}\n")
        );
        assert_eq!(parse_snapshot(&text).unwrap(), Snapshot::default());
    }

    #[test]
    fn one_dataset_one_paper_is_three_stable_lines() {
        let s = one_of_each();
        let a = s.to_canonical_string();
        assert_eq!(a.lines().count(), 3);
        assert_eq!(a, one_of_each().to_canonical_string());
        assert!(a.lines().nth(1).unwrap().starts_with("{\"dataset_id\""));
    }

    #[test]
    fn floats_never_use_exponents() {
        assert_eq!(format_f64(1e21), "1000000000000000000000");
        assert_eq!(format_f64(1e-7), "0.0000001");
        assert_eq!(format_f64(3.0), "3.0");
        assert_eq!(format_f64(0.25), "0.25");
        let mut out = String::new();
        write_canonical(&serde_json::json!({"b": 1e-7, "a": [2, -3]}), &mut out);
        assert_eq!(out, r#"{"a":[2,-3],"b":0.0000001}"#);
    }

    #[test]
    fn truncated_file_names_last_complete_line() {
        let text = one_of_each().to_canonical_string();
        let cut = text.len() - 10;
        match parse_snapshot(&text[..cut]) {
            Err(SnapshotError::Parse { line, last_complete_line, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(last_complete_line, 2);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_version() {
        let text = "{\"created_at\":\"2023-01-01T00:00:00Z\",\"format_version\":9,\"source_versions\":[]}\n";
        assert!(matches!(
            parse_snapshot(text),
            Err(SnapshotError::UnsupportedVersion { found: 9 })
        ));
    }

    #[test]
    fn invalid_values_are_rejected_with_line() {
        let mut text = Snapshot::default().to_canonical_string();
        text.push_str(r#"{"aas_3m":140.0,"aas_curr":1.0,"kind":"altmetric","n_readers":0,"paper_key":"p","readers_by_service":{}}"#);
        text.push('\n');
        assert!(matches!(
            parse_snapshot(&text),
            Err(SnapshotError::InvalidRecord { line: 2, .. })
        ));
    }

    #[test]
    fn save_refuses_dangling_without_flag() {
        let mut b = one_of_each().to_builder();
        b.citation(CitationEdge::new("x", "gone", Some(2022)));
        let s = b.build();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        assert!(matches!(
            save_snapshot(&s, &path, SaveOptions::default()),
            Err(SnapshotError::Integrity(_))
        ));
        save_snapshot(&s, &path, SaveOptions { allow_dangling: true }).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back.warnings().len(), 1);
        assert_eq!(back, s);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = save_snapshot(
            &Snapshot::default(),
            "/nonexistent-dir/sub/s.jsonl",
            SaveOptions::default(),
        );
        assert!(matches!(err, Err(SnapshotError::Io { .. })));
    }
}
