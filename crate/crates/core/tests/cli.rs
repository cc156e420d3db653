//! The binary end to end: golden reports, rerun determinism, exit codes.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ad_influence::corpus::{save_snapshot, DatasetEntry, PaperRecord, SaveOptions, SnapshotBuilder};
use ad_influence::ingest::mock::MockOptions;
use ad_influence::synth::{regression_corpus, trajectory_corpus, RegressionCorpusConfig};
use common::{fixture, Trio, CREATED_AT};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ad-influence"));
    c.env_remove("SS_API_KEY").env_remove("ALTMETRIC_KEY");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn golden_path() -> String {
    fixture("golden_snapshot.jsonl").display().to_string()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn check_golden(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    assert_eq!(actual, std::fs::read_to_string(path).unwrap());
}

#[test]
fn rank_2022_matches_golden_report() {
    let g = golden_path();
    let out = stdout(&run(&["rank", "--snapshot", &g, "--year", "2022", "--released-in", "2022"]));
    check_golden("golden_rank_2022.md", &out);
}

#[test]
fn history_matches_golden_series() {
    let g = golden_path();
    let out = stdout(&run(&["history", "bravo", "--snapshot", &g, "--from", "2018", "--format", "csv"]));
    check_golden("golden_history_bravo.csv", &out);
    let first = out.lines().nth(1).unwrap();
    assert_eq!(first, "2018,,,,,,,,,", "years before release are absent");
}

fn write_snapshot(dir: &Path, name: &str, s: &ad_influence::corpus::Snapshot) -> String {
    let p = dir.join(name);
    save_snapshot(s, &p, SaveOptions::default()).unwrap();
    p.display().to_string()
}

#[test]
fn every_command_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let g = golden_path();
    let reg = write_snapshot(
        dir.path(),
        "reg.jsonl",
        &regression_corpus(5, &RegressionCorpusConfig { datasets: 120, ..Default::default() }),
    );
    let traj = write_snapshot(dir.path(), "traj.jsonl", &trajectory_corpus(5, 10).0);
    let cases: Vec<Vec<&str>> = vec![
        vec!["rank", "--snapshot", &g, "--year", "2022"],
        vec!["rank", "--snapshot", &g, "--format", "json"],
        vec!["rank", "--snapshot", &g, "--format", "csv", "--score-features", "published-2022"],
        vec!["history", "alpha", "--snapshot", &g, "--format", "json"],
        vec!["features", "--snapshot", &g, "--year", "2021"],
        vec!["timeline", "--snapshot", &g, "--format", "csv"],
        vec!["regress", "--snapshot", &reg],
        vec!["regress", "--snapshot", &reg, "--format", "json"],
        vec!["cluster", "--snapshot", &traj, "--seed", "7"],
        vec!["cluster", "--snapshot", &traj, "--seed", "7", "--format", "json", "--standardize"],
    ];
    for args in cases {
        let a = stdout(&run(&args));
        let b = stdout(&run(&args));
        assert!(!a.is_empty(), "{args:?}");
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn file_outputs_are_byte_identical_on_rerun() {
    let g = golden_path();
    let traj_dir = tempfile::tempdir().unwrap();
    let traj = write_snapshot(traj_dir.path(), "traj.jsonl", &trajectory_corpus(2, 8).0);
    let read_all = |dir: &Path| -> Vec<(PathBuf, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        files.into_iter().map(|p| (p.file_name().unwrap().into(), std::fs::read(&p).unwrap())).collect()
    };
    let mut runs = Vec::new();
    for _ in 0..2 {
        let d = tempfile::tempdir().unwrap();
        let p = |n: &str| d.path().join(n).display().to_string();
        stdout(&run(&["history", "alpha", "--snapshot", &g, "--svg", &p("h.svg"), "--out", &p("h.md")]));
        stdout(&run(&["timeline", "--snapshot", &g, "--svg", &p("t.svg"), "--out", &p("t.csv"), "--format", "csv"]));
        stdout(&run(&["rank", "--snapshot", &g, "--histogram", &p("hist.csv"), "--out", &p("r.md")]));
        stdout(&run(&["cluster", "--snapshot", &traj, "--out-dir", &p("cl")]));
        let mut files = read_all(d.path());
        files.extend(read_all(&d.path().join("cl")));
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
    let names: Vec<_> = runs[0].iter().map(|(n, _)| n.display().to_string()).collect();
    for expected in ["assignments.csv", "centroids.csv", "centroids.svg", "elbow.csv", "h.svg", "hist.csv", "t.svg"] {
        assert!(names.iter().any(|n| n == expected), "{expected} missing from {names:?}");
    }
}

#[test]
fn histogram_counts_every_listed_dataset() {
    let d = tempfile::tempdir().unwrap();
    let h = d.path().join("hist.csv");
    let g = golden_path();
    stdout(&run(&["rank", "--snapshot", &g, "--year", "2022", "--histogram", h.to_str().unwrap(), "--bins", "5"]));
    let text = std::fs::read_to_string(h).unwrap();
    let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 6);
}

#[test]
fn exit_codes() {
    let g = golden_path();
    assert_eq!(run(&["rank"]).status.code(), Some(1));
    assert_eq!(run(&["rank", "--snapshot", &g, "--format", "yaml"]).status.code(), Some(1));
    assert_eq!(run(&["rank", "--snapshot", &g, "--year", "2031"]).status.code(), Some(1));
    assert_eq!(run(&["rank", "--snapshot", "/nonexistent.jsonl"]).status.code(), Some(2));
    assert_eq!(run(&["history", "zulu", "--snapshot", &g]).status.code(), Some(2));
    // four linked datasets, two with attention data: too few complete cases
    assert_eq!(run(&["regress", "--snapshot", &g]).status.code(), Some(2));
    // two trajectories cannot form six clusters
    assert_eq!(run(&["cluster", "--snapshot", &g]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_release_year_gives_empty_report() {
    let g = golden_path();
    let out = stdout(&run(&["rank", "--snapshot", &g, "--released-in", "1999"]));
    assert_eq!(out.lines().count(), 2, "header only: {out}");
}

#[test]
fn empty_snapshot_gives_header_only_reports() {
    let d = tempfile::tempdir().unwrap();
    let s = write_snapshot(d.path(), "empty.jsonl", &SnapshotBuilder::new(CREATED_AT).build());
    assert_eq!(stdout(&run(&["rank", "--snapshot", &s])).lines().count(), 2);
    assert_eq!(stdout(&run(&["rank", "--snapshot", &s, "--format", "csv"])).lines().count(), 1);
    assert_eq!(stdout(&run(&["features", "--snapshot", &s, "--format", "csv"])).lines().count(), 1);
}

#[test]
fn single_dataset_history_is_flat_one() {
    let d = tempfile::tempdir().unwrap();
    let mut b = SnapshotBuilder::new(CREATED_AT);
    let mut ds = DatasetEntry::new("solo", "Solo");
    ds.paper_id = Some("p".into());
    ds.n_frames = Some(10);
    b.dataset(ds);
    let mut p = PaperRecord::new("p");
    p.publication_year = Some(2019);
    p.citations_fetched = true;
    b.paper(p);
    let s = write_snapshot(d.path(), "solo.jsonl", &b.build());
    let out = stdout(&run(&["history", "solo", "--snapshot", &s, "--from", "2019", "--format", "csv"]));
    for line in out.lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some("1"), "{line}");
    }
    assert_eq!(out.lines().count(), 1 + 5);
}

#[test]
fn planted_regression_flags_attention_terms() {
    let d = tempfile::tempdir().unwrap();
    let s = write_snapshot(d.path(), "reg.jsonl", &regression_corpus(11, &RegressionCorpusConfig::default()));
    let out = stdout(&run(&["regress", "--snapshot", &s, "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let p = |name: &str| {
        v["terms"].as_array().unwrap().iter().find(|t| t["name"] == name).unwrap()["p"].as_f64().unwrap()
    };
    assert!(p("aas_3m") < 0.01);
    assert!(p("aas_3m^2") < 0.01);
    assert_eq!(v["n_obs"], 300);
}

#[test]
fn planted_trajectories_recover_six_groups() {
    let d = tempfile::tempdir().unwrap();
    let (snap, truth) = trajectory_corpus(4, 25);
    let s = write_snapshot(d.path(), "traj.jsonl", &snap);
    let out = stdout(&run(&["cluster", "--snapshot", &s, "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let assigned: Vec<usize> = truth.keys().map(|k| v["assignments"][k].as_u64().unwrap() as usize).collect();
    let planted: Vec<usize> = truth.values().copied().collect();
    assert!(ad_influence::cluster::same_partition(&assigned, &planted));
}

#[test]
fn ingest_writes_golden_snapshot_and_replays_offline() {
    let d = tempfile::tempdir().unwrap();
    let cache = d.path().join("cache");
    let online = d.path().join("online.jsonl");
    let offline = d.path().join("offline.jsonl");
    let catalogue;
    {
        let trio = Trio::default_pair();
        catalogue = format!("{}/datasets.json", trio.datasets.url());
        let o = run(&[
            "ingest",
            "--catalogue",
            &catalogue,
            "--out",
            online.to_str().unwrap(),
            "--created-at",
            CREATED_AT,
            "--ss-base-url",
            trio.graph.url(),
            "--altmetric-base-url",
            trio.altmetric.url(),
            "--cache-dir",
            cache.to_str().unwrap(),
            "--graph-rate",
            "500",
            "--altmetric-rate",
            "500",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report = String::from_utf8_lossy(&o.stderr);
        assert!(report.contains("not found: DOI:10.1000/foxtrot"), "{report}");
    }
    let golden = std::fs::read(fixture("golden_snapshot.jsonl")).unwrap();
    assert_eq!(std::fs::read(&online).unwrap(), golden);

    let o = run(&[
        "ingest",
        "--offline",
        "--catalogue",
        &catalogue,
        "--out",
        offline.to_str().unwrap(),
        "--created-at",
        CREATED_AT,
        "--ss-base-url",
        "http://127.0.0.1:9",
        "--altmetric-base-url",
        "http://127.0.0.1:9",
        "--cache-dir",
        cache.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&offline).unwrap(), golden);
}

#[test]
fn ingest_without_sources_or_cache_fails_without_output() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("s.jsonl");
    let o = run(&[
        "ingest",
        "--offline",
        "--catalogue",
        "http://127.0.0.1:9/datasets.json",
        "--out",
        out.to_str().unwrap(),
        "--cache-dir",
        d.path().join("empty-cache").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
    // offline without any cache is a usage error
    let o = run(&["ingest", "--offline", "--catalogue", "x.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unreachable_graph_is_a_source_failure() {
    let trio = Trio::start(
        MockOptions {
            down: true,
            ..MockOptions::default()
        },
        MockOptions::default(),
    );
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("s.jsonl");
    let catalogue = format!("{}/datasets.json", trio.datasets.url());
    let o = run(&[
        "ingest",
        "--catalogue",
        &catalogue,
        "--out",
        out.to_str().unwrap(),
        "--ss-base-url",
        trio.graph.url(),
        "--altmetric-base-url",
        trio.altmetric.url(),
        "--graph-rate",
        "1000",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn altmetric_down_still_writes_partial_snapshot() {
    let trio = Trio::start(
        MockOptions::default(),
        MockOptions {
            down: true,
            ..MockOptions::default()
        },
    );
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("s.jsonl");
    let catalogue = format!("{}/datasets.json", trio.datasets.url());
    let o = run(&[
        "ingest",
        "--catalogue",
        &catalogue,
        "--out",
        out.to_str().unwrap(),
        "--created-at",
        CREATED_AT,
        "--ss-base-url",
        trio.graph.url(),
        "--altmetric-base-url",
        trio.altmetric.url(),
        "--graph-rate",
        "1000",
        "--altmetric-rate",
        "1000",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("partial"));
    assert!(std::fs::read_to_string(&out).unwrap().lines().next().unwrap().contains("partial: true"));
}
