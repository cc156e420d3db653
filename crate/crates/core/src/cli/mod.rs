//! Command-line front end.
//!
//! Every command except `ingest` reads one snapshot file and is a pure
//! function of that file, the flags and the seed. Reports go to stdout or to
//! `--out`; files are written atomically.

pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cluster::{self, ClusterConfig, TrajectoryConfig, TrajectoryScope};
use crate::corpus::{build_publication_timeline, load_snapshot, save_snapshot, write_atomic, SaveOptions, Snapshot, Year};
use crate::influence::{self, FeatureSet, Histogram, RankFilter, INFLUENCE_FEATURES};
use crate::ingest::{self, CorpusSource, FetchPlan, RateLimit};
use crate::metrics::{features_to_csv, FeatureExtractor};
use crate::regression;
use svg::{LineChart, Series};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Source(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Source(_) => EXIT_SOURCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

/// Which features the Influence Score averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreFeatures {
    /// All eight eligible features.
    All,
    /// Leaves n_sensors out of the mean, as in the published 2022 table.
    #[value(name = "published-2022")]
    Published2022,
}

impl ScoreFeatures {
    fn set(self) -> FeatureSet {
        match self {
            ScoreFeatures::All => FeatureSet::default(),
            ScoreFeatures::Published2022 => FeatureSet::published_2022(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ad-influence", version, about = "Influence Score, regression and trajectory clustering for driving datasets")]
pub struct Cli {
    /// Snapshot file to read (written by `ingest`).
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,
    /// Evaluation year; defaults to the snapshot's coverage year.
    #[arg(long, global = true)]
    pub year: Option<Year>,
    #[arg(long, global = true, value_enum, default_value = "markdown")]
    pub format: ReportFormat,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Answer every source request from the cache.
    #[arg(long, global = true)]
    pub offline: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch the catalogue, graph and attention data into a snapshot.
    Ingest(IngestArgs),
    /// Ranked Influence Score table.
    Rank(RankArgs),
    /// Influence Score and feature percentiles of one dataset over the years.
    History(HistoryArgs),
    /// Early-citation regression with robust errors and diagnostics.
    Regress(OutArgs),
    /// k-means clustering of citation trajectories.
    Cluster(ClusterArgs),
    /// Datasets released and citations received per year.
    Timeline(PlotArgs),
    /// Feature table at the evaluation year.
    Features(OutArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Dataset catalogue: a JSON file or an http(s) URL.
    #[arg(long)]
    pub catalogue: String,
    /// Snapshot file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Snapshot timestamp (RFC 3339); defaults to now.
    #[arg(long)]
    pub created_at: Option<String>,
    #[arg(long, default_value = ingest::DEFAULT_GRAPH_URL)]
    pub ss_base_url: String,
    #[arg(long, default_value = ingest::DEFAULT_ALTMETRIC_URL)]
    pub altmetric_base_url: String,
    /// HTTP response cache; required with --offline.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Requests per second to the academic graph.
    #[arg(long, default_value_t = 10.0)]
    pub graph_rate: f64,
    /// Requests per second to the altmetrics source.
    #[arg(long, default_value_t = 10.0)]
    pub altmetric_rate: f64,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Maximum citations and references kept per paper.
    #[arg(long, default_value_t = 10_000)]
    pub max_edges: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Only list datasets released in this year (the peer group is unchanged).
    #[arg(long)]
    pub released_in: Option<Year>,
    #[arg(long, value_enum, default_value = "all")]
    pub score_features: ScoreFeatures,
    /// Also write the score distribution of the listed datasets as CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistoryArgs {
    pub dataset_id: String,
    /// First year; defaults to the earliest dataset release in the snapshot.
    #[arg(long)]
    pub from: Option<Year>,
    #[arg(long, value_enum, default_value = "all")]
    pub score_features: ScoreFeatures,
    #[command(flatten)]
    pub plot: PlotArgs,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    /// Largest k of the elbow series.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = cluster::DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Scale each trajectory coordinate to unit variance first.
    #[arg(long)]
    pub standardize: bool,
    /// Cluster every paper with fetched citations, not only dataset papers.
    #[arg(long)]
    pub all_papers: bool,
    /// Write assignments.csv, centroids.csv, elbow.csv and centroids.svg here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to stdout, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing the report to `stdout` unless an output
/// file was given.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Command::Ingest(args) = &cli.command {
        return cmd_ingest(cli, args);
    }
    if cli.offline {
        log::info!("--offline has no effect outside ingest");
    }
    let snapshot = open_snapshot(cli)?;
    let year = eval_year(cli, &snapshot)?;
    match &cli.command {
        Command::Ingest(_) => unreachable!(),
        Command::Rank(args) => cmd_rank(cli, &snapshot, year, args, stdout),
        Command::History(args) => cmd_history(cli, &snapshot, year, args, stdout),
        Command::Regress(args) => cmd_regress(cli, &snapshot, args, stdout),
        Command::Cluster(args) => cmd_cluster(cli, &snapshot, args, stdout),
        Command::Timeline(args) => cmd_timeline(cli, &snapshot, args, stdout),
        Command::Features(args) => cmd_features(cli, &snapshot, year, args, stdout),
    }
}

fn open_snapshot(cli: &Cli) -> Result<Snapshot, CliError> {
    let path = cli
        .snapshot
        .as_ref()
        .ok_or_else(|| CliError::Usage("--snapshot is required for this command".into()))?;
    load_snapshot(path).map_err(|e| CliError::Data(e.to_string()))
}

fn eval_year(cli: &Cli, snapshot: &Snapshot) -> Result<Year, CliError> {
    let coverage = snapshot.coverage_year();
    match cli.year {
        Some(y) if y > coverage => Err(CliError::Usage(format!(
            "--year {y} is after the snapshot coverage year {coverage}"
        ))),
        Some(y) => Ok(y),
        None => Ok(coverage),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write report: {e}"))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Renders CSV text as a Markdown table.
pub fn csv_to_markdown(text: &str) -> String {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut out = String::new();
    for (i, record) in reader.records().enumerate() {
        let Ok(record) = record else { continue };
        let cells: Vec<String> = record.iter().map(|c| c.replace('|', "\\|")).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
        if i == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(cells.len())));
        }
    }
    out
}

/// A CSV table in the requested format; JSON is an array of row objects
/// with every cell as a string (empty cells are null).
fn csv_report(text: &str, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => text.to_string(),
        ReportFormat::Markdown => csv_to_markdown(text),
        ReportFormat::Json => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            let header: Vec<String> = reader
                .headers()
                .map(|h| h.iter().map(str::to_string).collect())
                .unwrap_or_default();
            let rows: Vec<serde_json::Map<String, serde_json::Value>> = reader
                .records()
                .filter_map(Result::ok)
                .map(|r| {
                    header
                        .iter()
                        .zip(r.iter())
                        .map(|(h, c)| {
                            let v = if c.is_empty() { serde_json::Value::Null } else { c.into() };
                            (h.clone(), v)
                        })
                        .collect()
                })
                .collect();
            to_json(&rows)
        }
    }
}

fn cmd_ingest(cli: &Cli, args: &IngestArgs) -> Result<(), CliError> {
    let created_at = match &args.created_at {
        Some(ts) => {
            chrono::DateTime::parse_from_rfc3339(ts)
                .map_err(|e| CliError::Usage(format!("--created-at {ts:?}: {e}")))?;
            ts.clone()
        }
        None => chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
    };
    if !(args.graph_rate > 0.0 && args.altmetric_rate > 0.0) {
        return Err(CliError::Usage("rates must be positive".into()));
    }
    let mut plan = FetchPlan::new(&args.ss_base_url, &args.altmetric_base_url).with_env_keys();
    plan.graph.rate = RateLimit::new(args.graph_rate, 1);
    plan.altmetric.rate = RateLimit::new(args.altmetric_rate, 1);
    plan.workers = args.workers.max(1);
    plan.max_edges_per_paper = args.max_edges;
    plan.cache_dir = args.cache_dir.clone();
    plan.offline = cli.offline;
    let corpus = CorpusSource::new(&args.catalogue, created_at);

    let outcome = ingest::ingest_all(&corpus, &plan).map_err(|e| match e {
        ingest::IngestError::InvalidPlan(m) => CliError::Usage(m),
        ingest::IngestError::Http(h) => CliError::Source(h.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    eprint!("{}", outcome.report);
    let r = &outcome.report;
    if r.datasets > 0 && r.linked == 0 && !r.resume.is_empty() {
        return Err(CliError::Source(
            "academic graph unreachable; no snapshot written".into(),
        ));
    }
    save_snapshot(&outcome.snapshot, &args.out, SaveOptions::default()).map_err(|e| CliError::Data(e.to_string()))?;
    if outcome.partial {
        eprintln!("warning: snapshot is partial; some sources could not be read completely");
    }
    eprintln!("wrote {} ({} entities)", args.out.display(), outcome.snapshot.entity_count());
    Ok(())
}

fn cmd_rank(cli: &Cli, snapshot: &Snapshot, year: Year, args: &RankArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let filter = RankFilter {
        released_in: args.released_in,
    };
    let ranking = influence::rank_datasets(snapshot, year, &filter, &args.score_features.set());
    let text = match cli.format {
        ReportFormat::Markdown => influence::ranking_to_markdown(&ranking),
        ReportFormat::Csv => influence::ranking_to_csv(&ranking),
        ReportFormat::Json => influence::ranking_to_json(&ranking),
    };
    if let Some(path) = &args.histogram {
        let results: Vec<_> = ranking.rows.iter().map(|r| r.result.clone()).collect();
        write_file(path, &Histogram::of(&results, args.bins).to_csv())?;
    }
    emit(args.out.as_deref(), &text, stdout)
}

fn cmd_history(
    cli: &Cli,
    snapshot: &Snapshot,
    year: Year,
    args: &HistoryArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let first = args
        .from
        .or_else(|| snapshot.datasets().filter_map(|d| snapshot.dataset_year(d)).min())
        .unwrap_or(year);
    if first > year {
        return Err(CliError::Usage(format!("--from {first} is after the evaluation year {year}")));
    }
    let history = influence::score_history(&args.dataset_id, snapshot, first..=year, &args.score_features.set())
        .map_err(|e| CliError::Data(e.to_string()))?;
    let csv = influence::history_to_csv(&history);
    let text = match cli.format {
        ReportFormat::Json => to_json(&history),
        f => csv_report(&csv, f),
    };
    if let Some(path) = &args.plot.svg {
        let mut series = vec![Series::new("IS", history.iter().map(|r| r.is_score).collect())];
        series[0].weight = 3.0;
        for f in INFLUENCE_FEATURES {
            series.push(Series::new(f.name(), history.iter().map(|r| r.percentile(f)).collect()));
        }
        let chart = LineChart {
            title: format!("Influence Score of {}", args.dataset_id),
            x_labels: history.iter().map(|r| r.eval_year.to_string()).collect(),
            y_label: "percentile".into(),
            y_max: Some(1.0),
            series,
        };
        write_file(path, &chart.to_svg())?;
    }
    emit(args.plot.out.as_deref(), &text, stdout)
}

fn cmd_regress(cli: &Cli, snapshot: &Snapshot, args: &OutArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let table = regression::paper_regression_table(snapshot);
    let result = regression::run_paper_regression(&table).map_err(|e| CliError::Data(e.to_string()))?;
    let text = match cli.format {
        ReportFormat::Markdown => regression::regression_to_markdown(&result),
        ReportFormat::Csv => regression::regression_to_csv(&result),
        ReportFormat::Json => regression::regression_to_json(&result),
    };
    emit(args.out.as_deref(), &text, stdout)
}

fn cmd_cluster(cli: &Cli, snapshot: &Snapshot, args: &ClusterArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.restarts == 0 {
        return Err(CliError::Usage("--restarts must be positive".into()));
    }
    let tcfg = TrajectoryConfig {
        scope: if args.all_papers {
            TrajectoryScope::AllPapers
        } else {
            TrajectoryScope::DatasetPapers
        },
        ..TrajectoryConfig::default()
    };
    let trajectories = cluster::build_trajectories(snapshot, &tcfg);
    let config = ClusterConfig {
        k: args.k,
        k_range: 1..=args.k_max.max(args.k),
        restarts: args.restarts,
        seed: cli.seed,
        standardize: args.standardize,
    };
    let model = cluster::cluster_trajectories(&trajectories, &config).map_err(|e| CliError::Data(e.to_string()))?;
    for k in &model.elbow_violations {
        eprintln!("warning: elbow series rises at k={k}");
    }
    let centroids = cluster::centroids_to_csv(&model);
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        write_file(&dir.join("assignments.csv"), &cluster::assignments_to_csv(&model))?;
        write_file(&dir.join("centroids.csv"), &centroids)?;
        write_file(&dir.join("elbow.csv"), &cluster::elbow_to_csv(&model))?;
        write_file(&dir.join("centroids.svg"), &centroid_chart(&model))?;
    }
    let text = match cli.format {
        ReportFormat::Json => to_json(&model),
        ReportFormat::Csv => centroids,
        ReportFormat::Markdown => format!(
            "Trajectories: {}\n\n{}\n{}",
            trajectories.len(),
            csv_to_markdown(&centroids),
            csv_to_markdown(&cluster::elbow_to_csv(&model))
        ),
    };
    emit(args.out.as_deref(), &text, stdout)
}

fn centroid_chart(model: &cluster::ClusterModel) -> String {
    let total: usize = model.sizes.iter().sum::<usize>().max(1);
    let elbow = LineChart {
        title: "Inertia by number of clusters".into(),
        x_labels: model.per_k_inertia.keys().map(|k| k.to_string()).collect(),
        y_label: "inertia".into(),
        y_max: None,
        series: vec![Series::new("inertia", model.per_k_inertia.values().map(|v| Some(*v)).collect())],
    };
    let centroids = LineChart {
        title: format!("Mean citation trajectories, k = {}", model.k),
        x_labels: model
            .offsets
            .iter()
            .map(|t| if *t == 0 { "t0".to_string() } else { format!("t{t:+}") })
            .collect(),
        y_label: "citations in window".into(),
        y_max: None,
        series: model
            .centroids
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut s = Series::new(format!("cluster {j} (n={})", model.sizes[j]), c.iter().map(|v| Some(*v)).collect());
                s.weight = 1.0 + 7.0 * model.sizes[j] as f64 / total as f64;
                s
            })
            .collect(),
    };
    svg::stack(&[centroids, elbow])
}

fn cmd_timeline(cli: &Cli, snapshot: &Snapshot, args: &PlotArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let timeline = build_publication_timeline(snapshot);
    let csv = timeline.to_csv();
    if let Some(path) = &args.svg {
        let years: Vec<String> = timeline.rows.iter().map(|r| r.year.to_string()).collect();
        let chart = |title: &str, label: &str, pick: fn(&crate::corpus::TimelineRow) -> u64| LineChart {
            title: title.into(),
            x_labels: years.clone(),
            y_label: label.into(),
            y_max: None,
            series: vec![Series::new(label, timeline.rows.iter().map(|r| Some(pick(r) as f64)).collect())],
        };
        let svg = svg::stack(&[
            chart("Datasets released per year", "datasets", |r| r.datasets),
            chart("Citations of dataset papers per year", "citations", |r| r.citations),
        ]);
        write_file(path, &svg)?;
    }
    emit(args.out.as_deref(), &csv_report(&csv, cli.format), stdout)
}

fn cmd_features(cli: &Cli, snapshot: &Snapshot, year: Year, args: &OutArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let vectors = FeatureExtractor::new(snapshot).extract_all(year);
    let text = match cli.format {
        ReportFormat::Json => to_json(&vectors),
        f => csv_report(&features_to_csv(&vectors), f),
    };
    emit(args.out.as_deref(), &text, stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["x", "rank", "--snapshot", "s.jsonl", "--year", "2022", "--format", "csv"]).unwrap();
        assert_eq!(cli.year, Some(2022));
        assert_eq!(cli.format, ReportFormat::Csv);
        assert!(matches!(cli.command, Command::Rank(_)));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["x", "rank", "--format", "yaml"]), EXIT_USAGE);
        assert_eq!(main_with_args(["x", "bogus"]), EXIT_USAGE);
        assert_eq!(main_with_args(["x", "rank"]), EXIT_USAGE);
    }

    #[test]
    fn missing_snapshot_is_a_data_error() {
        assert_eq!(main_with_args(["x", "rank", "--snapshot", "/nonexistent/s.jsonl"]), EXIT_DATA);
    }

    #[test]
    fn markdown_from_csv() {
        assert_eq!(csv_to_markdown("a,b\n1,\"x|y\"\n"), "| a | b |\n|---|---|\n| 1 | x\\|y |\n");
    }

    #[test]
    fn json_rows_from_csv() {
        let j = csv_report("a,b\n1,\n", ReportFormat::Json);
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v, serde_json::json!([{"a": "1", "b": null}]));
    }
}
