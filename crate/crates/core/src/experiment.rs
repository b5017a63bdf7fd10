//! Seed-range experiments, reports and raw-versus-encoded comparisons.
//!
//! One run is one seed pushed through the whole pipeline: seed banks,
//! encoding, initialization, refinement and scoring. Wall time covers that
//! pipeline from encoding through the final assignment; loading the dataset
//! is excluded. Raw-space baselines time only their own clustering.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{affinity_propagation, hierarchical, kmeans, ApConfig, PointMatrix, SimilarityMatrix};
use crate::encoding::{encode_dataset, EncodedDataset, EncoderConfig, RawDataset};
use crate::error::{Error, Result};
use crate::hdc::{self, query_similarity_matrix, HdcMethod, RefinementConfig};
use crate::hv::Mode;
use crate::metrics::{accuracy, aggregate, AccuracyMethod, RunStats};
use crate::seed::{RngStream, SeedSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "hdcluster")]
    HdCluster,
    SbKmeans,
    BinWidth,
    BinHeight,
    SbAffinity,
    KmeansRaw,
    HierRaw,
    ApRaw,
    KmeansEncoded,
    HierEncoded,
    ApEncoded,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Self::HdCluster,
        Self::SbKmeans,
        Self::BinWidth,
        Self::BinHeight,
        Self::SbAffinity,
        Self::KmeansRaw,
        Self::HierRaw,
        Self::ApRaw,
        Self::KmeansEncoded,
        Self::HierEncoded,
        Self::ApEncoded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::HdCluster => "hdcluster",
            Self::SbKmeans => "sb-kmeans",
            Self::BinWidth => "bin-width",
            Self::BinHeight => "bin-height",
            Self::SbAffinity => "sb-affinity",
            Self::KmeansRaw => "kmeans-raw",
            Self::HierRaw => "hier-raw",
            Self::ApRaw => "ap-raw",
            Self::KmeansEncoded => "kmeans-encoded",
            Self::HierEncoded => "hier-encoded",
            Self::ApEncoded => "ap-encoded",
        }
    }

    /// Runs on the original features and never encodes.
    pub fn is_raw(self) -> bool {
        matches!(self, Self::KmeansRaw | Self::HierRaw | Self::ApRaw)
    }

    pub fn hdc_method(self) -> Option<HdcMethod> {
        Some(match self {
            Self::HdCluster => HdcMethod::HdCluster,
            Self::SbKmeans => HdcMethod::SbKmeans,
            Self::BinWidth => HdcMethod::BinWidth,
            Self::BinHeight => HdcMethod::BinHeight,
            Self::SbAffinity => HdcMethod::SbAffinity,
            _ => return None,
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Inclusive seed range, written `A..B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn new(start: u64, end: u64) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("empty seed range {start}..{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..=self.end
    }
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, end: 499 }
    }
}

impl FromStr for SeedRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("seed range must look like A..B, got {s:?}"));
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        Self::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub algorithm: Algorithm,
    /// `None` for raw-space algorithms.
    pub encoder: Option<EncoderConfig>,
    pub seeds: SeedRange,
    pub refinement: RefinementConfig,
    pub ap: ApConfig,
    /// Worker threads for seed-level parallelism; `None` uses the global pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<String>, algorithm: Algorithm) -> Self {
        Self {
            dataset: dataset.into(),
            algorithm,
            encoder: (!algorithm.is_raw()).then(EncoderConfig::default),
            seeds: SeedRange::default(),
            refinement: RefinementConfig::default(),
            ap: ApConfig::default(),
            threads: None,
        }
    }

    /// Drops encoder settings for raw-space algorithms and fills them in
    /// with defaults for the rest.
    pub fn normalized(mut self) -> Self {
        self.encoder = if self.algorithm.is_raw() {
            None
        } else {
            Some(self.encoder.unwrap_or_default())
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.refinement.validate()?;
        if let Some(e) = &self.encoder {
            if e.dim == 0 {
                return Err(Error::Config("dimension must be at least 1".into()));
            }
            if e.q < 2 || e.q > u16::MAX as usize {
                return Err(Error::InvalidQuantization(e.q));
            }
        }
        if self.seeds.end < self.seeds.start {
            return Err(Error::Config("empty seed range".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Percent.
    pub accuracy: Option<f64>,
    pub accuracy_method: Option<AccuracyMethod>,
    /// Refinement rounds (HDC) or Lloyd steps (k-means); absent otherwise.
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub wall_time_seconds: f64,
    /// Distinct clusters in the final assignment.
    pub n_clusters: Option<usize>,
    /// Query the similarity profile was taken against.
    pub anchor: Option<usize>,
    /// Initial clusters seeded with random hypervectors.
    pub random_centers: Option<usize>,
    pub ap_iterations: Option<usize>,
    pub ap_converged: Option<bool>,
    pub no_exemplar: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub accuracy: Option<RunStats>,
    pub iterations: Option<RunStats>,
    pub wall_time_seconds: Option<RunStats>,
}

impl Aggregates {
    fn of(records: &[RunRecord]) -> Self {
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let stats = |values: Vec<f64>| aggregate(&values).ok();
        Self {
            accuracy: stats(ok.iter().filter_map(|r| r.accuracy).collect()),
            iterations: stats(ok.iter().filter_map(|r| r.iterations.map(|i| i as f64)).collect()),
            wall_time_seconds: stats(ok.iter().map(|r| r.wall_time_seconds).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// Ordered by seed.
    pub records: Vec<RunRecord>,
    pub aggregates: Aggregates,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, records: Vec<RunRecord>) -> Self {
        let aggregates = Aggregates::of(&records);
        Self {
            config,
            records,
            aggregates,
        }
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.accuracy).collect()
    }

    pub fn total_wall_time(&self) -> f64 {
        self.records.iter().map(|r| r.wall_time_seconds).sum()
    }

    /// Same report with every timing field zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        let mut records = self.records.clone();
        for r in &mut records {
            r.wall_time_seconds = 0.0;
        }
        Self::new(self.config.clone(), records)
    }
}

/// Encoded queries as real points: bits as 0/1 for binary (squared
/// Euclidean is then Hamming), unit-normalized vectors for integer
/// (squared Euclidean is then `2(1 - cos)`).
pub fn embed(encoded: &EncodedDataset) -> Result<PointMatrix> {
    let dim = encoded.dim;
    let mut data = Vec::with_capacity(encoded.len() * dim);
    for q in &encoded.queries {
        match encoded.mode {
            Mode::Binary => data.extend((0..dim).map(|i| q.get(i) as f64)),
            Mode::Integer => {
                let norm = q.norm();
                if norm == 0.0 {
                    return Err(Error::ZeroVector);
                }
                data.extend(q.ints().unwrap().iter().map(|&x| x as f64 / norm));
            }
        }
    }
    PointMatrix::new(encoded.len(), dim, data)
}

fn distinct(assignments: &[usize]) -> usize {
    let mut seen = assignments.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn run_ap(sim: &SimilarityMatrix, cfg: &ApConfig, record: &mut RunRecord) -> Result<Vec<usize>> {
    let r = affinity_propagation(sim, cfg)?;
    record.ap_iterations = Some(r.iterations);
    record.ap_converged = Some(r.converged);
    record.no_exemplar = Some(r.no_exemplar);
    record.converged = Some(r.converged);
    Ok(r.assignments)
}

fn run_seed(config: &ExperimentConfig, dataset: &RawDataset, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rng = RngStream::new(seed);
    let mut record = RunRecord {
        seed,
        ..RunRecord::default()
    };
    let k = dataset.k;
    let max_iterations = config.refinement.max_iterations;

    let assignments = if config.algorithm.is_raw() {
        match config.algorithm {
            Algorithm::KmeansRaw => {
                let r = kmeans(&dataset.features, k, &mut rng, max_iterations)?;
                record.iterations = Some(r.iterations);
                record.converged = Some(r.converged);
                r.assignments
            }
            Algorithm::HierRaw => hierarchical(&dataset.features, k)?,
            _ => run_ap(
                &SimilarityMatrix::negative_squared_euclidean(&dataset.features)?,
                &config.ap,
                &mut record,
            )?,
        }
    } else {
        let enc = config.encoder.unwrap_or_default();
        let seeds = SeedSet::generate(&mut rng, dataset.n_features(), enc.q, enc.dim, enc.mode)?;
        let encoded = encode_dataset(dataset, &enc, &seeds)?;
        match config.algorithm.hdc_method() {
            Some(method) => {
                let out = hdc::cluster(&encoded, method, &config.refinement, &config.ap, &mut rng)?;
                record.iterations = Some(out.model.iterations);
                record.converged = Some(out.model.converged);
                record.anchor = out.anchor;
                record.random_centers = Some(out.random_centers);
                if let Some(a) = &out.affinity {
                    record.ap_iterations = Some(a.ap_iterations);
                    record.ap_converged = Some(a.converged);
                    record.no_exemplar = Some(a.no_exemplar);
                }
                out.model.assignments
            }
            None => match config.algorithm {
                Algorithm::KmeansEncoded => {
                    let r = kmeans(&embed(&encoded)?, k, &mut rng, max_iterations)?;
                    record.iterations = Some(r.iterations);
                    record.converged = Some(r.converged);
                    r.assignments
                }
                Algorithm::HierEncoded => hierarchical(&embed(&encoded)?, k)?,
                _ => run_ap(&query_similarity_matrix(&encoded.queries)?, &config.ap, &mut record)?,
            },
        }
    };
    record.wall_time_seconds = start.elapsed().as_secs_f64();

    let acc = accuracy(&assignments, &dataset.labels, k)?;
    record.accuracy = Some(acc.value * 100.0);
    record.accuracy_method = Some(acc.method);
    record.n_clusters = Some(distinct(&assignments));
    Ok(record)
}

/// Runs every seed of the range, in parallel across seeds.
///
/// A failing seed yields a record carrying its error; the others still
/// run. Records come back ordered by seed.
pub fn run_experiment(config: &ExperimentConfig, dataset: &RawDataset) -> Result<RunReport> {
    let config = config.clone().normalized();
    config.validate()?;
    let run_all = || -> Vec<RunRecord> {
        config
            .seeds
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|seed| {
                run_seed(&config, dataset, seed).unwrap_or_else(|e| RunRecord {
                    seed,
                    error: Some(e.to_string()),
                    ..RunRecord::default()
                })
            })
            .collect()
    };
    let records = match config.threads {
        None => run_all(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run_all),
    };
    Ok(RunReport::new(config, records))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

const RECORD_HEADER: [&str; 13] = [
    "seed",
    "accuracy",
    "accuracy_method",
    "iterations",
    "converged",
    "wall_time_seconds",
    "n_clusters",
    "anchor",
    "random_centers",
    "ap_iterations",
    "ap_converged",
    "no_exemplar",
    "error",
];

const STATS_HEADER: [&str; 11] = [
    "quantity",
    "count",
    "mean",
    "std",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "whisker_low",
    "whisker_high",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn stats_row(name: &str, s: &RunStats, decimals: usize) -> Vec<String> {
    let f = |x: f64| format!("{x:.decimals$}");
    vec![
        name.to_string(),
        s.count.to_string(),
        f(s.mean),
        f(s.std),
        f(s.min),
        f(s.q1),
        f(s.median),
        f(s.q3),
        f(s.max),
        f(s.whisker_low),
        f(s.whisker_high),
    ]
}

fn render_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER)?;
    for r in &report.records {
        w.write_record([
            r.seed.to_string(),
            opt(r.accuracy.map(|a| format!("{a:.2}"))),
            opt(r.accuracy_method.map(|m| match m {
                AccuracyMethod::Matching => "matching",
                AccuracyMethod::Majority => "majority",
            })),
            opt(r.iterations),
            opt(r.converged),
            format!("{:.6}", r.wall_time_seconds),
            opt(r.n_clusters),
            opt(r.anchor),
            opt(r.random_centers),
            opt(r.ap_iterations),
            opt(r.ap_converged),
            opt(r.no_exemplar),
            opt(r.error.clone()),
        ])?;
    }
    let mut out = finish(w)?;
    out.push('\n');

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STATS_HEADER)?;
    let a = &report.aggregates;
    for (name, stats, decimals) in [
        ("accuracy", &a.accuracy, 2),
        ("iterations", &a.iterations, 2),
        ("wall_time_seconds", &a.wall_time_seconds, 6),
    ] {
        if let Some(s) = stats {
            w.write_record(stats_row(name, s, decimals))?;
        }
    }
    out.push_str(&finish(w)?);
    Ok(out)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The report as CSV (records, blank line, aggregate block) or JSON
/// (config echo, records, aggregates).
pub fn render_report(report: &RunReport, format: ReportFormat) -> Result<String> {
    if report.records.is_empty() {
        return Err(Error::EmptyInput("report has no records"));
    }
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
    }
}

pub fn emit_report(report: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn parse_json_report(text: &str) -> Result<RunReport> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Encoded mean accuracy above raw by more than the margin.
    Better,
    Comparable,
    Worse,
}

/// Points of mean accuracy separating a verdict from "comparable".
pub const VERDICT_MARGIN: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceComparison {
    pub algorithm: String,
    pub raw: RunReport,
    pub encoded: RunReport,
    /// Encoded mean accuracy minus raw mean accuracy, in points.
    pub delta: Option<f64>,
    pub verdict: Option<Verdict>,
}

fn mean_accuracy(r: &RunReport) -> Option<f64> {
    r.aggregates.accuracy.as_ref().map(|s| s.mean)
}

/// k-means, hierarchical and affinity propagation on raw features and on
/// encoded queries, over the same seeds.
pub fn compare_spaces(base: &ExperimentConfig, dataset: &RawDataset) -> Result<Vec<SpaceComparison>> {
    let pairs = [
        ("kmeans", Algorithm::KmeansRaw, Algorithm::KmeansEncoded),
        ("hierarchical", Algorithm::HierRaw, Algorithm::HierEncoded),
        ("affinity-propagation", Algorithm::ApRaw, Algorithm::ApEncoded),
    ];
    pairs
        .into_iter()
        .map(|(name, raw_alg, enc_alg)| {
            let with = |algorithm| ExperimentConfig {
                algorithm,
                encoder: Some(base.encoder.unwrap_or_default()),
                ..base.clone()
            };
            let raw = run_experiment(&with(raw_alg), dataset)?;
            let encoded = run_experiment(&with(enc_alg), dataset)?;
            let delta = mean_accuracy(&encoded).zip(mean_accuracy(&raw)).map(|(e, r)| e - r);
            let verdict = delta.map(|d| {
                if d > VERDICT_MARGIN {
                    Verdict::Better
                } else if d < -VERDICT_MARGIN {
                    Verdict::Worse
                } else {
                    Verdict::Comparable
                }
            });
            Ok(SpaceComparison {
                algorithm: name.to_string(),
                raw,
                encoded,
                delta,
                verdict,
            })
        })
        .collect()
}

/// Default output file name for a config.
pub fn default_output(config: &ExperimentConfig, format: ReportFormat) -> PathBuf {
    let ext = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    PathBuf::from(format!("{}-{}-{}.{ext}", config.dataset, config.algorithm, config.seeds).replace("..", "_"))
}
