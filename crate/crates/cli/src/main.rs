//! `hdclust`: run clustering experiments over seed ranges and write reports.
//!
//! Exit codes: 0 success, 1 configuration error, 2 dataset error,
//! 3 some seeds failed.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdclust::dataset::{load, Registry};
use hdclust::experiment::{compare_spaces, render_report, run_experiment, ReportFormat, SeedRange, SpaceComparison};
use hdclust::{Algorithm, EncoderConfig, Encoding, Error, ExperimentConfig, Mode, RawDataset, TieSource};

#[derive(Parser)]
#[command(name = "hdclust", version, about = "Hyperdimensional clustering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over a seed range.
    Run(RunArgs),
    /// Run k-means, hierarchical and affinity propagation on raw and on
    /// encoded data side by side.
    Compare(CommonArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    algorithm: Algorithm,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset name from the registry.
    #[arg(long)]
    dataset: String,
    #[arg(long, value_enum, default_value_t = EncodingArg::Record)]
    encoding: EncodingArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Binary)]
    mode: ModeArg,
    #[arg(long, default_value_t = 10_000)]
    dim: usize,
    #[arg(long, default_value_t = 16)]
    q: usize,
    /// Majority tie bits during encoding.
    #[arg(long, value_enum, default_value_t = TiesArg::PerSample)]
    ties: TiesArg,
    /// Inclusive seed range.
    #[arg(long, default_value = "0..499")]
    seeds: SeedRange,
    #[arg(long)]
    one_pass: bool,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long, default_value = "data/registry.toml")]
    registry: PathBuf,
    /// Worker threads across seeds.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Record,
    Ngram,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Binary,
    Integer,
}

#[derive(Clone, Copy, ValueEnum)]
enum TiesArg {
    PerSample,
    Shared,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Dataset(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Dataset(_) => 2,
        }
    }
}

impl CommonArgs {
    fn config(&self, algorithm: Algorithm) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(&self.dataset, algorithm);
        config.encoder = Some(EncoderConfig {
            encoding: match self.encoding {
                EncodingArg::Record => Encoding::Record,
                EncodingArg::Ngram => Encoding::Ngram,
            },
            mode: match self.mode {
                ModeArg::Binary => Mode::Binary,
                ModeArg::Integer => Mode::Integer,
            },
            dim: self.dim,
            q: self.q,
            ties: match self.ties {
                TiesArg::PerSample => TieSource::PerSample,
                TiesArg::Shared => TieSource::Shared,
            },
        });
        config.seeds = self.seeds;
        config.refinement.one_pass = self.one_pass;
        config.refinement.max_iterations = self.max_iters;
        config.threads = self.threads;
        config.normalized()
    }

    fn format(&self) -> ReportFormat {
        match self.format {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }

    fn load(&self) -> Result<RawDataset, Failure> {
        let registry = Registry::from_file(&self.registry)
            .map_err(|e| Failure::Config(format!("registry {}: {e}", self.registry.display())))?;
        let spec = registry.get(&self.dataset).map_err(|e| Failure::Config(e.to_string()))?;
        load(spec).map_err(|e| Failure::Dataset(e.to_string()))
    }

    fn write(&self, text: &str) -> Result<(), Failure> {
        match &self.output {
            Some(path) => fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
            None => io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Config(e.to_string())),
        }
    }
}

fn config_error(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn summarize(label: &str, report: &hdclust::RunReport) {
    let acc = report.aggregates.accuracy.as_ref();
    let it = report.aggregates.iterations.as_ref();
    eprintln!(
        "{label}: {} runs, {} failed, accuracy {}, iterations {}, {:.2}s total",
        report.records.len(),
        report.failures(),
        acc.map_or("n/a".into(), |s| format!("{:.2} (+/- {:.2})", s.mean, s.std)),
        it.map_or("n/a".into(), |s| format!("{:.2}", s.mean)),
        report.total_wall_time()
    );
}

fn run(args: &RunArgs) -> Result<bool, Failure> {
    let common = &args.common;
    let config = common.config(args.algorithm);
    config.validate().map_err(config_error)?;
    let data = common.load()?;
    let report = run_experiment(&config, &data).map_err(config_error)?;
    summarize(&format!("{} {}", data.name, args.algorithm), &report);
    common.write(&render_report(&report, common.format()).map_err(config_error)?)?;
    Ok(report.failures() == 0)
}

fn comparison_csv(rows: &[SpaceComparison]) -> String {
    let stat = |r: &hdclust::RunReport| {
        r.aggregates
            .accuracy
            .as_ref()
            .map_or((String::new(), String::new()), |s| (format!("{:.2}", s.mean), format!("{:.2}", s.std)))
    };
    let mut out = String::from("algorithm,raw_mean,raw_std,encoded_mean,encoded_std,delta,verdict\n");
    for c in rows {
        let (rm, rs) = stat(&c.raw);
        let (em, es) = stat(&c.encoded);
        let delta = c.delta.map_or(String::new(), |d| format!("{d:.2}"));
        let verdict = c.verdict.map_or(String::new(), |v| format!("{v:?}").to_lowercase());
        out.push_str(&format!("{},{rm},{rs},{em},{es},{delta},{verdict}\n", c.algorithm));
    }
    out
}

fn compare(args: &CommonArgs) -> Result<bool, Failure> {
    let base = args.config(Algorithm::KmeansEncoded);
    base.validate().map_err(config_error)?;
    let data = args.load()?;
    let rows = compare_spaces(&base, &data).map_err(config_error)?;
    let mut clean = true;
    for c in &rows {
        summarize(&format!("{} raw", c.algorithm), &c.raw);
        summarize(&format!("{} encoded", c.algorithm), &c.encoded);
        clean &= c.raw.failures() + c.encoded.failures() == 0;
    }
    let text = match args.format() {
        ReportFormat::Csv => comparison_csv(&rows),
        ReportFormat::Json => serde_json::to_string_pretty(&rows).map_err(|e| Failure::Config(e.to_string()))?,
    };
    args.write(&text)?;
    Ok(clean)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(f) => {
            let (Failure::Config(msg) | Failure::Dataset(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
