use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use defeval_core::jit::{self, Selection, Source};
use defeval_core::pipeline::{self, MetricOptions};
use defeval_core::PredictionSet;

mod compare;
mod sast;

/// Evaluate defect and vulnerability predictions.
#[derive(Debug, Parser)]
#[command(name = "defeval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the metric battery for prediction files and emit one CSV report.
    Metrics(MetricsArgs),
    /// Compare classifiers (or two metrics) from a report with statistical tests.
    Compare(compare::CompareArgs),
    /// Lift commit-level scores onto entities and write a prediction file.
    Combine(CombineArgs),
    /// Split a release-tagged prediction table into train/test files.
    Split(SplitArgs),
    /// Score static analysis tools against a labelled test suite.
    Sastt(sast::SastArgs),
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Prediction files (`id,size,probability,actual[,loc_touched]`).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// LOC budgets (percent) for the PofB/NPofB columns.
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<u32>>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Classification threshold for the confusion-matrix metrics.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct CombineArgs {
    /// Entity predictions with direct scores.
    #[arg(long)]
    entities: PathBuf,
    /// Commit predictions (`commit_id,probability`).
    #[arg(long)]
    commits: PathBuf,
    /// Commit-to-entity touches (`commit_id,entity_id`).
    #[arg(long)]
    touch: PathBuf,
    /// Scores entering the median: any of direct, maxc, sumc.
    #[arg(long, value_delimiter = ',')]
    select: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitMode {
    Walkforward,
    Fraction,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Prediction table with a release column.
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: SplitMode,
    #[arg(long, default_value_t = 0.66)]
    train_fraction: f64,
    #[arg(long, default_value = "release")]
    release_column: String,
    /// Directory for the train/test files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Bad arguments, as opposed to bad data; exits with status 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Run a core parser, prefixing errors with the file name.
pub fn parse_file<T>(path: &Path, parse: impl FnOnce(&str) -> defeval_core::Result<T>) -> Result<T> {
    let text = read(path)?;
    parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn metrics(args: MetricsArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage(format!("--threshold {} outside [0, 1]", args.threshold)));
    }
    let mut options = MetricOptions {
        threshold: args.threshold,
        ..MetricOptions::default()
    };
    if let Some(x) = args.x {
        if let Some(bad) = x.iter().find(|&&v| v > 100) {
            return Err(usage(format!("--x value {bad} outside [0, 100]")));
        }
        let mut seen = x.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != x.len() {
            return Err(usage("--x values must be distinct"));
        }
        options.budgets = x;
    }
    let mut names: Vec<String> = args.files.iter().map(|p| stem(p)).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(usage(format!("two input files share the name `{}`", w[0])));
    }

    let reports = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .files
            .iter()
            .map(|path| {
                let options = &options;
                scope.spawn(move || -> Result<pipeline::MetricReport> {
                    let set = parse_file(path, |t| pipeline::parse_predictions(&stem(path), t))?;
                    pipeline::metric_report(&set, options).map_err(|e| anyhow!("{}: {e}", path.display()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("metric worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    write_output(args.out.as_deref(), &pipeline::emit_report(&reports))
}

fn prediction_csv(set: &PredictionSet) -> String {
    let touched = set.records().iter().all(|r| r.touched_size.is_some());
    let mut out = String::from("id,size,probability,actual");
    if touched {
        out.push_str(",loc_touched");
    }
    out.push('\n');
    for r in set.records() {
        out.push_str(&format!("{},{},{},{}", r.id, r.size, r.score, u8::from(r.actual)));
        if let (true, Some(t)) = (touched, r.touched_size) {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
    }
    out
}

fn combine(args: CombineArgs) -> Result<()> {
    let selection = match args.select {
        None => Selection::AllPresent,
        Some(names) => {
            let sources = names
                .iter()
                .map(|s| s.parse::<Source>())
                .collect::<defeval_core::Result<Vec<_>>>()
                .map_err(|e| usage(e.to_string()))?;
            Selection::only(sources).map_err(|e| usage(e.to_string()))?
        }
    };
    let entities = parse_file(&args.entities, |t| pipeline::parse_predictions(&stem(&args.entities), t))?;
    let commits = parse_file(&args.commits, pipeline::parse_commits)?;
    let touch = parse_file(&args.touch, pipeline::parse_touchmap)?;
    let combined = jit::combine_set(&entities, &commits, &touch, &selection)?;
    if combined.rescaled() {
        eprintln!("note: combined scores divided by {} to stay within [0, 1]", combined.scale);
    }
    write_output(args.out.as_deref(), &prediction_csv(&combined.set))
}

fn split(args: SplitArgs) -> Result<()> {
    let table = parse_file(&args.input, |t| pipeline::parse_release_table(t, &args.release_column))?;
    let folds = match args.mode {
        SplitMode::Walkforward => pipeline::walk_forward(&table.releases)?,
        SplitMode::Fraction => {
            if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
                return Err(usage(format!("--train-fraction {} outside (0, 1)", args.train_fraction)));
            }
            vec![pipeline::ordered_split(&table.releases, args.train_fraction)?]
        }
    };
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let base = stem(&args.input);
    let ids = |side: &[&pipeline::Release]| side.iter().map(|r| r.release_id.as_str()).collect::<Vec<_>>().join(";");
    let mut summary = String::from("fold,train_releases,test_releases,train_file,test_file\n");
    for (i, fold) in folds.iter().enumerate() {
        if fold.adjusted {
            eprintln!("note: split boundary moved to keep both sides non-empty");
        }
        let n = i + 1;
        let train = args.out_dir.join(format!("{base}_fold{n}_train.csv"));
        let test = args.out_dir.join(format!("{base}_fold{n}_test.csv"));
        write_output(Some(&train), &table.to_csv(fold.train.iter().copied()))?;
        write_output(Some(&test), &table.to_csv(fold.test.iter().copied()))?;
        summary.push_str(&format!(
            "{n},{},{},{},{}\n",
            ids(&fold.train),
            ids(&fold.test),
            train.display(),
            test.display()
        ));
    }
    write_output(None, &summary)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Metrics(a) => metrics(a),
        Command::Compare(a) => compare::run(a),
        Command::Combine(a) => combine(a),
        Command::Split(a) => split(a),
        Command::Sastt(a) => sast::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
