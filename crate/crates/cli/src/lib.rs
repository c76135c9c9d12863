//! Batch front end: every subcommand reads a case manifest (or explicit
//! files), runs one library procedure per case and writes CSV/JSON/PGM
//! outputs plus a `run_report.json` into `--out-dir`.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad arguments or missing
//! file, 3 manifest validation failure, 4 every case failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use scarbench::manifest::load_manifest;
use scarbench::CaseRecord;

mod commands;
pub mod fail;
pub mod output;

use fail::{CmdResult, Failure, EXIT_OK, EXIT_USAGE};
use output::CaseNote;

#[derive(Debug, Parser)]
#[command(
    name = "scarbench",
    version,
    about = "LGE scar segmentation benchmarking tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// DSC, Hausdorff distance, area and perimeter similarity per case.
    Evaluate(EvaluateArgs),
    /// Morphological lesion features and scar mass.
    Features(FeaturesArgs),
    /// Seeded augmentation of every image/mask pair.
    Augment(AugmentArgs),
    /// Patient-level train/valid/test split stratified by scar burden.
    Split(SplitArgs),
    /// Combined Dice/cross-entropy/KL loss of stored score maps.
    Loss(LossArgs),
    /// Compares analytic loss gradients with central differences.
    Gradcheck(GradcheckArgs),
    /// Half-maximum threshold labeling of one slice.
    Fwhm(FwhmArgs),
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// JSON case manifest; relative paths resolve against its directory.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Parallel workers (default: available parallelism).
    #[arg(long, env = "SCARBENCH_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    batch: BatchArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MaskSource {
    /// Ground-truth mask (`mask` field).
    Mask,
    /// Model prediction (`pred` field).
    Pred,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long, value_enum, default_value_t = MaskSource::Mask)]
    source: MaskSource,
    /// Tissue density in g/ml.
    #[arg(long, default_value_t = scarbench::morphology::MYOCARDIAL_DENSITY)]
    density: f64,
    #[arg(long, default_value_t = 8, value_parser = parse_connectivity)]
    connectivity: u8,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[command(flatten)]
    batch: BatchArgs,
    /// JSON augmentation spec: {"seed": .., "steps": [..]}.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the seed stored in the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Resample to WxH before augmenting.
    #[arg(long, value_parser = parse_size)]
    resize: Option<(usize, usize)>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quantile bins of scar burden per cohort.
    #[arg(long, default_value_t = scarbench::stats::DEFAULT_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct LossOptions {
    /// JSON loss configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Term weights w_dice,w_ce,w_kl.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<[f64; 3]>,
    /// Gaussian smoothing of the soft target, in pixels.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[command(flatten)]
    loss: LossOptions,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random 8x8 instances per weight configuration.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[command(flatten)]
    loss: LossOptions,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FwhmArgs {
    /// LGE slice (PGM or 8-bit PNG).
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    myocardium: PathBuf,
    /// Scar-core region; must lie inside the myocardium.
    #[arg(long)]
    roi: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = scarbench::fwhm::DEFAULT_FRACTION)]
    threshold_fraction: f64,
}

fn parse_connectivity(s: &str) -> Result<u8, String> {
    match s {
        "4" => Ok(4),
        "8" => Ok(8),
        _ => Err(format!("expected 4 or 8, got {s}")),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s}"))?;
    let parse = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("invalid size component {v:?}")),
    };
    Ok((parse(w)?, parse(h)?))
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated weights, got {s}"));
    };
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("invalid weight {v:?}: {e}"))
    };
    Ok([parse(a)?, parse(b)?, parse(c)?])
}

fn load_cases(manifest: &Path) -> CmdResult<Vec<CaseRecord>> {
    load_manifest(manifest).map_err(Failure::from_manifest)
}

fn worker_count(requested: Option<usize>) -> CmdResult<usize> {
    match requested {
        Some(0) => Err(Failure::usage(anyhow::anyhow!(
            "--workers must be at least 1"
        ))),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f(index, case)` over every case on a pool of `workers` threads. Outcomes come
/// back in manifest order; one log line per case goes to stderr. Fails
/// with exit code 4 when no case succeeds.
fn for_each_case<T, F>(
    cases: &[CaseRecord],
    workers: Option<usize>,
    f: F,
) -> CmdResult<Vec<Result<T, CaseNote>>>
where
    T: Send,
    F: Fn(usize, &CaseRecord) -> anyhow::Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers)?)
        .build()
        .map_err(Failure::internal)?;
    let results: Vec<anyhow::Result<T>> =
        pool.install(|| cases.par_iter().enumerate().map(|(i, c)| f(i, c)).collect());
    let outcomes: Vec<Result<T, CaseNote>> = cases
        .iter()
        .zip(results)
        .map(|(case, r)| match r {
            Ok(v) => {
                eprintln!("ok   {}", case.label());
                Ok(v)
            }
            Err(e) => {
                let reason = format!("{e:#}");
                eprintln!("skip {}: {reason}", case.label());
                Err(CaseNote {
                    case: case.label(),
                    reason,
                })
            }
        })
        .collect();
    if !cases.is_empty() && outcomes.iter().all(Result::is_err) {
        return Err(Failure::all_failed(cases.len()));
    }
    Ok(outcomes)
}

fn skipped_notes<T>(outcomes: &[Result<T, CaseNote>]) -> Vec<CaseNote> {
    outcomes
        .iter()
        .filter_map(|o| o.as_ref().err().cloned())
        .collect()
}

/// Parses `argv` (program name first) and runs the chosen subcommand,
/// returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests print to stdout and succeed
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Features(a) => commands::features::run(a),
        Command::Augment(a) => commands::augment::run(a),
        Command::Split(a) => commands::split::run(a),
        Command::Loss(a) => commands::loss::run(a),
        Command::Gradcheck(a) => commands::gradcheck::run(a),
        Command::Fwhm(a) => commands::fwhm::run(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
