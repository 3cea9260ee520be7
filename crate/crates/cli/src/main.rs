//! `lfqkd`: key rates, tolerable-error curves and detection simulations.

mod config;
mod render;

use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lfqkd::sim::{compare_to_analytic, empirical_stats, BatchSummary};
use lfqkd::threshold::{sweep_curve, ThresholdError};
use lfqkd::{key_rate, run_trials, AdversaryStrategy};

use config::{Format, Options};
use render::RateReport;

#[derive(Debug, Parser)]
#[command(name = "lfqkd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form key rate of one source model.
    Rate(Options),
    /// Largest tolerable detection error over a transmittance grid.
    Threshold(Options),
    /// Monte Carlo detection statistics, optionally under attack.
    Simulate(Options),
    /// Simulate an honest channel and check it against the closed form.
    Compare(Options),
}

/// A failed command together with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: String) -> Self {
        Failure { code: 2, message }
    }

    fn other(message: String) -> Self {
        Failure { code: 1, message }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Rate(o) => rate(o.resolve()?),
        Command::Threshold(o) => threshold(o.resolve()?),
        Command::Simulate(o) => simulate(o.resolve()?),
        Command::Compare(o) => compare(o.resolve()?),
    }
}

fn rate(opts: Options) -> Result<(), Failure> {
    let model = opts.source_model(true)?;
    let breakdown = key_rate(&model).map_err(|e| Failure::invalid(e.to_string()))?;
    let report = RateReport {
        model: model.tag(),
        operational_rate: breakdown.operational_rate(),
        breakdown,
    };
    let text = match opts.format.unwrap_or(Format::Json) {
        Format::Json => render::json(&report),
        Format::Csv => render::rate_csv(&report),
    };
    emit(opts.out.as_deref(), &text)
}

fn threshold(opts: Options) -> Result<(), Failure> {
    let grid = opts.grid()?;
    let tol = opts.tolerance()?;
    let curves = opts
        .curve_families()?
        .into_iter()
        .map(|family| sweep_curve(family, grid, tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            ThresholdError::EmptyCurve(_) => Failure {
                code: 3,
                message: e.to_string(),
            },
            ThresholdError::InvalidGrid(_)
            | ThresholdError::InvalidTransmittance(_)
            | ThresholdError::Rate(_) => Failure::invalid(e.to_string()),
            _ => Failure::other(e.to_string()),
        })?;
    let as_json = opts.format.unwrap_or(Format::Csv) == Format::Json;
    emit(opts.out.as_deref(), &render::curves(&curves, as_json))
}

fn simulate(opts: Options) -> Result<(), Failure> {
    let model = opts.source_model(false)?;
    let adversary = opts.adversary()?;
    let batch = run_trials(&model, adversary, opts.n_pulses()?, opts.seed())
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let summary = BatchSummary::from_batch(&batch);
    let text = match opts.format.unwrap_or(Format::Json) {
        Format::Json => render::json(&summary),
        Format::Csv => render::summary_csv(&summary),
    };
    emit(opts.out.as_deref(), &text)?;
    degenerate_check(batch.n_single())
}

fn compare(opts: Options) -> Result<(), Failure> {
    let model = opts.source_model(false)?;
    if opts.adversary()? != AdversaryStrategy::None {
        return Err(Failure::invalid(
            "compare only accepts --adversary none".to_string(),
        ));
    }
    let batch = run_trials(
        &model,
        AdversaryStrategy::None,
        opts.n_pulses()?,
        opts.seed(),
    )
    .map_err(|e| Failure::invalid(e.to_string()))?;
    if empirical_stats(&batch).degenerate {
        return degenerate_check(0);
    }
    let report = compare_to_analytic(&model, &batch).map_err(|e| Failure::other(e.to_string()))?;
    let text = match opts.format.unwrap_or(Format::Json) {
        Format::Json => render::json(&report),
        Format::Csv => render::comparison_csv(&report),
    };
    emit(opts.out.as_deref(), &text)
}

fn degenerate_check(n_single: u64) -> Result<(), Failure> {
    if n_single == 0 {
        return Err(Failure {
            code: 4,
            message: "simulation produced no single clicks; the error rate is undefined"
                .to_string(),
        });
    }
    Ok(())
}

/// Writes to `out` atomically (temp file in the same directory, then
/// rename), or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let io_err = |e: std::io::Error| Failure::other(e.to_string());
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io_err)?;
            stdout.flush().map_err(io_err)
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
            tmp.write_all(text.as_bytes()).map_err(io_err)?;
            tmp.as_file().sync_all().map_err(io_err)?;
            tmp.persist(path).map_err(|e| io_err(e.error))?;
            Ok(())
        }
    }
}
