//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::engine::{run_simulation, ScenarioConfig, SimulationError, SimulationOutput, TransactionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Run an auction-forwarding scenario and write its reports.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "auction-sim", version)]
pub struct Options {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of rounds.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Suppress the summary line.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("{path}: {message}")]
    Scenario { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            CliError::Usage(_) => 1,
            CliError::Scenario { .. } | CliError::Simulation(SimulationError::Config(_)) => 2,
            CliError::Io { .. } | CliError::Simulation(SimulationError::Ledger(_)) => 3,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }
}

/// Parses flags, without the program name.
pub fn parse_args<I, T>(args: I) -> Result<Options, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("auction-sim")).chain(args.into_iter().map(Into::into));
    Ok(Options::try_parse_from(argv)?)
}

pub fn parse_scenario(path: &Path, text: &str) -> Result<ScenarioConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let message = if field == "." { e.into_inner().to_string() } else { format!("{field}: {}", e.into_inner()) };
        CliError::Scenario { path: path.to_owned(), message }
    })?;
    config.validate().map_err(|e| CliError::Scenario { path: path.to_owned(), message: e.to_string() })?;
    Ok(config)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(path, &text)
}

/// Applies `--seed` and `--rounds`.
pub fn apply_overrides(mut config: ScenarioConfig, options: &Options) -> ScenarioConfig {
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(rounds) = options.rounds {
        config.rounds = rounds;
    }
    config
}

pub fn write_transactions_csv<W: Write>(records: &[TransactionRecord], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["transactionId", "tick", "origin", "dest", "outcome", "failedAt", "hopsUsed", "chain"])?;
    for r in records {
        let chain = r.chain.links.iter().map(|l| l.node.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            r.transaction_id.0.to_string(),
            r.tick.to_string(),
            r.origin.to_string(),
            r.dest.to_string(),
            r.outcome.label().to_string(),
            r.outcome.failed_at().map(|n| n.to_string()).unwrap_or_default(),
            r.hops_used.to_string(),
            chain,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn write_file<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Writes `metrics`, `ledger.csv` and `transactions` into `options.out`.
/// Returns the paths written.
pub fn emit_report(output: &SimulationOutput, options: &Options) -> Result<Vec<PathBuf>, CliError> {
    let dir = &options.out;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let ext = options.format.extension();
    let metrics = dir.join(format!("metrics.{ext}"));
    let ledger = dir.join("ledger.csv");
    let transactions = dir.join(format!("transactions.{ext}"));

    write_file(&metrics, |w| match options.format {
        Format::Csv => output.report.write_csv(w).map_err(csv_to_io),
        Format::Json => serde_json::to_writer_pretty(&mut *w, &output.report).map_err(io::Error::from),
    })?;
    write_file(&ledger, |w| output.ledger.write_csv(w).map_err(|e| io::Error::other(e.to_string())))?;
    write_file(&transactions, |w| match options.format {
        Format::Csv => write_transactions_csv(&output.records, w).map_err(csv_to_io),
        Format::Json => serde_json::to_writer_pretty(&mut *w, &output.records).map_err(io::Error::from),
    })?;
    Ok(vec![metrics, ledger, transactions])
}

pub fn execute(options: &Options) -> Result<SimulationOutput, CliError> {
    let config = apply_overrides(load_scenario(&options.scenario)?, options);
    let output = run_simulation(config)?;
    emit_report(&output, options)?;
    Ok(output)
}

/// Full entry point. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let options = match parse_args(args) {
        Ok(o) => o,
        Err(e) => {
            let code = e.exit_code();
            if let CliError::Usage(clap) = &e {
                let _ = clap.print();
            }
            return code;
        }
    };
    match execute(&options) {
        Ok(output) => {
            if !options.quiet {
                let g = &output.report.global;
                println!(
                    "{} transactions, {} delivered (ratio {:.4}), reports in {}",
                    g.total_transactions,
                    g.delivered,
                    g.delivery_ratio,
                    options.out.display()
                );
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
