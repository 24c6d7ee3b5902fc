//! Command-line front end: run one analysis or a whole report over a built-in
//! scenario, print a pass/fail summary, and optionally write the JSON report
//! and a per-cell margin CSV.
//!
//! Exit codes: 0 everything passed, 1 at least one analysis failed,
//! 2 configuration error, 3 output/runtime error.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skewflow::{run_report, AnalysisKind, CellRecord, ConfigDocument, ReportDocument};

#[derive(Parser)]
#[command(name = "skewflow", version, about = "Verification and rate estimation for skew-product evolution systems", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the evolution-family structural laws on the sweep grid.
    Axioms(RunArgs),
    /// Check projector algebra and evolution compatibility in all regimes.
    Compat(RunArgs),
    /// Verify the scenario's exponential bounds cell by cell.
    Verify(RunArgs),
    /// Estimate rate constants from sweep data, then re-verify them.
    Estimate(RunArgs),
    /// Check the envelope-function characterization and its round trip.
    PhiCheck(RunArgs),
    /// Check the integral characterizations and derive constants from them.
    Integrals(RunArgs),
    /// Refute a uniform rate across the example3 member family.
    FalsifyGlobal(RunArgs),
    /// Run the configured set of analyses and assemble the full report.
    Report(RunArgs),
}

impl Command {
    fn analysis(&self) -> Option<AnalysisKind> {
        match self {
            Command::Axioms(_) => Some(AnalysisKind::Axioms),
            Command::Compat(_) => Some(AnalysisKind::Compat),
            Command::Verify(_) => Some(AnalysisKind::Verify),
            Command::Estimate(_) => Some(AnalysisKind::Estimate),
            Command::PhiCheck(_) => Some(AnalysisKind::PhiCheck),
            Command::Integrals(_) => Some(AnalysisKind::Integrals),
            Command::FalsifyGlobal(_) => Some(AnalysisKind::FalsifyGlobal),
            Command::Report(_) => None,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Axioms(a)
            | Command::Compat(a)
            | Command::Verify(a)
            | Command::Estimate(a)
            | Command::PhiCheck(a)
            | Command::Integrals(a)
            | Command::FalsifyGlobal(a)
            | Command::Report(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Built-in scenario: example1, example2, or example3.
    #[arg(long)]
    scenario: Option<String>,

    /// Sweep grid density: small, default, or dense.
    #[arg(long)]
    grid_preset: Option<String>,

    /// Margin tolerance for verification sweeps.
    #[arg(long)]
    tol: Option<f64>,

    /// Seed for the random probe directions.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the JSON report to this path (atomically).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write per-cell verification margins to this CSV path (atomically).
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum CliError {
    /// The analyses never ran: bad flags, bad file, bad scenario.
    Config(String),
    /// The analyses ran but their results could not be delivered.
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(msg)) => {
            eprintln!("skewflow: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("skewflow: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let args = cli.command.args();
    let config = build_config(cli.command.analysis(), args)?;
    let (report, records) =
        run_report(&config, args.csv.is_some()).map_err(|e| CliError::Config(e.to_string()))?;

    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.csv {
        write_atomic(path, margins_csv(&records).as_bytes())
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    }

    print_summary(&report, args);
    Ok(report.overall_pass)
}

fn build_config(analysis: Option<AnalysisKind>, args: &RunArgs) -> Result<ConfigDocument, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("cannot parse config {}: {e}", path.display()))
            })?
        }
        None => ConfigDocument::default(),
    };
    if let Some(s) = &args.scenario {
        config.scenario = s.clone();
    }
    if let Some(p) = &args.grid_preset {
        config.grid_preset = Some(p.clone());
        config.grid = None;
    }
    if let Some(t) = args.tol {
        config.tol = t;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(kind) = analysis {
        config.analyses = Some(vec![kind]);
    }
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

fn print_summary(report: &ReportDocument, args: &RunArgs) {
    println!("scenario {}  seed {}  tol {:e}", report.scenario, report.seed, report.tolerance);
    for (name, section) in &report.sections {
        let pass = section.get("pass").and_then(|v| v.as_bool()).unwrap_or(false);
        let status = if pass { "PASS" } else { "FAIL" };
        match section.get("error").and_then(|v| v.as_str()) {
            Some(err) => println!("  {name}: {status} ({err})"),
            None => println!("  {name}: {status}"),
        }
    }
    println!("overall: {}", if report.overall_pass { "PASS" } else { "FAIL" });
    if let Some(path) = &args.out {
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.csv {
        println!("margins written to {}", path.display());
    }
}

fn margins_csv(records: &[CellRecord]) -> String {
    let mut csv = String::from("t,s,t0,probe,label,log_margin\n");
    for r in records {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.t, r.s, r.t0, r.probe, r.label, r.log_margin);
    }
    csv
}

/// Write through a same-directory temporary file and rename, so a crash never
/// leaves a half-written report behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}
