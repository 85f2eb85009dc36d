//! `holostring`: batch front end for the exact engines.
//!
//! Every subcommand writes one report (JSON by default, CSV on request) and
//! exits 0 when all of its identities hold, 1 when one fails, 2 on bad input.

mod commands;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CliError, Report};

#[derive(Parser, Debug)]
#[command(name = "holostring", version, about = "Exact checks for the holomorphic bosonic string")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output format; JSON is canonical, CSV is a flat projection.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Output file. Defaults to `<subcommand>.<ext>` in the output directory,
    /// or stdout when no directory is configured.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, env = "HOLOSTRING_OUT_DIR", global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Central charges of the free systems.
    CentralCharge {
        #[arg(long, default_value_t = 13)]
        dimv: usize,
        #[arg(long, default_value = "0..3", value_parser = parse_range)]
        n_range: RangeInclusive<i64>,
    },
    /// Q² table over a weight window, then BRST cohomology dimensions.
    Brst(commands::BrstArgs),
    /// Gerstenhaber axiom defects on BRST cohomology.
    Gerstenhaber(commands::GerstenhaberArgs),
    /// Gelfand-Fuks cohomology and the weight-zero deformation complex.
    Gf(commands::GfArgs),
    /// One-loop wheel table and the obstruction coefficient.
    Anomaly {
        #[arg(long, default_value_t = 13)]
        dimv: u64,
        #[arg(long, default_value = "0..3", value_parser = parse_range)]
        n_range: RangeInclusive<i64>,
    },
    /// Determinant-line Chern classes and global observables.
    Grr {
        #[arg(long, default_value_t = 13)]
        dimv: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        genus: Vec<u64>,
        #[arg(long, default_value = "0..3", value_parser = parse_range)]
        n_range: RangeInclusive<i64>,
    },
    /// Cross-module identities: the ratio -13 and the 6n²+6n+1 family.
    Consistency {
        #[arg(long, default_value = "0..3", value_parser = parse_range)]
        n_range: RangeInclusive<i64>,
    },
}

/// `a..b` or `a..=b`, both inclusive, or a single integer.
pub fn parse_range(s: &str) -> Result<RangeInclusive<i64>, String> {
    let bad = || format!("expected a range like 0..3, got {s:?}");
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: i64 = a.trim().parse().map_err(|_| bad())?;
    let b: i64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CentralCharge { .. } => "central-charge",
            Command::Brst(_) => "brst",
            Command::Gerstenhaber(_) => "gerstenhaber",
            Command::Gf(_) => "gf",
            Command::Anomaly { .. } => "anomaly",
            Command::Grr { .. } => "grr",
            Command::Consistency { .. } => "consistency",
        }
    }

    fn run(&self) -> Result<Report, CliError> {
        match self {
            Command::CentralCharge { dimv, n_range } => commands::central_charge(*dimv, n_range.clone()),
            Command::Brst(a) => commands::brst(a),
            Command::Gerstenhaber(a) => commands::gerstenhaber(a),
            Command::Gf(a) => commands::gf(a),
            Command::Anomaly { dimv, n_range } => commands::anomaly(*dimv, n_range.clone()),
            Command::Grr { dimv, genus, n_range } => commands::grr(*dimv, genus, n_range.clone()),
            Command::Consistency { n_range } => commands::consistency(n_range.clone()),
        }
    }
}

fn render(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(&report.json)? + "\n"),
        Format::Csv => {
            let mut header: Vec<&str> = vec!["table"];
            let mut seen: BTreeSet<&str> = BTreeSet::from(["table"]);
            for row in &report.rows {
                for k in row.keys() {
                    if seen.insert(k) {
                        header.push(k);
                    }
                }
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)?;
            for row in &report.rows {
                w.write_record(header.iter().map(|k| row.get(*k).map(String::as_str).unwrap_or("")))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), CliError> {
    let text = render(report, cli.output.format)?;
    let ext = match cli.output.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let path = match (&cli.output.out, &cli.output.out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => {
            fs::create_dir_all(d)?;
            Some(d.join(format!("{}.{ext}", cli.command.name())))
        }
        (None, None) => None,
    };
    match path {
        Some(p) => {
            fs::write(&p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.command.run().and_then(|r| emit(&cli, &r).map(|_| r));
    match result {
        Ok(report) => {
            eprintln!("{}: {}", if report.passed { "PASS" } else { "FAIL" }, report.summary);
            ExitCode::from(if report.passed { 0 } else { 1 })
        }
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
