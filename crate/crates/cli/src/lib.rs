//! Library half of the `pcause` command-line tool.
//!
//! [`run`] executes a parsed [`Cli`] against arbitrary readers and writers so
//! that commands can be driven in-process; the binary only maps the result to
//! an exit status.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

pub mod commands;
mod error;
pub mod input;
pub mod oracle_check;

pub use commands::Which;
pub use error::CliError;
pub use oracle_check::{oracle_check, OracleCheckConfig};

#[derive(Debug, Parser)]
#[command(
    name = "pcause",
    version,
    about = "Bounds on probabilities of causation and the expected value of an observational study"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the result to PATH instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Round emitted results to N decimals (default: full precision). Echoed
    /// settings such as tolerances are left as given.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(0..=17))]
    pub round: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PNS bounds from experimental data, plus PNS/PN/PS bounds when
    /// observational data are given.
    Bounds(BoundsArgs),
    /// Expected tightening of the PNS bounds from an observational study.
    Improve(ImproveArgs),
    /// Benefit-function bounds and their expected tightening.
    UnitSelect(BoundsArgs),
    /// Expected tightening over a grid of experimental results, as CSV.
    Sweep(SweepArgs),
    /// Check the closed forms against simulation and random populations.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum InputFormat {
    /// CSV if the input path ends in `.csv`, otherwise JSON.
    #[default]
    Auto,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Study data; read from stdin when omitted.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Slack allowed when checking the observational data against the
    /// experimental data.
    #[arg(long, value_name = "X", default_value_t = pcause::INPUT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ImproveArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Both expectations must exceed X for the improvement to be called
    /// non-minor.
    #[arg(long, value_name = "X", default_value_t = 0.05)]
    pub advisory_threshold: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid points per axis.
    #[arg(long, value_name = "R", default_value_t = 99)]
    pub resolution: usize,

    #[arg(long, value_enum, default_value_t = Which::Both)]
    pub which: Which,

    /// Include 0 and 1 on both axes.
    #[arg(long)]
    pub closed: bool,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[arg(long, value_name = "T", default_value_t = 100)]
    pub trials: usize,

    /// Monte Carlo draws per expectation.
    #[arg(long, value_name = "N", default_value_t = 1_000_000)]
    pub samples: usize,

    #[arg(long, value_name = "S", default_value_t = 7)]
    pub seed: u64,
}

/// Decimal rounding through the formatter, so 0.125 with two places gives
/// the same answer as printing it would.
pub fn round_f64(v: f64, places: Option<u32>) -> f64 {
    match places {
        Some(n) if v.is_finite() => format!("{v:.*}", n as usize).parse().unwrap_or(v),
        _ => v,
    }
}

/// Echoed settings; rounding them would misreport what was used.
const UNROUNDED_KEYS: [&str; 4] = ["tolerance", "lp_tolerance", "advisory_threshold", "z_limit"];

fn round_json(v: &mut Value, places: u32) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::json!(round_f64(x, Some(places)));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_json(x, places)),
        Value::Object(map) => map
            .iter_mut()
            .filter(|(k, _)| !UNROUNDED_KEYS.contains(&k.as_str()))
            .for_each(|(_, x)| round_json(x, places)),
        _ => {}
    }
}

fn render(mut v: Value, round: Option<u32>) -> String {
    if let Some(n) = round {
        round_json(&mut v, n);
    }
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn read_study(args: &InputArgs, stdin: &mut dyn Read) -> Result<input::Study, CliError> {
    let mut text = String::new();
    let read = match &args.input {
        Some(path) => fs::File::open(path).and_then(|mut f| f.read_to_string(&mut text)),
        None => stdin.read_to_string(&mut text),
    };
    read.map_err(|e| {
        let source = args
            .input
            .as_deref()
            .map_or("stdin".to_string(), |p| p.display().to_string());
        CliError::Usage(format!("cannot read {source}: {e}"))
    })?;
    let csv = match args.format {
        InputFormat::Csv => true,
        InputFormat::Json => false,
        InputFormat::Auto => args
            .input
            .as_deref()
            .and_then(Path::extension)
            .is_some_and(|ext| ext.eq_ignore_ascii_case("csv")),
    };
    if csv {
        input::parse_csv(&text)
    } else {
        input::parse_json(&text)
    }
}

fn emit(body: &str, output: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (result, path) = match output {
        Some(path) => (fs::write(path, body), path.to_path_buf()),
        None => (
            stdout.write_all(body.as_bytes()).and_then(|()| stdout.flush()),
            PathBuf::from("-"),
        ),
    };
    // A reader that stopped early (`| head`) is not a failure.
    if matches!(&result, Err(e) if output.is_none() && e.kind() == std::io::ErrorKind::BrokenPipe) {
        return Ok(());
    }
    result.map_err(|e| CliError::Output {
        path,
        message: e.to_string(),
    })
}

/// Executes one command, writing its result to `--output` or `stdout`.
pub fn run(cli: &Cli, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<(), CliError> {
    let output = cli.output.as_deref();
    let body = match &cli.command {
        Command::Bounds(a) => render(commands::bounds(&read_study(&a.input, stdin)?, a.tolerance)?, cli.round),
        Command::Improve(a) => render(
            commands::improve(&read_study(&a.input, stdin)?, a.advisory_threshold)?,
            cli.round,
        ),
        Command::UnitSelect(a) => render(
            commands::unit_select(&read_study(&a.input, stdin)?, a.tolerance)?,
            cli.round,
        ),
        Command::Sweep(a) => commands::sweep(a.resolution, a.which, a.closed, cli.round)?,
        Command::OracleCheck(a) => {
            let cfg = OracleCheckConfig {
                trials: a.trials,
                samples: a.samples,
                seed: a.seed,
            };
            match oracle_check(&cfg) {
                Ok(summary) => render(summary, cli.round),
                Err(CliError::OracleFailed(summary)) => {
                    emit(&render(summary.clone(), cli.round), output, stdout)?;
                    return Err(CliError::OracleFailed(summary));
                }
                Err(e) => return Err(e),
            }
        }
    };
    emit(&body, output, stdout)
}
