//! Command-line driver for the instance forge.
//!
//! Five subcommands cover the artifact lifecycle: `generate` draws planted or
//! null datasets, `verify` audits a constructed family (and optionally a
//! dataset sampled from it), `decode` runs the grid list-decoder, `test`
//! runs repeated regression-to-testing trials, and `rerun` replays any of
//! the above from its recorded run manifest.
//!
//! Every command that writes a primary output also writes a sibling
//! `<out>.run.json` manifest holding the exact argument vector, so outputs
//! can be regenerated bit-for-bit later. All randomness flows from `--seed`;
//! nothing reads the system entropy pool. Exit codes are fixed for
//! scripting: 0 success, 1 I/O or argument trouble, 2 an infeasible
//! construction, 3 a failed verification invariant, 4 a decoder limit
//! (dataset too small or candidate grid too coarse).

mod decode;
mod generate;
mod trials;
mod verify;

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sqforge_core::decoder::DecoderError;
use sqforge_core::instance::InstanceError;
use sqforge_core::moment_match::MomentMatchError;
use sqforge_core::testing::TestingError;

#[derive(Debug, Parser)]
#[command(
    name = "sqforge",
    version,
    about = "Construct, audit, and decode moment-matched regression instances",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a planted or null dataset and write it with its manifest.
    Generate(generate::GenerateArgs),
    /// Audit a family construction, or a dataset together with its family.
    Verify(verify::VerifyArgs),
    /// Run the grid list-decoder on a dataset.
    Decode(decode::DecodeArgs),
    /// Run repeated null-vs-planted testing trials through a decoder.
    Test(trials::TestArgs),
    /// Replay a previous invocation from its `.run.json` manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
struct RerunArgs {
    /// A `.run.json` manifest written by a previous invocation.
    #[arg(long)]
    manifest: PathBuf,
}

/// A command failure carrying the scripted exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn moment_code(err: &MomentMatchError) -> u8 {
    match err {
        MomentMatchError::Infeasible { .. }
        | MomentMatchError::NumericalRankFailure { .. }
        | MomentMatchError::InvalidDistribution(_) => 2,
        MomentMatchError::CertificateViolation { .. } => 3,
    }
}

impl From<MomentMatchError> for Failure {
    fn from(err: MomentMatchError) -> Self {
        Failure::new(moment_code(&err), err.to_string())
    }
}

impl From<InstanceError> for Failure {
    fn from(err: InstanceError) -> Self {
        let code = match &err {
            InstanceError::MomentMatch(inner) => moment_code(inner),
            _ => 1,
        };
        Failure::new(code, err.to_string())
    }
}

impl From<DecoderError> for Failure {
    fn from(err: DecoderError) -> Self {
        let code = match &err {
            DecoderError::DatasetTooSmall { .. } | DecoderError::GridTooCoarse { .. } => 4,
            DecoderError::InvalidInput(_) => 1,
        };
        Failure::new(code, err.to_string())
    }
}

impl From<TestingError> for Failure {
    fn from(err: TestingError) -> Self {
        match err {
            TestingError::Instance(inner) => inner.into(),
            TestingError::Decoder(inner) => inner.into(),
            TestingError::AllTrialsFailed { .. } => Failure::new(4, err.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::new(1, err.to_string())
    }
}

/// Replayable record of one invocation, written as single-line JSON next to
/// the command's primary output (`<out>.run.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// The argument vector exactly as given (program name excluded).
    pub argv: Vec<String>,
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: &[String], seed: u64) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            argv: argv.to_vec(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }
}

/// Read a dataset, prefixing failures with the path (the parser's own
/// errors carry only line context).
pub fn read_dataset(path: &Path) -> Result<sqforge_core::instance::LabeledDataset, Failure> {
    sqforge_core::instance::LabeledDataset::read_from(path).map_err(|err| {
        let failure: Failure = err.into();
        Failure::new(
            failure.code,
            format!("{}: {}", path.display(), failure.message),
        )
    })
}

/// `<out>.run.json` for a primary output path.
pub fn run_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".run.json");
    PathBuf::from(name)
}

/// Serialize the manifest next to its primary output.
pub fn write_run_manifest(primary_out: &Path, manifest: &RunManifest) -> Result<(), Failure> {
    let path = run_manifest_path(primary_out);
    let json = serde_json::to_string(manifest)
        .map_err(|e| Failure::new(1, format!("run manifest serialization: {e}")))?;
    fs::write(&path, json + "\n")?;
    Ok(())
}

fn init_thread_pool() {
    if let Ok(raw) = env::var("SQFORGE_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(k) if k >= 1 => {
                // Errors only if a global pool exists, which it cannot here.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => eprintln!("warning: ignoring SQFORGE_THREADS={raw:?} (want a positive integer)"),
        }
    }
}

fn parse_cli(argv: &[String]) -> Result<Cli, Failure> {
    let full = std::iter::once("sqforge".to_string()).chain(argv.iter().cloned());
    match Cli::try_parse_from(full) {
        Ok(cli) => Ok(cli),
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code)
        }
    }
}

fn dispatch(argv: &[String]) -> Result<(), Failure> {
    let cli = parse_cli(argv)?;
    match cli.command {
        Command::Generate(args) => generate::run(&args, argv),
        Command::Verify(args) => verify::run(&args, argv),
        Command::Decode(args) => decode::run(&args, argv),
        Command::Test(args) => trials::run(&args, argv),
        Command::Rerun(args) => rerun(&args),
    }
}

fn rerun(args: &RerunArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Failure::new(1, format!("bad run manifest: {e}")))?;
    if manifest.subcommand == "rerun" {
        return Err(Failure::new(1, "refusing to replay a rerun manifest"));
    }
    eprintln!(
        "replaying `{}` from {}",
        manifest.subcommand,
        args.manifest.display()
    );
    dispatch(&manifest.argv)
}

fn main() -> ExitCode {
    init_thread_pool();
    let argv: Vec<String> = env::args().skip(1).collect();
    match dispatch(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
