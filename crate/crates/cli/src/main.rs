mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use starmm::{AllocMode, MmError, SemiringId};

/// Exit statuses.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "starmm", version, about = "Fork-join matrix multiplication: run, benchmark, analyze, simulate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply random matrices with one algorithm and check against the oracle.
    Run(RunArgs),
    /// Time algorithms and write a CSV of medians and speedups.
    Bench(BenchArgs),
    /// Evaluate the cost recurrences over a grid.
    Analyze(AnalyzeArgs),
    /// Replay a serial memory trace through LRU caches.
    Simulate(SimulateArgs),
    /// Run a self-check suite.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    #[arg(long, default_value = "int")]
    pub semiring: SemiringId,
    /// Base-case dimension.
    #[arg(long, default_value_t = 32)]
    pub b: usize,
    /// Workers; `STAR_MM_THREADS` takes precedence when set.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Allocation mode for co3 and strassen.
    #[arg(long, default_value = "pooled")]
    pub mode: AllocMode,
}

impl Common {
    pub fn workers(&self) -> Result<usize, MmError> {
        if let Ok(v) = std::env::var("STAR_MM_THREADS") {
            return v
                .trim()
                .parse()
                .ok()
                .filter(|&p| p > 0)
                .ok_or_else(|| MmError::InvalidConfig(format!("STAR_MM_THREADS=`{v}` is not a positive integer")));
        }
        Ok(self.p.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
    }
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated algorithm ids.
    #[arg(long, value_delimiter = ',', default_value = "co2,co3,tar,sar,star")]
    pub algo: Vec<String>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[command(flatten)]
    pub common: Common,
    /// Timed repetitions after one warmup; at least 5.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_delimiter = ',', default_value = "co2,co3,tar,sar,star")]
    pub algo: Vec<String>,
    /// Powers of two: a list `4,8,16` or a range `4..64`.
    #[arg(long, default_value = "64..1024")]
    pub n: String,
    #[arg(long, default_value_t = 1)]
    pub b: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub p: Vec<usize>,
    /// Cache sizes in elements.
    #[arg(long = "M", value_delimiter = ',', default_value = "32768")]
    pub m: Vec<usize>,
    /// Line size in elements.
    #[arg(long = "B", default_value_t = 8)]
    pub line: usize,
    /// Write CSV here instead of printing a table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub b: usize,
    #[arg(long = "M", value_delimiter = ',', default_value = "4096,16384,65536")]
    pub m: Vec<usize>,
    #[arg(long = "B", default_value_t = 8)]
    pub line: usize,
    #[arg(long, default_value = "pooled")]
    pub mode: AllocMode,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also dump the raw trace (9 bytes per access) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// correctness, pool, space, span, cache, busy-leaves, cache-bound, throughput or all.
    #[arg(default_value = "all")]
    pub suite: String,
    /// Workers for the correctness suite.
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Make the throughput check gating.
    #[arg(long)]
    pub strict: bool,
    /// Negative control: run with a pool that never reuses blocks.
    #[arg(long, hide = true)]
    pub sabotage_pool: bool,
    /// Write the JSON report here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<MmError> for Failure {
    fn from(e: MmError) -> Self {
        let code = match e {
            MmError::AllocFailure(_) | MmError::InternalError(_) => EXIT_IO,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Bench(a) => bench::bench(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Verify(a) => commands::verify(&a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
