//! `diagsim`: generate, convert, multiply and simulate diagonal matrices.
//!
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 verification failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diagsim_core::dataflow::FeedConfig;
use diagsim_core::Error as CoreError;

/// Bad arguments or configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A result did not match its reference.
#[derive(Debug)]
pub struct Verify(pub String);

impl fmt::Display for Verify {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Verify {}

#[derive(Parser, Debug)]
#[command(name = "diagsim", version, about = "Diagonal SpMSpM accelerator model")]
pub struct Cli {
    /// key=value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the random generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a benchmark Hamiltonian or a random diagonal matrix.
    Gen(GenArgs),
    /// Rewrite a matrix in another file format.
    Convert(ConvertArgs),
    /// Multiply two matrices with the diagonal kernel.
    Matmul(MatmulArgs),
    /// Run one product through the accelerator model.
    Simulate(SimulateArgs),
    /// Truncated Taylor expansion of exp(-iHt).
    Expm(ExpmArgs),
    /// Render a JSON report as CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// tfim, heisenberg, maxcut-ising or random.
    pub model: String,
    /// Qubits, or the dimension for `random`.
    pub size: usize,
    /// Model parameter, e.g. `-p j=0.5 -p periodic=true`.
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Diagonals in a random matrix.
    #[arg(long, default_value_t = 5)]
    pub diags: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// binary, json or mtx; defaults to the output extension.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug)]
pub struct MatmulArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Compare against a dense product (N <= 1024).
    #[arg(long)]
    pub check: bool,
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct AccelArgs {
    /// Grid as RxC, or a single side for a square grid.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub grid_rows: Option<usize>,
    #[arg(long)]
    pub grid_cols: Option<usize>,
    /// Feed orders, e.g. `a=asc,b=desc`.
    #[arg(long)]
    pub feed: Option<FeedConfig>,
    /// Interleaved lanes for single-diagonal jobs.
    #[arg(long)]
    pub lanes: Option<usize>,
    /// Diagonals per A group (default: grid columns).
    #[arg(long)]
    pub a_group: Option<usize>,
    /// Diagonals per B group (default: grid rows).
    #[arg(long)]
    pub b_group: Option<usize>,
    /// Row/column window cuts, comma separated, or `none`.
    #[arg(long)]
    pub cuts: Option<String>,
    #[arg(long)]
    pub cache_sets: Option<usize>,
    #[arg(long)]
    pub cache_ways: Option<usize>,
    #[arg(long)]
    pub hit_cycles: Option<u64>,
    #[arg(long)]
    pub miss_penalty: Option<u64>,
    #[arg(long)]
    pub dram_cycles: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[command(flatten)]
    pub accel: AccelArgs,
    /// Report path (JSON); stdout if omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-cycle events as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Block plan as JSON.
    #[arg(long)]
    pub plan_dump: Option<PathBuf>,
    /// Write the product matrix.
    #[arg(long)]
    pub product: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExpmArgs {
    /// Hamiltonian file; alternatively use --model and --qubits.
    pub input: Option<PathBuf>,
    #[arg(long, conflicts_with = "input", requires = "qubits")]
    pub model: Option<String>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(short = 'p', long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Evolution time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Fixed number of products; otherwise chosen from --eps.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Truncation tolerance on the one-norm remainder bound.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Split t into this many steps and multiply the results.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Skip the cycle model.
    #[arg(long)]
    pub functional_only: bool,
    #[command(flatten)]
    pub accel: AccelArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the propagator.
    #[arg(long)]
    pub product: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Emit the one-row summary even when iterations are present.
    #[arg(long)]
    pub summary: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    if err.downcast_ref::<Verify>().is_some() {
        return 3;
    }
    match err.downcast_ref::<CoreError>() {
        Some(
            CoreError::UnknownModel(_)
            | CoreError::QubitCap { .. }
            | CoreError::Domain(_)
            | CoreError::Plan(_)
            | CoreError::GridCapacity { .. },
        ) => 1,
        Some(CoreError::Livelock { .. } | CoreError::FifoOverwrite { .. }) => 3,
        _ => 2,
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
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
