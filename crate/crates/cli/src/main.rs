mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "isoprofile", version, about = "Model isoperimetric profiles, needle decompositions and comparison harnesses")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Global {
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, env = "ISOPROFILE_OUTPUT_DIR", default_value = "out")]
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Flat `key = value` file with defaults for any option.
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Model profile I_{K,N,D} on an equispaced v-grid.
    ModelProfile(commands::ModelProfileArgs),
    /// Isoperimetric profile of a 1-D density.
    Iso1d(commands::Iso1dArgs),
    /// Finite metric measure spaces.
    #[command(subcommand)]
    Mms(MmsCommand),
    /// L1 optimal transport.
    #[command(subcommand)]
    L1ot(L1otCommand),
    /// Needle decomposition.
    #[command(subcommand)]
    Needles(NeedlesCommand),
    /// Comparison and rigidity harnesses.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Subcommand, Debug)]
pub enum MmsCommand {
    /// Generate an interval, sphere or suspension space.
    Gen(commands::MmsGenArgs),
}

#[derive(Subcommand, Debug)]
pub enum L1otCommand {
    /// Kantorovich potential and plan for a zero-mean function.
    Solve(commands::L1otArgs),
}

#[derive(Subcommand, Debug)]
pub enum NeedlesCommand {
    /// Decompose a space along the transport rays of a function.
    Run(commands::NeedlesArgs),
}

#[derive(Subcommand, Debug)]
pub enum VerifyCommand {
    /// Candidate-set upper estimate of the profile against the model.
    Compare(commands::CompareArgs),
    /// Needle lower bound for the boundary measure of a set.
    NeedleBound(commands::NeedleBoundArgs),
    /// Cap optimality in a spherical suspension.
    Rigidity(commands::RigidityArgs),
    /// Gap between the finite- and infinite-diameter model profiles.
    DiamGap(commands::DiamGapArgs),
    /// Model profile along the δ-family.
    DeltaCont(commands::DeltaContArgs),
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return e.exit();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    isoprofile::parallel::set_threads(cli.global.threads);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit()
        }
    }
}
