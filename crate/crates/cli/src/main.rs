//! `dtlab`: batch front end for the DT-operator experiments.
//!
//! Every subcommand takes `--seed` (required), `--out DIR` and
//! `--threads N`, plus an optional `--config FILE` of `key = value` lines
//! using the long flag names. Flags given on the command line win over the
//! file. Exit status: 0 when all checks pass, 1 when a check fails, 2 for
//! configuration errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dtlab", version, about = "Free entropy dimension experiments for DT-operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Common {
    /// Seed for every random stream of the run.
    #[arg(long)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Cap on worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// File of `key = value` lines supplying defaults for the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a DT matrix and write entries, eigenvalues and *-moments.
    ///
    /// Files: matrix.csv (row,col,re,im; nonzero entries), eigenvalues.csv
    /// (re,im), moments.json.
    #[command(args_override_self = true)]
    Sample(commands::SampleArgs),
    /// Perturbed microstate and both Brown-measure estimators.
    ///
    /// Files: eigenvalues.csv (re,im), density.csv (x,y,density) with
    /// density.json, radial_cdf.csv (t,empirical,disk), verdict.json.
    #[command(args_override_self = true)]
    Brown(commands::BrownArgs),
    /// Estimates of log E_eps for a point sequence.
    ///
    /// Files: estimates.json (records log_value, std_error, kind, n, eps,
    /// delta).
    #[command(args_override_self = true)]
    Eeps(commands::EepsArgs),
    /// Selberg box integrals and the gamma-product rate over an n grid.
    ///
    /// Files: selberg.csv (n,log_box_integral,gamma_product_rate,gap,identity_residual).
    #[command(args_override_self = true)]
    Selberg(commands::SelbergArgs),
    /// Packing lower-bound scan over an eps grid.
    ///
    /// Files: scan.csv (eps,delta,bigN,k,f_lb_norm,const_term,delta_hat),
    /// summary.txt.
    #[command(args_override_self = true)]
    Scan(commands::ScanArgs),
    /// (m, gamma)-*-freeness check of a sampled family.
    ///
    /// Files: freeness.json.
    #[command(args_override_self = true)]
    Freeness(commands::FreenessArgs),
}

/// Outcome of a run that got as far as computing something.
pub enum Verdict {
    Pass,
    Fail(String),
}

/// Failure classes, mapped onto exit codes 1 and 2.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl From<dtlab::Error> for Failure {
    fn from(e: dtlab::Error) -> Self {
        match e {
            dtlab::Error::Convergence { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    let argv = match output::merge_config_file(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Sample(a) => commands::run(&a.common.clone(), "sample", a, commands::sample),
        Command::Brown(a) => commands::run(&a.common.clone(), "brown", a, commands::brown),
        Command::Eeps(a) => commands::run(&a.common.clone(), "eeps", a, commands::eeps),
        Command::Selberg(a) => commands::run(&a.common.clone(), "selberg", a, commands::selberg),
        Command::Scan(a) => commands::run(&a.common.clone(), "scan", a, commands::scan),
        Command::Freeness(a) => commands::run(&a.common.clone(), "freeness", a, commands::freeness),
    };
    match result {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(why)) => {
            eprintln!("check failed: {why}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
