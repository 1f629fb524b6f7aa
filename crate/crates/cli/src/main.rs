mod commands;
mod config;
mod error;
mod input;
mod output;

use clap::{Args, CommandFactory, Parser, Subcommand};
use error::{CliError, CliResult};
use output::Format;
use sphere_unif::altdist::AltFamily;
use sphere_unif::nulldist::Method;
use sphere_unif::Family;
use std::ffi::OsString;
use std::path::PathBuf;

/// Tests of uniformity on the hypersphere based on the smooth-maximum and
/// Poisson kernels.
///
/// Any long flag may also be set in a `key = value` file passed with
/// `--config FILE`; flags on the command line take precedence.
#[derive(Parser, Debug)]
#[command(name = "sphere-unif", version, args_override_self = true)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test a sample for uniformity.
    Test(TestArgs),
    /// Regenerate truncation-error and rejection-rate tables.
    Tables(TablesArgs),
    /// Power curves over a range of alternative concentrations.
    Power(PowerArgs),
    /// Draw a sample from the uniform law or an alternative.
    Sample(SampleArgs),
    /// Oracle tuning parameters for alternatives.
    Oracle(OracleArgs),
    /// Null critical values.
    Critical(CriticalArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
pub struct Calibration {
    /// How p-values and critical values are computed.
    #[arg(long, default_value = "asymp")]
    pub method: Method,
    /// Minimum number of terms of the asymptotic law.
    #[arg(long = "Ktr", default_value_t = 50)]
    pub k_tr: usize,
    /// Directory caching Monte Carlo null tables.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// Sample file: `q + 1` columns per point, or one column of angles; `-` reads standard input.
    pub input: PathBuf,
    /// Kernel family; both when absent.
    #[arg(long)]
    pub family: Option<Family>,
    /// Comma list of fixed tuning parameters (needs --family).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Parameter grid of the K-fold test, e.g. `0.01,0.1:5:0.1`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Number of folds; the K-fold test runs when this is set or --lambda is absent.
    #[arg(long = "K")]
    pub folds: Option<usize>,
    /// Expected sphere dimension.
    #[arg(long)]
    pub q: Option<u32>,
    /// Period of one-column time data.
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo null table size.
    #[arg(long = "M", default_value_t = 10_000)]
    pub draws: usize,
    #[command(flatten)]
    pub calibration: Calibration,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TablesArgs {
    /// Which table: 1 truncation errors, 2 fixed-parameter rejection rates, 3 K-fold rejection rates.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub table: u8,
    /// Restrict to one kernel family.
    #[arg(long)]
    pub family: Option<Family>,
    /// Smooth-maximum parameters [table 1: 0.1,1,5,30,60; table 2: 0.1,1,5].
    #[arg(long)]
    pub kappa: Option<String>,
    /// Poisson parameters [0.25,0.5,0.75].
    #[arg(long)]
    pub rho: Option<String>,
    /// Truncations compared in table 1 [10,50,100,1000].
    #[arg(long = "Ktr")]
    pub k_tr: Option<String>,
    /// Reference truncation of table 1.
    #[arg(long = "Kmax", default_value_t = 10_000)]
    pub k_max: usize,
    /// Dimensions [1,2,3,5].
    #[arg(long)]
    pub q: Option<String>,
    /// Sample sizes [table 2: 10,50,200; table 3: 100].
    #[arg(long)]
    pub n: Option<String>,
    /// Methods [table 2: asymp,gamma,mc; table 3: asymp,gamma].
    #[arg(long)]
    pub method: Option<String>,
    /// Fold counts of table 3 [2,4,10,20].
    #[arg(long = "K")]
    pub folds: Option<String>,
    /// Grid of the K-fold tests.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Replicates per cell [table 2: 10000; table 3: 1000].
    #[arg(long = "M")]
    pub reps: Option<usize>,
    /// Monte Carlo null table size.
    #[arg(long, default_value_t = 10_000)]
    pub mc_draws: usize,
    /// Directory caching Monte Carlo null tables.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Alternative family.
    #[arg(long)]
    pub alt: AltFamily,
    /// Comma list of concentrations.
    #[arg(long, default_value = "0,1,2,5,10,20")]
    pub kappa_dev: String,
    #[arg(long, default_value_t = 1)]
    pub q: u32,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Restrict to one kernel family.
    #[arg(long)]
    pub family: Option<Family>,
    /// Comma list of fixed tuning parameters (needs --family).
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long = "K", default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Replicates per concentration.
    #[arg(long = "M", default_value_t = 1_000)]
    pub reps: usize,
    /// Monte Carlo null table size.
    #[arg(long, default_value_t = 10_000)]
    pub mc_draws: usize,
    #[command(flatten)]
    pub calibration: Calibration,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Alternative family; uniform when absent.
    #[arg(long)]
    pub alt: Option<AltFamily>,
    #[arg(long, default_value_t = 0.0)]
    pub kappa_dev: f64,
    /// Small-circle location parameter.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub q: u32,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Comma list of alternative families [all].
    #[arg(long)]
    pub alt: Option<String>,
    #[arg(long, default_value = "1,2,5,10,15,20")]
    pub kappa_dev: String,
    #[arg(long, default_value = "1,2,3,5")]
    pub q: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long)]
    pub family: Option<Family>,
    /// Parameter grid (needs --family).
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CriticalArgs {
    #[arg(long)]
    pub family: Family,
    /// Comma list of tuning parameters.
    #[arg(long)]
    pub lambda: String,
    #[arg(long)]
    pub q: u32,
    #[arg(long)]
    pub n: usize,
    /// Comma list of levels.
    #[arg(long, default_value = "0.05")]
    pub alpha: String,
    /// Monte Carlo null table size.
    #[arg(long = "M", default_value_t = 10_000)]
    pub draws: usize,
    #[command(flatten)]
    pub calibration: Calibration,
    #[command(flatten)]
    pub common: Common,
}

fn run(args: Vec<OsString>) -> CliResult<()> {
    let args = config::expand_args(args, &Cli::command())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
                    if e.exit_code() == 0 =>
                {
                    // A closed pipe while printing help is not an error.
                    let _ = e.print();
                    Ok(())
                }
                _ => Err(CliError::Usage(e.render().to_string().trim().trim_start_matches("error: ").to_string())),
            };
        }
    };
    match cli.command {
        Command::Test(a) => commands::test(a),
        Command::Tables(a) => commands::tables(a),
        Command::Power(a) => commands::power(a),
        Command::Sample(a) => commands::sample(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Critical(a) => commands::critical(a),
    }
}

fn main() {
    if let Err(e) = run(std::env::args_os().collect()) {
        eprintln!("sphere-unif: {e}");
        std::process::exit(e.exit_code());
    }
}
