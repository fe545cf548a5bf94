//! Command-line front end: scenario loading, density and TV emission,
//! region reports, sampling and the validation suite.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "maskcfg", version, about = "Exact guided dynamics of masked discrete diffusion")]
pub struct Cli {
    /// Scenario JSON file, or `builtin:<name>`.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use the brute-force oracle instead of the closed forms.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Cross-check results against the oracle; exit 3 on disagreement.
    #[arg(long, global = true)]
    pub validate: bool,
    /// Smaller corpora and sample sizes.
    #[arg(long, global = true)]
    pub quick: bool,
    /// Corrupt the 2D coefficients (negative control).
    #[arg(long, global = true)]
    pub inject_fault: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    TauLeaping,
    ExactEvent,
    Uniformization,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Densities over the scenario grid, with terminal-law plots.
    Evolve,
    /// TV to the terminal law over the grid, plus the decay fit.
    TvCurve {
        /// Time at which TV is plotted against w; defaults to the grid
        /// point nearest T/2.
        #[arg(long)]
        t0: Option<f64>,
    },
    /// Region decomposition and large-guidance limit of a 2D scenario.
    Regions,
    /// Draw terminal samples.
    Sample {
        #[arg(long, value_enum, default_value = "exact-event")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Tau-leaping steps.
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Guidance strength; defaults to the first scenario value.
        #[arg(long)]
        w: Option<f64>,
        /// Also run tau-leaping with this many steps and report the gap.
        #[arg(long)]
        compare_steps: Option<usize>,
    },
    /// Run the acceptance suite.
    Validate,
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Validate => commands::validate(cli),
        cmd => {
            let config = cli
                .config
                .as_deref()
                .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
            let scenario = scenario::Scenario::load(config)?;
            std::fs::create_dir_all(&cli.out)?;
            match cmd {
                Command::Evolve => commands::evolve(cli, &scenario),
                Command::TvCurve { t0 } => commands::tv_curve(cli, &scenario, *t0),
                Command::Regions => commands::regions(cli, &scenario),
                Command::Sample {
                    scheme,
                    n,
                    steps,
                    w,
                    compare_steps,
                } => commands::sample(
                    cli,
                    &scenario,
                    &commands::SampleArgs {
                        scheme: *scheme,
                        n: *n,
                        steps: *steps,
                        w: *w,
                        compare_steps: *compare_steps,
                    },
                ),
                Command::Validate => unreachable!(),
            }
        }
    }
}
