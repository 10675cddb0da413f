//! Command-line front end for the investment-reinsurance optimizer.

mod commands;
mod config;
mod fmt;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Against, CommandOutput, SweepAxis};
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "reinopt",
    about = "Optimal investment-reinsurance strategies for capital-guaranteed products",
    version
)]
struct Cli {
    #[command(flatten)]
    params: ParamArgs,

    /// Configuration file with `key = value` lines (`#` comments).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// CSV output path (the machine-readable mirror of the report).
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Model and simulation parameters; defaults are the calibrated base case.
#[derive(Args)]
struct ParamArgs {
    /// Risk-free rate (per year).
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Drift of the investable fund.
    #[arg(long, global = true)]
    mu1: Option<f64>,
    /// Drift of the reinsurable fund.
    #[arg(long, global = true)]
    mu2: Option<f64>,
    /// Volatility of the investable fund.
    #[arg(long, global = true)]
    sigma1: Option<f64>,
    /// Volatility of the reinsurable fund.
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    /// Correlation between the funds.
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Client's initial endowment.
    #[arg(long, global = true)]
    v0: Option<f64>,
    /// Investment horizon in years.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    /// Terminal capital guarantee.
    #[arg(long = "G", global = true)]
    guarantee: Option<f64>,
    /// Shortfall probability bound of the guarantee.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// CRRA exponent (b < 1, b != 0).
    #[arg(long, global = true)]
    b: Option<f64>,
    /// Constant-mix weight of the reinsurable benchmark.
    #[arg(long = "pi-b", global = true)]
    pi_b: Option<f64>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Rebalancing steps per path.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgainstArg {
    Dn,
    Cn,
}

impl From<AgainstArg> for Against {
    fn from(a: AgainstArg) -> Self {
        match a {
            AgainstArg::Dn => Against::Dn,
            AgainstArg::Cn => Against::Cn,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the base case and print the optimal positions.
    Report,
    /// Wealth-equivalent utility loss against a reference strategy.
    Weul {
        #[arg(long, value_enum)]
        against: AgainstArg,
    },
    /// Guarantee-equivalent utility gain against a reference strategy.
    Geug {
        #[arg(long, value_enum)]
        against: AgainstArg,
    },
    /// Proportion of expected loss coverage (Monte Carlo).
    Pelc,
    /// Risk-return profiles of the optimal and reference strategies.
    Profile,
    /// Sensitivity sweep over one model parameter.
    Sweep {
        /// Axis: b, epsilon, pi-b, r, T or G.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values (defaults to the studied grid).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        /// Also compute wealth-equivalent losses vs both references.
        #[arg(long)]
        weul: bool,
        /// Also compute guarantee-equivalent gains vs both references.
        #[arg(long)]
        geug: bool,
    },
}

fn overrides(p: &ParamArgs, out: Option<PathBuf>) -> Overrides {
    Overrides {
        rate: p.r,
        mu1: p.mu1,
        mu2: p.mu2,
        sigma1: p.sigma1,
        sigma2: p.sigma2,
        rho: p.rho,
        v0: p.v0,
        horizon: p.horizon,
        guarantee: p.guarantee,
        epsilon: p.epsilon,
        crra: p.b,
        pi_b: p.pi_b,
        paths: p.paths,
        steps: p.steps,
        seed: p.seed,
        out,
    }
}

fn execute(cfg: &RunConfig, command: &Command) -> Result<CommandOutput, String> {
    match command {
        Command::Report => commands::report(cfg),
        Command::Weul { against } => commands::welfare_loss(cfg, (*against).into()),
        Command::Geug { against } => commands::guarantee_gain(cfg, (*against).into()),
        Command::Pelc => commands::loss_coverage(cfg),
        Command::Profile => commands::risk_profile(cfg),
        Command::Sweep {
            axis,
            grid,
            weul,
            geug,
        } => {
            let axis = SweepAxis::parse(axis)?;
            commands::sweep(cfg, axis, grid.clone(), *weul, *geug)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config::resolve(cli.config.as_deref(), &overrides(&cli.params, cli.out)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg, &cli.command) {
        Ok(output) => {
            print!("{}", output.human);
            if let Some(csv) = &output.csv {
                match &cfg.out {
                    Some(path) => {
                        if let Err(e) = std::fs::write(path, csv) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return ExitCode::FAILURE;
                        }
                    }
                    // A sweep without an output path streams its CSV.
                    None => {
                        if matches!(cli.command, Command::Sweep { .. }) {
                            print!("{csv}");
                        }
                    }
                }
            }
            if output.errors > 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
