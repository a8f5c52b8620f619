mod commands;
mod config;
mod error;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{FactorArgs, PhantomArgs};
use config::Overrides;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "ppp", version, about = "Preconditioned proximal point experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Record every N-th iteration in traces.
    #[arg(long, global = true)]
    stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run PPP and its reduced form side by side on a configured problem.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate spectral radius and norm of the two-lines operator.
    Spectrum {
        /// Angles, e.g. `0,pi/4,pi/2`.
        #[arg(long, value_delimiter = ',', default_value = "0,pi/2")]
        theta: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        tau: Vec<f64>,
    },
    /// Factor the primal-dual preconditioner.
    Factor {
        /// Coupling matrix as `a,b;c,d`.
        #[arg(long, allow_hyphen_values = true)]
        matrix: Option<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// cholesky, sqrt_sym, sqrt_polar or scalar_2x2.
        #[arg(long, default_value = "cholesky")]
        route: String,
    },
    /// Tomographic reconstruction with a zero-border prior.
    Phantom {
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value_t = 18)]
        angles: usize,
        #[arg(long, default_value_t = 24)]
        rays: usize,
    },
    /// Run a named invariant suite (or `all`).
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Run { config } => {
            let overrides = Overrides {
                seed: cli.seed,
                iters: cli.iters,
                lambda: cli.lambda,
                eps: cli.eps,
                stride: cli.stride,
            };
            commands::run(config, &out_dir, &overrides)
        }
        Command::Spectrum { theta, tau } => commands::spectrum(theta, tau, cli.out.as_deref()),
        Command::Factor { matrix, rows, cols, norm, sigma, tau, route } => commands::factor(
            &FactorArgs {
                matrix: matrix.as_deref(),
                rows: *rows,
                cols: *cols,
                norm: *norm,
                sigma: *sigma,
                tau: *tau,
                route,
                seed,
            },
            cli.out.as_deref(),
        ),
        Command::Phantom { grid, angles, rays } => commands::phantom(
            &PhantomArgs {
                grid: *grid,
                angles: *angles,
                rays: *rays,
                iters: cli.iters.unwrap_or(20_000),
                lambda: cli.lambda.unwrap_or(1.0),
                stride: cli.stride.unwrap_or(100),
                seed,
            },
            &out_dir,
        ),
        Command::Verify { suite } => verify::verify(suite, seed),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
