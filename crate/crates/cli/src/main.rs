use std::path::PathBuf;
use std::process::ExitCode;

use axivort_cli::{list, run_config_file, EXIT_BOUND_FAILURE, EXIT_ERROR, EXIT_PASS, THREADS_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "axivort", version, about = "Axisymmetric vortex experiments and inequality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corpus seed (overrides `corpus_seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the registered experiments.
    List,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV}={value:?} is not a worker count"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_ENV} must be >= 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.command {
        Command::List => {
            print!("{}", list());
            EXIT_PASS
        }
        Command::Run { config, out, seed } => match configure_threads().and_then(|_| run_config_file(&config, out, seed)) {
            Ok((outcome, dir)) => {
                for check in &outcome.report.verdict.bound_checks {
                    let mark = if check.pass { "pass" } else { "FAIL" };
                    println!("{mark} {:<34} max ratio {:.6e}", check.name, check.max_ratio);
                }
                for fit in &outcome.report.verdict.fits {
                    println!("fit  {:?} beta = {:.6} (residual {:.3e})", fit.series_name, fit.beta, fit.residual);
                }
                println!("wrote {}", dir.display());
                if outcome.pass() {
                    EXIT_PASS
                } else {
                    EXIT_BOUND_FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_ERROR
            }
        },
    };
    ExitCode::from(code as u8)
}
