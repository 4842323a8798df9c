mod commands;
mod config;
mod error;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use bergmann2d::Settings;
use clap::error::ErrorKind;
use clap::{Args, Parser};

use config::{Command, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bergmann2d",
    version,
    about = "Low-frequency scattering by 2D strips, gratings and coated slabs"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    /// Run a saved JSON configuration instead of a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Relative change allowed when refining the angular quadrature.
    #[arg(long, global = true)]
    tol_quad: Option<f64>,
    /// Relative discrepancy allowed between independent routes.
    #[arg(long, global = true)]
    tol_oracle: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for `selftest`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn resolve(cli: Cli) -> Result<(RunConfig, bool), CliError> {
    let mut config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::ConfigInvalid(
                "--config cannot be combined with a subcommand".into(),
            ))
        }
        (Some(path), None) => RunConfig::load(&path)?,
        (None, Some(command)) => RunConfig {
            settings: Settings::default(),
            threads: None,
            seed: 0,
            command,
        },
        (None, None) => {
            return Err(CliError::ConfigInvalid(
                "a subcommand or --config is required".into(),
            ))
        }
    };
    let g = cli.global;
    if let Some(t) = g.tol_quad {
        config.settings.f2_tol = t;
    }
    if let Some(t) = g.tol_oracle {
        config.settings.oracle_tol = t;
    }
    config.threads = g.threads.or(config.threads);
    config.seed = g.seed.unwrap_or(config.seed);
    config.validate()?;
    Ok((config, cli.print_config))
}

fn run(config: &RunConfig) -> Result<(), CliError> {
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    }
    let s = &config.settings;
    match &config.command {
        Command::Amplitude(a) => commands::amplitude(a, s),
        Command::Oracle(a) => commands::oracle(a, s),
        Command::Grating(a) => commands::grating(a),
        Command::Cloak(a) => commands::cloak(a, s),
        Command::Figures(a) => commands::figures(a),
        Command::Selftest(a) => selftest::run(a, config.seed, s),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.report());
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BERGMANN2D_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(CliError::ConfigInvalid(
                e.render().to_string().trim().to_string(),
            ))
        }
    };
    let (config, print_only) = match resolve(cli) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if print_only {
        println!("{}", config.to_json());
        return ExitCode::SUCCESS;
    }
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
