use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use duality_lab::report::{write_report, ReportFormat};
use duality_lab::suite::{default_suite, parse_config, run_suite, CheckClass, SuiteConfig};

#[derive(Parser)]
#[command(name = "duality-lab", version, about = "Numerical checks of stochastic self-duality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Commutation relations, Casimirs, intertwining and tensor generators.
    CheckAlgebra(Opts),
    /// Generator self-duality and detailed balance on sectors.
    CheckDuality(Opts),
    /// Semigroup self-duality, including the momentum process by quadrature.
    CheckSemigroup(Opts),
    /// Bessel identities and diffusion generator duality.
    CheckContinuous(Opts),
    /// Monte Carlo duality estimates and empirical laws.
    McCheck(Opts),
    /// Every check in the suite.
    Run(Opts),
}

#[derive(Args)]
struct Opts {
    /// Suite file; the bundled suite is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config and from DUALITY_LAB_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv; defaults to json.
    #[arg(long, value_parser = parse_format)]
    format: Option<ReportFormat>,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: duality_lab::Error| e.to_string())
}

fn load(opts: &Opts) -> duality_lab::Result<SuiteConfig> {
    let mut config = match &opts.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => default_suite(),
    };
    config.resolve_seed(opts.seed)?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (opts, class) = match &cli.command {
        Command::CheckAlgebra(o) => (o, Some(CheckClass::Algebra)),
        Command::CheckDuality(o) => (o, Some(CheckClass::Duality)),
        Command::CheckSemigroup(o) => (o, Some(CheckClass::Semigroup)),
        Command::CheckContinuous(o) => (o, Some(CheckClass::Continuous)),
        Command::McCheck(o) => (o, Some(CheckClass::MonteCarlo)),
        Command::Run(o) => (o, None),
    };
    let config = match load(opts) {
        Ok(c) => match class {
            Some(class) => c.filter_class(class),
            None => c,
        },
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    log::info!("running {} checks with seed {}", config.checks.len(), config.seed);
    let reports = run_suite(&config);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", reports.len() - failed);

    let out = opts.out.clone().or(config.output_path.clone());
    if let Some(path) = out {
        let format = opts.format.or(config.format).unwrap_or_default();
        if let Err(e) = write_report(&reports, &path, format) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
