use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wildstable::collision::InjectedFault;
use wildstable_cli::config::{build_model, ExperimentConfig};
use wildstable_cli::{Artifacts, CacheSource, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "wildstable",
    version,
    about = "Stable laws of inelastic Kac-type collision dynamics"
)]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the stable exponent of the configured model.
    SolveAlpha,
    /// Evolve the initial law by the tree or particle route.
    Simulate {
        /// Fixed-point cache written by `stationary` instead of building one.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Build and export a fixed-point cache.
    Stationary,
    /// Tail, CF and isotropy statistics of a samples file.
    Diagnose {
        /// CSV written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// Tail exponent; defaults to the model exponent.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Reduced acceptance run.
    Selfcheck {
        #[arg(long, hide = true, value_enum, default_value = "none")]
        inject_fault: FaultArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    DeltaSignFlip,
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(artifacts: &Artifacts, dir: Option<&Path>) -> CliResult<()> {
    match dir {
        Some(dir) => {
            for path in artifacts.write_to(dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            // Without a directory only the JSON documents go to stdout.
            for (name, bytes) in &artifacts.files {
                if name.ends_with(".json") {
                    print!("{}", String::from_utf8_lossy(bytes));
                }
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<bool> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = load_config(cli)?;
    let dir = cfg.output.dir.clone();
    match &cli.command {
        Command::SolveAlpha => emit(&wildstable_cli::solve_alpha(&cfg)?, dir.as_deref())?,
        Command::Simulate { cache } => {
            let source = cache
                .as_deref()
                .map_or(CacheSource::Build, CacheSource::File);
            if dir.is_none() {
                return Err(CliError::Config(
                    "simulate writes several files; pass --out or set output.dir".into(),
                ));
            }
            let artifacts = wildstable_cli::simulate(&cfg, source)?;
            emit(&artifacts, dir.as_deref())?;
        }
        Command::Stationary => {
            if dir.is_none() {
                return Err(CliError::Config(
                    "stationary writes a cache file; pass --out or set output.dir".into(),
                ));
            }
            let artifacts = wildstable_cli::stationary(&cfg)?;
            emit(&artifacts, dir.as_deref())?;
        }
        Command::Diagnose { input, alpha } => {
            let alpha = match alpha {
                Some(a) => *a,
                None => build_model(&cfg.model)?.spectral.alpha,
            };
            emit(
                &wildstable_cli::diagnose(input, alpha, cfg.run.rho_grid.clone())?,
                dir.as_deref(),
            )?;
        }
        Command::Selfcheck { inject_fault } => {
            let fault = match inject_fault {
                FaultArg::None => InjectedFault::None,
                FaultArg::DeltaSignFlip => InjectedFault::DeltaSignFlip,
            };
            let check = wildstable_cli::selfcheck(cfg.run.seed, fault, |line| println!("{line}"))?;
            if let Some(dir) = dir.as_deref() {
                emit(&check.artifacts, Some(dir))?;
            }
            if !check.failed.is_empty() {
                eprintln!("failing criteria: {}", check.failed.join(", "));
            }
            if !check.passed() {
                eprintln!("unexpected failures: {}", check.unexpected().join(", "));
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
