use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heatbound::config::Config;
use heatbound::pipeline::{Session, STAGES};
use heatbound::report::{write_stage, write_summary};
use heatbound::{Error, Execution};

#[derive(Parser)]
#[command(name = "heatbound", version, about = "Lyapunov certificates, super-Poincare profiles and heat kernel bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the drift hypothesis on a grid
    Hypothesis(Common),
    /// Certify the Lyapunov condition
    Lyapunov(Common),
    /// Weighted super-Poincare profile against the empirical b*(s)
    Spi(Common),
    /// Spectral heat kernel and envelope checks
    Kernel(Common),
    /// Monte Carlo density comparison
    Mc(Common),
    /// Every configured stage plus summary.json
    All(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// bundled config: ou, subexp_alpha3, cauchy_a1, heat_baseline
    #[arg(long)]
    preset: Option<String>,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// multiplies every slack tolerance
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// disable the parallel loops
    #[arg(long)]
    sequential: bool,
}

fn load(c: &Common) -> Result<Config, Error> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(vec![format!("--config {}: {e}", path.display())]))?;
            Config::from_toml(&text)?
        }
        (None, Some(name)) => Config::preset(name)?,
        (None, None) => return Err(Error::Config(vec!["one of --config or --preset is required".into()])),
    };
    if !(c.tol_scale > 0.0 && c.tol_scale.is_finite()) {
        return Err(Error::Config(vec![format!("--tol-scale: must be > 0, got {}", c.tol_scale)]));
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, stages): (&Common, Vec<&str>) = match &cli.command {
        Command::Hypothesis(c) => (c, vec!["hypothesis"]),
        Command::Lyapunov(c) => (c, vec!["lyapunov"]),
        Command::Spi(c) => (c, vec!["spi"]),
        Command::Kernel(c) => (c, vec!["kernel"]),
        Command::Mc(c) => (c, vec!["mc"]),
        Command::All(c) => (c, STAGES.to_vec()),
    };
    let all = matches!(cli.command, Command::All(_));
    let cfg = match load(common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let session = Session::new(cfg, common.tol_scale);
    let mut reports = Vec::new();
    for stage in stages {
        if all && !session.configured(stage) {
            continue;
        }
        let report = match session.run(stage) {
            Ok(r) => r,
            Err(e @ Error::Config(_)) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            Err(e) => {
                eprintln!("{stage}: {e}");
                return ExitCode::from(1);
            }
        };
        match write_stage(&common.out, &session, &report) {
            Ok(path) => println!("{:<10} {}  {}", stage, if report.pass() { "PASS" } else { "FAIL" }, path.display()),
            Err(e) => {
                eprintln!("{stage}: {e}");
                return ExitCode::from(1);
            }
        }
        for (name, ok) in &report.checks {
            if !ok {
                println!("  failed check: {name}");
            }
        }
        reports.push(report);
    }
    if all {
        if let Err(e) = write_summary(&common.out, &session, &reports) {
            eprintln!("summary: {e}");
            return ExitCode::from(1);
        }
    }
    if reports.iter().all(|r| r.pass()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
