use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cogroute_cli::{calibrate, commands, exit, figures, CliError, Config, Output};

#[derive(Parser)]
#[command(
    name = "cogroute",
    version,
    about = "Route discovery analysis for multi-hop cognitive cellular networks"
)]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `monte_carlo.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `monte_carlo.episodes`.
    #[arg(long, global = true)]
    episodes: Option<u64>,
    /// Directory receiving the CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form route report for the configuration.
    Analyze,
    /// Monte Carlo estimate compared with the closed form.
    Mc,
    /// Switching time, channel counts and purchase for the QoS request.
    Plan,
    /// Closed-form reports along the configured sweep axis.
    Sweep,
    /// Data behind one evaluation figure: fig3 .. fig10.
    Reproduce { figure: String },
    /// Fit the primary rate scale to fig4-90pct-4ch or fig5-wstar-ladder.
    Calibrate { target: String },
}

fn figure_number(name: &str) -> Result<u32, CliError> {
    name.strip_prefix("fig")
        .and_then(|n| n.parse().ok())
        .filter(|n| (3..=10).contains(n))
        .ok_or_else(|| CliError::Config(format!("unknown figure `{name}`; use fig3 .. fig10")))
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.monte_carlo.seed = seed;
    }
    if let Some(episodes) = cli.episodes {
        config.monte_carlo.episodes = episodes;
    }
    config.validate()?;
    match &cli.command {
        Command::Analyze => commands::analyze(&config),
        Command::Mc => commands::mc(&config),
        Command::Plan => commands::plan(&config),
        Command::Sweep => commands::sweep(&config),
        Command::Reproduce { figure } => figures::reproduce(&config, figure_number(figure)?),
        Command::Calibrate { target } => calibrate::run(&config, target),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        let paths = out.write(&cli.out)?;
        Ok((out, paths))
    });
    match result {
        Ok((out, paths)) => {
            for line in &out.summary {
                println!("{line}");
            }
            for path in paths {
                println!("wrote {}", path.display());
            }
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
