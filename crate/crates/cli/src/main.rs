use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;

use commands::Ctx;
use report::CliError;

/// Traveling fronts of a delayed reaction-diffusion equation: speeds,
/// profiles, bounds and simulations.
#[derive(Debug, Parser)]
#[command(name = "sdwave", version)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// print the JSON report instead of text
    #[arg(long, global = true)]
    json: bool,
    /// output file (or directory, for `envelope`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads for `sweep`
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// add wall-clock timings to the report (makes it nondeterministic)
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical speed, roots and kernel rates
    Speed {
        /// speeds for the roots table (repeatable)
        #[arg(long = "c")]
        c: Vec<f64>,
    },
    /// Solve for a wave profile and write `xi,phi`
    Profile {
        #[arg(long = "c", conflicts_with = "critical")]
        c: Option<f64>,
        /// solve just above the critical speed
        #[arg(long)]
        critical: bool,
    },
    /// Re-check residual and set membership of a stored profile
    Verify {
        #[arg(long)]
        profile: PathBuf,
        /// speed, if no sidecar JSON is present
        #[arg(long = "c")]
        c: Option<f64>,
    },
    /// Envelope equilibria and closed-form bounds
    Envelope {
        #[arg(long = "c")]
        c: Vec<f64>,
    },
    /// Simulate the equation from the `[pde]` setup
    Simulate {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit the front speed of a stored run
    Frontspeed {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        window: f64,
    },
    /// Simulate the fixed-delay comparison system
    Compare {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Speed, profile and simulation over a parameter grid
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Speed { .. } => "speed",
            Command::Profile { .. } => "profile",
            Command::Verify { .. } => "verify",
            Command::Envelope { .. } => "envelope",
            Command::Simulate { .. } => "simulate",
            Command::Frontspeed { .. } => "frontspeed",
            Command::Compare { .. } => "compare",
            Command::Sweep => "sweep",
        }
    }
}

fn execute(cli: &Cli) -> Result<report::Report, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    let loaded = config::load(cli.config.as_deref())?;
    let ctx = Ctx { loaded, out: cli.out.clone() };
    match &cli.command {
        Command::Speed { c } => commands::speed(&ctx, c),
        Command::Profile { c, critical } => commands::profile(&ctx, *c, *critical),
        Command::Verify { profile, c } => commands::verify(&ctx, profile, *c),
        Command::Envelope { c } => commands::envelope(&ctx, c),
        Command::Simulate { out_dir } => commands::simulate(&ctx, out_dir.as_deref()),
        Command::Frontspeed { run, level, window } => commands::frontspeed(&ctx, run, *level, *window),
        Command::Compare { out_dir } => commands::compare(&ctx, out_dir.as_deref()),
        Command::Sweep => commands::sweep(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    match execute(&cli) {
        Ok(mut report) => {
            if cli.timings {
                report.timings = Some(start.elapsed().as_secs_f64());
            }
            if cli.json {
                print!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            ExitCode::from(commands::exit_code(cli.command.name(), &report) as u8)
        }
        Err(e) => {
            eprintln!("sdwave {}: {e}", cli.command.name());
            ExitCode::from(e.code as u8)
        }
    }
}
