mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Map};

use config::{Format, ScenarioConfig};
use error::{CliError, CliResult};

const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(name = "lmsz", version, about = "Two-qutrit Landau-Majorana-Stuckelberg-Zener simulations")]
struct Cli {
    /// TOML scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, directory, or `-` for stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Default output directory when `--out` is absent.
    #[arg(long, env = "LMSZ_OUT_DIR", hide = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Asymptotic transition probabilities over a beta grid.
    LmszProbs,
    /// Time series of populations, norm, <K> and negativity.
    Evolve,
    /// Asymptotic negativity against beta, with located maxima.
    NegativitySweep,
    /// Monte Carlo ensemble under white field noise.
    Noise,
    /// Analytic-vs-numeric cross-check battery.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::LmszProbs => "lmsz-probs",
            Command::Evolve => "evolve",
            Command::NegativitySweep => "negativity-sweep",
            Command::Noise => "noise",
            Command::Validate => "validate",
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let default_format = match cli.command {
        Command::Validate => Format::Json,
        _ => Format::Csv,
    };
    let format = cli.format.or(cfg.format).unwrap_or(default_format);

    let mut failure = None;
    let artifact = match cli.command {
        Command::LmszProbs => commands::lmsz_probs(&cfg)?,
        Command::Evolve => commands::evolve(&cfg)?,
        Command::NegativitySweep => commands::negativity_sweep(&cfg)?,
        Command::Noise => commands::noise(&cfg, seed)?,
        Command::Validate => {
            let (art, report) = commands::validate(&cfg, seed)?;
            if !report.all_passed {
                let names: Vec<String> = report.failures().map(|c| format!("{} ({}): {}", c.id, c.name, c.detail)).collect();
                failure = Some(CliError::Validation(names.join("; ")));
            }
            art
        }
    };

    let path = output::resolve_path(cli.out.as_deref(), cli.out_dir.as_deref(), cli.command.name(), format);
    let mut meta = Map::new();
    meta.insert("command".into(), json!(cli.command.name()));
    meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    meta.insert("config".into(), json!(cli.config.as_ref().map(|p| p.display().to_string())));
    meta.insert("seed".into(), json!(seed));
    meta.insert("threads".into(), json!(rayon::current_num_threads()));
    meta.insert("started_unix_s".into(), json!(started));
    meta.insert("elapsed_s".into(), json!(clock.elapsed().as_secs_f64()));
    let files = output::write(&artifact, path.as_deref(), format, meta)?;
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    failure.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmsz {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
