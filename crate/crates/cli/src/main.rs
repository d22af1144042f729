use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use eabeam::harness::{self, PRESETS};
use eabeam::network::ScenarioFamily;

#[derive(Parser)]
#[command(name = "eabeam", version, about = "Seeded Monte-Carlo sweeps of coordinated beamforming schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its CSV.
    Simulate {
        /// Sweep description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; overrides `output_path`. Stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per core).
        #[arg(long, env = "EABEAM_PARALLEL")]
        parallel: Option<usize>,
    },
    /// Built-in scenario presets.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List scenario families and their presets.
    List,
    /// Print a preset as a config file.
    Show { preset: String },
}

fn simulate(config: PathBuf, output: Option<PathBuf>, seed: Option<u64>, parallel: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(&config).with_context(|| format!("cannot read {}", config.display()))?;
    let mut cfg = harness::parse_config(&text).with_context(|| format!("invalid config {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.base_seed = seed;
    }
    if let Some(output) = output {
        cfg.output_path = Some(output);
    }
    cfg.validate()?;
    log::info!(
        "{}: {} algorithms x {} SNR points x {} trials",
        cfg.name,
        cfg.algorithms.len(),
        cfg.snr_grid_db.len(),
        cfg.trials
    );
    let result = match parallel {
        Some(0) => bail!("--parallel must be at least 1"),
        Some(workers) => harness::run_sweep_with_workers(&cfg, workers)?,
        None => harness::run_sweep(&cfg)?,
    };
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} runs failed; their rows carry NaN values");
    }
    match &cfg.output_path {
        Some(path) => harness::emit_csv(&result, path).with_context(|| format!("cannot write {}", path.display()))?,
        None => harness::write_csv(&result, io::stdout().lock())?,
    }
    Ok(())
}

fn list() -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{:<12} {:<7} description", "family", "preset")?;
    for (family, name) in ScenarioFamily::ALL.iter().zip(PRESETS) {
        let cfg = harness::preset(name)?;
        let s = &cfg.scenario;
        let detail = match family {
            ScenarioFamily::Symmetric => format!("SIR {} dB on every link", s.sir_db[0]),
            ScenarioFamily::AsymNoise => format!(
                "link {} has {} dB more noise, SIR {} dB",
                s.victim_link + 1,
                s.delta_noise_db,
                s.sir_db[0]
            ),
            ScenarioFamily::AsymSir => format!(
                "link {} has {} dB more noise, SIRs {:?} dB",
                s.victim_link + 1,
                s.delta_noise_db,
                s.sir_db
            ),
            ScenarioFamily::WeakDirect => {
                format!("link {} direct gain {} dB weaker, equal noise", s.victim_link + 1, s.delta_direct_db)
            }
        };
        writeln!(
            out,
            "{:<12} {:<7} [{},{},{}] {detail}",
            family.name(),
            name,
            s.n_links,
            s.n_tx_ant,
            s.n_rx_ant
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            config,
            output,
            seed,
            parallel,
        } => simulate(config, output, seed, parallel),
        Command::Scenario { action } => match action {
            ScenarioAction::List => list(),
            ScenarioAction::Show { preset } => {
                harness::preset(&preset).map(|cfg| print!("{}", cfg.to_toml())).map_err(Into::into)
            }
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
