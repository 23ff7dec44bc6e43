use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use zo_reconfig::harness::{
    demo_config, run_experiment, run_trial, summarize, write_outputs, ExperimentConfig,
    OutputFormat,
};
use zo_reconfig::oracle::ScenarioKind;

#[derive(Parser)]
#[command(
    name = "zo-reconfig",
    version,
    about = "Pilot-budgeted reconfiguration experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the bundled RIS experiment.
    DemoRis(Common),
    /// Run the bundled movable-antenna experiment.
    DemoMa(Common),
    /// Print the bundled configuration for a scenario.
    ShowConfig {
        #[arg(value_enum)]
        scenario: Scenario,
    },
    /// Dump the pilot ledger of a single method run as CSV.
    Ledger {
        #[arg(long)]
        config: PathBuf,
        /// Method label as it appears in the results.
        #[arg(long)]
        method: String,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Record per-run wall time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Ris,
    Ma,
}

impl From<Scenario> for ScenarioKind {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Ris => ScenarioKind::Ris,
            Scenario::Ma => ScenarioKind::Ma,
        }
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

fn execute(mut cfg: ExperimentConfig, common: Common) -> Result<()> {
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    cfg.record_wall_time |= common.timing;
    cfg.validate()?;
    let table = run_experiment(&cfg)?;
    let summary = summarize(&table)?;
    let format = match common.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let paths = write_outputs(&table, &summary, &common.out, format)?;

    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{:<14} {:>7} {:>12} {:>10}",
        "method", "budget", "mean_snr_db", "stderr"
    )?;
    for s in &summary {
        writeln!(
            stdout,
            "{:<14} {:>7} {:>12.3} {:>10.3}",
            s.method, s.budget, s.mean_snr_db, s.stderr_snr_db
        )?;
    }
    for p in paths {
        writeln!(stdout, "wrote {}", p.display())?;
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, common } => execute(load(&config)?, common),
        Command::DemoRis(common) => execute(demo_config(ScenarioKind::Ris), common),
        Command::DemoMa(common) => execute(demo_config(ScenarioKind::Ma), common),
        Command::ShowConfig { scenario } => {
            print!("{}", demo_config(scenario.into()).to_toml());
            Ok(())
        }
        Command::Ledger {
            config,
            method,
            budget,
            trial,
            out,
        } => {
            let cfg = load(&config)?;
            let Some(index) = cfg.methods.iter().position(|m| m.label() == method) else {
                bail!("no method labelled {method} in {}", config.display());
            };
            let run = run_trial(&cfg, index, budget, trial)?;
            let Some(ledger) = run.ledger else {
                bail!("{method} uses no pilots");
            };
            match out {
                Some(path) => {
                    let file = fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    ledger.write_csv(cfg.scenario, file)?;
                }
                None => ledger.write_csv(cfg.scenario, io::stdout().lock())?,
            }
            Ok(())
        }
    }
}
