use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use zombie_lending::aggregator::Weight;
use zombie_lending::classifier::ZombieDefinition;
use zombie_lending::pipeline::{emit_figures, exit_code, run_stages, run_synth, RunConfig, Stage};
use zombie_lending::Result;

#[derive(Parser)]
#[command(
    name = "zombie",
    version,
    about = "Zombie-firm classification and zombie-credit pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` lines under `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Zombie definition: broad, narrow_x or nar.
    #[arg(long, global = true)]
    definition: Option<ZombieDefinition>,
    /// Share weight: face or count.
    #[arg(long, global = true)]
    weight: Option<Weight>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a contiguous list of stages (default: all, or `[run] stages`).
    Run {
        #[arg(long)]
        stages: Option<String>,
    },
    Ingest,
    Derive,
    Tfp,
    Classify,
    Aggregate,
    Estimate,
    Report,
    /// Write synthetic inputs and a truth manifest into the input directory.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write figure-data CSVs from classification and aggregation artifacts.
    Figures,
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = cli.common.definition {
        cfg.definition = d;
    }
    if let Some(w) = cli.common.weight {
        cfg.weight = w;
    }
    let one = |s: Stage| vec![s];
    let stages = match cli.command {
        Command::Run { stages } => match stages {
            Some(s) => Stage::parse_list(&s)?,
            None => cfg.stages.clone(),
        },
        Command::Ingest => one(Stage::Ingest),
        Command::Derive => one(Stage::Derive),
        Command::Tfp => one(Stage::Tfp),
        Command::Classify => one(Stage::Classify),
        Command::Aggregate => one(Stage::Aggregate),
        Command::Estimate => one(Stage::Estimate),
        Command::Report => one(Stage::Report),
        Command::Synth { seed } => {
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            for p in run_synth(&cfg)? {
                println!("{}", p.display());
            }
            return Ok(());
        }
        Command::Figures => {
            for p in emit_figures(&cfg)? {
                println!("{}", p.display());
            }
            return Ok(());
        }
    };
    for log in run_stages(&cfg, &stages)? {
        for p in &log.artifacts {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
