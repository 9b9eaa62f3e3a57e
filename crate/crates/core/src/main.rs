use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use conflict_eeg::pipeline::{run, Command, Config};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Stage {
    Simulate,
    Synth,
    Preprocess,
    Erp,
    Behavior,
    Report,
    All,
}

impl From<Stage> for Command {
    fn from(s: Stage) -> Self {
        match s {
            Stage::Simulate => Command::Simulate,
            Stage::Synth => Command::Synth,
            Stage::Preprocess => Command::Preprocess,
            Stage::Erp => Command::Erp,
            Stage::Behavior => Command::Behavior,
            Stage::Report => Command::Report,
            Stage::All => Command::All,
        }
    }
}

/// Simulated VR selection experiments with synthetic EEG, FRN analysis and
/// completion-time analysis.
#[derive(Debug, Parser)]
#[command(name = "conflict-eeg", version)]
struct Cli {
    /// Pipeline stage to run.
    #[arg(value_enum)]
    stage: Stage,

    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Output directory shared by all stages.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Participants per cohort (defaults: 16 behavior, 10 ERP).
    #[arg(long)]
    participants: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let mut cfg = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(n) = cli.participants {
            cfg = cfg.with_participants(n);
        }
        run(cli.stage.into(), &cfg, cli.seed, &cli.out)
    })();
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("conflict-eeg {}: {e}", Command::from(cli.stage));
            ExitCode::FAILURE
        }
    }
}
