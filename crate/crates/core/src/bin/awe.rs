use std::path::PathBuf;
use std::process::ExitCode;

use awe_core::env::Phase;
use awe_core::harness::{
    evaluate, plot, simulate, train, write_manifest, EvaluateOptions, HarnessError, RunConfig, TrainOptions,
    WindSpec,
};
use clap::{Parser, Subcommand};

/// Pumping-cycle kite simulator and TD3 trainer.
#[derive(Parser)]
#[command(name = "awe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the phase agents in cycle order.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_phase)]
        phase: Option<Phase>,
        #[arg(long)]
        resume: bool,
        /// Stop after this many episodes of the phase; continue later with --resume.
        #[arg(long)]
        stop_after: Option<usize>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run full cycles with trained agents and report energy per phase.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// constant:<m/s>, gridded:<file>[@snapshot], synthetic:<seed>:<modes> or JSON
        #[arg(long)]
        wind: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fly a scripted control sequence.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: PathBuf,
    },
    /// Render trajectory files as SVG charts.
    Plot {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, phase, resume, stop_after, quiet } => {
            let cfg = RunConfig::load(&config)?;
            let summaries = train(&cfg, &TrainOptions { phase, resume, verbose: !quiet, stop_after })?;
            for s in summaries {
                let state = if s.finished { "done" } else { "paused" };
                println!(
                    "{} {state}: {} episodes, last-100 return {:.4}, crash rate {:.3}, energy {:.6} kWh -> {}",
                    s.phase,
                    s.episodes,
                    s.rolling_return,
                    s.rolling_crash_rate,
                    s.rolling_energy_kwh,
                    s.checkpoint.display()
                );
            }
        }
        Command::Evaluate { config, checkpoints, episodes, wind, out } => {
            let cfg = RunConfig::load(&config)?;
            let wind = wind.as_deref().map(WindSpec::parse_override).transpose()?;
            let report = evaluate(&cfg, &EvaluateOptions { checkpoints, episodes, wind, out })?;
            print!("{}", report.to_text());
        }
        Command::Simulate { config, script } => {
            let cfg = RunConfig::load(&config)?;
            let s = simulate(&cfg, &script)?;
            println!(
                "{} after {} steps ({:.1} s), energy {:.6} kWh",
                s.status, s.steps, s.duration_s, s.energy_kwh
            );
        }
        Command::Plot { trajectories, out } => {
            let files = plot(&trajectories, &out)?;
            let details = serde_json::json!({ "inputs": trajectories, "outputs": files });
            write_manifest(&out, "plot", &RunConfig::default(), details)?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
