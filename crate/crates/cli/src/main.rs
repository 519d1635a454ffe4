//! `rislink`: run simulation campaigns from TOML scenario files.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ris_core::harness::{brute_force_wsr, emit_report, load_scenario_file, run_campaign, Campaign, Task};
use ris_core::scene::synthesize_channels;

#[derive(Parser)]
#[command(name = "rislink", version, about = "RIS-assisted downlink simulation campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign and write CSV reports.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// wsr, wsr_clustered, slp, slp_all, pilot, hybrid, secrecy or distributed
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Cross-check against exact enumeration where possible.
        #[arg(long)]
        oracle: bool,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Exact enumeration optimum of the scenario's first snapshot.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            task,
            trials,
            seed,
            out,
            oracle,
        } => {
            let task: Task = task.parse()?;
            let campaign = Campaign {
                scenario_path: scenario,
                task,
                trials,
                seed_base: seed,
                output_dir: out,
                oracle,
            };
            let result = run_campaign(&campaign)?;
            let paths = emit_report(&result, &campaign.output_dir)
                .with_context(|| format!("writing reports to {}", campaign.output_dir.display()))?;
            let s = &result.summary;
            println!(
                "{}: {}/{} feasible, objective mean {} (min {}, max {})",
                s.task, s.feasible, s.trials, s.mean, s.min, s.max
            );
            println!("metrics: {}", paths.metrics.display());
        }
        Command::Validate { scenario } => {
            let file = load_scenario_file(&scenario)?;
            let s = &file.scenario;
            println!(
                "ok: L={} K={} RIS={} mobility={:?}",
                s.bs_antennas,
                s.num_users(),
                s.num_ris(),
                file.mobility
            );
        }
        Command::Oracle { scenario } => {
            let file = load_scenario_file(&scenario)?;
            let ch = synthesize_channels(&file.scenario, 0)?;
            println!("{}", brute_force_wsr(&ch, &file.scenario)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
