// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use edgesim::scenario::{load_scenario, parse_set};
use edgesim::sim::{export, run};
use edgesim::{summarize, RunOverrides};

#[derive(Parser)]
#[command(name = "edgesim", version, about = "Deterministic edge-robotics testbed simulator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Recompute the run summary from exported CSV traces.
    Summarize {
        dir: PathBuf,
        #[arg(long, default_value_t = 15.0)]
        target_ms: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name or path to a TOML file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    tick_ms: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Enable only these plug-ins (repeatable).
    #[arg(long = "plugin")]
    plugins: Vec<String>,
    /// Override a scenario field, e.g. `--set nodes.cloud1.proc_delay_ms=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn run_scenario(args: RunArgs) -> Result<()> {
    let scenario = args
        .scenario
        .context("--scenario is required (bundled: okpi.corridor, dlt.federation)")?;
    let sets = args
        .sets
        .iter()
        .map(|s| parse_set(s))
        .collect::<Result<Vec<_>, _>>()?;
    let config = load_scenario(&scenario, &sets)?;
    let overrides = RunOverrides {
        seed: args.seed,
        duration_s: args.duration,
        tick_ms: args.tick_ms,
        plugins: args.plugins,
    };
    let report = run(config, &overrides, None)?;
    let rows = export(&report, &args.out).with_context(|| format!("writing traces to {}", args.out.display()))?;
    log::info!(
        "wrote {} snapshot, {} service, {} federation and {} instruction rows to {}",
        rows.snapshot_rows,
        rows.service_rows,
        rows.federation_rows,
        rows.instruction_rows,
        args.out.display()
    );
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    Ok(())
}

fn print_summary(dir: &std::path::Path, target_ms: f64) -> Result<()> {
    let summary = summarize(dir, target_ms)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Summarize { dir, target_ms }) => print_summary(&dir, target_ms),
        None => run_scenario(cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
