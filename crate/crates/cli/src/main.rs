use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use risshare_cli::config::{load_config, ConfigError};
use risshare_cli::plot::cmd_plot;
use risshare_cli::runner::{cmd_benchmark, cmd_sweep, cmd_train, SweepAxis};

/// Simulation and optimization workbench for RIS-aided multi-VSP spectrum
/// sharing.
#[derive(Parser)]
#[command(name = "risshare", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: String,
    /// Comma-separated seed list overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config overrides, e.g. `run.hyper.gamma=0.9`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 2)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured agent across seeds and write metrics CSVs.
    Train(CommonRunArgs),
    /// Solve the near-optimal benchmark per seed.
    Benchmark(CommonRunArgs),
    /// Render SVG figures from metrics / benchmark CSVs.
    Plot {
        /// Figure style.
        #[arg(long, value_parser = ["curves", "bars", "panels"])]
        style: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Input CSV files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Train both agents across a hyperparameter axis.
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Swept axis.
        #[arg(long, value_parser = ["lr", "batch"])]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Parse and validate a configuration, printing a short summary.
    ValidateConfig {
        #[arg(long)]
        config: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(args_config: &str, seeds: &Option<Vec<u64>>, overrides: &[String]) -> Result<risshare_cli::config::ExperimentConfig, ConfigError> {
    let mut config = load_config(args_config, overrides)?;
    if let Some(seeds) = seeds {
        config.run.seeds = seeds.clone();
        config.validate()?;
    }
    Ok(config)
}

fn run() -> Result<(), u8> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let config = load(&args.config, &args.seeds, &args.overrides).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let outcome = cmd_train(&config, &args.out, args.jobs).map_err(|e| {
                eprintln!("train failed: {e}");
                EXIT_RUNTIME
            })?;
            for run in &outcome.seed_runs {
                println!(
                    "seed {}: {} rows -> {} ({} ms)",
                    run.seed,
                    run.records.len(),
                    run.csv_path.display(),
                    run.wall_ms
                );
            }
            println!("aggregate -> {}", outcome.aggregate_path.display());
            println!("median final smoothed reward: {}", outcome.median_final_smoothed());
        }
        Command::Benchmark(args) => {
            let config = load(&args.config, &args.seeds, &args.overrides).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let outcome = cmd_benchmark(&config, &args.out, args.jobs).map_err(|e| {
                eprintln!("benchmark failed: {e}");
                EXIT_RUNTIME
            })?;
            for run in &outcome.runs {
                println!(
                    "seed {}: stage1 {} stage2 {}{}",
                    run.seed,
                    run.stage1_reward,
                    run.stage2_reward,
                    if run.qos_infeasible { " (qos infeasible)" } else { "" }
                );
            }
            println!("mean benchmark reward: {}", outcome.mean_reward);
            println!("records -> {}", outcome.csv_path.display());
        }
        Command::Plot { style, out, files } => {
            let (data, path) = cmd_plot(&files, &style, &out).map_err(|e| {
                eprintln!("plot failed: {e}");
                EXIT_RUNTIME
            })?;
            println!(
                "{} curves, {} references, {} bars -> {}",
                data.curves.len(),
                data.references.len(),
                data.bars.len(),
                path.display()
            );
        }
        Command::Sweep { common, axis, values } => {
            let config = load(&common.config, &common.seeds, &common.overrides).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let axis = match axis.as_str() {
                "lr" => SweepAxis::LearningRate,
                _ => SweepAxis::Batch,
            };
            let outcome = cmd_sweep(&config, axis, &values, &common.out, common.jobs).map_err(|e| {
                eprintln!("sweep failed: {e}");
                EXIT_RUNTIME
            })?;
            for cell in &outcome.cells {
                println!(
                    "{} {}={}: median final smoothed {}",
                    cell.agent.name(),
                    axis.name(),
                    cell.value,
                    cell.median_final
                );
            }
            for (agent, abs, rel) in &outcome.spreads {
                println!("{} spread: {abs} (relative {rel})", agent.name());
            }
            println!("report -> {}", outcome.report_csv.display());
        }
        Command::ValidateConfig { config, overrides } => {
            let config = load(&config, &None, &overrides).map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            let (scenario, assoc) = config.build().map_err(|e| {
                eprintln!("config error: {e}");
                EXIT_CONFIG
            })?;
            println!(
                "ok: {} VSPs, {} BSs, {} users, {} subchannels ({} reusable), {} RIS x {} elements",
                scenario.num_vsps,
                scenario.num_bs_total(),
                scenario.num_users_total(),
                scenario.num_subchannels,
                scenario.reusable_set.len(),
                scenario.num_ris,
                scenario.elements_per_ris
            );
            println!(
                "state dim {}, action dim {}, agent {:?}, seeds {:?}",
                risshare::env::state_dim(&scenario),
                risshare::env::action_dim(&scenario),
                config.run.agent,
                config.run.seeds
            );
            let _ = assoc;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
