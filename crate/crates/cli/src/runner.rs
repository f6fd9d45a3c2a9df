//! Seeded multi-run execution: training runs, benchmark solves, and
//! hyperparameter sweeps, with per-run CSVs and cross-seed aggregates.

use std::path::{Path, PathBuf};
use std::time::Instant;

use risshare::agents::{train, AgentKind};
use risshare::benchmark::{eds_solve, ScaOptions};
use risshare::channel::{draw_channels, RisPhases};
use risshare::rng::{mix, Stream};
use thiserror::Error;

use crate::config::{AgentChoice, ExperimentConfig};
use crate::metrics::{self, MetricsRecord};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("benchmark failed: {0}")]
    Bench(#[from] risshare::benchmark::BenchError),
    #[error("no agent selected: run.agent is `none`")]
    NoAgent,
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|source| RunError::Io { path: parent.display().to_string(), source })?;
    }
    std::fs::write(path, contents)
        .map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

/// Outcome of one seed's training run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub csv_path: PathBuf,
    pub records: Vec<MetricsRecord>,
    pub wall_ms: u128,
}

/// Outcome of `cmd_train`: per-seed runs plus the aggregate file.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: AgentKind,
    pub seed_runs: Vec<SeedRun>,
    pub aggregate_path: PathBuf,
    pub summary_path: PathBuf,
}

impl TrainOutcome {
    /// Median across seeds of the final smoothed reward.
    pub fn median_final_smoothed(&self) -> f64 {
        let mut finals: Vec<f64> = self
            .seed_runs
            .iter()
            .filter_map(|r| metrics::final_smoothed(&r.records))
            .collect();
        finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = finals.len();
        if n % 2 == 1 {
            finals[n / 2]
        } else {
            0.5 * (finals[n / 2 - 1] + finals[n / 2])
        }
    }
}

/// Runs `f` over the items with at most `jobs` worker threads, preserving
/// input order in the result.
pub fn run_parallel<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let jobs = jobs.max(1);
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let work: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(work);
    let out = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                let Some((idx, item)) = item else { break };
                let r = f(item);
                out.lock().unwrap()[idx] = Some(r);
            });
        }
    });
    results.into_iter().map(|r| r.expect("worker completed")).collect()
}

/// Trains the configured agent on every seed, writing one CSV per seed, a
/// per-step median aggregate, and a JSON run summary (which carries the
/// wall-clock milliseconds; the CSVs stay byte-reproducible).
pub fn cmd_train(
    config: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<TrainOutcome, RunError> {
    let kind = config.run.agent.kind().ok_or(RunError::NoAgent)?;
    let (scenario, assoc) = config
        .build()
        .map_err(|e| RunError::Io { path: "scenario".into(), source: std::io::Error::other(e) })?;

    let window = config.run.smooth_window;
    let seeds = config.run.seeds.clone();
    let runs: Vec<Result<SeedRun, RunError>> = run_parallel(seeds, jobs, |seed| {
        let params = config.train_params(kind, seed);
        let started = Instant::now();
        let raw = train(kind, &scenario, &assoc, &params);
        let wall_ms = started.elapsed().as_millis();
        let records = metrics::to_records(&raw, window);
        let csv_path = out_dir.join(format!("train_{}_seed{}.csv", kind.name(), seed));
        write_file(&csv_path, &metrics::to_csv(&records))?;
        Ok(SeedRun { seed, csv_path, records, wall_ms })
    });
    let mut seed_runs = Vec::with_capacity(runs.len());
    for run in runs {
        seed_runs.push(run?);
    }

    let aggregate =
        metrics::aggregate_median(&seed_runs.iter().map(|r| r.records.clone()).collect::<Vec<_>>())?;
    let aggregate_path = out_dir.join(format!("train_{}_aggregate.csv", kind.name()));
    write_file(&aggregate_path, &metrics::to_csv(&aggregate))?;

    let summary = serde_json::json!({
        "agent": kind.name(),
        "steps": config.run.steps,
        "seeds": seed_runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "wall_ms": seed_runs.iter().map(|r| r.wall_ms).collect::<Vec<_>>(),
        "final_smoothed": seed_runs
            .iter()
            .map(|r| metrics::final_smoothed(&r.records).unwrap_or(f64::NAN))
            .collect::<Vec<_>>(),
        "csv_files": seed_runs
            .iter()
            .map(|r| r.csv_path.display().to_string())
            .collect::<Vec<_>>(),
        "aggregate": aggregate_path.display().to_string(),
    });
    let summary_path = out_dir.join(format!("train_{}_summary.json", kind.name()));
    write_file(&summary_path, &format!("{:#}\n", summary))?;

    Ok(TrainOutcome { agent: kind, seed_runs, aggregate_path, summary_path })
}

/// One benchmark solve per seed.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub seed: u64,
    pub config_id: u64,
    pub stage1_reward: f64,
    pub stage2_reward: f64,
    pub sca_iterations: usize,
    pub escalations: usize,
    pub qos_infeasible: bool,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub runs: Vec<BenchRun>,
    pub mean_reward: f64,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Solves the benchmark on one fresh channel realization per seed and
/// writes per-seed records plus the mean (the plot reference line).
pub fn cmd_benchmark(
    config: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<BenchOutcome, RunError> {
    let (scenario, assoc) = config
        .build()
        .map_err(|e| RunError::Io { path: "scenario".into(), source: std::io::Error::other(e) })?;
    let seeds = config.run.seeds.clone();
    let opts = ScaOptions::default();
    let runs: Vec<Result<BenchRun, RunError>> = run_parallel(seeds, jobs, |seed| {
        let realization_seed = mix(seed, Stream::Benchmark as u64, 0);
        let real = draw_channels(&scenario, realization_seed)
            .map_err(|e| RunError::Io { path: "channels".into(), source: std::io::Error::other(e) })?;
        // Benchmark phases are fixed at zero.
        let phases = RisPhases::zeros(&scenario);
        let result = eds_solve(&scenario, &real, &phases, &assoc, &opts)?;
        Ok(BenchRun {
            seed,
            config_id: result.record.config_id,
            stage1_reward: result.record.stage1_reward,
            stage2_reward: result.record.stage2_reward,
            sca_iterations: result.record.sca_iterations,
            escalations: result.record.escalations,
            qos_infeasible: result.record.qos_infeasible,
            powers: result.allocation.power.clone(),
        })
    });
    let mut collected = Vec::with_capacity(runs.len());
    for run in runs {
        collected.push(run?);
    }
    let mean_reward =
        collected.iter().map(|r| r.stage2_reward).sum::<f64>() / collected.len() as f64;

    let mut csv = String::from(
        "seed,config_id,stage1_reward,stage2_reward,sca_iterations,escalations,qos_infeasible\n",
    );
    for r in &collected {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.seed,
            r.config_id,
            r.stage1_reward,
            r.stage2_reward,
            r.sca_iterations,
            r.escalations,
            r.qos_infeasible
        ));
    }
    let csv_path = out_dir.join("benchmark.csv");
    write_file(&csv_path, &csv)?;

    let summary = serde_json::json!({
        "mean_stage2_reward": mean_reward,
        "seeds": collected.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "stage2_rewards": collected.iter().map(|r| r.stage2_reward).collect::<Vec<_>>(),
        "powers": collected.iter().map(|r| r.powers.clone()).collect::<Vec<_>>(),
    });
    let summary_path = out_dir.join("benchmark_summary.json");
    write_file(&summary_path, &format!("{:#}\n", summary))?;

    Ok(BenchOutcome { runs: collected, mean_reward, csv_path, summary_path })
}

/// Axis for `cmd_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    LearningRate,
    Batch,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::LearningRate => "lr",
            SweepAxis::Batch => "batch",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub agent: AgentKind,
    pub value: f64,
    pub median_final: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    /// (agent, max final - min final, relative spread against the best).
    pub spreads: Vec<(AgentKind, f64, f64)>,
    pub report_csv: PathBuf,
    pub report_json: PathBuf,
}

/// Trains both agents across the swept values (actor and critic rates move
/// together on the lr axis) and reports the final-reward spread per agent.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
    jobs: usize,
) -> Result<SweepOutcome, RunError> {
    assert!(!values.is_empty(), "sweep values must be non-empty");
    let mut cells = Vec::new();
    for kind in [AgentKind::Ddpg, AgentKind::Sac] {
        for &value in values {
            let mut cell_config = config.clone();
            cell_config.run.agent = match kind {
                AgentKind::Ddpg => AgentChoice::Ddpg,
                AgentKind::Sac => AgentChoice::Sac,
            };
            match axis {
                SweepAxis::LearningRate => {
                    cell_config.run.hyper.lr_actor = Some(value);
                    cell_config.run.hyper.lr_critic = Some(value);
                }
                SweepAxis::Batch => {
                    cell_config.run.hyper.batch = Some(value as usize);
                }
            }
            let cell_dir = out_dir.join(format!("sweep_{}_{}_{}", axis.name(), kind.name(), value));
            let outcome = cmd_train(&cell_config, &cell_dir, jobs)?;
            cells.push(SweepCell {
                agent: kind,
                value,
                median_final: outcome.median_final_smoothed(),
                out_dir: cell_dir,
            });
        }
    }

    let mut spreads = Vec::new();
    for kind in [AgentKind::Ddpg, AgentKind::Sac] {
        let finals: Vec<f64> =
            cells.iter().filter(|c| c.agent == kind).map(|c| c.median_final).collect();
        let max = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = finals.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = max - min;
        let relative = if max.abs() > 1e-9 { spread / max.abs() } else { f64::INFINITY };
        spreads.push((kind, spread, relative));
    }

    let mut csv = String::from("agent,axis,value,median_final_smoothed\n");
    for c in &cells {
        csv.push_str(&format!("{},{},{},{}\n", c.agent.name(), axis.name(), c.value, c.median_final));
    }
    let report_csv = out_dir.join("sweep_report.csv");
    write_file(&report_csv, &csv)?;

    let report = serde_json::json!({
        "axis": axis.name(),
        "values": values,
        "cells": cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "agent": c.agent.name(),
                    "value": c.value,
                    "median_final_smoothed": c.median_final,
                    "dir": c.out_dir.display().to_string(),
                })
            })
            .collect::<Vec<_>>(),
        "spreads": spreads
            .iter()
            .map(|(k, abs, rel)| {
                serde_json::json!({ "agent": k.name(), "absolute": abs, "relative": rel })
            })
            .collect::<Vec<_>>(),
    });
    let report_json = out_dir.join("sweep_report.json");
    write_file(&report_json, &format!("{:#}\n", report))?;

    Ok(SweepOutcome { cells, spreads, report_csv, report_json })
}
