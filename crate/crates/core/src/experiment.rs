//! Experiment orchestration: seeds x sweep values x policies, per-episode
//! metrics, summary rows and the lower-policy scatter dump.
//!
//! Every (seed, episode) pair sees the same channel realization regardless of
//! policy or sweep value, so comparisons are paired. Cells run through
//! [`crate::par`] and results are sorted before writing, so output files are
//! byte-identical across thread counts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{run_oracle_episode, Oracle};
use crate::config::{Policy, ScenarioConfig, SweepAxis};
use crate::ddpg::train_three_threshold;
use crate::env::{EnvAssets, EpisodeLog, LinkEnv};
use crate::error::{Error, Result};
use crate::hrl::train_hrl;
use crate::rng::{derive_seed, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub policy: String,
    pub sweep_value: f64,
    pub mean_reward_bps: f64,
    pub mean_rate_bps: f64,
    pub training_fraction: f64,
    pub band_occupancy_mmwave: f64,
}

/// Tail-window average over the final episodes of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub policy: String,
    pub sweep_value: f64,
    pub episodes_averaged: usize,
    pub tail_rate_bps: f64,
    pub tail_reward_bps: f64,
    pub training_fraction: f64,
    pub band_occupancy_mmwave: f64,
}

/// One lower-policy decision from the final learned episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub seed: u64,
    pub policy: String,
    pub sweep_value: f64,
    pub decision: usize,
    pub band: String,
    pub feedback: f64,
    pub tau_1: f64,
    pub tau_2: f64,
    pub mode: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub metrics: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
    pub scatter: Vec<ScatterRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    seed: u64,
    sweep_index: usize,
    sweep_value: f64,
    policy: Policy,
}

/// Scenario for one sweep point. Power defaults to the highest configured level.
pub fn scenario_for(cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    let top = cfg.experiment.transmit_power_dbm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top.is_finite() {
        c.env.transmit_power_dbm = top;
    }
    match cfg.experiment.sweep {
        SweepAxis::Power => c.env.transmit_power_dbm = value,
        SweepAxis::RvqBits => c.mmwave.kappa_rvq = as_count("rvq_bits", value)?,
        SweepAxis::VehicleDensity => c.channel.blocker_density = value,
        SweepAxis::UpperPeriod => c.hrl.m_upper = as_count("upper_period", value)?,
    }
    c.validate()?;
    Ok(c)
}

fn as_count(what: &str, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 {
        return Err(Error::config(format!("sweep {what} value {v} is not a positive integer")));
    }
    Ok(v as usize)
}

pub fn seeds(cfg: &ScenarioConfig) -> Vec<u64> {
    (0..cfg.experiment.n_seeds as u64).map(|i| cfg.experiment.seed + i).collect()
}

/// Episode logs of one policy on one scenario.
pub fn run_policy(cfg: &ScenarioConfig, policy: Policy, seed: u64, n_episodes: usize) -> Result<Vec<EpisodeLog>> {
    let assets = EnvAssets::new(cfg)?;
    let feature_len = assets.feature_len();
    let make_env = |ep: usize| LinkEnv::for_episode(assets.clone(), seed, ep);
    let learner_seed = derive_seed(seed, &[tag("learner"), tag(policy.name())]);
    match policy {
        Policy::Genie | Policy::Greedy => {
            let oracle = if policy == Policy::Genie { Oracle::Genie } else { Oracle::Greedy };
            (0..n_episodes).map(|ep| run_oracle_episode(&mut make_env(ep)?, oracle)).collect()
        }
        Policy::ThreeThreshold => train_three_threshold(make_env, feature_len, &cfg.drl, n_episodes, learner_seed),
        Policy::Hrl => train_hrl(make_env, feature_len, &cfg.hrl, n_episodes, learner_seed),
    }
}

pub fn summarize(logs: &[EpisodeLog], window: usize, episodes: usize) -> (usize, f64, f64, f64, f64) {
    let tail = &logs[logs.len().saturating_sub(episodes)..];
    let n = tail.len();
    if n == 0 {
        return (0, 0.0, 0.0, 0.0, 0.0);
    }
    let mean = |f: &dyn Fn(&EpisodeLog) -> f64| tail.iter().map(f).sum::<f64>() / n as f64;
    (
        n,
        mean(&|l| l.tail_mean_rate(window)),
        mean(&|l| l.tail_mean_reward(window)),
        mean(&|l| l.training_fraction()),
        mean(&|l| l.mmwave_occupancy()),
    )
}

fn cell_output(cfg: &ScenarioConfig, cell: Cell) -> Result<ExperimentOutput> {
    let scenario = scenario_for(cfg, cell.sweep_value)?;
    let logs = run_policy(&scenario, cell.policy, cell.seed, cfg.experiment.n_episodes)?;
    let name = cell.policy.name().to_string();
    let metrics = logs
        .iter()
        .enumerate()
        .map(|(ep, l)| MetricsRow {
            seed: cell.seed,
            episode: ep,
            policy: name.clone(),
            sweep_value: cell.sweep_value,
            mean_reward_bps: l.mean_reward(),
            mean_rate_bps: l.mean_rate(),
            training_fraction: l.training_fraction(),
            band_occupancy_mmwave: l.mmwave_occupancy(),
        })
        .collect();
    let (n, rate, reward, tf, occ) = summarize(&logs, cfg.experiment.summary_window, cfg.experiment.summary_episodes);
    let summary = vec![SummaryRow {
        seed: cell.seed,
        policy: name.clone(),
        sweep_value: cell.sweep_value,
        episodes_averaged: n,
        tail_rate_bps: rate,
        tail_reward_bps: reward,
        training_fraction: tf,
        band_occupancy_mmwave: occ,
    }];
    let mut scatter = Vec::new();
    if matches!(cell.policy, Policy::Hrl | Policy::ThreeThreshold) {
        if let Some(last) = logs.last() {
            for (i, d) in last.decisions.iter().enumerate() {
                scatter.push(ScatterRow {
                    seed: cell.seed,
                    policy: name.clone(),
                    sweep_value: cell.sweep_value,
                    decision: i,
                    band: d.band.name().to_string(),
                    feedback: d.feedback,
                    tau_1: d.thresholds.first().copied().unwrap_or(f64::NAN),
                    tau_2: d.thresholds.get(1).copied().unwrap_or(f64::NAN),
                    mode: d.action.name().to_string(),
                });
            }
        }
    }
    Ok(ExperimentOutput { metrics, summary, scatter })
}

/// Runs every (seed, sweep value, policy) cell.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for seed in seeds(cfg) {
        for (sweep_index, &sweep_value) in cfg.experiment.sweep_points().iter().enumerate() {
            for &policy in &cfg.experiment.policies {
                cells.push(Cell { seed, sweep_index, sweep_value, policy });
            }
        }
    }
    let results = crate::par::map_slice(&cells, |c| cell_output(cfg, *c).map(|o| (*c, o)));
    let mut done = results.into_iter().collect::<Result<Vec<_>>>()?;
    let rank = |p: Policy| cfg.experiment.policies.iter().position(|q| *q == p).unwrap_or(usize::MAX);
    done.sort_by_key(|(c, _)| (c.sweep_index, c.seed, rank(c.policy)));
    let mut out = ExperimentOutput::default();
    for (_, o) in done {
        out.metrics.extend(o.metrics);
        out.summary.extend(o.summary);
        out.scatter.extend(o.scatter);
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Writes `metrics.csv`, `summary.csv`, `scatter.csv` and `config.toml` into `dir`.
pub fn write_output(dir: &Path, cfg: &ScenarioConfig, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_csv(&dir.join("metrics.csv"), &out.metrics)?;
    write_csv(&dir.join("summary.csv"), &out.summary)?;
    write_csv(&dir.join("scatter.csv"), &out.scatter)?;
    let text = toml::to_string(cfg).map_err(|e| Error::config(e.to_string()))?;
    let path = dir.join("config.toml");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Whitespace-separated columns for plotting tools: sweep value, then the
/// seed-averaged tail rate of each policy in order of first appearance.
pub fn plot_columns(summary: &[SummaryRow]) -> String {
    let mut policies: Vec<&str> = Vec::new();
    let mut points: Vec<f64> = Vec::new();
    for r in summary {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
        if !points.contains(&r.sweep_value) {
            points.push(r.sweep_value);
        }
    }
    let mut s = String::from("# sweep_value");
    for p in &policies {
        s.push(' ');
        s.push_str(p);
    }
    s.push('\n');
    for v in points {
        s.push_str(&format!("{v}"));
        for p in &policies {
            let vals: Vec<f64> = summary.iter().filter(|r| r.sweep_value == v && r.policy == *p).map(|r| r.tail_rate_bps).collect();
            let m = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
            s.push_str(&format!(" {m:e}"));
        }
        s.push('\n');
    }
    s
}

/// Reads a `summary.csv` written by [`write_output`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?;
    Ok(rows)
}
