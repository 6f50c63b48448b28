//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Learning criteria run at reduced size by default; set
//! `DUALBAND_ACCEPT_EPISODES`, `DUALBAND_ACCEPT_SEEDS` and
//! `DUALBAND_ACCEPT_SWEEP_SEEDS` to scale them up. The process exits 0 even
//! when a criterion fails, so the lines are the verdict.

use std::path::Path;
use std::process::Command;
use std::time::Duration;

use dualband::checks::{run_fast_checks, timed, CheckOutcome};
use dualband::config::{Policy, SweepAxis};
use dualband::experiment::{run_experiment, ExperimentOutput, MetricsRow};
use dualband::ScenarioConfig;

fn env_usize(name: &str, default: usize) -> usize {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn tail_rates(out: &ExperimentOutput, policy: &str) -> Vec<f64> {
    out.summary.iter().filter(|r| r.policy == policy).map(|r| r.tail_rate_bps).collect()
}

fn curve(metrics: &[MetricsRow], policy: &str, seed: u64) -> Vec<f64> {
    metrics.iter().filter(|m| m.policy == policy && m.seed == seed).map(|m| m.mean_reward_bps).collect()
}

/// Per-episode reward relative to the genie on the same channels, which
/// removes most of the episode-to-episode channel variation.
fn relative_curve(metrics: &[MetricsRow], policy: &str, seed: u64) -> Vec<f64> {
    let genie = curve(metrics, "genie", seed);
    curve(metrics, policy, seed)
        .iter()
        .zip(&genie)
        .map(|(r, g)| if *g > 0.0 { r / g } else { 0.0 })
        .collect()
}

/// Final level is the mean of the last `tail` episodes; convergence is the
/// first episode whose trailing `smooth`-episode mean reaches 90% of it.
fn convergence(c: &[f64], tail: usize, smooth: usize) -> (f64, usize) {
    let t = &c[c.len().saturating_sub(tail)..];
    let last = t.iter().sum::<f64>() / t.len().max(1) as f64;
    let hit = (0..c.len())
        .find(|&i| {
            let w = &c[(i + 1).saturating_sub(smooth)..=i];
            w.iter().sum::<f64>() / w.len() as f64 >= 0.9 * last
        })
        .unwrap_or(c.len());
    (last, hit)
}

fn learning_config(n_seeds: usize, n_episodes: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.experiment.n_seeds = n_seeds;
    cfg.experiment.n_episodes = n_episodes;
    cfg.experiment.summary_episodes = cfg.experiment.summary_episodes.min(n_episodes);
    cfg
}

fn ordering(out: &ExperimentOutput) -> (bool, String) {
    let m = |p: &str| median(tail_rates(out, p));
    let (genie, hrl, greedy, tt) = (m("genie"), m("hrl"), m("greedy"), m("three_threshold"));
    let ok = genie >= hrl && hrl >= greedy && hrl >= tt && hrl / greedy > 1.0;
    (
        ok,
        format!(
            "median tail rate genie {genie:.3e} hrl {hrl:.3e} greedy {greedy:.3e} three_threshold {tt:.3e}; hrl/greedy {:.2}",
            hrl / greedy
        ),
    )
}

fn convergence_check(out: &ExperimentOutput, seeds: &[u64], tail: usize) -> (bool, String) {
    let (mut hrl_hits, mut drl_hits, mut wins) = (Vec::new(), Vec::new(), 0);
    for &s in seeds {
        let (hrl_final, hrl_hit) = convergence(&relative_curve(&out.metrics, "hrl", s), tail, 5);
        let (drl_final, drl_hit) = convergence(&relative_curve(&out.metrics, "three_threshold", s), tail, 5);
        hrl_hits.push(hrl_hit as f64);
        drl_hits.push(drl_hit as f64);
        if hrl_final > drl_final {
            wins += 1;
        }
    }
    let (h, d) = (median(hrl_hits), median(drl_hits));
    let need = (seeds.len() * 8).div_ceil(10);
    (
        h < d && wins >= need,
        format!("median episodes to 90% of final: hrl {h} vs flat {d}; hrl final ahead in {wins}/{} seeds (need {need})", seeds.len()),
    )
}

/// Non-decreasing up to some peak index >= `min_peak`, non-increasing after.
fn peaked(values: &[f64], min_peak: usize) -> bool {
    (min_peak..values.len()).any(|b| values[..=b].windows(2).all(|w| w[1] >= w[0]) && values[b..].windows(2).all(|w| w[1] <= w[0]))
}

fn rvq_sweep(n_seeds: usize, n_episodes: usize) -> dualband::Result<(bool, String)> {
    let mut cfg = learning_config(n_seeds, n_episodes);
    cfg.experiment.policies = vec![Policy::Hrl];
    cfg.experiment.sweep = SweepAxis::RvqBits;
    cfg.experiment.sweep_values = (1..=8).map(f64::from).collect();
    let out = run_experiment(&cfg)?;
    let curve: Vec<f64> = cfg
        .experiment
        .sweep_values
        .iter()
        .map(|&b| median(out.summary.iter().filter(|r| r.sweep_value == b).map(|r| r.tail_rate_bps).collect()))
        .collect();
    // index i holds kappa = i + 1, so b* >= 3 is index >= 2
    let ok = peaked(&curve, 2);
    let text: Vec<String> = curve.iter().map(|r| format!("{:.2}", r / 1e9)).collect();
    Ok((ok, format!("hrl median tail rate (Gbps) for kappa 1..8: [{}]", text.join(", "))))
}

fn cli_determinism(dir: &Path) -> dualband::Result<(bool, String)> {
    let exe = env!("CARGO_BIN_EXE_dualband");
    let files = ["metrics.csv", "summary.csv", "scatter.csv"];
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let status = Command::new(exe)
            .args(["--seed", "3", "--out-dir"])
            .arg(&out_dir)
            .args(["--override", "experiment.n_episodes=3", "--override", "experiment.n_seeds=2"])
            .args(["--override", "env.episode_len_decisions=30", "--override", "mmwave.kappa_rvq=3"])
            .args(["run", "desk"])
            .output()
            .map_err(|e| dualband::Error::io(exe, e))?;
        if !status.status.success() {
            return Ok((false, format!("cli exited with {}", status.status)));
        }
        let mut bytes = Vec::new();
        for f in files {
            let p = out_dir.join(f);
            bytes.push(std::fs::read(&p).map_err(|e| dualband::Error::io(&p, e))?);
        }
        outputs.push(bytes);
    }
    let same = outputs[0] == outputs[1];
    let sizes: Vec<usize> = outputs[0].iter().map(Vec::len).collect();
    Ok((same && sizes.iter().all(|&n| n > 0), format!("two runs byte-identical: {same} (bytes {sizes:?})")))
}

fn main() {
    let episodes = env_usize("DUALBAND_ACCEPT_EPISODES", 30);
    let seeds = env_usize("DUALBAND_ACCEPT_SEEDS", 10);
    let sweep_seeds = env_usize("DUALBAND_ACCEPT_SWEEP_SEEDS", 3);
    println!("acceptance: {seeds} seeds x {episodes} episodes (rvq sweep: {sweep_seeds} seeds)");

    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    for o in run_fast_checks() {
        println!("{}", o.line());
        outcomes.push(o);
    }

    let cfg = learning_config(seeds, episodes);
    let seed_list = dualband::experiment::seeds(&cfg);
    let tail = cfg.experiment.summary_episodes;
    let started = std::time::Instant::now();
    let policy_run = run_experiment(&cfg);
    let run_time = started.elapsed();
    let shared = |id, name, budget_s: u64, f: &dyn Fn(&ExperimentOutput) -> (bool, String)| {
        let mut o = timed(id, name, budget_s, || match &policy_run {
            Ok(out) => Ok(f(out)),
            Err(e) => Err(dualband::Error::Numerical(e.to_string())),
        });
        o.elapsed += run_time;
        if o.elapsed > o.budget {
            o.passed = false;
        }
        o
    };
    for o in [
        shared(8, "policy ordering", 30 * 60, &ordering),
        shared(9, "convergence speed", 60 * 60, &|out| convergence_check(out, &seed_list, tail)),
    ] {
        println!("{}", o.line());
        outcomes.push(o);
    }

    let o = timed(10, "rvq bits shape", 60 * 60, || rvq_sweep(sweep_seeds, episodes));
    println!("{}", o.line());
    outcomes.push(o);

    let dir = tempfile::tempdir().expect("temp dir");
    let o = timed(11, "cli determinism", 10 * 60, || cli_determinism(dir.path()));
    println!("{}", o.line());
    outcomes.push(o);

    let passed = outcomes.iter().filter(|o| o.passed).count();
    let total: Duration = outcomes.iter().map(|o| o.elapsed).sum();
    println!("acceptance: {passed}/{} criteria pass ({:.0}s)", outcomes.len(), total.as_secs_f64());
}
