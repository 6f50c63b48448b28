use dualband::config::SweepAxis;
use dualband::experiment::{read_summary, run_experiment, write_output, MetricsRow, ScatterRow};
use dualband::ScenarioConfig;

fn tiny() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.mmwave.kappa_rvq = 3;
    cfg.mmwave.rvq_training = 256;
    cfg.env.episode_len_decisions = 10;
    cfg.drl.batch_size = 4;
    cfg.hrl.lower.batch_size = 4;
    cfg.hrl.upper.batch_size = 2;
    cfg.experiment.n_episodes = 2;
    cfg.experiment.n_seeds = 2;
    cfg
}

#[test]
fn every_emitted_file_parses_with_the_documented_schema() {
    let mut cfg = tiny();
    cfg.experiment.sweep = SweepAxis::VehicleDensity;
    cfg.experiment.sweep_values = vec![5.0, 20.0];
    let out = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_output(dir.path(), &cfg, &out).unwrap();

    let mut r = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["seed", "episode", "policy", "sweep_value", "mean_reward_bps", "mean_rate_bps", "training_fraction", "band_occupancy_mmwave"]
    );
    let metrics: Vec<MetricsRow> = r.deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(metrics, out.metrics);
    assert!(metrics.iter().all(|m| (0.0..=1.0).contains(&m.training_fraction) && (0.0..=1.0).contains(&m.band_occupancy_mmwave)));
    let mut seeds: Vec<u64> = metrics.iter().map(|m| m.seed).collect();
    seeds.dedup();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds, [1, 2]);

    assert_eq!(read_summary(&dir.path().join("summary.csv")).unwrap(), out.summary);
    let scatter: Vec<ScatterRow> = csv::Reader::from_path(dir.path().join("scatter.csv"))
        .unwrap()
        .deserialize()
        .map(|x| x.unwrap())
        .collect();
    assert_eq!(scatter.len(), out.scatter.len());
    assert!(scatter.iter().all(|s| s.band == "mmwave" || s.band == "sub6"));

    let echoed = ScenarioConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}
