use std::sync::Arc;

use dualband::channel::trace::{load_trace, save_trace, ChannelSource};
use dualband::env::{episode_channels, EnvAction, EnvAssets, LinkEnv};
use dualband::ScenarioConfig;

fn small() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.mmwave.kappa_rvq = 3;
    cfg.mmwave.rvq_training = 256;
    cfg.env.episode_len_decisions = 15;
    cfg
}

#[test]
fn saved_traces_drive_the_env_like_generated_channels() {
    let assets = EnvAssets::new(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (mm, s6) = episode_channels(&assets, 3, 1).unwrap();
    let (pm, ps) = (dir.path().join("mm.bin"), dir.path().join("s6.bin"));
    save_trace(&mm.materialize(), &pm).unwrap();
    save_trace(&s6.materialize(), &ps).unwrap();
    let (tm, ts) = (load_trace(&pm).unwrap(), load_trace(&ps).unwrap());
    assert_eq!(tm.n_slots, mm.n_slots());

    let mut generated = LinkEnv::for_episode(assets.clone(), 3, 1).unwrap();
    let mut replayed = LinkEnv::new(assets.clone(), Arc::new(tm), Arc::new(ts), 99).unwrap();
    let script = [
        EnvAction::DataTransmission,
        EnvAction::SwitchBand,
        EnvAction::AnalogTraining,
        EnvAction::DataTransmission,
        EnvAction::SwitchBand,
        EnvAction::DataTransmission,
    ];
    for a in script {
        let (x, y) = (generated.step(a).unwrap(), replayed.step(a).unwrap());
        // digital training draws estimation noise from the env rng, so the
        // script avoids it; everything else is a pure function of the channel
        assert_eq!(x.reward, y.reward, "{a:?}");
        assert_eq!(x.features, y.features, "{a:?}");
    }
}

#[test]
fn mismatched_sources_are_rejected() {
    let assets = EnvAssets::new(&small()).unwrap();
    let (mm, s6) = episode_channels(&assets, 1, 0).unwrap();
    assert!(LinkEnv::new(assets, Arc::new(s6), Arc::new(mm), 0).is_err());
}
