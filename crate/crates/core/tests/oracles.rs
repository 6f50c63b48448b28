use dualband::baselines::{genie_choice, oracle_rate, run_oracle_episode, Oracle};
use dualband::checks::{brute_force_mmwave, brute_force_sub6, downscaled_config};
use dualband::env::{EnvAssets, LinkEnv};
use dualband::Band;

#[test]
fn genie_and_greedy_equal_brute_force_on_downscaled_instance() {
    let env = LinkEnv::for_episode(EnvAssets::new(&downscaled_config()).unwrap(), 2, 0).unwrap();
    for slot in 0..200 {
        let mm = brute_force_mmwave(&env, slot).unwrap();
        let s6 = brute_force_sub6(&env, slot).unwrap();
        assert_eq!(genie_choice(&env, slot).unwrap().1, mm.max(s6), "genie at slot {slot}");
        assert_eq!(oracle_rate(&env, Band::Mmwave, slot).unwrap(), mm, "greedy at slot {slot}");
    }
}

#[test]
fn genie_episode_dominates_greedy_episode() {
    let assets = EnvAssets::new(&downscaled_config()).unwrap();
    for ep in 0..3 {
        let mut env = LinkEnv::for_episode(assets.clone(), 4, ep).unwrap();
        let genie = run_oracle_episode(&mut env, Oracle::Genie).unwrap();
        let greedy = run_oracle_episode(&mut env, Oracle::Greedy).unwrap();
        assert_eq!(genie.len(), greedy.len());
        for (g, r) in genie.decisions.iter().zip(&greedy.decisions) {
            assert!(g.reward >= r.reward);
        }
    }
}
