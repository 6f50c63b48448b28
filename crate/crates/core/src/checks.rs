//! Fast invariant and oracle checks shared by `dualband check` and the
//! acceptance harness. Each check returns a pass flag and a one-line detail.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{genie_choice, oracle_rate};
use crate::channel::geometry::ula_response;
use crate::config::Band;
use crate::env::{thresholds_to_action, EnvAction, EnvAssets, LinkEnv, Scheme};
use crate::error::Result;
use crate::hrl::{non_skip_probability, round_skip};
use crate::linalg::{complex_gaussian, spectral_norm, CMat};
use crate::mmwave::{
    analog_only, analog_overhead, analog_sweep, build_rvq_codebook, digital_from_effective, digital_overhead, dft_codebook,
    mmse_estimation, quantize_effective_channel, se_feedback, spectral_efficiency_mmwave, AnalogSweep,
};
use crate::nn::{max_relative_error, numeric_gradients, Mlp, OutputActivation};
use crate::sub6::{pmi_codebook, pmi_overhead, pmi_select, spectral_efficiency_sub6, zf_combiner};
use crate::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.2}s, budget {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Runs `f` and folds its verdict and the time budget into one outcome.
pub fn timed<F>(id: usize, name: &'static str, budget_s: u64, f: F) -> CheckOutcome
where
    F: FnOnce() -> Result<(bool, String)>,
{
    let t = Instant::now();
    let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let elapsed = t.elapsed();
    let budget = Duration::from_secs(budget_s);
    let in_time = elapsed <= budget;
    CheckOutcome {
        id,
        name,
        passed: ok && in_time,
        detail: if in_time { detail } else { format!("{detail}; over time budget") },
        elapsed,
        budget,
    }
}

pub fn overhead_formulas() -> Result<(bool, String)> {
    let (a, d, p) = (analog_overhead(1, 4, 32, 16), digital_overhead(8, 1), pmi_overhead(16, 1));
    Ok((a == 128 && d == 8 && p == 4, format!("M_RF={a} M_BB={d} pmi={p}")))
}

pub fn estimation_error() -> Result<(bool, String)> {
    let (m, s) = mmse_estimation(1.0, 10.0, 10.0)?;
    let exact = (m - 1.0 / 101.0).abs() < 1e-12 && (s - 1000.0 / 111.0).abs() < 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for _ in 0..10_000 {
        let beta = rng.random_range(0.0..10.0);
        let zeta = rng.random_range(0.0..100.0);
        let snr = 10f64.powf(rng.random_range(-3.0..5.0));
        let (_, s) = mmse_estimation(beta, zeta, snr)?;
        if s > snr * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    Ok((exact && violations == 0, format!("closed form {}, {violations} bound violations in 1e4 draws", if exact { "ok" } else { "off" })))
}

pub fn gradient_check() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let dims = [rng.random_range(1..8), rng.random_range(2..12), rng.random_range(2..12), rng.random_range(1..4)];
        let out = if trial % 2 == 0 { OutputActivation::Identity } else { OutputActivation::Sigmoid };
        let net = Mlp::new(&dims, out, &mut rng)?;
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..dims[3]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (g, xg) = net.backward(&net.forward_cached(&x)?, &u)?;
        let (ng, nxg) = numeric_gradients(&net, &x, &u, 1e-5)?;
        worst = worst.max(max_relative_error(&g, &ng)).max(max_relative_error(&xg, &nxg));
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.2e} over 20 networks")))
}

fn first_within(scores: &[f64], rel: f64) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s >= max - rel * max.abs()).unwrap_or(0)
}

/// Downscaled instance: 4x2 mmWave arrays, 2 RF chains, 4-entry codebooks.
pub fn downscaled_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.mmwave.n_bs = 4;
    cfg.mmwave.n_ue = 2;
    cfg.mmwave.nu_bs = 4;
    cfg.mmwave.nu_ue = 4;
    cfg.mmwave.n_subcarriers = 4;
    cfg.mmwave.kappa_rvq = 3;
    cfg.mmwave.rvq_training = 256;
    cfg.sub6.n_ue = 2;
    cfg.sub6.nu_pmi = 4;
    cfg.sub6.n_subcarriers = 4;
    cfg.env.episode_len_decisions = 20;
    cfg
}

/// mmWave oracle rate by enumerating every ordered two-pair beam assignment
/// and keeping the lexicographically best pair scores.
pub fn brute_force_mmwave(env: &LinkEnv, slot: usize) -> Result<f64> {
    let a = env.assets();
    let cfg = &a.cfg.mmwave;
    let frame = env.source(Band::Mmwave).frame(slot);
    let snr = env.snr(Band::Mmwave, slot);
    let (nv, ng) = (a.f_cb.size(), a.w_cb.size());
    let score = |g: usize, v: usize| se_feedback(&frame, &a.w_cb.vectors[g], &a.f_cb.vectors[v], snr);
    let mut best: Option<((f64, f64), [usize; 4])> = None;
    for v1 in 0..nv {
        for g1 in 0..ng {
            for v2 in (0..nv).filter(|&v| v != v1) {
                for g2 in (0..ng).filter(|&g| g != g1) {
                    let key = (score(g1, v1), score(g2, v2));
                    if best.is_none_or(|(b, _)| key.0 > b.0 || (key.0 == b.0 && key.1 > b.1)) {
                        best = Some((key, [v1, g1, v2, g2]));
                    }
                }
            }
        }
    }
    let ((s1, s2), [v1, g1, v2, g2]) = best.expect("codebooks hold at least two beams");
    let sweep = AnalogSweep {
        f_rf: a.f_cb.columns(&[v1, v2]),
        w_rf: a.w_cb.columns(&[g1, g2]),
        f_idx: vec![v1, v2],
        w_idx: vec![g1, g2],
        pair_feedback: vec![s1, s2],
        best_feedback: s1,
    };
    let (p, g, noise) = (env.transmit_power_mw(), env.source(Band::Mmwave).large_scale_gain(slot), a.noise_var_mw(Band::Mmwave));
    let analog = spectral_efficiency_mmwave(&frame, &analog_only(&sweep, cfg.n_s, frame.len())?, p, g, noise)?;
    let w_h = sweep.w_rf.adjoint();
    let eff: Vec<CMat> = frame.iter().map(|h| &w_h * h * &sweep.f_rf).collect();
    let se = match digital_from_effective(&eff, &sweep, cfg.n_s, None) {
        Ok(d) => {
            let digital = spectral_efficiency_mmwave(&frame, &d.beamformers, p, g, noise)?;
            analog.iter().zip(&digital).map(|(x, y)| x.max(*y)).collect()
        }
        Err(_) => analog,
    };
    Ok(env.band_rate(Band::Mmwave, &se))
}

/// Sub-6 oracle rate by scanning every PMI entry on every subcarrier.
pub fn brute_force_sub6(env: &LinkEnv, slot: usize) -> Result<f64> {
    let a = env.assets();
    let frame = env.source(Band::Sub6).frame(slot);
    let (p, g, noise) = (env.transmit_power_mw(), env.source(Band::Sub6).large_scale_gain(slot), a.noise_var_mw(Band::Sub6));
    let mut se = Vec::with_capacity(frame.len());
    for h in &frame {
        let mut best = 0.0f64;
        for f in &a.pmi.precoders {
            let eff = h * f;
            let w = zf_combiner(&eff).unwrap_or(eff);
            let r = spectral_efficiency_sub6(std::slice::from_ref(h), std::slice::from_ref(f), &[w], p, g, noise)?[0];
            best = best.max(r);
        }
        se.push(best);
    }
    Ok(env.band_rate(Band::Sub6, &se))
}

pub fn oracle_equivalence() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cb = build_rvq_codebook(4, 2, 2, 256, 3)?;
    let mut rvq_mismatch = 0;
    for _ in 0..100 {
        let h = complex_gaussian(&mut rng, 2, 2);
        let (_, idx) = quantize_effective_channel(&h, &cb)?;
        let scan: Vec<f64> = cb.entries.iter().map(|e| spectral_norm(&(h.adjoint() * e))).collect();
        if idx != first_within(&scan, 1e-9) {
            rvq_mismatch += 1;
        }
    }
    let pmi = pmi_codebook(4, 2, 16, 2)?;
    let mut pmi_mismatch = 0;
    for _ in 0..100 {
        let p: Vec<CMat> = (0..2).map(|_| complex_gaussian(&mut rng, 4, 4)).collect();
        let (_, idx) = pmi_select(&p, &pmi)?;
        for (k, pk) in p.iter().enumerate() {
            let scan: Vec<f64> = pmi.precoders.iter().map(|f| (pk * f).norm()).collect();
            if idx[k] != first_within(&scan, 1e-12) {
                pmi_mismatch += 1;
            }
        }
    }
    let env = LinkEnv::for_episode(EnvAssets::new(&downscaled_config())?, 5, 0)?;
    let mut oracle_mismatch = 0;
    for slot in 0..200 {
        let mm = brute_force_mmwave(&env, slot)?;
        let s6 = brute_force_sub6(&env, slot)?;
        if genie_choice(&env, slot)?.1 != mm.max(s6) {
            oracle_mismatch += 1;
        }
        if oracle_rate(&env, Band::Mmwave, slot)? != mm {
            oracle_mismatch += 1;
        }
    }
    Ok((
        rvq_mismatch + pmi_mismatch + oracle_mismatch == 0,
        format!("mismatches: rvq {rvq_mismatch}/100, pmi {pmi_mismatch}/200, genie+greedy {oracle_mismatch}/400"),
    ))
}

pub fn beam_sweep() -> Result<(bool, String)> {
    let f_cb = dft_codebook(8, 8)?;
    let w_cb = dft_codebook(4, 4)?;
    let mut wrong = Vec::new();
    for j in 0..8 {
        let ar = ula_response(4, w_cb.angle(2));
        let at = ula_response(8, f_cb.angle(j));
        let h = CMat::from_fn(4, 8, |r, c| ar[r] * at[c].conj());
        let s = analog_sweep(&vec![h; 4], &f_cb, &w_cb, 2, 2, 10.0)?;
        if s.f_idx[0] != j {
            wrong.push(j);
        }
    }
    Ok((wrong.is_empty(), format!("misaligned beams: {wrong:?}")))
}

pub fn reward_and_masking() -> Result<(bool, String)> {
    let mut cfg = ScenarioConfig::desk();
    cfg.mmwave.kappa_rvq = 3;
    cfg.mmwave.rvq_training = 256;
    cfg.env.episode_len_decisions = 500;
    let assets = EnvAssets::new(&cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut steps, mut bad_reward, mut episode) = (0usize, 0usize, 0usize);
    while steps < 10_000 {
        let mut env = LinkEnv::for_episode(assets.clone(), 6, episode)?;
        episode += 1;
        while !env.is_done() && steps < 10_000 {
            let a = env.random_action(&mut rng);
            let o = env.step(a)?;
            if o.slots_consumed == 0 {
                break;
            }
            if o.reward != f64::from(o.c_flag) * o.rate {
                bad_reward += 1;
            }
            steps += 1;
        }
    }
    let mut masked = 0;
    for i in 0..100_000 {
        let scheme = if i % 2 == 0 { Scheme::ThreeThreshold } else { Scheme::HrlLower };
        let t: Vec<f64> = (0..scheme.action_dim()).map(|_| rng.random_range(0.0..20.0)).collect();
        let fb = rng.random_range(0.0..20.0);
        if thresholds_to_action(Band::Sub6, fb, &t, scheme) == EnvAction::AnalogTraining {
            masked += 1;
        }
    }
    Ok((bad_reward == 0 && masked == 0, format!("{bad_reward} reward mismatches in {steps} steps, {masked} sub-6 analog actions in 1e5 draws")))
}

pub fn round_skip_law() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m_rf = 8;
    let mut worst = 0.0f64;
    for q in [0.6, 0.8, 1.0] {
        let n = 100_000;
        let kept = (0..n).filter(|_| !round_skip(q, m_rf, &mut rng)).count();
        let p = non_skip_probability(q, m_rf);
        let expected = (m_rf as f64 / (2 * m_rf - 1) as f64 / q).min(1.0);
        worst = worst.max((kept as f64 / n as f64 - expected).abs()).max((p - expected).abs());
    }
    Ok((worst < 0.01, format!("max deviation {worst:.4}")))
}

/// Criteria that run in seconds.
pub fn run_fast_checks() -> Vec<CheckOutcome> {
    vec![
        timed(1, "overhead formulas", 1, overhead_formulas),
        timed(2, "estimation error model", 1, estimation_error),
        timed(3, "gradient correctness", 10, gradient_check),
        timed(4, "oracle equivalence", 30, oracle_equivalence),
        timed(5, "beam sweep", 5, beam_sweep),
        timed(6, "reward and masking", 10, reward_and_masking),
        timed(7, "round-skip law", 5, round_skip_law),
    ]
}
