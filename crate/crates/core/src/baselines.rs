//! Oracle policies with perfect channel knowledge and no training overhead.
//!
//! Every decision is a data transmission. mmWave beams come from the same
//! greedy sweep the learners use, run on the true channel, followed by
//! unquantized digital precoding on the exact effective channel where that
//! beats the analog beams alone. Sub-6 picks,
//! per subcarrier, the PMI entry whose zero-forcing link has the highest rate.

use std::cell::Cell;

use crate::config::Band;
use crate::env::{DecisionRecord, EnvAction, EpisodeLog, LinkEnv};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::mmwave::{analog_only, analog_sweep, digital_from_effective, spectral_efficiency_mmwave, whitened_log_det};
use crate::sub6::zf_combiner;

/// Per-subcarrier mmWave spectral efficiency of the oracle beams: the better
/// of pseudo-inverse precoding on the exact effective channel and plain
/// analog beams, subcarrier by subcarrier.
pub fn oracle_mmwave_se(env: &LinkEnv, frame: &[CMat], slot: usize) -> Result<Vec<f64>> {
    let assets = env.assets();
    let cfg = &assets.cfg.mmwave;
    let snr = env.snr(Band::Mmwave, slot);
    let sweep = analog_sweep(frame, &assets.f_cb, &assets.w_cb, cfg.n_bs_rf, cfg.n_ue_rf, snr)?;
    let g = env.source(Band::Mmwave).large_scale_gain(slot);
    let (p, noise) = (env.transmit_power_mw(), assets.noise_var_mw(Band::Mmwave));
    let analog = spectral_efficiency_mmwave(frame, &analog_only(&sweep, cfg.n_s, frame.len())?, p, g, noise)?;
    let w_h = sweep.w_rf.adjoint();
    let effective: Vec<CMat> = frame.iter().map(|h| &w_h * h * &sweep.f_rf).collect();
    let digital = match digital_from_effective(&effective, &sweep, cfg.n_s, None) {
        Ok(d) => spectral_efficiency_mmwave(frame, &d.beamformers, p, g, noise)?,
        Err(Error::Singular(_)) => return Ok(analog),
        Err(e) => return Err(e),
    };
    Ok(analog.iter().zip(&digital).map(|(a, d)| a.max(*d)).collect())
}

/// Per-subcarrier sub-6 spectral efficiency of the best PMI entry.
pub fn oracle_sub6_se(env: &LinkEnv, frame: &[CMat], slot: usize) -> Result<Vec<f64>> {
    let snr = env.snr(Band::Sub6, slot);
    let cb = &env.assets().pmi;
    frame
        .iter()
        .map(|h| {
            let mut best = 0.0f64;
            for f in &cb.precoders {
                let eff = h * f;
                let w = match zf_combiner(&eff) {
                    Ok(w) => w,
                    Err(Error::Singular(_)) => eff,
                    Err(e) => return Err(e),
                };
                let r = whitened_log_det(h, &w, f, snr)?;
                if r > best {
                    best = r;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Oracle rate of `band` at `slot`, bps.
pub fn oracle_rate(env: &LinkEnv, band: Band, slot: usize) -> Result<f64> {
    let frame = env.source(band).frame(slot);
    let se = match band {
        Band::Mmwave => oracle_mmwave_se(env, &frame, slot)?,
        Band::Sub6 => oracle_sub6_se(env, &frame, slot)?,
    };
    Ok(env.band_rate(band, &se))
}

/// Genie choice at `slot`: the band with the higher oracle rate (mmWave on ties).
pub fn genie_choice(env: &LinkEnv, slot: usize) -> Result<(Band, f64)> {
    let mm = oracle_rate(env, Band::Mmwave, slot)?;
    let s6 = oracle_rate(env, Band::Sub6, slot)?;
    Ok(if s6 > mm { (Band::Sub6, s6) } else { (Band::Mmwave, mm) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    Genie,
    /// Genie restricted to mmWave.
    Greedy,
}

/// One oracle decision: data at the oracle rate for `M_DT` slots.
pub fn oracle_step(env: &mut LinkEnv, oracle: Oracle) -> Result<Option<DecisionRecord>> {
    let chosen = Cell::new(Band::Mmwave);
    let out = env.step_with(EnvAction::DataTransmission, |env, _band, _frame, slot| {
        let (band, rate) = match oracle {
            Oracle::Genie => genie_choice(env, slot)?,
            Oracle::Greedy => (Band::Mmwave, oracle_rate(env, Band::Mmwave, slot)?),
        };
        chosen.set(band);
        Ok(rate)
    })?;
    if out.slots_consumed == 0 {
        return Ok(None);
    }
    Ok(Some(DecisionRecord {
        action: out.action,
        band: chosen.get(),
        reward: out.reward,
        slots: out.slots_consumed,
        feedback: 0.0,
        thresholds: Vec::new(),
    }))
}

pub fn run_oracle_episode(env: &mut LinkEnv, oracle: Oracle) -> Result<EpisodeLog> {
    env.reset();
    let mut log = EpisodeLog::default();
    while !env.is_done() {
        match oracle_step(env, oracle)? {
            Some(d) => log.decisions.push(d),
            None => break,
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvAssets;
    use crate::ScenarioConfig;

    fn env(seed: u64, len: usize) -> LinkEnv {
        let mut cfg = ScenarioConfig::desk();
        cfg.mmwave.kappa_rvq = 3;
        cfg.mmwave.rvq_training = 256;
        cfg.env.episode_len_decisions = len;
        LinkEnv::for_episode(EnvAssets::new(&cfg).unwrap(), seed, 0).unwrap()
    }

    #[test]
    fn greedy_never_beats_genie_and_matches_on_mmwave() {
        let e = env(1, 30);
        for slot in (0..200).step_by(7) {
            let (band, g) = genie_choice(&e, slot).unwrap();
            let gr = oracle_rate(&e, Band::Mmwave, slot).unwrap();
            assert!(gr <= g);
            if band == Band::Mmwave {
                assert_eq!(gr, g);
            }
        }
    }

    #[test]
    fn genie_dominates_learned_beams() {
        let mut e = env(2, 40);
        e.step(EnvAction::DigitalTraining).unwrap();
        for _ in 0..10 {
            let slot = e.state().slot + e.assets().cfg.env.m_dt - 1;
            let (_, g) = genie_choice(&e, slot).unwrap();
            let o = e.step(EnvAction::DataTransmission).unwrap();
            assert!(o.rate <= g * (1.0 + 1e-12), "{} > {}", o.rate, g);
        }
    }

    #[test]
    fn oracle_episode_is_all_data() {
        let mut e = env(3, 25);
        let log = run_oracle_episode(&mut e, Oracle::Genie).unwrap();
        assert_eq!(log.len(), 25);
        assert!(log.decisions.iter().all(|d| d.action == EnvAction::DataTransmission));
        assert_eq!(log.training_fraction(), 0.0);
        let log = run_oracle_episode(&mut e, Oracle::Greedy).unwrap();
        assert_eq!(log.mmwave_occupancy(), 1.0);
    }
}
