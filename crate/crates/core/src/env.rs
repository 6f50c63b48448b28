//! Sequential decision environment over a pair of band channels.
//!
//! Each decision executes one [`EnvAction`], which occupies a whole number of
//! slots: the analog sweep `M_RF`, mmWave digital training `M_BB`, sub-6
//! training `M_BB` (PMI), data `M_DT`, or a one-slot band switch. Beam
//! management always runs on the channel of the last slot of its span, and
//! data rates are measured there too, so long procedures let the channel
//! drift before they pay off.
//!
//! Feature layout (all entries in `[0, 1]`):
//!
//! | index | meaning |
//! |---|---|
//! | 0 | band flag (1 = mmWave) |
//! | 1 | mmWave feedback / running max |
//! | 2 | sub-6 feedback / running max |
//! | 3 .. 3+R_bs | BS beam index / ν_BS per RF chain |
//! | .. +R_ue | UE beam index / ν_UE per RF chain |
//! | next | mean RVQ index / 2^κ_RVQ |
//! | next | mean PMI index / ν_PMI |
//! | next | mmWave slots since training / M_RF (capped) |
//! | next | sub-6 slots since training / M_RF (capped) |
//! | last | mode flag (1 = data) |

use std::sync::Arc;

use rand::Rng;

use crate::channel::geometry::{generate_geometric, BandConfig, GeometricChannel};
use crate::channel::mobility::generate_trajectory;
use crate::channel::trace::ChannelSource;
use crate::config::{Band, ScenarioConfig};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::mmwave::{
    self, analog_only, analog_sweep, digital_from_effective, dft_codebook, estimate_effective_channel,
    mmse_estimation, spectral_efficiency_mmwave, AnalogCodebook, AnalogSweep, HybridBeamformers, RvqCodebook,
};
use crate::rng::{self, tag, SimRng};
use crate::sub6::{self, csi_with_error, pmi_codebook, se_feedback_sub6, spectral_efficiency_sub6, PmiCodebook, Sub6Beams};

/// Thermal noise density, dBm/Hz.
const NOISE_DENSITY_DBM_HZ: f64 = -174.0;
/// Feedback scale assumed before any feedback has been observed, bps/Hz.
pub const INITIAL_FEEDBACK_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvAction {
    SwitchBand,
    AnalogTraining,
    DigitalTraining,
    DataTransmission,
}

impl EnvAction {
    /// Position on the ladder switch < analog < digital < data.
    pub fn rank(self) -> u8 {
        match self {
            EnvAction::SwitchBand => 0,
            EnvAction::AnalogTraining => 1,
            EnvAction::DigitalTraining => 2,
            EnvAction::DataTransmission => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvAction::SwitchBand => "switch",
            EnvAction::AnalogTraining => "analog",
            EnvAction::DigitalTraining => "digital",
            EnvAction::DataTransmission => "data",
        }
    }

    pub fn is_training(self) -> bool {
        matches!(self, EnvAction::AnalogTraining | EnvAction::DigitalTraining)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// `[τ_switch, τ_RF, τ_BB]`, `τ_RF` masked at sub-6.
    ThreeThreshold,
    /// `[τ_A, τ_D]`, `τ_A` masked at sub-6.
    HrlLower,
}

impl Scheme {
    pub fn action_dim(self) -> usize {
        match self {
            Scheme::ThreeThreshold => 3,
            Scheme::HrlLower => 2,
        }
    }
}

/// Maps feedback and (sorted) thresholds to an environment action.
pub fn thresholds_to_action(band: Band, feedback: f64, thresholds: &[f64], scheme: Scheme) -> EnvAction {
    let mut t = thresholds.to_vec();
    t.sort_by(f64::total_cmp);
    match (scheme, band) {
        (Scheme::ThreeThreshold, Band::Mmwave) => {
            if feedback < t[0] {
                EnvAction::SwitchBand
            } else if feedback < t[1] {
                EnvAction::AnalogTraining
            } else if feedback < t[2] {
                EnvAction::DigitalTraining
            } else {
                EnvAction::DataTransmission
            }
        }
        (Scheme::ThreeThreshold, Band::Sub6) => {
            if feedback < t[0] {
                EnvAction::SwitchBand
            } else if feedback < t[2] {
                EnvAction::DigitalTraining
            } else {
                EnvAction::DataTransmission
            }
        }
        (Scheme::HrlLower, Band::Mmwave) => {
            if feedback < t[0] {
                EnvAction::AnalogTraining
            } else if feedback < t[1] {
                EnvAction::DigitalTraining
            } else {
                EnvAction::DataTransmission
            }
        }
        (Scheme::HrlLower, Band::Sub6) => {
            if feedback < t[1] {
                EnvAction::DigitalTraining
            } else {
                EnvAction::DataTransmission
            }
        }
    }
}

/// Codebooks and constants shared by every episode of a scenario.
#[derive(Debug)]
pub struct EnvAssets {
    pub cfg: ScenarioConfig,
    pub f_cb: AnalogCodebook,
    pub w_cb: AnalogCodebook,
    pub rvq: Arc<RvqCodebook>,
    pub pmi: PmiCodebook,
    pub m_rf: usize,
    pub m_bb: usize,
    pub m_bb_sub6: usize,
}

impl EnvAssets {
    pub fn new(cfg: &ScenarioConfig) -> Result<Arc<Self>> {
        cfg.validate()?;
        let mm = &cfg.mmwave;
        let (nu_bs, nu_ue) = mm.codebook_sizes();
        let rvq = mmwave::rvq_codebook_cached(mm.kappa_rvq, mm.n_s, mm.n_s, mm.rvq_training, cfg.channel.seed)?;
        let s6 = &cfg.sub6;
        Ok(Arc::new(Self {
            cfg: cfg.clone(),
            f_cb: dft_codebook(mm.n_bs, nu_bs)?,
            w_cb: dft_codebook(mm.n_ue, nu_ue)?,
            rvq,
            pmi: pmi_codebook(s6.n_bs, s6.n_s, s6.nu_pmi, s6.pmi_oversampling)?,
            m_rf: mm.analog_overhead(),
            m_bb: mm.digital_overhead(),
            m_bb_sub6: s6.pmi_overhead(),
        }))
    }

    pub fn slots_for(&self, band: Band, action: EnvAction) -> usize {
        match (action, band) {
            (EnvAction::SwitchBand, _) => 1,
            (EnvAction::AnalogTraining, _) => self.m_rf,
            (EnvAction::DigitalTraining, Band::Mmwave) => self.m_bb,
            (EnvAction::DigitalTraining, Band::Sub6) => self.m_bb_sub6,
            (EnvAction::DataTransmission, _) => self.cfg.env.m_dt,
        }
    }

    /// Longest span any single decision can occupy, including a preceding switch.
    pub fn max_decision_slots(&self) -> usize {
        1 + self.m_rf.max(self.m_bb).max(self.m_bb_sub6).max(self.cfg.env.m_dt).max(1)
    }

    pub fn stale_horizon(&self) -> usize {
        match self.cfg.env.stale_horizon_slots {
            0 => 2 * self.m_rf,
            h => h,
        }
    }

    pub fn feature_len(&self) -> usize {
        8 + self.cfg.mmwave.n_bs_rf + self.cfg.mmwave.n_ue_rf
    }

    pub fn noise_var_mw(&self, band: Band) -> f64 {
        let b = match band {
            Band::Mmwave => self.cfg.mmwave.bandwidth_hz,
            Band::Sub6 => self.cfg.sub6.bandwidth_hz,
        };
        dbm_to_mw(NOISE_DENSITY_DBM_HZ + 10.0 * b.log10() + self.cfg.channel.noise_figure_db)
    }

    pub fn bandwidth(&self, band: Band) -> f64 {
        match band {
            Band::Mmwave => self.cfg.mmwave.bandwidth_hz,
            Band::Sub6 => self.cfg.sub6.bandwidth_hz,
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Data,
}

#[derive(Debug, Clone)]
pub struct BeamState {
    pub band: Band,
    pub mode: Mode,
    pub sweep: Option<AnalogSweep>,
    pub mm_beams: Option<HybridBeamformers>,
    pub rvq_index: Vec<usize>,
    pub sub6_beams: Option<Sub6Beams>,
    pub feedback_mm: f64,
    pub feedback_sub6: f64,
    /// Slot at which each band (sub-6, mmWave) last completed training.
    pub last_training: [Option<usize>; 2],
    /// Slot at which each band was last active.
    pub last_active: [usize; 2],
    pub stale: [bool; 2],
    /// Slot cursor: the next slot to be consumed.
    pub slot: usize,
    pub slots_remaining_in_mode: usize,
}

impl BeamState {
    fn initial(band: Band) -> Self {
        Self {
            band,
            mode: Mode::Training,
            sweep: None,
            mm_beams: None,
            rvq_index: Vec::new(),
            sub6_beams: None,
            feedback_mm: 0.0,
            feedback_sub6: 0.0,
            last_training: [None, None],
            last_active: [0, 0],
            stale: [false, false],
            slot: 0,
            slots_remaining_in_mode: 0,
        }
    }

    pub fn feedback(&self, band: Band) -> f64 {
        match band {
            Band::Mmwave => self.feedback_mm,
            Band::Sub6 => self.feedback_sub6,
        }
    }

    fn feedback_mut(&mut self, band: Band) -> &mut f64 {
        match band {
            Band::Mmwave => &mut self.feedback_mm,
            Band::Sub6 => &mut self.feedback_sub6,
        }
    }
}

/// Normalized feature vector; see the module docs for the layout.
pub fn featurize(state: &BeamState, assets: &EnvAssets, feedback_scale: f64) -> Vec<f64> {
    let mm = &assets.cfg.mmwave;
    let scale = feedback_scale.max(f64::MIN_POSITIVE);
    let mut x = Vec::with_capacity(assets.feature_len());
    x.push(f64::from(state.band.indicator()));
    x.push((state.feedback_mm / scale).clamp(0.0, 1.0));
    x.push((state.feedback_sub6 / scale).clamp(0.0, 1.0));
    let (nu_bs, nu_ue) = (assets.f_cb.size() as f64, assets.w_cb.size() as f64);
    for i in 0..mm.n_bs_rf {
        x.push(state.sweep.as_ref().map_or(0.0, |s| s.f_idx[i] as f64 / nu_bs));
    }
    for i in 0..mm.n_ue_rf {
        x.push(state.sweep.as_ref().map_or(0.0, |s| s.w_idx[i] as f64 / nu_ue));
    }
    let mean_idx = |v: &[usize], n: f64| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<usize>() as f64 / v.len() as f64 / n
        }
    };
    x.push(mean_idx(&state.rvq_index, assets.rvq.len() as f64));
    x.push(state.sub6_beams.as_ref().map_or(0.0, |b| mean_idx(&b.pmi_index, assets.pmi.size() as f64)));
    for band in [Band::Mmwave, Band::Sub6] {
        let since = match state.last_training[band.indicator() as usize] {
            Some(t) => (state.slot.saturating_sub(t)) as f64 / assets.m_rf as f64,
            None => 1.0,
        };
        x.push(since.clamp(0.0, 1.0));
    }
    x.push(if state.mode == Mode::Data { 1.0 } else { 0.0 });
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub action: EnvAction,
    /// Band the action ran on.
    pub band: Band,
    /// `c * rate`, bps.
    pub reward: f64,
    /// Data rate with the current beamformers, bps; zero for training.
    pub rate: f64,
    pub c_flag: bool,
    pub slots_consumed: usize,
    /// Feedback of the band the action ran on, after the action.
    pub feedback: f64,
    pub features: Vec<f64>,
    pub done: bool,
}

/// `sum c R` over an episode.
pub fn episode_return(outcomes: &[StepOutcome]) -> f64 {
    outcomes.iter().map(|o| if o.c_flag { o.rate } else { 0.0 }).sum()
}

pub struct LinkEnv {
    assets: Arc<EnvAssets>,
    mm: Arc<dyn ChannelSource>,
    s6: Arc<dyn ChannelSource>,
    state: BeamState,
    rng: SimRng,
    p_mw: f64,
    feedback_scale: f64,
    max_feedback: f64,
    decisions: usize,
    /// Switch slots charged to the next decision.
    pending_slots: usize,
}

impl LinkEnv {
    /// Environment over explicit channel sources.
    pub fn new(assets: Arc<EnvAssets>, mm: Arc<dyn ChannelSource>, s6: Arc<dyn ChannelSource>, seed: u64) -> Result<Self> {
        if mm.n_slots() != s6.n_slots() {
            return Err(Error::config(format!(
                "band traces differ in length ({} vs {} slots)",
                mm.n_slots(),
                s6.n_slots()
            )));
        }
        let cfg = &assets.cfg;
        if mm.band() != Band::Mmwave || s6.band() != Band::Sub6 {
            return Err(Error::config("expected an mmWave trace and a sub-6 trace"));
        }
        if (mm.n_tx(), mm.n_rx()) != (cfg.mmwave.n_bs, cfg.mmwave.n_ue) || (s6.n_tx(), s6.n_rx()) != (cfg.sub6.n_bs, cfg.sub6.n_ue) {
            return Err(Error::config("trace antenna counts do not match the band configuration"));
        }
        let p_mw = dbm_to_mw(cfg.env.transmit_power_dbm);
        let mut env = Self {
            state: BeamState::initial(cfg.env.initial_band),
            assets,
            mm,
            s6,
            rng: rng::stream(seed, &[tag("env-noise")]),
            p_mw,
            feedback_scale: INITIAL_FEEDBACK_SCALE,
            max_feedback: 0.0,
            decisions: 0,
            pending_slots: 0,
        };
        env.reset();
        Ok(env)
    }

    /// Fresh geometric channels for one episode, long enough for
    /// `episode_len_decisions` decisions of the longest kind.
    pub fn for_episode(assets: Arc<EnvAssets>, seed: u64, episode: usize) -> Result<Self> {
        let ep_seed = rng::derive_seed(seed, &[tag("episode"), episode as u64]);
        let (mm, s6) = episode_channels(&assets, seed, episode)?;
        Self::new(assets, Arc::new(mm), Arc::new(s6), ep_seed)
    }

    /// Back to slot 0 with no valid beamformers; returns the features.
    pub fn reset(&mut self) -> Vec<f64> {
        self.state = BeamState::initial(self.assets.cfg.env.initial_band);
        self.decisions = 0;
        self.pending_slots = 0;
        self.features()
    }

    pub fn assets(&self) -> &Arc<EnvAssets> {
        &self.assets
    }

    pub fn state(&self) -> &BeamState {
        &self.state
    }

    pub fn band(&self) -> Band {
        self.state.band
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    pub fn transmit_power_mw(&self) -> f64 {
        self.p_mw
    }

    pub fn set_transmit_power_dbm(&mut self, dbm: f64) {
        self.p_mw = dbm_to_mw(dbm);
    }

    /// Normalizer for the feedback features (a running max kept by the learner).
    pub fn set_feedback_scale(&mut self, scale: f64) {
        self.feedback_scale = scale.max(f64::MIN_POSITIVE);
    }

    pub fn feedback_scale(&self) -> f64 {
        self.feedback_scale
    }

    /// Largest feedback observed in this environment.
    pub fn max_feedback(&self) -> f64 {
        self.max_feedback
    }

    pub fn features(&self) -> Vec<f64> {
        featurize(&self.state, &self.assets, self.feedback_scale)
    }

    pub fn source(&self, band: Band) -> &Arc<dyn ChannelSource> {
        match band {
            Band::Mmwave => &self.mm,
            Band::Sub6 => &self.s6,
        }
    }

    pub fn n_slots(&self) -> usize {
        self.mm.n_slots()
    }

    /// True once the episode's decision budget or the trace is exhausted.
    pub fn is_done(&self) -> bool {
        self.decisions >= self.assets.cfg.env.episode_len_decisions
            || self.state.slot + self.assets.max_decision_slots() > self.n_slots()
    }

    /// Linear `P G / noise` at `slot`.
    pub fn snr(&self, band: Band, slot: usize) -> f64 {
        self.p_mw * self.source(band).large_scale_gain(slot) / self.assets.noise_var_mw(band)
    }

    /// Rate of `band`: bandwidth times mean spectral efficiency.
    pub fn band_rate(&self, band: Band, per_subcarrier: &[f64]) -> f64 {
        if per_subcarrier.is_empty() {
            return 0.0;
        }
        self.assets.bandwidth(band) * per_subcarrier.iter().sum::<f64>() / per_subcarrier.len() as f64
    }

    /// Rate of the current beamformers of `band` against `frame` at `slot`.
    pub fn rate_with_current(&self, band: Band, frame: &[CMat], slot: usize) -> Result<f64> {
        let g = self.source(band).large_scale_gain(slot);
        let noise = self.assets.noise_var_mw(band);
        let se = match band {
            Band::Mmwave => match &self.state.mm_beams {
                Some(bf) => spectral_efficiency_mmwave(frame, bf, self.p_mw, g, noise)?,
                None => return Ok(0.0),
            },
            Band::Sub6 => match &self.state.sub6_beams {
                Some(b) => spectral_efficiency_sub6(frame, &b.f_bb, &b.w_bb, self.p_mw, g, noise)?,
                None => return Ok(0.0),
            },
        };
        Ok(self.band_rate(band, &se))
    }

    /// Perfect, instantaneous feedback of the current beams on `band`.
    fn refresh_feedback(&mut self, band: Band, frame: &[CMat], slot: usize) -> Result<f64> {
        let snr = self.snr(band, slot);
        let fb = match band {
            Band::Mmwave => match &self.state.sweep {
                Some(sweep) => {
                    let cfg = &self.assets.cfg.mmwave;
                    let (_, snr_eff) = mmse_estimation(cfg.beta_rf, cfg.zeta_rf, snr)?;
                    let p = sweep.strongest_pairs(1)[0];
                    mmwave::se_feedback(
                        frame,
                        &sweep.w_rf.column(p).into_owned(),
                        &sweep.f_rf.column(p).into_owned(),
                        snr_eff,
                    )
                }
                None => 0.0,
            },
            Band::Sub6 => match &self.state.sub6_beams {
                Some(b) => se_feedback_sub6(frame, &b.f_bb, &b.w_bb, snr),
                None => 0.0,
            },
        };
        *self.state.feedback_mut(band) = fb;
        self.max_feedback = self.max_feedback.max(fb);
        Ok(fb)
    }

    /// Flips the band if `band` differs from the current one, at a cost of
    /// one slot charged to the next decision. Returns whether a switch happened.
    pub fn set_band(&mut self, band: Band) -> bool {
        if band == self.state.band {
            return false;
        }
        self.switch_band_now();
        self.pending_slots += 1;
        true
    }

    fn switch_band_now(&mut self) {
        let old = self.state.band;
        self.state.last_active[old.indicator() as usize] = self.state.slot;
        self.state.slot += 1;
        let new = old.other();
        self.state.band = new;
        let idle = self.state.slot.saturating_sub(self.state.last_active[new.indicator() as usize]);
        let has_beams = match new {
            Band::Mmwave => self.state.sweep.is_some(),
            Band::Sub6 => self.state.sub6_beams.is_some(),
        };
        if has_beams && idle > self.assets.stale_horizon() && !self.state.stale[new.indicator() as usize] {
            self.state.stale[new.indicator() as usize] = true;
            *self.state.feedback_mut(new) *= 0.5;
        }
    }

    fn finished(&self, action: EnvAction) -> StepOutcome {
        StepOutcome {
            action,
            band: self.state.band,
            reward: 0.0,
            rate: 0.0,
            c_flag: false,
            slots_consumed: 0,
            feedback: self.state.feedback(self.state.band),
            features: self.features(),
            done: true,
        }
    }

    /// Executes one decision.
    pub fn step(&mut self, action: EnvAction) -> Result<StepOutcome> {
        self.step_with(action, |env, band, frame, slot| env.rate_with_current(band, frame, slot))
    }

    /// Executes one decision; data rates come from `rate_fn(env, band, frame, slot)`.
    /// Oracle policies use this to substitute their own beamformers.
    pub(crate) fn step_with<F>(&mut self, action: EnvAction, rate_fn: F) -> Result<StepOutcome>
    where
        F: FnOnce(&Self, Band, &[CMat], usize) -> Result<f64>,
    {
        if self.is_done() {
            return Ok(self.finished(action));
        }
        let band = self.state.band;
        if action == EnvAction::AnalogTraining && band == Band::Sub6 {
            return Err(Error::domain("analog training is not available at sub-6"));
        }
        let span = self.assets.slots_for(band, action);
        if action == EnvAction::SwitchBand {
            self.switch_band_now();
            let slots = span + std::mem::take(&mut self.pending_slots);
            self.decisions += 1;
            self.state.mode = Mode::Training;
            let new_band = self.state.band;
            return Ok(StepOutcome {
                action,
                band,
                reward: 0.0,
                rate: 0.0,
                c_flag: false,
                slots_consumed: slots,
                feedback: self.state.feedback(new_band),
                features: self.features(),
                done: self.is_done(),
            });
        }

        let end = self.state.slot + span - 1;
        let frame = self.source(band).frame(end);
        let snr = self.snr(band, end);
        let mut rate = 0.0;
        match (action, band) {
            (EnvAction::AnalogTraining, _) => {
                let cfg = &self.assets.cfg.mmwave;
                let (_, snr_eff) = mmse_estimation(cfg.beta_rf, cfg.zeta_rf, snr)?;
                let sweep = analog_sweep(&frame, &self.assets.f_cb, &self.assets.w_cb, cfg.n_bs_rf, cfg.n_ue_rf, snr_eff)?;
                self.state.mm_beams = Some(analog_only(&sweep, cfg.n_s, frame.len())?);
                self.state.sweep = Some(sweep);
                self.state.rvq_index.clear();
                self.state.last_training[1] = Some(end + 1);
                self.state.stale[1] = false;
            }
            (EnvAction::DigitalTraining, Band::Mmwave) => {
                if let Some(sweep) = self.state.sweep.clone() {
                    let cfg = &self.assets.cfg.mmwave;
                    let est = estimate_effective_channel(
                        &frame,
                        &sweep.f_rf,
                        &sweep.w_rf,
                        cfg.beta_bb,
                        cfg.zeta_bb,
                        cfg.n_bs,
                        snr,
                        &mut self.rng,
                    )?;
                    match digital_from_effective(&est, &sweep, cfg.n_s, Some(&self.assets.rvq)) {
                        Ok(d) => {
                            self.state.mm_beams = Some(d.beamformers);
                            self.state.rvq_index = d.rvq_index;
                        }
                        // a singular estimate leaves the previous beamformers in place
                        Err(Error::Singular(_)) => {}
                        Err(e) => return Err(e),
                    }
                    self.state.last_training[1] = Some(end + 1);
                    self.state.stale[1] = false;
                }
            }
            (EnvAction::DigitalTraining, Band::Sub6) => {
                let cfg = &self.assets.cfg.sub6;
                let csi = csi_with_error(&frame, cfg.beta, cfg.zeta, cfg.n_bs, snr, &mut self.rng)?;
                self.state.sub6_beams = Some(sub6::train_on_csi(&csi, &self.assets.pmi)?);
                self.state.last_training[0] = Some(end + 1);
                self.state.stale[0] = false;
            }
            (EnvAction::DataTransmission, _) => {
                rate = rate_fn(self, band, &frame, end)?;
            }
            (EnvAction::SwitchBand, _) => unreachable!("handled above"),
        }
        self.state.slot = end + 1;
        self.state.last_active[band.indicator() as usize] = self.state.slot;
        self.state.mode = if action == EnvAction::DataTransmission { Mode::Data } else { Mode::Training };
        let feedback = self.refresh_feedback(band, &frame, end)?;
        self.decisions += 1;
        let c_flag = action == EnvAction::DataTransmission;
        Ok(StepOutcome {
            action,
            band,
            reward: if c_flag { rate } else { 0.0 },
            rate,
            c_flag,
            slots_consumed: span + std::mem::take(&mut self.pending_slots),
            feedback,
            features: self.features(),
            done: self.is_done(),
        })
    }

    /// Random (uniform) draw over actions valid in the current band.
    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvAction {
        let all = match self.state.band {
            Band::Mmwave => &[
                EnvAction::SwitchBand,
                EnvAction::AnalogTraining,
                EnvAction::DigitalTraining,
                EnvAction::DataTransmission,
            ][..],
            Band::Sub6 => &[EnvAction::SwitchBand, EnvAction::DigitalTraining, EnvAction::DataTransmission][..],
        };
        all[rng.random_range(0..all.len())]
    }
}

/// The (mmWave, sub-6) channels of one episode, sharing a trajectory.
pub fn episode_channels(assets: &EnvAssets, seed: u64, episode: usize) -> Result<(GeometricChannel, GeometricChannel)> {
    let cfg = &assets.cfg;
    let ep_seed = rng::derive_seed(seed, &[tag("episode"), episode as u64]);
    let n_slots = cfg.env.episode_len_decisions * assets.max_decision_slots() + 1;
    let ch = &cfg.channel;
    let traj = generate_trajectory(&ch.grid, ch.speed_mps, n_slots, ch.slot_duration_s, ep_seed)?;
    let mm = generate_geometric(&traj, &BandConfig::mmwave(ch, &cfg.mmwave), ch, ch.blocker_density, ep_seed)?;
    let s6 = generate_geometric(&traj, &BandConfig::sub6(ch, &cfg.sub6), ch, ch.blocker_density, ep_seed)?;
    Ok((mm, s6))
}

/// What a learner needs from an environment.
pub trait DecisionEnv {
    fn reset(&mut self) -> Vec<f64>;
    fn band(&self) -> Band;
    /// Feedback of the current band.
    fn feedback(&self) -> f64;
    fn step(&mut self, action: EnvAction) -> Result<StepOutcome>;
    /// Moves to `band`, charging the switch to the next decision.
    fn set_band(&mut self, band: Band) -> bool;
    fn is_done(&self) -> bool;
    fn set_feedback_scale(&mut self, scale: f64);
    fn max_feedback(&self) -> f64;
    /// Slots one analog sweep occupies.
    fn m_rf(&self) -> usize;
}

impl DecisionEnv for LinkEnv {
    fn reset(&mut self) -> Vec<f64> {
        LinkEnv::reset(self)
    }
    fn band(&self) -> Band {
        self.state.band
    }
    fn feedback(&self) -> f64 {
        self.state.feedback(self.state.band)
    }
    fn step(&mut self, action: EnvAction) -> Result<StepOutcome> {
        LinkEnv::step(self, action)
    }
    fn set_band(&mut self, band: Band) -> bool {
        LinkEnv::set_band(self, band)
    }
    fn is_done(&self) -> bool {
        LinkEnv::is_done(self)
    }
    fn set_feedback_scale(&mut self, scale: f64) {
        LinkEnv::set_feedback_scale(self, scale)
    }
    fn max_feedback(&self) -> f64 {
        self.max_feedback
    }
    fn m_rf(&self) -> usize {
        self.assets.m_rf
    }
}

/// One decision as seen by the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub action: EnvAction,
    pub band: Band,
    pub reward: f64,
    pub slots: usize,
    /// Feedback the decision was based on.
    pub feedback: f64,
    /// Thresholds in bps/Hz (empty for oracle policies).
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub decisions: Vec<DecisionRecord>,
}

impl EpisodeLog {
    pub fn push(&mut self, outcome: &StepOutcome, feedback: f64, thresholds: Vec<f64>) {
        self.decisions.push(DecisionRecord {
            action: outcome.action,
            band: outcome.band,
            reward: outcome.reward,
            slots: outcome.slots_consumed,
            feedback,
            thresholds,
        });
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Per-decision mean of `c R`.
    pub fn mean_reward(&self) -> f64 {
        mean(self.decisions.iter().map(|d| d.reward))
    }

    /// Mean reward over the last `window` decisions.
    pub fn tail_mean_reward(&self, window: usize) -> f64 {
        let start = self.decisions.len().saturating_sub(window);
        mean(self.decisions[start..].iter().map(|d| d.reward))
    }

    /// Time-averaged rate: data delivered per slot over the episode.
    pub fn mean_rate(&self) -> f64 {
        self.tail_mean_rate(self.decisions.len())
    }

    /// Time-averaged rate over the last `window` decisions.
    pub fn tail_mean_rate(&self, window: usize) -> f64 {
        let tail = &self.decisions[self.decisions.len().saturating_sub(window)..];
        let slots: usize = tail.iter().map(|d| d.slots).sum();
        if slots == 0 {
            return 0.0;
        }
        tail.iter().map(|d| d.reward * d.slots as f64).sum::<f64>() / slots as f64
    }

    /// Fraction of slots spent in training or switching.
    pub fn training_fraction(&self) -> f64 {
        let slots: usize = self.decisions.iter().map(|d| d.slots).sum();
        if slots == 0 {
            return 0.0;
        }
        let training: usize = self
            .decisions
            .iter()
            .filter(|d| d.action != EnvAction::DataTransmission)
            .map(|d| d.slots)
            .sum();
        training as f64 / slots as f64
    }

    /// Fraction of slots spent on mmWave.
    pub fn mmwave_occupancy(&self) -> f64 {
        let slots: usize = self.decisions.iter().map(|d| d.slots).sum();
        if slots == 0 {
            return 0.0;
        }
        let mm: usize = self.decisions.iter().filter(|d| d.band == Band::Mmwave).map(|d| d.slots).sum();
        mm as f64 / slots as f64
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}
