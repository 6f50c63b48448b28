//! Two-level learner: the upper policy picks the band (goal) once per period,
//! the lower policy picks beam-management thresholds every decision.
//!
//! Upper replay is corrected at sample time against the current lower policy,
//! either by importance weights on the bootstrap term or by relabeling the
//! stored goal. Round skipping randomly extends the upper period.

use rand::Rng;

use crate::config::{Availability, Band, Correction, HrlConfig, Toggle};
use crate::ddpg::{DdpgAgent, FeedbackScale, ReplayBuffer, Transition};
use crate::env::{thresholds_to_action, DecisionEnv, EnvAction, EpisodeLog, Scheme};
use crate::error::Result;
use crate::rng::{self, tag, SimRng};

/// One lower-level decision inside an upper window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStep {
    pub state: Vec<f64>,
    pub goal: f64,
    /// Normalized thresholds actually used.
    pub action: Vec<f64>,
    /// Deterministic lower output when the action was taken.
    pub base_mean: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperTransition {
    /// State at which the goal was emitted.
    pub start_state: Vec<f64>,
    /// Upper action as emitted (continuous, in [0, 1]).
    pub goal_action: f64,
    pub states: Vec<Vec<f64>>,
    pub goals: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub base_means: Vec<Vec<f64>>,
    pub rewards_env: Vec<f64>,
    pub terminal_state: Vec<f64>,
    /// Period-averaged environment reward.
    pub r_e: f64,
}

impl UpperTransition {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Goal the lower level actually saw.
    pub fn logged_goal(&self) -> f64 {
        binarize(self.goal_action)
    }
}

pub fn binarize(logit: f64) -> f64 {
    if logit >= 0.5 { 1.0 } else { 0.0 }
}

pub fn goal_band(goal: f64) -> Band {
    if goal >= 0.5 { Band::Mmwave } else { Band::Sub6 }
}

/// Packs the last `min(m_upper, m_rf)` steps of `window`; `r_e` is their sum
/// divided by `m_upper`. `None` for an empty window.
pub fn aggregate_upper(
    window: &[WindowStep],
    start_state: &[f64],
    goal_action: f64,
    terminal_state: &[f64],
    m_upper: usize,
    m_rf: usize,
) -> Option<UpperTransition> {
    if window.is_empty() {
        return None;
    }
    let keep = m_upper.min(m_rf).max(1);
    let w = &window[window.len().saturating_sub(keep)..];
    let rewards: Vec<f64> = w.iter().map(|s| s.reward).collect();
    Some(UpperTransition {
        start_state: start_state.to_vec(),
        goal_action,
        states: w.iter().map(|s| s.state.clone()).collect(),
        goals: w.iter().map(|s| s.goal).collect(),
        actions: w.iter().map(|s| s.action.clone()).collect(),
        base_means: w.iter().map(|s| s.base_mean.clone()).collect(),
        r_e: rewards.iter().sum::<f64>() / m_upper.max(1) as f64,
        rewards_env: rewards,
        terminal_state: terminal_state.to_vec(),
    })
}

/// Product over the window of Gaussian density ratios
/// `N(a; μ_now(s, g), σ²) / N(a; μ_base, σ²)`, clipped to `[1/clip, clip]`.
/// `goal` replaces every logged goal when given.
pub fn importance_weight<F>(t: &UpperTransition, lower_now: F, goal: Option<f64>, noise_std: f64, clip: f64) -> Result<f64>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    let var = noise_std.max(1e-6).powi(2);
    let mut log_w = 0.0;
    for i in 0..t.len() {
        let g = goal.unwrap_or(t.goals[i]);
        let now = lower_now(&t.states[i], g)?;
        for ((a, m_now), m_base) in t.actions[i].iter().zip(&now).zip(&t.base_means[i]) {
            log_w += ((a - m_base).powi(2) - (a - m_now).powi(2)) / (2.0 * var);
        }
    }
    let lo = 1.0 / clip;
    if log_w.is_nan() {
        return Ok(1.0);
    }
    Ok(log_w.exp().clamp(lo, clip))
}

/// `argmin_g (1 - w(g))²` over both goals; ties keep the logged goal.
/// Returns the goal and its weight.
pub fn relabel_goal<F>(t: &UpperTransition, lower_now: F, noise_std: f64, clip: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    let logged = t.logged_goal();
    let mut best = (logged, importance_weight(t, &lower_now, Some(logged), noise_std, clip)?);
    let other = 1.0 - logged;
    let w_other = importance_weight(t, &lower_now, Some(other), noise_std, clip)?;
    if (1.0 - w_other).powi(2) < (1.0 - best.1).powi(2) {
        best = (other, w_other);
    }
    Ok(best)
}

/// Non-skip probability `min{1, (M_RF / (2 M_RF - 1)) / q}`.
pub fn non_skip_probability(q: f64, m_rf: usize) -> f64 {
    let m = m_rf.max(1) as f64;
    (m / (2.0 * m - 1.0) / q.max(f64::MIN_POSITIVE)).min(1.0)
}

/// True when this upper epoch is skipped.
pub fn round_skip<R: Rng + ?Sized>(q: f64, m_rf: usize, rng: &mut R) -> bool {
    rng.random::<f64>() >= non_skip_probability(q, m_rf)
}

/// Laplace-smoothed availability estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AvailabilityEstimator {
    pub available: u64,
    pub observations: u64,
}

impl AvailabilityEstimator {
    pub fn estimate(&self) -> f64 {
        (self.available as f64 + 1.0) / (self.observations as f64 + 2.0)
    }

    /// Records one decision that took `slots` slots, preceded by `previous`.
    pub fn observe(&mut self, model: Availability, previous: Option<EnvAction>, slots: usize) {
        match model {
            Availability::Decision => {
                self.observations += 1;
                if !previous.is_some_and(EnvAction::is_training) {
                    self.available += 1;
                }
            }
            Availability::Slot => {
                self.observations += slots.max(1) as u64;
                self.available += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HrlDiagnostics {
    pub upper_epochs: usize,
    pub skipped_epochs: usize,
    pub relabeled: usize,
    pub corrected: usize,
    pub weight_sum: f64,
}

pub struct HrlLearner {
    pub upper: DdpgAgent,
    pub lower: DdpgAgent,
    pub upper_buffer: ReplayBuffer<UpperTransition>,
    pub cfg: HrlConfig,
    pub scale: FeedbackScale,
    pub availability: AvailabilityEstimator,
    pub diagnostics: HrlDiagnostics,
    /// Forces every goal to this band.
    pub pinned_goal: Option<Band>,
    /// Disables upper-level storage and updates.
    pub upper_learning: bool,
    rng: SimRng,
}

impl HrlLearner {
    pub fn new(feature_len: usize, cfg: &HrlConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            upper: DdpgAgent::new(feature_len, false, 1, &cfg.upper, rng::derive_seed(seed, &[tag("upper")]))?,
            lower: DdpgAgent::new(
                feature_len,
                true,
                Scheme::HrlLower.action_dim(),
                &cfg.lower,
                rng::derive_seed(seed, &[tag("lower")]),
            )?,
            upper_buffer: ReplayBuffer::new(cfg.upper.buffer_capacity),
            cfg: cfg.clone(),
            scale: FeedbackScale::default(),
            availability: AvailabilityEstimator::default(),
            diagnostics: HrlDiagnostics::default(),
            pinned_goal: None,
            upper_learning: true,
            rng: rng::stream(seed, &[tag("hrl")]),
        })
    }

    fn emit_goal(&mut self, state: &[f64], noise: f64) -> Result<f64> {
        if let Some(b) = self.pinned_goal {
            return Ok(f64::from(b.indicator()));
        }
        Ok(self.upper.act(state, None, noise, &mut self.rng)?[0])
    }

    /// Corrected DDPG transitions and bootstrap weights for a minibatch.
    fn corrected_batch(&mut self, idx: &[usize], noise_std: f64) -> Result<(Vec<Transition>, Vec<f64>)> {
        let lower = &self.lower;
        let now = |s: &[f64], g: f64| lower.policy(s, Some(g));
        let mut batch = Vec::with_capacity(idx.len());
        let mut weights = Vec::with_capacity(idx.len());
        for &i in idx {
            let t = self.upper_buffer.get(i);
            let (action, w) = match self.cfg.correction {
                Correction::None => (t.goal_action, 1.0),
                Correction::DirectIs => {
                    let w = importance_weight(t, now, None, noise_std, self.cfg.w_clip)?;
                    self.diagnostics.corrected += 1;
                    self.diagnostics.weight_sum += w;
                    (t.goal_action, w)
                }
                Correction::Relabel => {
                    let (g, w) = relabel_goal(t, now, noise_std, self.cfg.w_clip)?;
                    self.diagnostics.corrected += 1;
                    self.diagnostics.weight_sum += w;
                    if g != t.logged_goal() {
                        self.diagnostics.relabeled += 1;
                        (g, 1.0)
                    } else {
                        (t.goal_action, 1.0)
                    }
                }
            };
            batch.push(Transition {
                state: t.start_state.clone(),
                goal: None,
                action: vec![action],
                reward: t.r_e,
                next_state: t.terminal_state.clone(),
                next_goal: None,
            });
            weights.push(w);
        }
        Ok((batch, weights))
    }

    /// Upper critic update; `None` until the upper buffer fills a batch.
    pub fn upper_critic_update(&mut self, noise_std: f64) -> Result<Option<f64>> {
        let Some(idx) = self.upper_buffer.sample_indices(self.cfg.upper.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        let (batch, weights) = self.corrected_batch(&idx, noise_std)?;
        self.upper.critic_step(&batch, &weights).map(Some)
    }

    /// Upper actor update through the critic's goal input.
    pub fn upper_actor_update(&mut self) -> Result<Option<f64>> {
        let Some(idx) = self.upper_buffer.sample_indices(self.cfg.upper.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        let inputs: Vec<(Vec<f64>, Option<f64>)> =
            idx.iter().map(|&i| (self.upper_buffer.get(i).start_state.clone(), None)).collect();
        self.upper.actor_update_on(&inputs).map(Some)
    }

    fn store_upper(&mut self, t: UpperTransition, lower_noise: f64) -> Result<()> {
        if !self.upper_learning || self.pinned_goal.is_some() {
            return Ok(());
        }
        self.upper_buffer.push(t);
        if self.upper_critic_update(lower_noise)?.is_some() {
            self.upper_actor_update()?;
            self.upper.soft_update_targets()?;
        }
        Ok(())
    }

    /// One episode of the two-level loop. `progress` in [0, 1] sets the
    /// exploration noise of both levels; `learn = false` freezes everything.
    pub fn run_episode<E: DecisionEnv>(&mut self, env: &mut E, progress: f64, learn: bool) -> Result<EpisodeLog> {
        let upper_noise = self.cfg.upper.noise_std(progress);
        let lower_noise = self.cfg.lower.noise_std(progress);
        let m_upper = self.cfg.m_upper.max(1);
        let m_rf = env.m_rf();
        env.set_feedback_scale(self.scale.0);
        let tau_max = self.scale.tau_max(self.cfg.lower.tau_max_factor);

        let mut state = env.reset();
        let mut goal_action = self.emit_goal(&state, upper_noise)?;
        let mut goal = binarize(goal_action);
        env.set_band(goal_band(goal));
        let mut start_state = state.clone();
        let mut window: Vec<WindowStep> = Vec::new();
        let mut log = EpisodeLog::default();
        let mut previous: Option<EnvAction> = None;
        let mut m = 0usize;

        while !env.is_done() {
            if m > 0 && m % m_upper == 0 {
                let skip = self.cfg.round_skip == Toggle::On && round_skip(self.availability.estimate(), m_rf, &mut self.rng);
                self.diagnostics.upper_epochs += 1;
                if skip {
                    self.diagnostics.skipped_epochs += 1;
                } else {
                    if learn {
                        if let Some(t) = aggregate_upper(&window, &start_state, goal_action, &state, m_upper, m_rf) {
                            self.store_upper(t, lower_noise)?;
                        }
                    }
                    window.clear();
                    goal_action = self.emit_goal(&state, upper_noise)?;
                    goal = binarize(goal_action);
                    start_state = state.clone();
                    env.set_band(goal_band(goal));
                }
            }

            let base_mean = self.lower.policy(&state, Some(goal))?;
            let a = self.lower.act(&state, Some(goal), lower_noise, &mut self.rng)?;
            let thresholds: Vec<f64> = a.iter().map(|v| v * tau_max).collect();
            let feedback = env.feedback();
            let action = thresholds_to_action(env.band(), feedback, &thresholds, Scheme::HrlLower);
            let out = env.step(action)?;
            if out.slots_consumed == 0 {
                break;
            }
            self.availability.observe(self.cfg.availability, previous, out.slots_consumed);
            previous = Some(action);
            log.push(&out, feedback, thresholds);

            if learn {
                self.lower.remember(Transition {
                    state: state.clone(),
                    goal: Some(goal),
                    action: a.clone(),
                    reward: out.reward,
                    next_state: out.features.clone(),
                    next_goal: Some(goal),
                });
                self.lower.train_step(&mut self.rng)?;
            }
            window.push(WindowStep {
                state: std::mem::take(&mut state),
                goal,
                action: a,
                base_mean,
                reward: out.reward,
            });
            state = out.features;
            m += 1;
        }
        if learn {
            if let Some(t) = aggregate_upper(&window, &start_state, goal_action, &state, m_upper, m_rf) {
                self.store_upper(t, lower_noise)?;
            }
        }
        self.scale.observe(env.max_feedback());
        Ok(log)
    }
}

/// Trains the two-level learner over `n_episodes` fresh environments.
pub fn train_hrl<E, F>(mut make_env: F, feature_len: usize, cfg: &HrlConfig, n_episodes: usize, seed: u64) -> Result<Vec<EpisodeLog>>
where
    E: DecisionEnv,
    F: FnMut(usize) -> Result<E>,
{
    let mut learner = HrlLearner::new(feature_len, cfg, seed)?;
    let mut logs = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        let mut env = make_env(ep)?;
        let progress = if n_episodes > 1 { ep as f64 / (n_episodes - 1) as f64 } else { 1.0 };
        logs.push(learner.run_episode(&mut env, progress, true)?);
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DrlConfig;
    use crate::ddpg::SyntheticEnv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn step(r: f64, goal: f64, action: Vec<f64>, base: Vec<f64>) -> WindowStep {
        WindowStep {
            state: vec![r, 0.0],
            goal,
            action,
            base_mean: base,
            reward: r,
        }
    }

    fn small_drl() -> DrlConfig {
        DrlConfig {
            batch_size: 8,
            hidden: vec![16, 16],
            reward_scale: 1.0,
            ..DrlConfig::default()
        }
    }

    fn small_hrl() -> HrlConfig {
        HrlConfig {
            upper: small_drl(),
            lower: small_drl(),
            m_upper: 4,
            ..HrlConfig::default()
        }
    }

    #[test]
    fn aggregate_examples() {
        let zeros: Vec<WindowStep> = (0..3).map(|_| step(0.0, 1.0, vec![0.5], vec![0.5])).collect();
        assert_eq!(aggregate_upper(&zeros, &[0.0], 1.0, &[1.0], 3, 8).unwrap().r_e, 0.0);
        let w: Vec<WindowStep> = [1.0, 2.0, 3.0].iter().map(|&r| step(r, 1.0, vec![0.5], vec![0.5])).collect();
        assert_eq!(aggregate_upper(&w, &[0.0], 1.0, &[1.0], 3, 8).unwrap().r_e, 2.0);
        let long: Vec<WindowStep> = (0..20).map(|i| step(i as f64, 1.0, vec![0.5], vec![0.5])).collect();
        let t = aggregate_upper(&long, &[0.0], 1.0, &[1.0], 16, 5).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.rewards_env, vec![15.0, 16.0, 17.0, 18.0, 19.0]);
        assert!(aggregate_upper(&[], &[0.0], 1.0, &[1.0], 3, 8).is_none());
    }

    fn window_transition(goal: f64, actions: Vec<Vec<f64>>, base: Vec<Vec<f64>>) -> UpperTransition {
        let steps: Vec<WindowStep> = actions
            .into_iter()
            .zip(base)
            .enumerate()
            .map(|(i, (a, b))| WindowStep {
                state: vec![i as f64, 0.0],
                ..step(1.0, goal, a, b)
            })
            .collect();
        aggregate_upper(&steps, &[0.0, 0.0], goal, &[0.0, 0.0], 8, 8).unwrap()
    }

    #[test]
    fn identical_policies_weight_one() {
        let t = window_transition(1.0, vec![vec![0.3, 0.6], vec![0.4, 0.2]], vec![vec![0.31, 0.5], vec![0.45, 0.25]]);
        let bases = t.base_means.clone();
        let states = t.states.clone();
        let now = |s: &[f64], _g: f64| Ok(bases[states.iter().position(|x| x == s).unwrap()].clone());
        assert_eq!(importance_weight(&t, now, None, 0.1, 1e3).unwrap(), 1.0);
    }

    #[test]
    fn farther_policy_lowers_weight_and_clip_holds() {
        let t = window_transition(1.0, vec![vec![0.5]], vec![vec![0.52]]);
        let w = importance_weight(&t, |_, _| Ok(vec![0.7]), None, 0.1, 1e3).unwrap();
        assert!(w < 1.0);
        let w = importance_weight(&t, |_, _| Ok(vec![50.0]), None, 0.01, 1e3).unwrap();
        assert_eq!(w, 1e-3);
        let t = window_transition(1.0, vec![vec![0.5]], vec![vec![40.0]]);
        let w = importance_weight(&t, |_, _| Ok(vec![0.5]), None, 0.01, 1e3).unwrap();
        assert_eq!(w, 1e3);
    }

    #[test]
    fn relabel_keeps_goal_at_unit_weight() {
        let t = window_transition(0.0, vec![vec![0.5]], vec![vec![0.5]]);
        let (g, w) = relabel_goal(&t, |_, g| Ok(vec![0.5 + g]), 0.1, 1e3).unwrap();
        assert_eq!((g, w), (0.0, 1.0));
    }

    #[test]
    fn relabel_flips_when_other_goal_reproduces_actions() {
        // logged under goal 1 with base mean 0.2 but action 0.8; the current
        // policy outputs 0.8 exactly under goal 0 and 0.2 under goal 1
        let t = window_transition(1.0, vec![vec![0.8]; 3], vec![vec![0.8]; 3]);
        let now = |_: &[f64], g: f64| Ok(vec![if g == 0.0 { 0.8 } else { 0.2 }]);
        let (g, w) = relabel_goal(&t, now, 0.1, 1e3).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(w, 1.0);
        // exhaustive two-candidate check
        let w0 = importance_weight(&t, now, Some(0.0), 0.1, 1e3).unwrap();
        let w1 = importance_weight(&t, now, Some(1.0), 0.1, 1e3).unwrap();
        assert!((1.0 - w0).powi(2) < (1.0 - w1).powi(2));
    }

    #[test]
    fn round_skip_formula() {
        assert!((non_skip_probability(1.0, 128) - 128.0 / 255.0).abs() < 1e-15);
        assert_eq!(non_skip_probability(0.5, 128), 1.0);
        assert_eq!(non_skip_probability(128.0 / 255.0, 128), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [0.6, 0.8, 1.0] {
            let p = non_skip_probability(q, 8);
            let n = 100_000;
            let kept = (0..n).filter(|_| !round_skip(q, 8, &mut rng)).count() as f64 / n as f64;
            assert!((kept - p).abs() < 0.01, "q={q}: {kept} vs {p}");
        }
    }

    #[test]
    fn availability_estimates() {
        let mut a = AvailabilityEstimator::default();
        assert_eq!(a.estimate(), 0.5);
        a.observe(Availability::Decision, None, 8);
        a.observe(Availability::Decision, Some(EnvAction::AnalogTraining), 8);
        a.observe(Availability::Decision, Some(EnvAction::DataTransmission), 8);
        assert_eq!(a.estimate(), 3.0 / 5.0);
        let mut s = AvailabilityEstimator::default();
        s.observe(Availability::Slot, None, 10);
        assert_eq!(s.estimate(), 2.0 / 12.0);
    }

    #[test]
    fn upper_update_skips_until_batch_and_gamma_zero_ignores_weights() {
        let mut cfg = small_hrl();
        cfg.upper.gamma = 0.0;
        let mut l = HrlLearner::new(2, &cfg, 1).unwrap();
        assert_eq!(l.upper_critic_update(0.1).unwrap(), None);
        let t = window_transition(1.0, vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]);
        for _ in 0..8 {
            l.upper_buffer.push(t.clone());
        }
        let batch = vec![
            Transition {
                state: t.start_state.clone(),
                goal: None,
                action: vec![1.0],
                reward: t.r_e,
                next_state: t.terminal_state.clone(),
                next_goal: None,
            };
            8
        ];
        let mut a = l.upper.clone();
        let mut b = l.upper.clone();
        let la = a.critic_step(&batch, &[1.0; 8]).unwrap();
        let lb = b.critic_step(&batch, &[1e3; 8]).unwrap();
        assert_eq!(la, lb);
        assert!(l.upper_critic_update(0.1).unwrap().unwrap().is_finite());
    }

    #[test]
    fn extreme_weights_keep_loss_finite() {
        let mut cfg = small_hrl();
        cfg.correction = Correction::DirectIs;
        let mut l = HrlLearner::new(2, &cfg, 2).unwrap();
        let t = window_transition(1.0, vec![vec![0.0, 1.0]; 4], vec![vec![1.0, 0.0]; 4]);
        for _ in 0..8 {
            l.upper_buffer.push(t.clone());
        }
        for _ in 0..20 {
            let loss = l.upper_critic_update(0.01).unwrap().unwrap();
            assert!(loss.is_finite() && loss >= 0.0);
        }
    }

    #[test]
    fn no_correction_matches_flat_learner_update_for_update() {
        let mut cfg = small_hrl();
        cfg.correction = Correction::None;
        cfg.m_upper = 1;
        let mut l = HrlLearner::new(2, &cfg, 3).unwrap();
        let mut flat = l.upper.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..12 {
            let mut t = window_transition(1.0, vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]);
            t.start_state = vec![i as f64 / 12.0, 0.3];
            t.goal_action = rng.random::<f64>();
            t.r_e = rng.random::<f64>();
            flat.remember(Transition {
                state: t.start_state.clone(),
                goal: None,
                action: vec![t.goal_action],
                reward: t.r_e,
                next_state: t.terminal_state.clone(),
                next_goal: None,
            });
            l.upper_buffer.push(t);
        }
        // same sampling stream on both sides
        let mut flat_rng = l.rng.clone();
        for _ in 0..5 {
            let a = l.upper_critic_update(0.1).unwrap().unwrap();
            let b = flat.critic_update(&mut flat_rng).unwrap().unwrap();
            assert_eq!(a, b);
            l.upper_actor_update().unwrap();
            flat.actor_update(&mut flat_rng).unwrap();
            l.upper.soft_update_targets().unwrap();
            flat.soft_update_targets().unwrap();
        }
        assert_eq!(l.upper.actor, flat.actor);
        assert_eq!(l.upper.critic, flat.critic);
    }

    #[test]
    fn upper_actor_gradient_zero_when_critic_ignores_goal() {
        let mut l = HrlLearner::new(2, &small_hrl(), 4).unwrap();
        let goal_col = 2;
        for i in 0..l.upper.critic.dims()[1] {
            l.upper.critic.set_weight(0, i, goal_col, 0.0);
        }
        let t = window_transition(1.0, vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]);
        for _ in 0..8 {
            l.upper_buffer.push(t.clone());
        }
        assert_eq!(l.upper_actor_update().unwrap().unwrap(), 0.0);
    }

    #[test]
    fn upper_actor_climbs_toy_goal_value() {
        let mut cfg = small_hrl();
        cfg.upper.actor_lr = 1e-2;
        let mut l = HrlLearner::new(2, &cfg, 5).unwrap();
        let inputs = vec![(vec![0.1, 0.9], None)];
        for _ in 0..3000 {
            l.upper.actor_step(&inputs, |_, _, g| Ok(vec![-2.0 * (g[0] - 1.0)])).unwrap();
        }
        assert!(l.upper.policy(&[0.1, 0.9], None).unwrap()[0] > 0.95);
    }

    #[test]
    fn pinned_goal_stays_on_mmwave_and_training_earns_nothing() {
        let mut l = HrlLearner::new(2, &small_hrl(), 6).unwrap();
        l.pinned_goal = Some(Band::Mmwave);
        l.upper_learning = false;
        let mut env = SyntheticEnv::new(0.5, 1.0, 40);
        for ep in 0..3 {
            let log = l.run_episode(&mut env, ep as f64 / 2.0, true).unwrap();
            assert!(log.decisions.iter().all(|d| d.band == Band::Mmwave));
            assert!(log.decisions.iter().all(|d| d.action != EnvAction::SwitchBand));
            assert!(log
                .decisions
                .iter()
                .all(|d| (d.action == EnvAction::DataTransmission) == (d.reward != 0.0)));
        }
        assert!(l.upper_buffer.is_empty());
    }

    #[test]
    fn stored_windows_respect_truncation_and_runs_are_deterministic() {
        let run = || {
            let mut cfg = small_hrl();
            cfg.m_upper = 6;
            let mut l = HrlLearner::new(2, &cfg, 7).unwrap();
            let mut env = SyntheticEnv::new(0.5, 1.0, 60);
            env.m_rf = 4;
            let logs: Vec<f64> = (0..4).map(|ep| l.run_episode(&mut env, ep as f64 / 3.0, true).unwrap().mean_reward()).collect();
            for i in 0..l.upper_buffer.len() {
                let n = l.upper_buffer.get(i).len();
                assert!((1..=4).contains(&n));
            }
            assert!(l.diagnostics.upper_epochs > 0);
            logs
        };
        assert_eq!(run(), run());
    }
}
