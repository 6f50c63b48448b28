//! Deterministic actor-critic learner (DDPG) and the flat three-threshold policy.
//!
//! Actions are stored normalized to `[0, 1]`; the threshold policy scales them
//! by `τ_max` when mapping to environment actions. The critic sees
//! `[state, goal?, action]`.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{Band, DrlConfig};
use crate::env::{thresholds_to_action, DecisionEnv, EpisodeLog, Scheme};
use crate::error::{Error, Result};
use crate::nn::{Mlp, OptimState, OutputActivation};
use crate::rng::{self, tag, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub goal: Option<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_goal: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T = Transition> {
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity: capacity.max(1),
            cursor: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut T {
        &mut self.items[i]
    }

    /// Uniform minibatch of distinct indices; `None` when the buffer is too small.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<usize>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some(index::sample(rng, self.items.len(), n).into_vec())
    }
}

/// Actor output plus iid Gaussian noise, clipped to `[0, 1]`.
pub fn act<R: Rng + ?Sized>(actor: &Mlp, input: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut a = actor.forward(input)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::domain(e.to_string()))?;
        for v in &mut a {
            *v += normal.sample(rng);
        }
    }
    a.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(a)
}

fn policy_input(state: &[f64], goal: Option<f64>) -> Vec<f64> {
    let mut x = state.to_vec();
    x.extend(goal);
    x
}

fn critic_input(state: &[f64], goal: Option<f64>, action: &[f64]) -> Vec<f64> {
    let mut x = policy_input(state, goal);
    x.extend_from_slice(action);
    x
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Four networks, two optimizers and a replay buffer.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: OptimState,
    critic_opt: OptimState,
    pub buffer: ReplayBuffer,
    pub cfg: DrlConfig,
    state_dim: usize,
    has_goal: bool,
    action_dim: usize,
}

impl DdpgAgent {
    pub fn new(state_dim: usize, has_goal: bool, action_dim: usize, cfg: &DrlConfig, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[tag("ddpg-init")]);
        let in_dim = state_dim + usize::from(has_goal);
        let mut a_dims = vec![in_dim];
        a_dims.extend(&cfg.hidden);
        a_dims.push(action_dim);
        let mut c_dims = vec![in_dim + action_dim];
        c_dims.extend(&cfg.hidden);
        c_dims.push(1);
        let actor = Mlp::new(&a_dims, OutputActivation::Sigmoid, &mut rng)?;
        let critic = Mlp::new(&c_dims, OutputActivation::Identity, &mut rng)?;
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_opt: OptimState::new(actor.n_params(), cfg.actor_lr),
            critic_opt: OptimState::new(critic.n_params(), cfg.critic_lr),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            cfg: cfg.clone(),
            state_dim,
            has_goal,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn has_goal(&self) -> bool {
        self.has_goal
    }

    /// Deterministic online policy output.
    pub fn policy(&self, state: &[f64], goal: Option<f64>) -> Result<Vec<f64>> {
        self.actor.forward(&policy_input(state, goal))
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], goal: Option<f64>, noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        act(&self.actor, &policy_input(state, goal), noise_std, rng)
    }

    pub fn q_value(&self, state: &[f64], goal: Option<f64>, action: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(&critic_input(state, goal, action))?[0])
    }

    /// Stores a transition with its action clipped to the box.
    pub fn remember(&mut self, mut t: Transition) {
        t.action.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        self.buffer.push(t);
    }

    /// `r + γ w Q_target(s', g', μ_target(s', g'))`, from target networks only.
    pub fn bellman_target(&self, t: &Transition, weight: f64) -> Result<f64> {
        let r = t.reward * self.cfg.reward_scale;
        if self.cfg.gamma == 0.0 {
            return Ok(r);
        }
        let a_next = self.actor_target.forward(&policy_input(&t.next_state, t.next_goal))?;
        let q_next = self.critic_target.forward(&critic_input(&t.next_state, t.next_goal, &a_next))?[0];
        Ok(r + self.cfg.gamma * weight * q_next)
    }

    /// One critic step on a minibatch; returns the pre-step loss, or `None`
    /// when the buffer holds fewer than `batch_size` transitions.
    pub fn critic_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let Some(idx) = self.buffer.sample_indices(self.cfg.batch_size, rng) else {
            return Ok(None);
        };
        let batch: Vec<Transition> = idx.iter().map(|&i| self.buffer.get(i).clone()).collect();
        let w = vec![1.0; batch.len()];
        self.critic_step(&batch, &w).map(Some)
    }

    /// Critic regression on an explicit batch; `weights` scale the bootstrap term.
    pub fn critic_step(&mut self, batch: &[Transition], weights: &[f64]) -> Result<f64> {
        if batch.is_empty() || weights.len() != batch.len() {
            return Err(Error::shape("critic batch and weights differ in length"));
        }
        let n = batch.len() as f64;
        let mut grads = vec![0.0; self.critic.n_params()];
        let mut loss = 0.0;
        for (t, &w) in batch.iter().zip(weights) {
            let y = self.bellman_target(t, w)?;
            let cache = self.critic.forward_cached(&critic_input(&t.state, t.goal, &t.action))?;
            let err = cache.output()[0] - y;
            loss += err * err / n;
            self.critic.backward_into(&cache, &[2.0 * err / n], &mut grads)?;
        }
        if !loss.is_finite() {
            return Err(Error::Numerical("critic loss is not finite".into()));
        }
        self.critic_opt.step(self.critic.params_mut(), &grads)?;
        Ok(loss)
    }

    /// One actor ascent step on `Q(s, g, μ(s, g))`; returns the gradient norm.
    pub fn actor_update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let Some(idx) = self.buffer.sample_indices(self.cfg.batch_size, rng) else {
            return Ok(None);
        };
        let inputs: Vec<(Vec<f64>, Option<f64>)> = idx
            .iter()
            .map(|&i| {
                let t = self.buffer.get(i);
                (t.state.clone(), t.goal)
            })
            .collect();
        self.actor_update_on(&inputs).map(Some)
    }

    /// Actor ascent step through this agent's own critic on explicit inputs.
    pub fn actor_update_on(&mut self, inputs: &[(Vec<f64>, Option<f64>)]) -> Result<f64> {
        let critic = self.critic.clone();
        let in_dim = self.state_dim + usize::from(self.has_goal);
        self.actor_step(inputs, |s, g, a| {
            let cache = critic.forward_cached(&critic_input(s, g, a))?;
            let (_, xg) = critic.backward(&cache, &[1.0])?;
            Ok(xg[in_dim..].to_vec())
        })
    }

    /// Actor step given `dQ/da` at the actor's own output.
    pub fn actor_step<F>(&mut self, inputs: &[(Vec<f64>, Option<f64>)], dq_da: F) -> Result<f64>
    where
        F: Fn(&[f64], Option<f64>, &[f64]) -> Result<Vec<f64>>,
    {
        let n = inputs.len() as f64;
        let mut grads = vec![0.0; self.actor.n_params()];
        for (s, g) in inputs {
            let cache = self.actor.forward_cached(&policy_input(s, *g))?;
            let dq = dq_da(s, *g, cache.output())?;
            let upstream: Vec<f64> = dq.iter().map(|d| -d / n).collect();
            self.actor.backward_into(&cache, &upstream, &mut grads)?;
        }
        let norm = l2(&grads);
        if !norm.is_finite() {
            return Err(Error::Numerical("actor gradient is not finite".into()));
        }
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        Ok(norm)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.actor_target.soft_update(&self.actor, self.cfg.eta)?;
        self.critic_target.soft_update(&self.critic, self.cfg.eta)
    }

    /// Critic, actor and target updates (a no-op until the buffer fills a batch).
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let Some(loss) = self.critic_update(rng)? else {
            return Ok(None);
        };
        self.actor_update(rng)?;
        self.soft_update_targets()?;
        Ok(Some(loss))
    }

    /// All four networks, online then target, actor before critic.
    pub fn checkpoint(&self) -> Vec<u8> {
        [&self.actor, &self.critic, &self.actor_target, &self.critic_target]
            .iter()
            .flat_map(|n| n.to_bytes())
            .collect()
    }

    pub fn restore(&mut self, bytes: &[u8]) -> Result<usize> {
        let mut at = 0;
        let mut nets = Vec::with_capacity(4);
        for _ in 0..4 {
            let (net, used) = Mlp::from_bytes(&bytes[at..])?;
            at += used;
            nets.push(net);
        }
        let dims_ok = nets[0].dims() == self.actor.dims()
            && nets[1].dims() == self.critic.dims()
            && nets[2].dims() == self.actor.dims()
            && nets[3].dims() == self.critic.dims();
        if !dims_ok {
            return Err(Error::format("dims", "checkpoint architecture differs from the agent"));
        }
        let mut it = nets.into_iter();
        self.actor = it.next().unwrap();
        self.critic = it.next().unwrap();
        self.actor_target = it.next().unwrap();
        self.critic_target = it.next().unwrap();
        Ok(at)
    }
}

/// Running max of observed feedback, the basis of `τ_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackScale(pub f64);

impl Default for FeedbackScale {
    fn default() -> Self {
        Self(crate::env::INITIAL_FEEDBACK_SCALE)
    }
}

impl FeedbackScale {
    pub fn observe(&mut self, max_feedback: f64) {
        if max_feedback.is_finite() {
            self.0 = self.0.max(max_feedback);
        }
    }

    pub fn tau_max(&self, factor: f64) -> f64 {
        factor * self.0
    }
}

/// Flat three-threshold learner.
#[derive(Debug, Clone)]
pub struct ThreeThresholdLearner {
    pub agent: DdpgAgent,
    pub scale: FeedbackScale,
    rng: SimRng,
}

impl ThreeThresholdLearner {
    pub fn new(feature_len: usize, cfg: &DrlConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            agent: DdpgAgent::new(feature_len, false, Scheme::ThreeThreshold.action_dim(), cfg, seed)?,
            scale: FeedbackScale::default(),
            rng: rng::stream(seed, &[tag("three-threshold")]),
        })
    }

    /// One episode of act, step, store, update. `progress` in [0, 1] sets the
    /// exploration noise; `learn = false` freezes the networks.
    pub fn run_episode<E: DecisionEnv>(&mut self, env: &mut E, progress: f64, learn: bool) -> Result<EpisodeLog> {
        let noise = self.agent.cfg.noise_std(progress);
        env.set_feedback_scale(self.scale.0);
        let tau_max = self.scale.tau_max(self.agent.cfg.tau_max_factor);
        let mut state = env.reset();
        let mut log = EpisodeLog::default();
        while !env.is_done() {
            let a = self.agent.act(&state, None, noise, &mut self.rng)?;
            let thresholds: Vec<f64> = a.iter().map(|v| v * tau_max).collect();
            let feedback = env.feedback();
            let action = thresholds_to_action(env.band(), feedback, &thresholds, Scheme::ThreeThreshold);
            let out = env.step(action)?;
            if out.slots_consumed == 0 {
                break;
            }
            log.push(&out, feedback, thresholds);
            if learn {
                self.agent.remember(Transition {
                    state: std::mem::take(&mut state),
                    goal: None,
                    action: a,
                    reward: out.reward,
                    next_state: out.features.clone(),
                    next_goal: None,
                });
                self.agent.train_step(&mut self.rng)?;
            }
            state = out.features;
        }
        self.scale.observe(env.max_feedback());
        Ok(log)
    }
}

/// Trains the three-threshold policy over `n_episodes` fresh environments and
/// returns each episode's log.
pub fn train_three_threshold<E, F>(mut make_env: F, feature_len: usize, cfg: &DrlConfig, n_episodes: usize, seed: u64) -> Result<Vec<EpisodeLog>>
where
    E: DecisionEnv,
    F: FnMut(usize) -> Result<E>,
{
    let mut learner = ThreeThresholdLearner::new(feature_len, cfg, seed)?;
    let mut logs = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        let mut env = make_env(ep)?;
        let progress = if n_episodes > 1 { ep as f64 / (n_episodes - 1) as f64 } else { 1.0 };
        logs.push(learner.run_episode(&mut env, progress, true)?);
    }
    Ok(logs)
}

/// Stationary toy environment used to sanity-check learners: feedback is a
/// constant, data earns `data_reward`, everything else earns nothing.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    pub band: Band,
    pub feedback: f64,
    pub data_reward: f64,
    pub episode_len: usize,
    pub m_rf: usize,
    step: usize,
}

impl SyntheticEnv {
    pub fn new(feedback: f64, data_reward: f64, episode_len: usize) -> Self {
        Self {
            band: Band::Mmwave,
            feedback,
            data_reward,
            episode_len,
            m_rf: 4,
            step: 0,
        }
    }

    fn features(&self) -> Vec<f64> {
        vec![f64::from(self.band.indicator()), 0.5]
    }
}

impl DecisionEnv for SyntheticEnv {
    fn reset(&mut self) -> Vec<f64> {
        self.step = 0;
        self.band = Band::Mmwave;
        self.features()
    }
    fn band(&self) -> Band {
        self.band
    }
    fn feedback(&self) -> f64 {
        self.feedback
    }
    fn step(&mut self, action: crate::env::EnvAction) -> Result<crate::env::StepOutcome> {
        use crate::env::{EnvAction, StepOutcome};
        let band = self.band;
        if action == EnvAction::SwitchBand {
            self.band = self.band.other();
        }
        self.step += 1;
        let c = action == EnvAction::DataTransmission;
        let rate = if c { self.data_reward } else { 0.0 };
        Ok(StepOutcome {
            action,
            band,
            reward: rate,
            rate,
            c_flag: c,
            slots_consumed: 1,
            feedback: self.feedback,
            features: self.features(),
            done: self.is_done(),
        })
    }
    fn set_band(&mut self, band: Band) -> bool {
        let changed = band != self.band;
        self.band = band;
        changed
    }
    fn is_done(&self) -> bool {
        self.step >= self.episode_len
    }
    fn set_feedback_scale(&mut self, _scale: f64) {}
    fn max_feedback(&self) -> f64 {
        self.feedback
    }
    fn m_rf(&self) -> usize {
        self.m_rf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> DrlConfig {
        DrlConfig {
            batch_size: 8,
            hidden: vec![16, 16],
            reward_scale: 1.0,
            ..DrlConfig::default()
        }
    }

    fn transition(r: f64) -> Transition {
        Transition {
            state: vec![0.2, -0.1],
            goal: None,
            action: vec![0.3],
            reward: r,
            next_state: vec![0.1, 0.4],
            next_goal: None,
        }
    }

    #[test]
    fn noiseless_act_is_deterministic_and_clipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = DdpgAgent::new(2, true, 3, &cfg(), 1).unwrap();
        let a = agent.act(&[0.1, 0.2], Some(1.0), 0.0, &mut rng).unwrap();
        assert_eq!(a, agent.policy(&[0.1, 0.2], Some(1.0)).unwrap());
        for _ in 0..1000 {
            let a = agent.act(&[0.1, 0.2], Some(0.0), 5.0, &mut rng).unwrap();
            assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn empirical_noise_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor = Mlp::zeros(&[1, 1], OutputActivation::Sigmoid).unwrap();
        let sigma = 0.05;
        let draws: Vec<f64> = (0..10_000).map(|_| act(&actor, &[0.0], sigma, &mut rng).unwrap()[0]).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((sd / sigma - 1.0).abs() < 0.05, "{sd}");
    }

    #[test]
    fn ring_buffer_and_skip_signal() {
        let mut b: ReplayBuffer<u32> = ReplayBuffer::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(b.sample_indices(1, &mut rng).is_none());
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.len(), 3);
        let mut got: Vec<u32> = (0..3).map(|i| *b.get(i)).collect();
        got.sort();
        assert_eq!(got, vec![2, 3, 4]);
        let idx = b.sample_indices(3, &mut rng).unwrap();
        let mut s = idx.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 3);
        let mut agent = DdpgAgent::new(2, false, 1, &cfg(), 1).unwrap();
        assert_eq!(agent.critic_update(&mut rng).unwrap(), None);
        assert_eq!(agent.actor_update(&mut rng).unwrap(), None);
    }

    #[test]
    fn replay_sampling_is_uniform() {
        let mut b: ReplayBuffer<usize> = ReplayBuffer::new(100);
        (0..100).for_each(|i| b.push(i));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0f64; 100];
        let mut draws = 0;
        while draws < 100_000 {
            for i in b.sample_indices(50, &mut rng).unwrap() {
                counts[i] += 1.0;
            }
            draws += 50;
        }
        let e = draws as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        // 99 degrees of freedom, alpha = 0.001
        assert!(chi2 < 148.23, "{chi2}");
    }

    #[test]
    fn critic_at_fixed_point_has_zero_loss() {
        let mut agent = DdpgAgent::new(2, false, 1, &DrlConfig { gamma: 0.0, ..cfg() }, 1).unwrap();
        let p = agent.critic.n_params();
        agent.critic = Mlp::zeros(agent.critic.dims(), OutputActivation::Identity).unwrap();
        agent.critic_opt = OptimState::new(p, 1e-3);
        let last = agent.critic.dims().len() - 2;
        agent.critic.set_bias(last, 0, 2.5);
        for _ in 0..8 {
            agent.remember(transition(2.5));
        }
        let before = agent.critic.clone();
        let loss = agent.critic_update(&mut ChaCha8Rng::seed_from_u64(5)).unwrap().unwrap();
        assert!(loss < 1e-12);
        assert_eq!(agent.critic, before);
    }

    #[test]
    fn critic_regresses_to_reward() {
        let mut agent = DdpgAgent::new(2, false, 1, &DrlConfig { gamma: 0.0, ..cfg() }, 2).unwrap();
        for _ in 0..8 {
            agent.remember(transition(0.8));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let loss = agent.critic_update(&mut rng).unwrap().unwrap();
            assert!(loss.is_finite() && loss >= 0.0);
        }
        assert!((agent.q_value(&[0.2, -0.1], None, &[0.3]).unwrap() - 0.8).abs() < 1e-3);
    }

    #[test]
    fn bellman_target_ignores_online_networks() {
        let mut agent = DdpgAgent::new(2, false, 1, &cfg(), 3).unwrap();
        let t = transition(1.0);
        let y0 = agent.bellman_target(&t, 1.0).unwrap();
        agent.actor.params_mut().iter_mut().for_each(|p| *p += 1.0);
        agent.critic.params_mut().iter_mut().for_each(|p| *p *= -3.0);
        assert_eq!(agent.bellman_target(&t, 1.0).unwrap(), y0);
        agent.critic_target.params_mut()[0] += 1.0;
        assert_ne!(agent.bellman_target(&t, 1.0).unwrap(), y0);
    }

    #[test]
    fn actor_gradient_zero_when_critic_ignores_action() {
        let mut agent = DdpgAgent::new(2, false, 1, &cfg(), 4).unwrap();
        for i in 0..agent.critic.dims()[1] {
            agent.critic.set_weight(0, i, 2, 0.0);
        }
        for _ in 0..8 {
            agent.remember(transition(1.0));
        }
        let g = agent.actor_update(&mut ChaCha8Rng::seed_from_u64(7)).unwrap().unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn actor_climbs_toy_q() {
        let mut agent = DdpgAgent::new(2, false, 1, &DrlConfig { actor_lr: 1e-2, ..cfg() }, 5).unwrap();
        let inputs = vec![(vec![0.2, -0.1], None)];
        for _ in 0..2000 {
            let g = agent.actor_step(&inputs, |_, _, a| Ok(vec![-2.0 * (a[0] - 0.7)])).unwrap();
            assert!(g.is_finite());
        }
        assert!((agent.policy(&[0.2, -0.1], None).unwrap()[0] - 0.7).abs() < 0.01);
    }

    #[test]
    fn targets_converge_geometrically_to_frozen_online() {
        let mut agent = DdpgAgent::new(2, false, 1, &DrlConfig { eta: 0.1, ..cfg() }, 6).unwrap();
        agent.actor.params_mut().iter_mut().for_each(|p| *p += 0.5);
        let dist = |a: &DdpgAgent| {
            a.actor_target.params().iter().zip(a.actor.params()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let d0 = dist(&agent);
        for _ in 0..50 {
            agent.soft_update_targets().unwrap();
        }
        assert!((dist(&agent) - d0 * 0.9f64.powi(50)).abs() < 1e-9);
    }

    #[test]
    fn checkpoint_round_trip() {
        let a = DdpgAgent::new(3, true, 2, &cfg(), 7).unwrap();
        let mut b = DdpgAgent::new(3, true, 2, &cfg(), 8).unwrap();
        let bytes = a.checkpoint();
        assert_eq!(b.restore(&bytes).unwrap(), bytes.len());
        assert_eq!(b.actor, a.actor);
        assert_eq!(b.critic_target, a.critic_target);
        let mut c = DdpgAgent::new(4, true, 2, &cfg(), 8).unwrap();
        assert!(c.restore(&bytes).is_err());
    }

    #[test]
    fn frozen_noiseless_curve_is_deterministic() {
        let c = DrlConfig { noise_std_start: 0.0, noise_std_end: 0.0, ..cfg() };
        let run = || {
            let mut l = ThreeThresholdLearner::new(2, &c, 9).unwrap();
            (0..3)
                .map(|_| l.run_episode(&mut SyntheticEnv::new(2.0, 1.0, 20), 0.0, false).unwrap().mean_reward())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn curve_length_matches_episode_count() {
        let logs = train_three_threshold(|_| Ok(SyntheticEnv::new(2.0, 1.0, 10)), 2, &cfg(), 4, 1).unwrap();
        assert_eq!(logs.len(), 4);
        assert!(logs.iter().all(|l| l.len() == 10));
    }

    #[test]
    fn learns_data_always_on_synthetic_env() {
        let c = DrlConfig { gamma: 0.9, actor_lr: 1e-3, hidden: vec![32, 32], ..cfg() };
        let mut finals: Vec<f64> = (0..10)
            .map(|seed| {
                let logs = train_three_threshold(|_| Ok(SyntheticEnv::new(0.5, 1.0, 50)), 2, &c, 40, seed).unwrap();
                if seed == 0 {
                    assert!(logs[0].mean_reward() < 0.9, "initial policy already optimal");
                }
                logs[20..].iter().map(|l| l.mean_reward()).sum::<f64>() / 20.0
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        let median = 0.5 * (finals[4] + finals[5]);
        assert!(median >= 0.9, "{finals:?}");
    }
}
