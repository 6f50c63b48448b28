//! Scenario configuration: every physical-layer, mobility and learning knob in
//! one serializable record. The file format is TOML with one table per section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Sub6,
    Mmwave,
}

impl Band {
    /// The band indicator `b`: 0 for sub-6, 1 for mmWave.
    pub fn indicator(self) -> u8 {
        match self {
            Band::Sub6 => 0,
            Band::Mmwave => 1,
        }
    }

    pub fn from_indicator(b: u8) -> Band {
        if b == 0 {
            Band::Sub6
        } else {
            Band::Mmwave
        }
    }

    pub fn other(self) -> Band {
        match self {
            Band::Sub6 => Band::Mmwave,
            Band::Mmwave => Band::Sub6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Sub6 => "sub6",
            Band::Mmwave => "mmwave",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Roads running along x, spaced `block_m` apart in y.
    pub horizontal_roads: usize,
    /// Roads running along y, spaced `block_m` apart in x.
    pub vertical_roads: usize,
    pub block_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            horizontal_roads: 3,
            vertical_roads: 3,
            block_m: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// mmWave carrier.
    pub carrier_hz: f64,
    pub sub6_carrier_hz: f64,
    /// mmWave cluster count (1 LOS + NLOS).
    pub cluster_count: usize,
    pub sub6_cluster_count: usize,
    /// Rician factor of the LOS cluster, dB.
    pub k_factor_db: f64,
    pub sub6_k_factor_db: f64,
    pub delay_spread_s: f64,
    pub sub6_delay_spread_s: f64,
    /// Vehicles per km.
    pub blocker_density: f64,
    /// Blockage onsets per second contributed by each vehicle/km of density.
    pub blockage_rate_per_density_hz: f64,
    pub mean_blockage_s: f64,
    /// Buildings at grid corners block LOS off the base station's streets.
    pub building_blockage: bool,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub slot_duration_s: f64,
    pub speed_mps: f64,
    pub noise_figure_db: f64,
    pub grid: GridConfig,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            sub6_carrier_hz: 3.5e9,
            cluster_count: 5,
            sub6_cluster_count: 8,
            k_factor_db: 10.0,
            sub6_k_factor_db: 3.0,
            delay_spread_s: 30e-9,
            sub6_delay_spread_s: 100e-9,
            blocker_density: 10.0,
            blockage_rate_per_density_hz: 1.0,
            mean_blockage_s: 0.05,
            building_blockage: true,
            los_exponent: 2.0,
            nlos_exponent: 3.2,
            slot_duration_s: 1e-4,
            speed_mps: 40.0 / 3.6,
            noise_figure_db: 7.0,
            grid: GridConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmwaveConfig {
    pub n_bs: usize,
    pub n_ue: usize,
    pub n_bs_rf: usize,
    pub n_ue_rf: usize,
    pub n_s: usize,
    /// Analog codebook sizes; 0 means "equal to the antenna count".
    pub nu_bs: usize,
    pub nu_ue: usize,
    pub n_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub m_ss: usize,
    pub n_ss: usize,
    pub kappa_rvq: usize,
    pub kappa_channel: usize,
    pub rvq_training: usize,
    pub beta_rf: f64,
    pub zeta_rf: f64,
    pub beta_bb: f64,
    pub zeta_bb: f64,
}

impl Default for MmwaveConfig {
    fn default() -> Self {
        Self {
            n_bs: 8,
            n_ue: 4,
            n_bs_rf: 2,
            n_ue_rf: 2,
            n_s: 2,
            nu_bs: 0,
            nu_ue: 0,
            n_subcarriers: 16,
            bandwidth_hz: 850e6,
            m_ss: 1,
            n_ss: 4,
            kappa_rvq: 8,
            kappa_channel: 1,
            rvq_training: 4096,
            beta_rf: 0.1,
            zeta_rf: 10.0,
            beta_bb: 0.1,
            zeta_bb: 10.0,
        }
    }
}

impl MmwaveConfig {
    pub fn codebook_sizes(&self) -> (usize, usize) {
        let bs = if self.nu_bs == 0 { self.n_bs } else { self.nu_bs };
        let ue = if self.nu_ue == 0 { self.n_ue } else { self.nu_ue };
        (bs, ue)
    }

    pub fn analog_overhead(&self) -> usize {
        let (nu_bs, nu_ue) = self.codebook_sizes();
        crate::mmwave::analog_overhead(self.m_ss, self.n_ss, nu_bs, nu_ue)
    }

    pub fn digital_overhead(&self) -> usize {
        crate::mmwave::digital_overhead(self.kappa_rvq, self.kappa_channel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sub6Config {
    pub n_bs: usize,
    pub n_ue: usize,
    pub n_s: usize,
    pub n_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub nu_pmi: usize,
    pub pmi_oversampling: usize,
    pub kappa_channel: usize,
    pub beta: f64,
    pub zeta: f64,
}

impl Default for Sub6Config {
    fn default() -> Self {
        Self {
            n_bs: 4,
            n_ue: 4,
            n_s: 2,
            n_subcarriers: 8,
            bandwidth_hz: 150e6,
            nu_pmi: 16,
            pmi_oversampling: 2,
            kappa_channel: 1,
            beta: 0.1,
            zeta: 10.0,
        }
    }
}

impl Sub6Config {
    pub fn pmi_overhead(&self) -> usize {
        crate::sub6::pmi_overhead(self.nu_pmi, self.kappa_channel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub m_dt: usize,
    pub episode_len_decisions: usize,
    /// Slots of disuse after which a band's beamformers are stale; 0 means 2 x M_RF.
    pub stale_horizon_slots: usize,
    pub initial_band: Band,
    pub transmit_power_dbm: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            m_dt: 10,
            episode_len_decisions: 200,
            stale_horizon_slots: 0,
            initial_band: Band::Sub6,
            transmit_power_dbm: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrlConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub eta: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_std_start: f64,
    pub noise_std_end: f64,
    pub hidden: Vec<usize>,
    /// Action range is this factor times the running max feedback.
    pub tau_max_factor: f64,
    /// Rewards (bps) are multiplied by this before entering the critic.
    pub reward_scale: f64,
}

impl Default for DrlConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 64,
            buffer_capacity: 100_000,
            eta: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_std_start: 0.2,
            noise_std_end: 0.02,
            hidden: vec![64, 64],
            tau_max_factor: 1.2,
            reward_scale: 1e-9,
        }
    }
}

impl DrlConfig {
    /// Exploration noise after `progress` in [0, 1] of training.
    pub fn noise_std(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.noise_std_start + (self.noise_std_end - self.noise_std_start) * p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Relabel,
    DirectIs,
    None,
}

/// What counts as the agent being free to act, for the round-skip estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    /// Per decision: the previous decision was not a training procedure.
    Decision,
    /// Per slot: the slot is a decision boundary rather than mid-overhead.
    Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrlConfig {
    pub m_upper: usize,
    pub correction: Correction,
    pub round_skip: Toggle,
    pub availability: Availability,
    pub w_clip: f64,
    pub upper: DrlConfig,
    pub lower: DrlConfig,
}

impl Default for HrlConfig {
    fn default() -> Self {
        Self {
            m_upper: 8,
            correction: Correction::Relabel,
            round_skip: Toggle::On,
            availability: Availability::Decision,
            w_clip: 1e3,
            upper: DrlConfig::default(),
            lower: DrlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Genie,
    Greedy,
    ThreeThreshold,
    Hrl,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Genie => "genie",
            Policy::Greedy => "greedy",
            Policy::ThreeThreshold => "three_threshold",
            Policy::Hrl => "hrl",
        }
    }

    pub fn parse(s: &str) -> Result<Policy> {
        match s {
            "genie" => Ok(Policy::Genie),
            "greedy" => Ok(Policy::Greedy),
            "three_threshold" => Ok(Policy::ThreeThreshold),
            "hrl" => Ok(Policy::Hrl),
            other => Err(Error::config(format!("experiment.policies: unknown policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Power,
    RvqBits,
    VehicleDensity,
    UpperPeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policies: Vec<Policy>,
    pub n_episodes: usize,
    pub n_seeds: usize,
    pub seed: u64,
    pub transmit_power_dbm: Vec<f64>,
    pub sweep: SweepAxis,
    /// Sweep values for axes other than power.
    pub sweep_values: Vec<f64>,
    /// Decisions averaged for the summary row.
    pub summary_window: usize,
    /// Final episodes whose windows are averaged for the summary row.
    pub summary_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policies: vec![Policy::Genie, Policy::Greedy, Policy::ThreeThreshold, Policy::Hrl],
            n_episodes: 100,
            n_seeds: 1,
            seed: 1,
            transmit_power_dbm: vec![30.0],
            sweep: SweepAxis::Power,
            sweep_values: Vec::new(),
            summary_window: 20,
            summary_episodes: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn sweep_points(&self) -> Vec<f64> {
        match self.sweep {
            SweepAxis::Power => self.transmit_power_dbm.clone(),
            _ => self.sweep_values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub channel: ChannelConfig,
    pub mmwave: MmwaveConfig,
    pub sub6: Sub6Config,
    pub env: EnvConfig,
    pub drl: DrlConfig,
    pub hrl: HrlConfig,
    pub experiment: ExperimentConfig,
}

impl ScenarioConfig {
    /// Desk-scale defaults: 8x4 mmWave arrays, K = 16, M_RF = 8.
    pub fn desk() -> Self {
        Self::default()
    }

    /// Full-size array and band parameters (32x16 mmWave, K = 256). Slow.
    pub fn full_scale() -> Self {
        let mut cfg = Self::default();
        cfg.mmwave = MmwaveConfig {
            n_bs: 32,
            n_ue: 16,
            n_bs_rf: 8,
            n_ue_rf: 8,
            n_s: 4,
            n_subcarriers: 256,
            ..MmwaveConfig::default()
        };
        cfg.sub6 = Sub6Config {
            n_s: 4,
            n_subcarriers: 32,
            ..Sub6Config::default()
        };
        cfg
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full_scale()),
            other => Err(Error::config(format!("unknown profile '{other}' (expected desk or full)"))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Applies a `section.key=value` override. The value is parsed as a TOML
    /// literal when possible and as a bare string otherwise.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override '{spec}' is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::config(e.to_string()))?;
        let mut cursor = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = cursor
                .as_table_mut()
                .ok_or_else(|| Error::config(format!("override key '{key}' does not name a table")))?;
            if i + 1 == parts.len() {
                if !table.contains_key(*part) {
                    return Err(Error::config(format!("unknown config key '{key}'")));
                }
                table.insert(part.to_string(), value.clone());
                break;
            }
            cursor = table
                .get_mut(*part)
                .ok_or_else(|| Error::config(format!("unknown config key '{key}'")))?;
        }
        let updated: ScenarioConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("override '{key}': {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        }
        fn nonzero(name: &str, v: usize) -> Result<()> {
            if v > 0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be at least 1")))
            }
        }

        let c = &self.channel;
        positive("channel.carrier_hz", c.carrier_hz)?;
        positive("channel.sub6_carrier_hz", c.sub6_carrier_hz)?;
        nonzero("channel.cluster_count", c.cluster_count)?;
        nonzero("channel.sub6_cluster_count", c.sub6_cluster_count)?;
        positive("channel.slot_duration_s", c.slot_duration_s)?;
        positive("channel.speed_mps", c.speed_mps)?;
        positive("channel.mean_blockage_s", c.mean_blockage_s)?;
        positive("channel.delay_spread_s", c.delay_spread_s)?;
        positive("channel.sub6_delay_spread_s", c.sub6_delay_spread_s)?;
        if c.blocker_density < 0.0 {
            return Err(Error::config("channel.blocker_density must be non-negative"));
        }
        if c.nlos_exponent < c.los_exponent {
            return Err(Error::config("channel.nlos_exponent must not be below channel.los_exponent"));
        }
        positive("channel.grid.block_m", c.grid.block_m)?;
        if c.grid.horizontal_roads + c.grid.vertical_roads == 0 {
            return Err(Error::config("channel.grid must contain at least one road"));
        }

        let m = &self.mmwave;
        nonzero("mmwave.n_bs", m.n_bs)?;
        nonzero("mmwave.n_ue", m.n_ue)?;
        nonzero("mmwave.n_s", m.n_s)?;
        nonzero("mmwave.n_subcarriers", m.n_subcarriers)?;
        nonzero("mmwave.m_ss", m.m_ss)?;
        nonzero("mmwave.n_ss", m.n_ss)?;
        nonzero("mmwave.kappa_rvq", m.kappa_rvq)?;
        nonzero("mmwave.kappa_channel", m.kappa_channel)?;
        nonzero("mmwave.rvq_training", m.rvq_training)?;
        positive("mmwave.bandwidth_hz", m.bandwidth_hz)?;
        for (name, v) in [("mmwave.beta_rf", m.beta_rf), ("mmwave.zeta_rf", m.zeta_rf), ("mmwave.beta_bb", m.beta_bb), ("mmwave.zeta_bb", m.zeta_bb)] {
            positive(name, v)?;
        }
        if m.kappa_rvq > 16 {
            return Err(Error::config("mmwave.kappa_rvq above 16 bits is not supported"));
        }
        if !(m.n_s <= m.n_bs_rf && m.n_bs_rf <= m.n_bs && m.n_s <= m.n_ue_rf && m.n_ue_rf <= m.n_ue) {
            return Err(Error::config(
                "mmwave: require n_s <= n_bs_rf <= n_bs and n_s <= n_ue_rf <= n_ue",
            ));
        }
        let (nu_bs, nu_ue) = m.codebook_sizes();
        if nu_bs < m.n_bs_rf || nu_ue < m.n_ue_rf {
            return Err(Error::config("mmwave: codebook smaller than RF chain count"));
        }

        let s = &self.sub6;
        nonzero("sub6.n_bs", s.n_bs)?;
        nonzero("sub6.n_ue", s.n_ue)?;
        nonzero("sub6.n_s", s.n_s)?;
        nonzero("sub6.n_subcarriers", s.n_subcarriers)?;
        nonzero("sub6.nu_pmi", s.nu_pmi)?;
        nonzero("sub6.pmi_oversampling", s.pmi_oversampling)?;
        nonzero("sub6.kappa_channel", s.kappa_channel)?;
        positive("sub6.bandwidth_hz", s.bandwidth_hz)?;
        positive("sub6.beta", s.beta)?;
        positive("sub6.zeta", s.zeta)?;
        if s.n_s > s.n_bs || s.n_s > s.n_ue {
            return Err(Error::config("sub6: n_s exceeds antenna count"));
        }

        nonzero("env.m_dt", self.env.m_dt)?;
        nonzero("env.episode_len_decisions", self.env.episode_len_decisions)?;
        for (name, d) in [("drl", &self.drl), ("hrl.upper", &self.hrl.upper), ("hrl.lower", &self.hrl.lower)] {
            if !(0.0..=1.0).contains(&d.gamma) || !(0.0..=1.0).contains(&d.eta) {
                return Err(Error::config(format!("{name}: gamma and eta must lie in [0, 1]")));
            }
            nonzero(&format!("{name}.batch_size"), d.batch_size)?;
            if d.buffer_capacity < d.batch_size {
                return Err(Error::config(format!("{name}.buffer_capacity below batch_size")));
            }
            positive(&format!("{name}.reward_scale"), d.reward_scale)?;
            positive(&format!("{name}.tau_max_factor"), d.tau_max_factor)?;
            if d.hidden.iter().any(|&h| h == 0) {
                return Err(Error::config(format!("{name}.hidden layers must be non-empty")));
            }
        }
        nonzero("hrl.m_upper", self.hrl.m_upper)?;
        if !(self.hrl.w_clip >= 1.0) {
            return Err(Error::config("hrl.w_clip must be >= 1"));
        }
        let e = &self.experiment;
        nonzero("experiment.n_seeds", e.n_seeds)?;
        nonzero("experiment.n_episodes", e.n_episodes)?;
        nonzero("experiment.summary_window", e.summary_window)?;
        nonzero("experiment.summary_episodes", e.summary_episodes)?;
        if e.policies.is_empty() {
            return Err(Error::config("experiment.policies must not be empty"));
        }
        if e.sweep_points().is_empty() {
            return Err(Error::config("experiment: sweep has no values"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ScenarioConfig::desk();
        cfg.validate().unwrap();
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        ScenarioConfig::full_scale().validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ScenarioConfig::from_toml_str("[env]\nm_dt = 4\n").unwrap();
        assert_eq!(cfg.env.m_dt, 4);
        assert_eq!(cfg.mmwave.n_bs, 8);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = ScenarioConfig::from_toml_str("[env]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn override_sets_nested_values() {
        let mut cfg = ScenarioConfig::desk();
        cfg.apply_override("env.m_dt=5").unwrap();
        assert_eq!(cfg.env.m_dt, 5);
        cfg.apply_override("hrl.correction=direct_is").unwrap();
        assert_eq!(cfg.hrl.correction, Correction::DirectIs);
        cfg.apply_override("experiment.transmit_power_dbm=[5.0, 30.0]").unwrap();
        assert_eq!(cfg.experiment.transmit_power_dbm, vec![5.0, 30.0]);
        cfg.apply_override("channel.grid.block_m=50.0").unwrap();
        assert_eq!(cfg.channel.grid.block_m, 50.0);
    }

    #[test]
    fn override_rejects_unknown_key_and_invalid_value() {
        let mut cfg = ScenarioConfig::desk();
        assert!(cfg.apply_override("env.nope=1").is_err());
        assert!(cfg.apply_override("env.m_dt=0").is_err());
        assert!(cfg.apply_override("no_equals").is_err());
        assert_eq!(cfg, ScenarioConfig::desk());
    }

    #[test]
    fn default_overheads() {
        let cfg = ScenarioConfig::desk();
        assert_eq!(cfg.mmwave.analog_overhead(), 8);
        assert_eq!(cfg.mmwave.digital_overhead(), 8);
        assert_eq!(cfg.sub6.pmi_overhead(), 4);
        let full = ScenarioConfig::full_scale();
        assert_eq!(full.mmwave.analog_overhead(), 128);
    }
}
