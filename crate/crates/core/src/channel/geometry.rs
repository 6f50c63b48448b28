//! Clustered geometric wideband channel.
//!
//! Each band sees the same vehicle trajectory through a handful of path
//! clusters. The LOS cluster follows the true geometry; NLOS clusters have
//! random angles and exponentially distributed excess delays with powers
//! decaying in delay. Every cluster rotates at its own Doppler frequency.
//!
//! ```text
//! H[k, m] = sum_p alpha_p(m) a_rx(aoa_p) a_tx(aod_p)^H exp(-j 2 pi tau_p f_k)
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::channel::mobility::Trajectory;
use crate::channel::trace::{ChannelSource, ChannelTrace};
use crate::config::{Band, ChannelConfig, GridConfig, MmwaveConfig, ScenarioConfig, Sub6Config};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::rng::{self, tag};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const MIN_DISTANCE_M: f64 = 1.0;
/// Half-width of a street; vehicles within it of a BS road line see the BS.
const STREET_HALF_WIDTH_M: f64 = 10.0;
const BS_SETBACK_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCluster {
    pub complex_gain: Complex64,
    /// Departure angle from the BS array broadside.
    pub aod: f64,
    /// Arrival angle from the UE array broadside.
    pub aoa: f64,
    /// Excess delay in seconds.
    pub delay: f64,
    pub doppler: f64,
    pub is_los: bool,
}

/// Everything `generate_channel` needs to know about one band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandConfig {
    pub band: Band,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub cluster_count: usize,
    pub k_factor_db: f64,
    pub delay_spread_s: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
}

impl BandConfig {
    pub fn mmwave(ch: &ChannelConfig, mm: &MmwaveConfig) -> Self {
        Self {
            band: Band::Mmwave,
            carrier_hz: ch.carrier_hz,
            bandwidth_hz: mm.bandwidth_hz,
            n_subcarriers: mm.n_subcarriers,
            n_tx: mm.n_bs,
            n_rx: mm.n_ue,
            cluster_count: ch.cluster_count,
            k_factor_db: ch.k_factor_db,
            delay_spread_s: ch.delay_spread_s,
            los_exponent: ch.los_exponent,
            nlos_exponent: ch.nlos_exponent,
        }
    }

    pub fn sub6(ch: &ChannelConfig, s6: &Sub6Config) -> Self {
        Self {
            band: Band::Sub6,
            carrier_hz: ch.sub6_carrier_hz,
            bandwidth_hz: s6.bandwidth_hz,
            n_subcarriers: s6.n_subcarriers,
            n_tx: s6.n_bs,
            n_rx: s6.n_ue,
            cluster_count: ch.sub6_cluster_count,
            k_factor_db: ch.sub6_k_factor_db,
            delay_spread_s: ch.sub6_delay_spread_s,
            los_exponent: ch.los_exponent,
            nlos_exponent: ch.nlos_exponent,
        }
    }

    pub fn for_band(cfg: &ScenarioConfig, band: Band) -> Self {
        match band {
            Band::Mmwave => Self::mmwave(&cfg.channel, &cfg.mmwave),
            Band::Sub6 => Self::sub6(&cfg.channel, &cfg.sub6),
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_subcarriers == 0 || self.cluster_count == 0 {
            return Err(Error::config(format!(
                "{} band: antenna, subcarrier and cluster counts must be positive",
                self.band.name()
            )));
        }
        if !(self.carrier_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::config("carrier and bandwidth must be positive"));
        }
        Ok(())
    }

    /// Baseband offset of subcarrier `k`; the grid is centered on the carrier.
    pub fn subcarrier_offset(&self, k: usize) -> f64 {
        let spacing = self.bandwidth_hz / self.n_subcarriers as f64;
        (k as f64 - (self.n_subcarriers as f64 - 1.0) / 2.0) * spacing
    }
}

/// Half-wavelength ULA response with unit-modulus entries.
pub fn ula_response(n: usize, angle: f64) -> Vec<Complex64> {
    let s = angle.sin();
    (0..n)
        .map(|i| Complex64::from_polar(1.0, PI * i as f64 * s))
        .collect()
}

/// Log-distance path gain: Friis intercept at 1 m, then `d^-n`.
pub fn large_scale_gain_with(distance_m: f64, los: bool, carrier_hz: f64, los_exp: f64, nlos_exp: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::domain(format!("distance must be positive, got {distance_m}")));
    }
    if !(carrier_hz > 0.0) {
        return Err(Error::domain(format!("carrier must be positive, got {carrier_hz}")));
    }
    let intercept = (SPEED_OF_LIGHT / (4.0 * PI * carrier_hz)).powi(2);
    let exponent = if los { los_exp } else { nlos_exp };
    Ok(intercept * distance_m.powf(-exponent))
}

/// Path gain with the default exponents (2.0 LOS, 3.2 NLOS).
pub fn large_scale_gain(distance_m: f64, los: bool, carrier_hz: f64) -> Result<f64> {
    large_scale_gain_with(distance_m, los, carrier_hz, 2.0, 3.2)
}

/// Base-station position: set back from the most central intersection.
pub fn bs_position(grid: &GridConfig) -> (f64, f64) {
    let ix = grid.vertical_roads.saturating_sub(1) / 2;
    let iy = grid.horizontal_roads.saturating_sub(1) / 2;
    (
        ix as f64 * grid.block_m + BS_SETBACK_M,
        iy as f64 * grid.block_m + BS_SETBACK_M,
    )
}

/// Whether buildings leave a direct path: the vehicle must be on one of the
/// two streets meeting at the base-station corner.
pub fn geometric_los(bs: (f64, f64), p: (f64, f64)) -> bool {
    (p.0 - bs.0).abs() <= STREET_HALF_WIDTH_M || (p.1 - bs.1).abs() <= STREET_HALF_WIDTH_M
}

/// Two-state Markov blockage process driven by passing vehicles.
/// Returns `true` for slots in which a blocker obstructs the direct path.
pub fn blockage_process(ch: &ChannelConfig, blocker_density: f64, n_slots: usize, seed: u64) -> Vec<bool> {
    let dt = ch.slot_duration_s;
    let onset_rate = blocker_density.max(0.0) * ch.blockage_rate_per_density_hz;
    let p_on = 1.0 - (-onset_rate * dt).exp();
    let p_off = 1.0 - (-dt / ch.mean_blockage_s).exp();
    let mut rng = rng::stream(seed, &[tag("blockage")]);
    let stationary = if p_on + p_off > 0.0 { p_on / (p_on + p_off) } else { 0.0 };
    let mut blocked = rng.random::<f64>() < stationary;
    let mut out = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        out.push(blocked);
        let u: f64 = rng.random();
        blocked = if blocked { u >= p_off } else { u < p_on };
    }
    out
}

/// Time-evolving geometric channel evaluated lazily, slot by slot.
#[derive(Debug, Clone)]
pub struct GeometricChannel {
    cfg: BandConfig,
    /// Static NLOS clusters; the LOS cluster is rebuilt per slot from geometry.
    nlos: Vec<PathCluster>,
    los_template: Option<PathCluster>,
    los_power: f64,
    per_slot: Vec<SlotGeometry>,
}

#[derive(Debug, Clone, Copy)]
struct SlotGeometry {
    los: bool,
    gain: f64,
    los_aod: f64,
    los_aoa: f64,
    los_doppler: f64,
    /// Accumulated Doppler phase of the LOS cluster at the start of the slot.
    los_phase: f64,
    /// Slot index used to rotate static-Doppler NLOS clusters.
    t: f64,
}

fn wrap(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

impl GeometricChannel {
    /// Builds a channel from explicit clusters with constant gain `g` and no
    /// geometry. Each cluster keeps its own angles and Doppler.
    pub fn from_clusters(cfg: BandConfig, clusters: Vec<PathCluster>, n_slots: usize, slot_duration_s: f64, g: f64) -> Result<Self> {
        cfg.check()?;
        let per_slot = (0..n_slots)
            .map(|m| SlotGeometry {
                los: clusters.iter().any(|c| c.is_los),
                gain: g,
                los_aod: 0.0,
                los_aoa: 0.0,
                los_doppler: 0.0,
                los_phase: 0.0,
                t: m as f64 * slot_duration_s,
            })
            .collect();
        Ok(Self {
            cfg,
            nlos: clusters,
            los_template: None,
            los_power: 0.0,
            per_slot,
        })
    }

    pub fn config(&self) -> &BandConfig {
        &self.cfg
    }

    /// Clusters active at slot `m`, with Doppler phase applied.
    pub fn clusters_at(&self, m: usize) -> Vec<PathCluster> {
        let s = &self.per_slot[m];
        let mut out = Vec::with_capacity(self.nlos.len() + 1);
        if let (Some(tpl), true) = (self.los_template, s.los) {
            out.push(PathCluster {
                complex_gain: tpl.complex_gain * Complex64::from_polar(self.los_power.sqrt(), s.los_phase),
                aod: s.los_aod,
                aoa: s.los_aoa,
                delay: 0.0,
                doppler: s.los_doppler,
                is_los: true,
            });
        }
        // Blocked slots hand the LOS share to the scattered clusters.
        let nlos_scale = if self.los_template.is_some() && !s.los {
            (1.0 / (1.0 - self.los_power)).sqrt()
        } else {
            1.0
        };
        for c in &self.nlos {
            let phase = 2.0 * PI * c.doppler * s.t;
            out.push(PathCluster {
                complex_gain: c.complex_gain * Complex64::from_polar(nlos_scale, phase),
                ..*c
            });
        }
        out
    }

    pub fn n_clusters(&self) -> usize {
        self.nlos.len() + usize::from(self.los_template.is_some())
    }

    pub fn materialize(&self) -> ChannelTrace {
        ChannelTrace::from_source(self)
    }
}

impl ChannelSource for GeometricChannel {
    fn band(&self) -> Band {
        self.cfg.band
    }
    fn n_tx(&self) -> usize {
        self.cfg.n_tx
    }
    fn n_rx(&self) -> usize {
        self.cfg.n_rx
    }
    fn n_subcarriers(&self) -> usize {
        self.cfg.n_subcarriers
    }
    fn n_slots(&self) -> usize {
        self.per_slot.len()
    }
    fn bandwidth_hz(&self) -> f64 {
        self.cfg.bandwidth_hz
    }
    fn large_scale_gain(&self, slot: usize) -> f64 {
        self.per_slot[slot].gain
    }
    fn los(&self, slot: usize) -> bool {
        self.per_slot[slot].los
    }

    fn frame(&self, slot: usize) -> Vec<CMat> {
        let clusters = self.clusters_at(slot);
        let (nt, nr, nk) = (self.cfg.n_tx, self.cfg.n_rx, self.cfg.n_subcarriers);
        let spatial: Vec<CMat> = clusters
            .iter()
            .map(|c| {
                let ar = ula_response(nr, c.aoa);
                let at = ula_response(nt, c.aod);
                CMat::from_fn(nr, nt, |i, j| c.complex_gain * ar[i] * at[j].conj())
            })
            .collect();
        (0..nk)
            .map(|k| {
                let f = self.cfg.subcarrier_offset(k);
                let mut h = CMat::zeros(nr, nt);
                for (c, s) in clusters.iter().zip(&spatial) {
                    let rot = Complex64::from_polar(1.0, -2.0 * PI * c.delay * f);
                    h += s * rot;
                }
                h
            })
            .collect()
    }
}

/// Generates one band's channel along `trajectory`.
///
/// Cluster draws depend on `(seed, band)`; the blockage sequence depends only
/// on `seed`, so two bands generated with the same seed share LOS flags.
pub fn generate_geometric(
    trajectory: &Trajectory,
    band_cfg: &BandConfig,
    channel: &ChannelConfig,
    blocker_density: f64,
    seed: u64,
) -> Result<GeometricChannel> {
    band_cfg.check()?;
    if blocker_density < 0.0 {
        return Err(Error::config("blocker density must be non-negative"));
    }
    let n_slots = trajectory.len();
    let dt = trajectory.slot_duration_s;
    let bs = bs_position(&channel.grid);
    let blocked = blockage_process(channel, blocker_density, n_slots, seed);
    let mut rng = rng::stream(seed, &[tag("clusters"), band_cfg.band.indicator() as u64]);

    let k_lin = 10f64.powf(band_cfg.k_factor_db / 10.0);
    let los_power = k_lin / (k_lin + 1.0);
    let n_nlos = band_cfg.cluster_count - 1;

    let delay_dist = Exp::new(1.0 / band_cfg.delay_spread_s).map_err(|e| Error::config(e.to_string()))?;
    let shadow = Normal::new(0.0, 3.0).map_err(|e| Error::config(e.to_string()))?;
    let f_max = trajectory.speed * band_cfg.carrier_hz / SPEED_OF_LIGHT;
    let start = trajectory.positions.first().copied().unwrap_or((0.0, 0.0));
    let start_heading = trajectory.headings.first().copied().unwrap_or(0.0);
    let los_dir = (bs.1 - start.1).atan2(bs.0 - start.0);

    let mut raw: Vec<(f64, f64, f64, f64, f64)> = (0..n_nlos)
        .map(|_| {
            let delay = delay_dist.sample(&mut rng);
            let power = (-delay / band_cfg.delay_spread_s).exp() * 10f64.powf(shadow.sample(&mut rng) / 10.0);
            let aod = wrap(departure_angle(bs, start) + rng.random_range(-PI / 3.0..PI / 3.0));
            // arrival direction relative to heading
            let arrival = wrap(los_dir + PI - start_heading + rng.random_range(-PI..PI));
            let phase = rng.random_range(0.0..2.0 * PI);
            (delay, power, aod, arrival, phase)
        })
        .collect();
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = raw.iter().map(|r| r.1).sum();
    let nlos_share = if n_nlos > 0 { 1.0 - los_power } else { 0.0 };
    let nlos: Vec<PathCluster> = raw
        .iter()
        .map(|&(delay, power, aod, arrival, phase)| PathCluster {
            complex_gain: Complex64::from_polar((nlos_share * power / total).sqrt(), phase),
            aod,
            aoa: wrap(arrival - PI / 2.0),
            delay,
            doppler: f_max * arrival.cos(),
            is_los: false,
        })
        .collect();
    let los_power = if n_nlos == 0 { 1.0 } else { los_power };
    let los_phase0 = rng.random_range(0.0..2.0 * PI);

    let mut phase = los_phase0;
    let mut per_slot = Vec::with_capacity(n_slots);
    for m in 0..n_slots {
        let p = trajectory.positions[m];
        let heading = trajectory.headings[m];
        let dx = bs.0 - p.0;
        let dy = bs.1 - p.1;
        let d = (dx * dx + dy * dy).sqrt().max(MIN_DISTANCE_M);
        // A single-cluster channel has nothing but the direct path.
        let los = n_nlos == 0 || ((!channel.building_blockage || geometric_los(bs, p)) && !blocked[m]);
        let gain = large_scale_gain_with(d, los, band_cfg.carrier_hz, band_cfg.los_exponent, band_cfg.nlos_exponent)?;
        let arrival = wrap(dy.atan2(dx) - heading);
        let doppler = f_max * arrival.cos();
        per_slot.push(SlotGeometry {
            los,
            gain,
            los_aod: departure_angle(bs, p),
            los_aoa: wrap(arrival - PI / 2.0),
            los_doppler: doppler,
            los_phase: phase,
            t: m as f64 * dt,
        });
        phase += 2.0 * PI * doppler * dt;
    }

    Ok(GeometricChannel {
        cfg: band_cfg.clone(),
        nlos,
        los_template: Some(PathCluster {
            complex_gain: Complex64::new(1.0, 0.0),
            aod: 0.0,
            aoa: 0.0,
            delay: 0.0,
            doppler: 0.0,
            is_los: true,
        }),
        los_power,
        per_slot,
    })
}

/// Departure angle from broadside of a BS array laid along the x axis.
fn departure_angle(bs: (f64, f64), p: (f64, f64)) -> f64 {
    let dx = p.0 - bs.0;
    let dy = p.1 - bs.1;
    // broadside is +y; sin(aod) = dx / d
    wrap(dx.atan2(dy))
}

/// Materialized channel along a trajectory.
pub fn generate_channel(
    trajectory: &Trajectory,
    band_cfg: &BandConfig,
    channel: &ChannelConfig,
    blocker_density: f64,
    seed: u64,
) -> Result<ChannelTrace> {
    Ok(generate_geometric(trajectory, band_cfg, channel, blocker_density, seed)?.materialize())
}
