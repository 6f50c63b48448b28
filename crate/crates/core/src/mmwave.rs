//! mmWave hybrid beam management.
//!
//! Analog stage: DFT codebooks at both ends, an exhaustive pair sweep scored
//! by the user's spectral-efficiency feedback, greedy per-RF-chain pick.
//! Digital stage: noisy estimate of the effective channel seen through the
//! analog beams, reduced to the `n_s` strongest chain pairs, least-squares
//! combiner at the user, RVQ-quantized feedback, pseudo-inverse precoder.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, complex_gaussian, frobenius_sq, CMat, CVec};
use crate::par;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCodebook {
    pub n_antennas: usize,
    pub vectors: Vec<CVec>,
}

impl AnalogCodebook {
    pub fn size(&self) -> usize {
        self.vectors.len()
    }

    /// Steering angle of beam `i`: `sin(angle) = -1 + 2i/size`.
    pub fn angle(&self, i: usize) -> f64 {
        spatial_angle(i, self.size())
    }

    /// Codebook members stacked as columns, in the given order.
    pub fn columns(&self, idx: &[usize]) -> CMat {
        let mut m = CMat::zeros(self.n_antennas, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            m.set_column(c, &self.vectors[i]);
        }
        m
    }
}

fn spatial_angle(i: usize, size: usize) -> f64 {
    (-1.0 + 2.0 * i as f64 / size as f64).clamp(-1.0, 1.0).asin()
}

pub fn dft_codebook(n_antennas: usize, size: usize) -> Result<AnalogCodebook> {
    if n_antennas == 0 || size == 0 {
        return Err(Error::config("codebook needs at least one antenna and one beam"));
    }
    let norm = 1.0 / (n_antennas as f64).sqrt();
    let vectors = (0..size)
        .map(|i| {
            let u = -1.0 + 2.0 * i as f64 / size as f64;
            CVec::from_iterator(
                n_antennas,
                (0..n_antennas).map(|l| Complex64::from_polar(norm, std::f64::consts::PI * l as f64 * u)),
            )
        })
        .collect();
    Ok(AnalogCodebook { n_antennas, vectors })
}

/// Pilot-based estimation error: returns `(mmse, snr_eff)`.
pub fn mmse_estimation(beta: f64, zeta: f64, snr: f64) -> Result<(f64, f64)> {
    if !(beta >= 0.0 && zeta >= 0.0 && snr >= 0.0) {
        return Err(Error::domain(format!(
            "beta, zeta and snr must be non-negative (got {beta}, {zeta}, {snr})"
        )));
    }
    let pilot = beta * zeta * snr;
    if pilot.is_infinite() {
        return Ok((0.0, snr));
    }
    let mmse = 1.0 / (1.0 + pilot);
    let snr_eff = if snr.is_infinite() {
        // limit of snr (1 - mmse) / (1 + snr mmse) as snr grows with fixed beta zeta
        (1.0 - 0.0) / (1.0 / (beta * zeta)).max(f64::MIN_POSITIVE)
    } else {
        snr * (1.0 - mmse) / (1.0 + snr * mmse)
    };
    Ok((mmse, snr_eff))
}

/// Spectral-efficiency feedback for one beam pair, averaged over subcarriers.
pub fn se_feedback(h_frame: &[CMat], g: &CVec, v: &CVec, snr_eff: f64) -> f64 {
    if h_frame.is_empty() {
        return 0.0;
    }
    let total: f64 = h_frame
        .iter()
        .map(|h| {
            let gain = (g.adjoint() * h * v)[(0, 0)].norm_sqr();
            (1.0 + snr_eff * gain).log2()
        })
        .sum();
    total / h_frame.len() as f64
}

/// `feedback[g][v]` for every codebook pair.
pub fn pair_feedback(h_frame: &[CMat], f_cb: &AnalogCodebook, w_cb: &AnalogCodebook, snr_eff: f64) -> Vec<Vec<f64>> {
    let all_v: Vec<usize> = (0..f_cb.size()).collect();
    let all_g: Vec<usize> = (0..w_cb.size()).collect();
    let f = f_cb.columns(&all_v);
    let w_h = w_cb.columns(&all_g).adjoint();
    let mut out = vec![vec![0.0; f_cb.size()]; w_cb.size()];
    for h in h_frame {
        let a = &w_h * h * &f;
        for (gi, row) in out.iter_mut().enumerate() {
            for (vi, cell) in row.iter_mut().enumerate() {
                *cell += (1.0 + snr_eff * a[(gi, vi)].norm_sqr()).log2();
            }
        }
    }
    let k = h_frame.len().max(1) as f64;
    for row in &mut out {
        for cell in row.iter_mut() {
            *cell /= k;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSweep {
    /// BS beam per RF chain.
    pub f_idx: Vec<usize>,
    /// UE beam per RF chain.
    pub w_idx: Vec<usize>,
    /// Feedback of each greedily chosen pair, in pick order.
    pub pair_feedback: Vec<f64>,
    pub f_rf: CMat,
    pub w_rf: CMat,
    pub best_feedback: f64,
}

impl AnalogSweep {
    /// Indices of the `n_s` strongest chain pairs, strongest first.
    pub fn strongest_pairs(&self, n_s: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.pair_feedback.len()).collect();
        order.sort_by(|&a, &b| self.pair_feedback[b].total_cmp(&self.pair_feedback[a]).then(a.cmp(&b)));
        order.truncate(n_s);
        order
    }
}

/// Greedy per-RF-chain analog sweep.
///
/// Round `i` picks the best remaining pair whose BS and UE beams are both
/// unused; ties go to the lowest BS index, then the lowest UE index. When one
/// side has more RF chains, its extra chains take the unused beams that score
/// best against any already chosen beam on the other side.
pub fn analog_sweep(
    h_frame: &[CMat],
    f_cb: &AnalogCodebook,
    w_cb: &AnalogCodebook,
    n_bs_rf: usize,
    n_ue_rf: usize,
    snr_eff: f64,
) -> Result<AnalogSweep> {
    if f_cb.size() < n_bs_rf || w_cb.size() < n_ue_rf {
        return Err(Error::config(format!(
            "codebooks ({} x {}) smaller than RF chains ({n_bs_rf} x {n_ue_rf})",
            f_cb.size(),
            w_cb.size()
        )));
    }
    if n_bs_rf == 0 || n_ue_rf == 0 {
        return Err(Error::config("at least one RF chain per side is required"));
    }
    let fb = pair_feedback(h_frame, f_cb, w_cb, snr_eff);
    Ok(greedy_from_scores(&fb, f_cb, w_cb, n_bs_rf, n_ue_rf))
}

pub(crate) fn greedy_from_scores(
    fb: &[Vec<f64>],
    f_cb: &AnalogCodebook,
    w_cb: &AnalogCodebook,
    n_bs_rf: usize,
    n_ue_rf: usize,
) -> AnalogSweep {
    let (nu_bs, nu_ue) = (f_cb.size(), w_cb.size());
    let mut used_v = vec![false; nu_bs];
    let mut used_g = vec![false; nu_ue];
    let mut f_idx = Vec::with_capacity(n_bs_rf);
    let mut w_idx = Vec::with_capacity(n_ue_rf);
    let mut pair_fb = Vec::new();
    for _ in 0..n_bs_rf.min(n_ue_rf) {
        let mut best: Option<(f64, usize, usize)> = None;
        for v in (0..nu_bs).filter(|&v| !used_v[v]) {
            for g in (0..nu_ue).filter(|&g| !used_g[g]) {
                let s = fb[g][v];
                if best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, v, g));
                }
            }
        }
        let (s, v, g) = best.expect("codebooks are at least as large as the chain count");
        used_v[v] = true;
        used_g[g] = true;
        f_idx.push(v);
        w_idx.push(g);
        pair_fb.push(s);
    }
    while f_idx.len() < n_bs_rf {
        let v = (0..nu_bs)
            .filter(|&v| !used_v[v])
            .map(|v| (w_idx.iter().map(|&g| fb[g][v]).fold(f64::NEG_INFINITY, f64::max), v))
            .fold(None, |acc: Option<(f64, usize)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            })
            .expect("unused beam available")
            .1;
        used_v[v] = true;
        f_idx.push(v);
    }
    while w_idx.len() < n_ue_rf {
        let g = (0..nu_ue)
            .filter(|&g| !used_g[g])
            .map(|g| (f_idx.iter().map(|&v| fb[g][v]).fold(f64::NEG_INFINITY, f64::max), g))
            .fold(None, |acc: Option<(f64, usize)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            })
            .expect("unused beam available")
            .1;
        used_g[g] = true;
        w_idx.push(g);
    }
    AnalogSweep {
        f_rf: f_cb.columns(&f_idx),
        w_rf: w_cb.columns(&w_idx),
        best_feedback: pair_fb[0],
        f_idx,
        w_idx,
        pair_feedback: pair_fb,
    }
}

/// `M_RF = m_ss * ceil(nu_bs nu_ue / n_ss)`.
pub fn analog_overhead(m_ss: usize, n_ss: usize, nu_bs: usize, nu_ue: usize) -> usize {
    m_ss * (nu_bs * nu_ue).div_ceil(n_ss)
}

/// `M_BB = ceil(kappa_rvq / kappa_channel)`.
pub fn digital_overhead(kappa_rvq: usize, kappa_channel: usize) -> usize {
    kappa_rvq.div_ceil(kappa_channel)
}

/// Noisy effective channel `W_RF* H F_RF + sqrt(n_bs / (beta zeta snr)) delta`
/// for every subcarrier.
#[allow(clippy::too_many_arguments)]
pub fn estimate_effective_channel<R: Rng + ?Sized>(
    h_frame: &[CMat],
    f_rf: &CMat,
    w_rf: &CMat,
    beta: f64,
    zeta: f64,
    n_bs: usize,
    snr: f64,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    let pilot = beta * zeta * snr;
    if !(pilot > 0.0) {
        return Err(Error::domain(format!("beta * zeta * snr must be positive, got {pilot}")));
    }
    let std = (n_bs as f64 / pilot).sqrt();
    let w_h = w_rf.adjoint();
    Ok(h_frame
        .iter()
        .map(|h| {
            let eff = &w_h * h * f_rf;
            let noise = complex_gaussian(rng, eff.nrows(), eff.ncols());
            eff + noise * Complex64::new(std, 0.0)
        })
        .collect())
}

/// Rows and columns of `m` picked by `sel`: the sub-channel between the
/// selected UE chains (rows) and BS chains (columns).
pub fn select_pairs(m: &CMat, sel: &[usize]) -> CMat {
    CMat::from_fn(sel.len(), sel.len(), |i, j| m[(sel[i], sel[j])])
}

/// Least-squares combiner `H (H* H)^-1`.
pub fn ls_combiner(hbar_eff: &CMat) -> Result<CMat> {
    linalg::left_pinv_adjoint(hbar_eff)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RvqCodebook {
    pub bits: usize,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<CMat>,
}

impl RvqCodebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `||a* b||_2`. Closed form for one or two columns, power method beyond.
pub fn similarity(a: &CMat, b: &CMat) -> f64 {
    flat_similarity(a.as_slice(), b.as_slice(), a.nrows(), a.ncols(), b.ncols())
}

// Column-major flat inputs: a is rows x ca, b is rows x cb.
fn flat_similarity(a: &[Complex64], b: &[Complex64], rows: usize, ca: usize, cb: usize) -> f64 {
    let dot = |i: usize, j: usize| -> Complex64 {
        let ai = &a[i * rows..(i + 1) * rows];
        let bj = &b[j * rows..(j + 1) * rows];
        ai.iter().zip(bj).map(|(x, y)| x.conj() * y).sum()
    };
    match (ca, cb) {
        (1, _) => (0..cb).map(|j| dot(0, j).norm_sqr()).sum::<f64>().sqrt(),
        (_, 1) => (0..ca).map(|i| dot(i, 0).norm_sqr()).sum::<f64>().sqrt(),
        (2, 2) => {
            let g = [dot(0, 0), dot(0, 1), dot(1, 0), dot(1, 1)];
            // gram = g* g, 2x2 Hermitian [[p, q], [q*, r]]
            let p = g[0].norm_sqr() + g[2].norm_sqr();
            let r = g[1].norm_sqr() + g[3].norm_sqr();
            let q = g[0].conj() * g[1] + g[2].conj() * g[3];
            let half = 0.5 * (p - r);
            let lambda = 0.5 * (p + r) + (half * half + q.norm_sqr()).sqrt();
            lambda.max(0.0).sqrt()
        }
        _ => {
            let g = CMat::from_fn(ca, cb, |i, j| dot(i, j));
            linalg::spectral_norm(&g)
        }
    }
}

/// Index of the entry maximizing `||hbar* entry||_2`; ties go to the lowest index.
pub fn quantize_index(hbar: &CMat, cb: &RvqCodebook) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, e) in cb.entries.iter().enumerate() {
        let s = similarity(hbar, e);
        if s > best.0 {
            best = (s, i);
        }
    }
    best.1
}

pub fn quantize_effective_channel(hbar: &CMat, cb: &RvqCodebook) -> Result<(CMat, usize)> {
    if cb.is_empty() {
        return Err(Error::config("empty RVQ codebook"));
    }
    if hbar.nrows() != cb.rows || hbar.ncols() != cb.cols {
        return Err(Error::shape(format!(
            "effective channel {}x{} vs codebook {}x{}",
            hbar.nrows(),
            hbar.ncols(),
            cb.rows,
            cb.cols
        )));
    }
    let i = quantize_index(hbar, cb);
    Ok((cb.entries[i].clone(), i))
}

fn normalized(m: CMat) -> CMat {
    let n = frobenius_sq(&m).sqrt();
    if n > 0.0 {
        m / Complex64::new(n, 0.0)
    } else {
        m
    }
}

/// Result of a Lloyd run: the codebook and the mean distortion after every
/// assignment step.
#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub codebook: RvqCodebook,
    pub distortion: Vec<f64>,
}

const LLOYD_MAX_ITERS: usize = 100;
const LLOYD_REL_TOL: f64 = 1e-6;

/// Lloyd's algorithm under the similarity metric. Distortion of a sample is
/// `1 - s^2` where `s` is its similarity to the assigned centroid; samples and
/// centroids are Frobenius-normalized. Centroids are phase-aligned cluster
/// means; an update that would raise a cluster's distortion is rejected, so
/// the distortion sequence never increases.
pub fn lloyd(training: &[CMat], n_centroids: usize, bits: usize, seed: u64) -> Result<LloydOutcome> {
    if training.len() < n_centroids || n_centroids == 0 {
        return Err(Error::config(format!(
            "Lloyd needs at least {n_centroids} training samples, got {}",
            training.len()
        )));
    }
    let (rows, cols) = training[0].shape();
    let samples: Vec<CMat> = training.iter().map(|m| normalized(m.clone())).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[tag("lloyd-init")]));
    let mut centroids: Vec<CMat> = order[..n_centroids].iter().map(|&i| samples[i].clone()).collect();

    let assign = |centroids: &[CMat]| -> Vec<(usize, f64)> {
        par::map_slice(&samples, |x| {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (c, cent) in centroids.iter().enumerate() {
                let s = similarity(x, cent);
                if s > best.1 {
                    best = (c, s);
                }
            }
            (best.0, 1.0 - best.1 * best.1)
        })
    };
    let cluster_distortion = |cent: &CMat, members: &[usize]| -> f64 {
        members.iter().map(|&i| 1.0 - similarity(&samples[i], cent).powi(2)).sum()
    };

    let mut history = Vec::new();
    let mut labels = assign(&centroids);
    let mut current: f64 = labels.iter().map(|l| l.1).sum::<f64>() / samples.len() as f64;
    history.push(current);
    for _ in 0..LLOYD_MAX_ITERS {
        let mut members = vec![Vec::new(); n_centroids];
        for (i, &(c, _)) in labels.iter().enumerate() {
            members[c].push(i);
        }
        let mut taken = vec![false; samples.len()];
        for c in 0..n_centroids {
            if members[c].is_empty() {
                // reseed from the sample worst served by its centroid
                let far = (0..samples.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| labels[a].1.total_cmp(&labels[b].1).then(b.cmp(&a)));
                if let Some(i) = far {
                    taken[i] = true;
                    centroids[c] = samples[i].clone();
                }
                continue;
            }
            let mut sum = CMat::zeros(rows, cols);
            for &i in &members[c] {
                let phase = (centroids[c].adjoint() * &samples[i]).trace();
                let rot = if phase.norm() > 0.0 { phase.conj() / phase.norm() } else { Complex64::new(1.0, 0.0) };
                sum += &samples[i] * rot;
            }
            if frobenius_sq(&sum) == 0.0 {
                continue;
            }
            let candidate = normalized(sum);
            if cluster_distortion(&candidate, &members[c]) <= cluster_distortion(&centroids[c], &members[c]) {
                centroids[c] = candidate;
            }
        }
        labels = assign(&centroids);
        let next: f64 = labels.iter().map(|l| l.1).sum::<f64>() / samples.len() as f64;
        history.push(next);
        let improvement = (current - next) / current.max(f64::MIN_POSITIVE);
        current = next;
        if improvement < LLOYD_REL_TOL {
            break;
        }
    }
    Ok(LloydOutcome {
        codebook: RvqCodebook {
            bits,
            rows,
            cols,
            entries: centroids,
        },
        distortion: history,
    })
}

/// RVQ codebook of `2^bits` entries trained on `n_training` normalized
/// complex Gaussian matrices.
pub fn build_rvq_codebook(bits: usize, rows: usize, cols: usize, n_training: usize, seed: u64) -> Result<RvqCodebook> {
    if bits == 0 || bits > 16 {
        return Err(Error::config(format!("RVQ bits must lie in 1..=16, got {bits}")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::config("RVQ entry shape must be non-empty"));
    }
    let n_centroids = 1usize << bits;
    let n_training = n_training.max(n_centroids);
    let mut rng = rng::stream(seed, &[tag("rvq-training"), bits as u64, rows as u64, cols as u64]);
    let training: Vec<CMat> = (0..n_training).map(|_| complex_gaussian(&mut rng, rows, cols)).collect();
    Ok(lloyd(&training, n_centroids, bits, seed)?.codebook)
}

type RvqKey = (usize, usize, usize, usize, u64);

/// Process-wide cache of trained codebooks keyed by `(bits, shape, n_training, seed)`.
pub fn rvq_codebook_cached(bits: usize, rows: usize, cols: usize, n_training: usize, seed: u64) -> Result<Arc<RvqCodebook>> {
    static CACHE: OnceLock<Mutex<HashMap<RvqKey, Arc<RvqCodebook>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (bits, rows, cols, n_training, seed);
    if let Some(cb) = cache.lock().expect("rvq cache poisoned").get(&key) {
        return Ok(Arc::clone(cb));
    }
    let cb = Arc::new(build_rvq_codebook(bits, rows, cols, n_training, seed)?);
    let mut guard = cache.lock().expect("rvq cache poisoned");
    Ok(Arc::clone(guard.entry(key).or_insert(cb)))
}

/// Pseudo-inverse precoder `H^* (H H^*)^-1`, rescaled so that
/// `||f_rf f_bb||_F^2 = n_s`.
pub fn mmse_precoder(hhat: &CMat, f_rf: &CMat, n_s: usize) -> Result<CMat> {
    let f_bb = linalg::right_pinv(hhat)?;
    normalize_precoder(f_rf, f_bb, n_s)
}

pub fn normalize_precoder(f_rf: &CMat, f_bb: CMat, n_s: usize) -> Result<CMat> {
    if f_rf.ncols() != f_bb.nrows() {
        return Err(Error::shape(format!("f_rf has {} columns, f_bb {} rows", f_rf.ncols(), f_bb.nrows())));
    }
    let p = frobenius_sq(&(f_rf * &f_bb));
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Numerical("precoder has zero or non-finite power".into()));
    }
    Ok(f_bb * Complex64::new((n_s as f64 / p).sqrt(), 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformers {
    pub f_rf: CMat,
    pub w_rf: CMat,
    /// Per subcarrier, `n_bs_rf x n_s`.
    pub f_bb: Vec<CMat>,
    /// Per subcarrier, `n_ue_rf x n_s`.
    pub w_bb: Vec<CMat>,
}

/// Embeds an `n_s x n_s` baseband matrix into the rows `sel` of a
/// `chains x n_s` matrix.
pub fn embed_rows(small: &CMat, sel: &[usize], chains: usize) -> CMat {
    let mut out = CMat::zeros(chains, small.ncols());
    for (i, &r) in sel.iter().enumerate() {
        out.set_row(r, &small.row(i));
    }
    out
}

/// Beamformers right after an analog sweep: the `n_s` strongest chain pairs
/// carry one stream each with unit baseband weights.
pub fn analog_only(sweep: &AnalogSweep, n_s: usize, n_subcarriers: usize) -> Result<HybridBeamformers> {
    let sel = sweep.strongest_pairs(n_s);
    let eye = CMat::identity(sel.len(), sel.len());
    let f_bb = normalize_precoder(&sweep.f_rf, embed_rows(&eye, &sel, sweep.f_rf.ncols()), n_s)?;
    let w_bb = embed_rows(&eye, &sel, sweep.w_rf.ncols());
    Ok(HybridBeamformers {
        f_rf: sweep.f_rf.clone(),
        w_rf: sweep.w_rf.clone(),
        f_bb: vec![f_bb; n_subcarriers],
        w_bb: vec![w_bb; n_subcarriers],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalTraining {
    pub beamformers: HybridBeamformers,
    pub rvq_index: Vec<usize>,
}

/// Digital beam training on top of an analog sweep. `effective` holds the
/// per-subcarrier full effective channel (estimated or exact); `quantize`
/// selects between RVQ feedback and unquantized feedback.
pub fn digital_from_effective(
    effective: &[CMat],
    sweep: &AnalogSweep,
    n_s: usize,
    cb: Option<&RvqCodebook>,
) -> Result<DigitalTraining> {
    let sel = sweep.strongest_pairs(n_s);
    let mut f_bb = Vec::with_capacity(effective.len());
    let mut w_bb = Vec::with_capacity(effective.len());
    let mut rvq_index = Vec::with_capacity(effective.len());
    let f_sel = sweep.f_rf.select_columns(&sel);
    for hbar in effective {
        let reduced = select_pairs(hbar, &sel);
        let w_small = ls_combiner(&reduced)?;
        let hhat = match cb {
            Some(cb) => {
                let (e, i) = quantize_effective_channel(&reduced, cb)?;
                rvq_index.push(i);
                e
            }
            None => {
                rvq_index.push(0);
                reduced.clone()
            }
        };
        let f_small = mmse_precoder(&hhat, &f_sel, n_s)?;
        f_bb.push(embed_rows(&f_small, &sel, sweep.f_rf.ncols()));
        w_bb.push(embed_rows(&w_small, &sel, sweep.w_rf.ncols()));
    }
    Ok(DigitalTraining {
        beamformers: HybridBeamformers {
            f_rf: sweep.f_rf.clone(),
            w_rf: sweep.w_rf.clone(),
            f_bb,
            w_bb,
        },
        rvq_index,
    })
}

/// Per-subcarrier spectral efficiency
/// `log2 det(I + snr (W*W)^-1 W* H F F* H* W)` with `W = W_RF W_BB[k]`,
/// `F = F_RF F_BB[k]` and `snr = P G / noise_var`. The combiner noise is
/// whitened, so any invertible scaling of `W` leaves the rate unchanged.
pub fn spectral_efficiency_mmwave(
    h_frame: &[CMat],
    bf: &HybridBeamformers,
    p: f64,
    g: f64,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let snr = p * g / noise_var;
    h_frame
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let w = &bf.w_rf * &bf.w_bb[k];
            let f = &bf.f_rf * &bf.f_bb[k];
            whitened_log_det(h, &w, &f, snr)
        })
        .collect()
}

pub(crate) fn whitened_log_det(h: &CMat, w: &CMat, f: &CMat, snr: f64) -> Result<f64> {
    if snr == 0.0 {
        return Ok(0.0);
    }
    if !(snr > 0.0) {
        return Err(Error::domain(format!("snr must be non-negative, got {snr}")));
    }
    let gram = w.adjoint() * w;
    let a = w.adjoint() * h * f;
    let signal = &a * a.adjoint() * Complex64::new(snr, 0.0);
    let total = linalg::log2_det_hpd(&(&gram + signal))?;
    let base = linalg::log2_det_hpd(&gram)?;
    Ok((total - base).max(0.0))
}
