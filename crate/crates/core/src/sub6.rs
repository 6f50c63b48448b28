//! Sub-6 GHz fully digital beam management: noisy CSI, PMI codebook
//! selection, zero-forcing combining and spectral-efficiency feedback.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, complex_gaussian, frobenius_sq, CMat};
use crate::mmwave::whitened_log_det;

/// Above this many column subsets the codebook enumeration is refused.
const MAX_ENUMERATION: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PmiCodebook {
    pub n_bs: usize,
    pub n_s: usize,
    pub oversampling: usize,
    /// Oversampled-DFT column indices of each entry.
    pub columns: Vec<Vec<usize>>,
    pub precoders: Vec<CMat>,
}

impl PmiCodebook {
    pub fn size(&self) -> usize {
        self.precoders.len()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Simplified Type-1 style codebook: each entry is `n_s` distinct columns of
/// an `oversampling * n_bs`-point DFT steering set, each column scaled to
/// unit norm so that `||F||_F^2 = n_s`. Subsets are ordered by mutual
/// coherence (most orthogonal first), then lexicographically.
pub fn pmi_codebook(n_bs: usize, n_s: usize, size: usize, oversampling: usize) -> Result<PmiCodebook> {
    if size == 0 || n_bs == 0 || n_s == 0 || oversampling == 0 {
        return Err(Error::config("PMI codebook dimensions must be positive"));
    }
    let grid = oversampling * n_bs;
    let available = binomial(grid, n_s);
    if available > MAX_ENUMERATION {
        return Err(Error::config(format!("PMI enumeration of {available} subsets is too large")));
    }
    if size as u128 > available {
        return Err(Error::config(format!(
            "sub6.nu_pmi = {size} exceeds the {available} distinct {n_s}-column subsets of a {grid}-beam grid"
        )));
    }
    let norm = 1.0 / (n_bs as f64).sqrt();
    let beams: Vec<Vec<Complex64>> = (0..grid)
        .map(|i| {
            let u = -1.0 + 2.0 * i as f64 / grid as f64;
            (0..n_bs)
                .map(|l| Complex64::from_polar(norm, std::f64::consts::PI * l as f64 * u))
                .collect()
        })
        .collect();
    let coherence = |set: &[usize]| -> i64 {
        let mut total = 0.0;
        for a in 0..set.len() {
            for b in 0..a {
                let ip: Complex64 = beams[set[a]].iter().zip(&beams[set[b]]).map(|(x, y)| x.conj() * y).sum();
                total += ip.norm();
            }
        }
        // quantized so that equal-coherence subsets tie exactly
        (total * 1e9).round() as i64
    };
    let mut subsets: Vec<(i64, Vec<usize>)> = combinations(grid, n_s).into_iter().map(|s| (coherence(&s), s)).collect();
    subsets.sort();
    subsets.truncate(size);
    let columns: Vec<Vec<usize>> = subsets.into_iter().map(|(_, s)| s).collect();
    let precoders = columns
        .iter()
        .map(|set| CMat::from_fn(n_bs, n_s, |l, s| beams[set[s]][l]))
        .collect();
    Ok(PmiCodebook {
        n_bs,
        n_s,
        oversampling,
        columns,
        precoders,
    })
}

/// Noisy CSI `H + sqrt(n_bs / (beta zeta snr)) delta` per subcarrier.
pub fn csi_with_error<R: Rng + ?Sized>(
    h_frame: &[CMat],
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
    let std = Complex64::new((n_bs as f64 / pilot).sqrt(), 0.0);
    Ok(h_frame
        .iter()
        .map(|h| h + complex_gaussian(rng, h.nrows(), h.ncols()) * std)
        .collect())
}

/// Index maximizing `||P F||_F`; ties go to the lowest index.
pub fn pmi_index(p: &CMat, cb: &PmiCodebook) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, f) in cb.precoders.iter().enumerate() {
        let s = frobenius_sq(&(p * f));
        if s > best.0 {
            best = (s, i);
        }
    }
    best.1
}

/// Per-subcarrier PMI selection; returns the precoders and their indices.
pub fn pmi_select(p_frame: &[CMat], cb: &PmiCodebook) -> Result<(Vec<CMat>, Vec<usize>)> {
    if cb.precoders.is_empty() {
        return Err(Error::config("empty PMI codebook"));
    }
    let mut f_bb = Vec::with_capacity(p_frame.len());
    let mut idx = Vec::with_capacity(p_frame.len());
    for p in p_frame {
        if p.ncols() != cb.n_bs {
            return Err(Error::shape(format!("CSI has {} columns, codebook {} antennas", p.ncols(), cb.n_bs)));
        }
        let i = pmi_index(p, cb);
        idx.push(i);
        f_bb.push(cb.precoders[i].clone());
    }
    Ok((f_bb, idx))
}

/// Zero-forcing combiner `H (H* H)^-1` for the post-precoding channel.
pub fn zf_combiner(h_eff: &CMat) -> Result<CMat> {
    linalg::left_pinv_adjoint(h_eff)
}

/// Feedback `(1/K) sum_k log2(1 + snr q_k)` where `q_k` sums the squared
/// per-stream gains `|w_s* P f_s|^2` with each combiner column scaled to unit
/// norm (the per-stream post-ZF SNR).
pub fn se_feedback_sub6(p_frame: &[CMat], f_bb: &[CMat], w_bb: &[CMat], snr: f64) -> f64 {
    if p_frame.is_empty() {
        return 0.0;
    }
    let total: f64 = p_frame
        .iter()
        .zip(f_bb)
        .zip(w_bb)
        .map(|((p, f), w)| {
            let eff = w.adjoint() * p * f;
            let q: f64 = (0..eff.nrows().min(eff.ncols()))
                .map(|s| {
                    let n = w.column(s).norm_squared();
                    if n > 0.0 {
                        eff[(s, s)].norm_sqr() / n
                    } else {
                        0.0
                    }
                })
                .sum();
            (1.0 + snr * q).log2()
        })
        .sum();
    total / p_frame.len() as f64
}

/// `ceil(log2(nu_pmi) / kappa_channel)`.
pub fn pmi_overhead(nu_pmi: usize, kappa_channel: usize) -> usize {
    let bits = (nu_pmi as f64).log2();
    (bits / kappa_channel as f64).ceil() as usize
}

/// Per-subcarrier log-det spectral efficiency with fully digital beamformers.
pub fn spectral_efficiency_sub6(
    h_frame: &[CMat],
    f_bb: &[CMat],
    w_bb: &[CMat],
    p: f64,
    g: f64,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let snr = p * g / noise_var;
    h_frame
        .iter()
        .zip(f_bb)
        .zip(w_bb)
        .map(|((h, f), w)| whitened_log_det(h, w, f, snr))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sub6Beams {
    pub f_bb: Vec<CMat>,
    pub w_bb: Vec<CMat>,
    pub pmi_index: Vec<usize>,
}

/// Full training pipeline on a CSI frame: PMI selection then ZF combining.
/// A combiner that cannot be formed (rank-deficient `P F`) falls back to the
/// matched filter `P F`.
pub fn train_on_csi(p_frame: &[CMat], cb: &PmiCodebook) -> Result<Sub6Beams> {
    let (f_bb, pmi_index) = pmi_select(p_frame, cb)?;
    let w_bb = p_frame
        .iter()
        .zip(&f_bb)
        .map(|(p, f)| {
            let eff = p * f;
            match zf_combiner(&eff) {
                Ok(w) => Ok(w),
                Err(Error::Singular(_)) => Ok(eff),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sub6Beams { f_bb, w_bb, pmi_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn codebook_normalization_and_distinctness() {
        let cb = pmi_codebook(4, 2, 16, 2).unwrap();
        assert_eq!(cb.size(), 16);
        for f in &cb.precoders {
            assert!((frobenius_sq(f) - 2.0).abs() < 1e-9);
        }
        for i in 0..cb.size() {
            for j in 0..i {
                assert!((&cb.precoders[i] - &cb.precoders[j]).norm() > 1e-6, "{i} {j}");
            }
        }
        assert!(pmi_codebook(4, 2, 29, 2).is_err());
    }

    #[test]
    fn square_case_starts_with_full_dft() {
        let cb = pmi_codebook(4, 4, 4, 2).unwrap();
        let f = &cb.precoders[0];
        // an orthonormal-column DFT matrix scaled so F* F = I
        assert!((f.adjoint() * f - CMat::identity(4, 4)).norm() < 1e-9);
    }

    #[test]
    fn csi_error_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = vec![complex_gaussian(&mut rng, 4, 4)];
        let p = csi_with_error(&h, 0.1, 10.0, 4, 1e20, &mut rng).unwrap();
        assert!((&p[0] - &h[0]).norm() < 1e-6);
        assert!(csi_with_error(&h, 0.1, 10.0, 4, 0.0, &mut rng).is_err());
        let a = csi_with_error(&h, 0.1, 10.0, 4, 2.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = csi_with_error(&h, 0.1, 10.0, 4, 2.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let p = csi_with_error(&h, 0.1, 10.0, 4, 2.0, &mut rng).unwrap();
            acc += (p[0][(2, 1)] - h[0][(2, 1)]).norm_sqr();
        }
        let expected = 4.0 / (0.1 * 10.0 * 2.0);
        assert!((acc / n as f64 / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn pmi_select_matches_scan_and_alignment() {
        let cb = pmi_codebook(4, 2, 16, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p: Vec<CMat> = (0..3).map(|_| complex_gaussian(&mut rng, 4, 4)).collect();
            let (_, idx) = pmi_select(&p, &cb).unwrap();
            for (k, pk) in p.iter().enumerate() {
                let scores: Vec<f64> = cb.precoders.iter().map(|f| (pk * f).norm()).collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(idx[k], scores.iter().position(|&s| s >= max - 1e-12 * max).unwrap());
            }
        }
        // a CSI whose rows are the conjugated columns of entry j
        for j in [0, 5, 11] {
            let f = &cb.precoders[j];
            let p = f.adjoint();
            let (_, idx) = pmi_select(&[p], &cb).unwrap();
            assert_eq!(idx[0], j);
        }
        let single = PmiCodebook {
            precoders: vec![cb.precoders[3].clone()],
            columns: vec![cb.columns[3].clone()],
            ..cb.clone()
        };
        assert_eq!(pmi_select(&[complex_gaussian(&mut rng, 4, 4)], &single).unwrap().1, vec![0]);
    }

    #[test]
    fn zf_examples() {
        let eye = CMat::identity(2, 2);
        assert!((zf_combiner(&eye).unwrap() - &eye).norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = complex_gaussian(&mut rng, 4, 2);
        let w = zf_combiner(&h).unwrap();
        assert!((w.adjoint() * &h - &eye).norm() < 1e-9);
        let w2 = zf_combiner(&(&h * c(2.0))).unwrap();
        assert!((w2 * c(2.0) - &w).norm() < 1e-9);
    }

    #[test]
    fn feedback_examples() {
        let one = vec![CMat::identity(1, 1)];
        assert_eq!(se_feedback_sub6(&one, &one, &one, 0.0), 0.0);
        assert!((se_feedback_sub6(&one, &one, &one, 1.0) - 1.0).abs() < 1e-12);
        let p = vec![CMat::identity(1, 1), CMat::from_element(1, 1, c(3f64.sqrt()))];
        let two = vec![CMat::identity(1, 1); 2];
        assert!((se_feedback_sub6(&p, &two, &two, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn overhead_examples() {
        assert_eq!(pmi_overhead(16, 1), 4);
        assert_eq!(pmi_overhead(2, 1), 1);
        assert_eq!(pmi_overhead(512, 1), 9);
        assert_eq!(pmi_overhead(16, 3), 2);
    }

    #[test]
    fn spectral_efficiency_examples() {
        let eye = CMat::identity(2, 2);
        let h = vec![eye.clone()];
        assert_eq!(spectral_efficiency_sub6(&h, &[eye.clone()], &[eye.clone()], 0.0, 1.0, 1.0).unwrap(), vec![0.0]);
        let s = spectral_efficiency_sub6(&h, &[eye.clone()], &[eye.clone()], 1.0, 1.0, 1.0).unwrap()[0];
        assert!((s - 2.0).abs() < 1e-12);
        let d = vec![CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(2.0)]))];
        let s = spectral_efficiency_sub6(&d, &[eye.clone()], &[eye.clone()], 1.0, 1.0, 1.0).unwrap()[0];
        assert!((s - (2f64.log2() + 5f64.log2())).abs() < 1e-12);
    }

    #[test]
    fn selected_pmi_beats_fixed_entry_on_average() {
        let cb = pmi_codebook(4, 2, 16, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut selected = 0.0;
        let mut fixed = vec![0.0; cb.size()];
        for _ in 0..100 {
            let p = vec![complex_gaussian(&mut rng, 4, 4)];
            let beams = train_on_csi(&p, &cb).unwrap();
            selected += spectral_efficiency_sub6(&p, &beams.f_bb, &beams.w_bb, 1.0, 1.0, 0.1).unwrap()[0];
            for (i, f) in cb.precoders.iter().enumerate() {
                let w = zf_combiner(&(&p[0] * f)).unwrap_or_else(|_| &p[0] * f);
                fixed[i] += spectral_efficiency_sub6(&p, &[f.clone()], &[w], 1.0, 1.0, 0.1).unwrap()[0];
            }
        }
        for f in fixed {
            assert!(selected >= f, "{selected} < {f}");
        }
    }

    #[test]
    fn feedback_matches_true_rate_at_noiseless_limit() {
        // one stream, one subcarrier: feedback equals the log-det rate
        let cb = pmi_codebook(4, 1, 8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = vec![complex_gaussian(&mut rng, 4, 4)];
        let p = csi_with_error(&h, 0.1, 10.0, 4, 1e18, &mut rng).unwrap();
        let beams = train_on_csi(&p, &cb).unwrap();
        let fb = se_feedback_sub6(&p, &beams.f_bb, &beams.w_bb, 5.0);
        let rate = spectral_efficiency_sub6(&h, &beams.f_bb, &beams.w_bb, 5.0, 1.0, 1.0).unwrap()[0];
        assert!((fb - rate).abs() < 1e-6, "{fb} vs {rate}");
    }
}
