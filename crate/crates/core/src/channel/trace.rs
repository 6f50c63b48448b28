//! Materialized channel traces and their binary container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic          8 bytes  "DBTRACE\0"
//! version        u32      1
//! band           u8       0 = sub6, 1 = mmwave
//! reserved       3 bytes  zero
//! n_tx, n_rx     u32, u32
//! n_subcarriers  u32
//! n_slots        u32
//! bandwidth_hz   f64
//! gains          n_slots x f64
//! los flags      n_slots x u8
//! payload        n_slots x n_subcarriers x (n_rx x n_tx row-major) x (re f64, im f64)
//! ```

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::config::Band;
use crate::error::{Error, Result};
use crate::linalg::CMat;

pub const TRACE_MAGIC: &[u8; 8] = b"DBTRACE\0";
pub const TRACE_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 4 * 4 + 8;

/// Anything the link environment can read channel matrices from.
pub trait ChannelSource: Send + Sync {
    fn band(&self) -> Band;
    fn n_tx(&self) -> usize;
    fn n_rx(&self) -> usize;
    fn n_subcarriers(&self) -> usize;
    fn n_slots(&self) -> usize;
    fn bandwidth_hz(&self) -> f64;
    /// Per-subcarrier `n_rx x n_tx` matrices at `slot`.
    fn frame(&self, slot: usize) -> Vec<CMat>;
    fn large_scale_gain(&self, slot: usize) -> f64;
    fn los(&self, slot: usize) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub band: Band,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_subcarriers: usize,
    pub n_slots: usize,
    pub bandwidth_hz: f64,
    /// Row-major matrices, slot-major then subcarrier-major.
    pub h: Vec<Complex64>,
    pub large_scale_gain: Vec<f64>,
    pub los_flag: Vec<bool>,
}

impl ChannelTrace {
    pub fn from_source(src: &dyn ChannelSource) -> Self {
        let (nt, nr, nk, nm) = (src.n_tx(), src.n_rx(), src.n_subcarriers(), src.n_slots());
        let mut h = Vec::with_capacity(nm * nk * nr * nt);
        for m in 0..nm {
            for mat in src.frame(m) {
                for i in 0..nr {
                    for j in 0..nt {
                        h.push(mat[(i, j)]);
                    }
                }
            }
        }
        Self {
            band: src.band(),
            n_tx: nt,
            n_rx: nr,
            n_subcarriers: nk,
            n_slots: nm,
            bandwidth_hz: src.bandwidth_hz(),
            h,
            large_scale_gain: (0..nm).map(|m| src.large_scale_gain(m)).collect(),
            los_flag: (0..nm).map(|m| src.los(m)).collect(),
        }
    }

    fn matrix_len(&self) -> usize {
        self.n_rx * self.n_tx
    }

    pub fn matrix(&self, k: usize, m: usize) -> CMat {
        let len = self.matrix_len();
        let off = (m * self.n_subcarriers + k) * len;
        CMat::from_row_slice(self.n_rx, self.n_tx, &self.h[off..off + len])
    }

    /// Checks the structural invariants: consistent sizes, finite entries,
    /// positive large-scale gains.
    pub fn validate(&self) -> Result<()> {
        let expect = self.n_slots * self.n_subcarriers * self.matrix_len();
        if self.h.len() != expect {
            return Err(Error::format("payload length", format!("{} entries, expected {expect}", self.h.len())));
        }
        if self.large_scale_gain.len() != self.n_slots || self.los_flag.len() != self.n_slots {
            return Err(Error::format("gains", "per-slot vectors do not match n_slots"));
        }
        if self.h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::format("payload", "non-finite channel entry"));
        }
        if let Some(m) = self.large_scale_gain.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::format("gains", format!("slot {m} has non-positive gain")));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.n_slots * 9 + self.h.len() * 16);
        out.extend_from_slice(TRACE_MAGIC);
        out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
        out.push(self.band.indicator());
        out.extend_from_slice(&[0u8; 3]);
        for d in [self.n_tx, self.n_rx, self.n_subcarriers, self.n_slots] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.bandwidth_hz.to_le_bytes());
        for g in &self.large_scale_gain {
            out.extend_from_slice(&g.to_le_bytes());
        }
        out.extend(self.los_flag.iter().map(|&b| u8::from(b)));
        for z in &self.h {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format("header", format!("{} bytes, need {HEADER_LEN}", bytes.len())));
        }
        if &bytes[..8] != TRACE_MAGIC {
            return Err(Error::format("magic", "not a channel trace file"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != TRACE_VERSION {
            return Err(Error::format("version", format!("unsupported version {version}")));
        }
        let band = match bytes[12] {
            0 => Band::Sub6,
            1 => Band::Mmwave,
            other => return Err(Error::format("band", format!("unknown band code {other}"))),
        };
        let n_tx = u32_at(16) as usize;
        let n_rx = u32_at(20) as usize;
        let n_subcarriers = u32_at(24) as usize;
        let n_slots = u32_at(28) as usize;
        if n_tx == 0 || n_rx == 0 || n_subcarriers == 0 {
            return Err(Error::format("dims", format!("zero dimension in {n_rx}x{n_tx}x{n_subcarriers}")));
        }
        let bandwidth_hz = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        if !(bandwidth_hz > 0.0) {
            return Err(Error::format("bandwidth", format!("{bandwidth_hz}")));
        }

        let entries = n_slots
            .checked_mul(n_subcarriers)
            .and_then(|v| v.checked_mul(n_rx * n_tx))
            .ok_or_else(|| Error::format("dims", "dimension product overflows"))?;
        let expected = entries
            .checked_mul(16)
            .and_then(|v| v.checked_add(n_slots * 9))
            .ok_or_else(|| Error::format("dims", "dimension product overflows"))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != expected {
            return Err(Error::format(
                "payload length",
                format!("{} bytes after header, dims imply {expected}", body.len()),
            ));
        }
        let f64_at = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
        let large_scale_gain: Vec<f64> = (0..n_slots).map(|m| f64_at(m * 8)).collect();
        let flags = &body[n_slots * 8..n_slots * 9];
        let los_flag = flags.iter().map(|&b| b != 0).collect();
        let payload = n_slots * 9;
        let h = (0..entries)
            .map(|i| Complex64::new(f64_at(payload + i * 16), f64_at(payload + i * 16 + 8)))
            .collect();
        let trace = Self {
            band,
            n_tx,
            n_rx,
            n_subcarriers,
            n_slots,
            bandwidth_hz,
            h,
            large_scale_gain,
            los_flag,
        };
        trace.validate()?;
        Ok(trace)
    }
}

impl ChannelSource for ChannelTrace {
    fn band(&self) -> Band {
        self.band
    }
    fn n_tx(&self) -> usize {
        self.n_tx
    }
    fn n_rx(&self) -> usize {
        self.n_rx
    }
    fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }
    fn n_slots(&self) -> usize {
        self.n_slots
    }
    fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }
    fn frame(&self, slot: usize) -> Vec<CMat> {
        (0..self.n_subcarriers).map(|k| self.matrix(k, slot)).collect()
    }
    fn large_scale_gain(&self, slot: usize) -> f64 {
        self.large_scale_gain[slot]
    }
    fn los(&self, slot: usize) -> bool {
        self.los_flag[slot]
    }
}

pub fn save_trace(trace: &ChannelTrace, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&trace.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<ChannelTrace> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ChannelTrace::from_bytes(&bytes)
}
