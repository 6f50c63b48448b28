//! Small dense networks with hand-written backprop, Adam and Polyak updates.
//!
//! Parameters live in one flat vector: for each layer, the weight matrix
//! (row-major, `out x in`) followed by the bias.

use rand::Rng;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DBNET\0\0\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    /// Logistic squashing into (0, 1).
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
    output: OutputActivation,
}

/// Per-layer activations from a forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform init in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, output)?;
        let mut off = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1] + w[1]] {
                *p = rng.random_range(-bound..=bound);
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize], output: OutputActivation) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("invalid layer dims {dims:?}")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
            output,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Offsets of (weights, bias) for `layer`.
    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let off: usize = self.dims.windows(2).take(layer).map(|w| w[0] * w[1] + w[1]).sum();
        (off, off + self.dims[layer] * self.dims[layer + 1])
    }

    /// Weight `(row, col)` of `layer`.
    pub fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        let (w, _) = self.layer_offsets(layer);
        self.params[w + row * self.dims[layer] + col]
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, v: f64) {
        let (w, _) = self.layer_offsets(layer);
        let n_in = self.dims[layer];
        self.params[w + row * n_in + col] = v;
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, v: f64) {
        let (_, b) = self.layer_offsets(layer);
        self.params[b + row] = v;
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.acts.pop().unwrap_or_default())
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.dims[0] {
            return Err(Error::shape(format!("input has {} entries, network expects {}", x.len(), self.dims[0])));
        }
        let n_layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            } else if self.output == OutputActivation::Sigmoid {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            acts.push(z);
            off += n_in * n_out + n_out;
        }
        Ok(ForwardCache { acts })
    }

    /// Reverse-mode pass. Parameter gradients are accumulated into `grads`
    /// (same layout as the parameters); the input gradient is returned.
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        let n_layers = self.dims.len() - 1;
        if upstream.len() != self.output_dim() || cache.acts.len() != n_layers + 1 || grads.len() != self.params.len() {
            return Err(Error::shape("backward shapes do not match the network"));
        }
        let out = &cache.acts[n_layers];
        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::Sigmoid => upstream.iter().zip(out).map(|(u, y)| u * y * (1.0 - y)).collect(),
        };
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let input = &cache.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                grads[b_off + o] += d;
                if d != 0.0 {
                    let row = &mut grads[w_off + o * n_in..w_off + (o + 1) * n_in];
                    row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                }
            }
            let w = &self.params[w_off..w_off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]).for_each(|(p, wv)| *p += d * wv);
                }
            }
            if l > 0 {
                prev.iter_mut().zip(input).for_each(|(p, a)| *p *= 1.0 - a * a);
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Fresh parameter gradients and the input gradient.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// `target <- eta * online + (1 - eta) * target`.
    pub fn soft_update(&mut self, online: &Mlp, eta: f64) -> Result<()> {
        if self.dims != online.dims || self.output != online.output {
            return Err(Error::shape("soft update between different architectures"));
        }
        if eta == 1.0 {
            self.params.copy_from_slice(&online.params);
            return Ok(());
        }
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = eta * o + (1.0 - eta) * *t;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.dims.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.output {
            OutputActivation::Identity => 0,
            OutputActivation::Sigmoid => 1,
        });
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Parses one network; returns it with the number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let take = |at: usize, n: usize, field: &'static str| {
            bytes.get(at..at + n).ok_or_else(|| Error::format(field, "truncated"))
        };
        let u32_at = |at: usize, field: &'static str| -> Result<u32> {
            Ok(u32::from_le_bytes(take(at, 4, field)?.try_into().unwrap()))
        };
        if take(0, 8, "magic")? != MAGIC {
            return Err(Error::format("magic", "not a network record"));
        }
        let version = u32_at(8, "version")?;
        if version != VERSION {
            return Err(Error::format("version", format!("unsupported version {version}")));
        }
        let output = match take(12, 1, "activation")?[0] {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Sigmoid,
            v => return Err(Error::format("activation", format!("unknown code {v}"))),
        };
        let n_dims = u32_at(16, "dims")? as usize;
        if n_dims > 64 {
            return Err(Error::format("dims", format!("{n_dims} layers")));
        }
        let dims = (0..n_dims)
            .map(|i| u32_at(20 + 4 * i, "dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::zeros(&dims, output).map_err(|e| Error::format("dims", e.to_string()))?;
        let start = 20 + 4 * n_dims;
        let raw = take(start, 8 * net.params.len(), "parameters")?;
        for (p, c) in net.params.iter_mut().zip(raw.chunks_exact(8)) {
            *p = f64::from_le_bytes(c.try_into().unwrap());
        }
        if !net.is_finite() {
            return Err(Error::format("parameters", "non-finite value"));
        }
        Ok((net, start + raw.len()))
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape("optimizer state does not match parameters"));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Central finite-difference gradient of `sum(upstream * net(x))`.
pub fn numeric_gradients(net: &Mlp, x: &[f64], upstream: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let objective = |n: &Mlp, x: &[f64]| -> Result<f64> {
        Ok(n.forward(x)?.iter().zip(upstream).map(|(y, u)| y * u).sum())
    };
    let mut probe = net.clone();
    let mut pg = vec![0.0; net.n_params()];
    for i in 0..net.n_params() {
        let p0 = probe.params[i];
        probe.params[i] = p0 + h;
        let up = objective(&probe, x)?;
        probe.params[i] = p0 - h;
        let down = objective(&probe, x)?;
        probe.params[i] = p0;
        pg[i] = (up - down) / (2.0 * h);
    }
    let mut xg = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let x0 = xp[i];
        xp[i] = x0 + h;
        let up = objective(net, &xp)?;
        xp[i] = x0 - h;
        let down = objective(net, &xp)?;
        xp[i] = x0;
        xg[i] = (up - down) / (2.0 * h);
    }
    Ok((pg, xg))
}

/// Largest relative error between analytic and finite-difference gradients,
/// measured against `max(|a|, |b|, 1e-6)` per entry.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
