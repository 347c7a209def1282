use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{loss_mse, Dataset, Target, N_OUT};
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

pub const N_CONV: usize = 3;
pub const N_LSTM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Head {
    /// Independent logistic per output.
    #[default]
    ScaledSigmoid,
    /// Outputs sum to one.
    Softmax,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::ScaledSigmoid => "scaled_sigmoid",
            Head::Softmax => "softmax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scaled_sigmoid" => Some(Head::ScaledSigmoid),
            "softmax" => Some(Head::Softmax),
            _ => None,
        }
    }
}

/// Three tanh temporal convolutions, six stacked LSTM layers, one fully
/// connected layer and the output head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    /// Features are `input_channels` consecutive histories of equal length.
    pub input_channels: usize,
    pub conv: [ConvLayer; N_CONV],
    pub lstm_hidden: [usize; N_LSTM],
    pub head: Head,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            input_channels: 1,
            conv: [
                ConvLayer {
                    channels: 8,
                    kernel: 5,
                    stride: 1,
                },
                ConvLayer {
                    channels: 16,
                    kernel: 5,
                    stride: 1,
                },
                ConvLayer {
                    channels: 16,
                    kernel: 3,
                    stride: 1,
                },
            ],
            lstm_hidden: [32; N_LSTM],
            head: Head::ScaledSigmoid,
            // above 1 to offset the gate attenuation of six stacked LSTMs
            init_scale: 1.5,
            seed: 1,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::Invalid("input_channels must be >= 1".into()));
        }
        for (i, c) in self.conv.iter().enumerate() {
            if c.channels == 0 || c.kernel == 0 || c.stride == 0 {
                return Err(Error::Invalid(format!("conv layer {} needs channels, kernel, stride >= 1", i + 1)));
            }
        }
        if self.lstm_hidden.contains(&0) {
            return Err(Error::Invalid("LSTM hidden widths must be >= 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Invalid("init_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Sequence lengths after each conv layer, or an error when the input is
    /// shorter than the receptive field.
    pub fn conv_lengths(&self, seq_len: usize) -> Result<[usize; N_CONV]> {
        let mut len = seq_len;
        let mut out = [0; N_CONV];
        for (i, c) in self.conv.iter().enumerate() {
            if len < c.kernel {
                return Err(Error::Dimension(format!(
                    "sequence of {seq_len} epochs is shorter than the receptive field (conv layer {} gets {len} < kernel {})",
                    i + 1,
                    c.kernel
                )));
            }
            len = (len - c.kernel) / c.stride + 1;
            out[i] = len;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            clip_norm: 1.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Invalid("batch_size must be >= 1".into()));
        }
        // zero is accepted so a run can leave parameters untouched
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid("learning_rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Invalid("momentum must be in [0, 1)".into()));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::Invalid("clip_norm must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ConvSlot {
    w: usize,
    b: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    len_in: usize,
    len_out: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LstmSlot {
    w: usize,
    u: usize,
    b: usize,
    d: usize,
    h: usize,
}

/// Offsets of every parameter block in the flat vector.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    conv: [ConvSlot; N_CONV],
    lstm: [LstmSlot; N_LSTM],
    steps: usize,
    fc_w: usize,
    fc_b: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &NetConfig, seq_len: usize) -> Result<Self> {
        cfg.validate()?;
        let lens = cfg.conv_lengths(seq_len)?;
        let mut off = 0;
        let mut c_in = cfg.input_channels;
        let mut len_in = seq_len;
        let conv = std::array::from_fn(|i| {
            let c = cfg.conv[i];
            let s = ConvSlot {
                w: off,
                b: off + c.channels * c_in * c.kernel,
                c_in,
                c_out: c.channels,
                kernel: c.kernel,
                stride: c.stride,
                len_in,
                len_out: lens[i],
            };
            off = s.b + c.channels;
            c_in = c.channels;
            len_in = lens[i];
            s
        });
        let mut d = c_in;
        let lstm = std::array::from_fn(|i| {
            let h = cfg.lstm_hidden[i];
            let s = LstmSlot {
                w: off,
                u: off + 4 * h * d,
                b: off + 4 * h * d + 4 * h * h,
                d,
                h,
            };
            off = s.b + 4 * h;
            d = h;
            s
        });
        let fc_w = off;
        let fc_b = fc_w + N_OUT * d;
        Ok(Layout {
            conv,
            lstm,
            steps: lens[N_CONV - 1],
            fc_w,
            fc_b,
            total: fc_b + N_OUT,
        })
    }
}

/// Conv + LSTM regressor with a flat parameter vector. Inputs are
/// standardized per channel with a stored (untrained) shift and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    config: NetConfig,
    seq_len: usize,
    layout: Layout,
    params: Vec<f64>,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

struct LstmCache {
    width: usize,
    /// Activated gates per step, `[i, f, g, o]` blocks of width `h`.
    gates: Vec<f64>,
    /// Cell states for steps `0..=T` (index 0 is the zero initial state).
    c: Vec<f64>,
    /// Hidden states for steps `0..=T`.
    h: Vec<f64>,
}

struct Cache {
    /// Normalized input followed by each conv output, channel-major.
    acts: Vec<Vec<f64>>,
    /// Conv output transposed to time-major, the first LSTM's input.
    seq: Vec<f64>,
    lstm: Vec<LstmCache>,
    out: Target,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Net {
    /// Randomly initialized net: weights uniform with variance
    /// `init_scale^2 / fan_in`, biases zero except LSTM forget gates (1).
    pub fn new(config: NetConfig, seq_len: usize) -> Result<Self> {
        let layout = Layout::new(&config, seq_len)?;
        let mut params = vec![0.0; layout.total];
        let mut r = rng::stream(config.seed, purpose::NET_INIT, 0);
        let mut fill = |p: &mut [f64], fan_in: usize| {
            let a = config.init_scale * (3.0 / fan_in as f64).sqrt();
            for v in p {
                *v = a * (2.0 * r.random::<f64>() - 1.0);
            }
        };
        for s in &layout.conv {
            fill(&mut params[s.w..s.b], s.c_in * s.kernel);
        }
        for s in &layout.lstm {
            fill(&mut params[s.w..s.u], s.d);
            fill(&mut params[s.u..s.b], s.h);
            params[s.b + s.h..s.b + 2 * s.h].fill(1.0);
        }
        let h_last = layout.lstm[N_LSTM - 1].h;
        fill(&mut params[layout.fc_w..layout.fc_b], h_last);
        Ok(Net {
            config,
            seq_len,
            layout,
            params,
            shift: vec![0.0; config.input_channels],
            scale: vec![1.0; config.input_channels],
        })
    }

    /// Rebuilds a net from stored parts, validating lengths.
    pub fn from_parts(config: NetConfig, seq_len: usize, params: Vec<f64>, shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(&config, seq_len)?;
        if params.len() != layout.total {
            return Err(Error::Dimension(format!(
                "{} parameters, architecture needs {}",
                params.len(),
                layout.total
            )));
        }
        if shift.len() != config.input_channels || scale.len() != config.input_channels {
            return Err(Error::Dimension("normalization length differs from input_channels".into()));
        }
        if scale.iter().any(|s| !(*s > 0.0)) || params.iter().chain(&shift).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("net parameters must be finite with positive scales".into()));
        }
        Ok(Net {
            config,
            seq_len,
            layout,
            params,
            shift,
            scale,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn n_features(&self) -> usize {
        self.seq_len * self.config.input_channels
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn normalization(&self) -> (&[f64], &[f64]) {
        (&self.shift, &self.scale)
    }

    /// Sets per-channel mean and standard deviation from training features.
    pub fn fit_normalization(&mut self, data: &Dataset) -> Result<()> {
        self.check_features(data.n_features())?;
        let t = self.seq_len;
        for ch in 0..self.config.input_channels {
            let vals = data.x.iter().flat_map(|r| r[ch * t..(ch + 1) * t].iter());
            let n = (data.len() * t) as f64;
            if n == 0.0 {
                continue;
            }
            let mean = vals.clone().sum::<f64>() / n;
            let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            self.shift[ch] = mean;
            self.scale[ch] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(())
    }

    fn check_features(&self, n: usize) -> Result<()> {
        if n != self.n_features() {
            return Err(Error::Dimension(format!(
                "{n} features, net expects {}",
                self.n_features()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Target> {
        self.check_features(x.len())?;
        Ok(self.forward_cached(&self.params, x).out)
    }

    fn forward_cached(&self, p: &[f64], x: &[f64]) -> Cache {
        let lay = &self.layout;
        let t = self.seq_len;
        let mut acts = Vec::with_capacity(N_CONV + 1);
        acts.push(
            x.iter()
                .enumerate()
                .map(|(i, v)| (v - self.shift[i / t]) / self.scale[i / t])
                .collect::<Vec<f64>>(),
        );
        for s in &lay.conv {
            let input = acts.last().expect("input present");
            let mut out = vec![0.0; s.c_out * s.len_out];
            for o in 0..s.c_out {
                for step in 0..s.len_out {
                    let mut z = p[s.b + o];
                    let start = step * s.stride;
                    for c in 0..s.c_in {
                        let w = &p[s.w + (o * s.c_in + c) * s.kernel..][..s.kernel];
                        let xin = &input[c * s.len_in + start..][..s.kernel];
                        z += w.iter().zip(xin).map(|(a, b)| a * b).sum::<f64>();
                    }
                    out[o * s.len_out + step] = z.tanh();
                }
            }
            acts.push(out);
        }
        let steps = lay.steps;
        let last = lay.conv[N_CONV - 1];
        let conv_out = acts.last().expect("conv output");
        let mut seq = vec![0.0; steps * last.c_out];
        for c in 0..last.c_out {
            for k in 0..steps {
                seq[k * last.c_out + c] = conv_out[c * steps + k];
            }
        }

        let mut lstm = Vec::with_capacity(N_LSTM);
        let mut z = Vec::new();
        for (l, s) in lay.lstm.iter().enumerate() {
            let (d, h) = (s.d, s.h);
            let input: &[f64] = if l == 0 { &seq } else { lstm_outputs(&lstm[l - 1]) };
            let mut cache = LstmCache {
                width: h,
                gates: vec![0.0; steps * 4 * h],
                c: vec![0.0; (steps + 1) * h],
                h: vec![0.0; (steps + 1) * h],
            };
            z.resize(4 * h, 0.0);
            for k in 0..steps {
                let xk = &input[k * d..(k + 1) * d];
                let hp = &cache.h[k * h..(k + 1) * h];
                for j in 0..4 * h {
                    let wr = &p[s.w + j * d..][..d];
                    let ur = &p[s.u + j * h..][..h];
                    z[j] = p[s.b + j]
                        + wr.iter().zip(xk).map(|(a, b)| a * b).sum::<f64>()
                        + ur.iter().zip(hp).map(|(a, b)| a * b).sum::<f64>();
                }
                let g = &mut cache.gates[k * 4 * h..(k + 1) * 4 * h];
                for j in 0..h {
                    g[j] = sigmoid(z[j]);
                    g[h + j] = sigmoid(z[h + j]);
                    g[2 * h + j] = z[2 * h + j].tanh();
                    g[3 * h + j] = sigmoid(z[3 * h + j]);
                }
                for j in 0..h {
                    let c = g[h + j] * cache.c[k * h + j] + g[j] * g[2 * h + j];
                    cache.c[(k + 1) * h + j] = c;
                    cache.h[(k + 1) * h + j] = g[3 * h + j] * c.tanh();
                }
            }
            lstm.push(cache);
        }

        let hl = lay.lstm[N_LSTM - 1].h;
        let top = &lstm[N_LSTM - 1].h[steps * hl..];
        let mut logits = [0.0; N_OUT];
        for (o, v) in logits.iter_mut().enumerate() {
            *v = p[lay.fc_b + o] + (0..hl).map(|j| p[lay.fc_w + o * hl + j] * top[j]).sum::<f64>();
        }
        let out = match self.config.head {
            Head::ScaledSigmoid => logits.map(sigmoid),
            Head::Softmax => {
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e = logits.map(|v| (v - m).exp());
                let s: f64 = e.iter().sum();
                e.map(|v| v / s)
            }
        };
        Cache { acts, seq, lstm, out }
    }

    /// Adds `d loss / d params` for one sample into `grad`, given
    /// `dy = d loss / d output`.
    fn backward(&self, p: &[f64], cache: &Cache, dy: &Target, grad: &mut [f64]) {
        let lay = &self.layout;
        let steps = lay.steps;
        let y = &cache.out;
        let dz: Target = match self.config.head {
            Head::ScaledSigmoid => std::array::from_fn(|o| dy[o] * y[o] * (1.0 - y[o])),
            Head::Softmax => {
                let dot: f64 = (0..N_OUT).map(|o| dy[o] * y[o]).sum();
                std::array::from_fn(|o| y[o] * (dy[o] - dot))
            }
        };
        let hl = lay.lstm[N_LSTM - 1].h;
        let top = &cache.lstm[N_LSTM - 1].h[steps * hl..];
        // gradient wrt each LSTM layer's output sequence, time-major
        let mut dh_seq = vec![0.0; steps * hl];
        for o in 0..N_OUT {
            grad[lay.fc_b + o] += dz[o];
            for j in 0..hl {
                grad[lay.fc_w + o * hl + j] += dz[o] * top[j];
                dh_seq[(steps - 1) * hl + j] += p[lay.fc_w + o * hl + j] * dz[o];
            }
        }

        for l in (0..N_LSTM).rev() {
            let s = lay.lstm[l];
            let (d, h) = (s.d, s.h);
            let c = &cache.lstm[l];
            let input: &[f64] = if l == 0 { &cache.seq } else { lstm_outputs(&cache.lstm[l - 1]) };
            let mut dx_seq = vec![0.0; steps * d];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut da = vec![0.0; 4 * h];
            for k in (0..steps).rev() {
                let g = &c.gates[k * 4 * h..(k + 1) * 4 * h];
                for j in 0..h {
                    let dh = dh_seq[k * h + j] + dh_next[j];
                    let ct = c.c[(k + 1) * h + j];
                    let tc = ct.tanh();
                    let (gi, gf, gg, go) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let d_o = dh * tc;
                    let dc = dh * go * (1.0 - tc * tc) + dc_next[j];
                    let di = dc * gg;
                    let dg = dc * gi;
                    let df = dc * c.c[k * h + j];
                    dc_next[j] = dc * gf;
                    da[j] = di * gi * (1.0 - gi);
                    da[h + j] = df * gf * (1.0 - gf);
                    da[2 * h + j] = dg * (1.0 - gg * gg);
                    da[3 * h + j] = d_o * go * (1.0 - go);
                }
                let xk = &input[k * d..(k + 1) * d];
                let hp = &c.h[k * h..(k + 1) * h];
                dh_next.fill(0.0);
                let dxk = &mut dx_seq[k * d..(k + 1) * d];
                for j in 0..4 * h {
                    let a = da[j];
                    if a == 0.0 {
                        continue;
                    }
                    grad[s.b + j] += a;
                    let gw = &mut grad[s.w + j * d..][..d];
                    let wr = &p[s.w + j * d..][..d];
                    for q in 0..d {
                        gw[q] += a * xk[q];
                        dxk[q] += wr[q] * a;
                    }
                    let gu = &mut grad[s.u + j * h..][..h];
                    let ur = &p[s.u + j * h..][..h];
                    for q in 0..h {
                        gu[q] += a * hp[q];
                        dh_next[q] += ur[q] * a;
                    }
                }
            }
            dh_seq = dx_seq;
        }

        // back to channel-major for the conv stack
        let last = lay.conv[N_CONV - 1];
        let mut dout = vec![0.0; last.c_out * steps];
        for ch in 0..last.c_out {
            for k in 0..steps {
                dout[ch * steps + k] = dh_seq[k * last.c_out + ch];
            }
        }
        for l in (0..N_CONV).rev() {
            let s = lay.conv[l];
            let input = &cache.acts[l];
            let out = &cache.acts[l + 1];
            let mut din = if l > 0 { vec![0.0; s.c_in * s.len_in] } else { Vec::new() };
            for o in 0..s.c_out {
                for step in 0..s.len_out {
                    let v = out[o * s.len_out + step];
                    let a = dout[o * s.len_out + step] * (1.0 - v * v);
                    if a == 0.0 {
                        continue;
                    }
                    grad[s.b + o] += a;
                    let start = step * s.stride;
                    for c in 0..s.c_in {
                        let base = s.w + (o * s.c_in + c) * s.kernel;
                        for q in 0..s.kernel {
                            grad[base + q] += a * input[c * s.len_in + start + q];
                            if l > 0 {
                                din[c * s.len_in + start + q] += p[base + q] * a;
                            }
                        }
                    }
                }
            }
            dout = din;
        }
    }

    /// Mean MSE over the batch and its exact gradient. Per-sample gradients
    /// are reduced in index order so the result does not depend on threads.
    pub fn loss_and_gradient(&self, data: &Dataset, idx: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check_features(data.n_features())?;
        let (loss, grad) = self.batch_gradient(&self.params, data, idx);
        Ok((loss, grad))
    }

    fn batch_gradient(&self, p: &[f64], data: &Dataset, idx: &[usize]) -> (f64, Vec<f64>) {
        let per: Vec<(f64, Vec<f64>)> = idx.par_iter().map(|&i| self.sample_gradient(p, data, i)).collect();
        let mut grad = vec![0.0; p.len()];
        let mut loss = 0.0;
        for (l, g) in &per {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let n = idx.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    fn sample_gradient(&self, p: &[f64], data: &Dataset, i: usize) -> (f64, Vec<f64>) {
        let cache = self.forward_cached(p, &data.x[i]);
        let y = &data.y[i];
        let dy: Target = std::array::from_fn(|o| 2.0 * (cache.out[o] - y[o]) / N_OUT as f64);
        let mut g = vec![0.0; p.len()];
        self.backward(p, &cache, &dy, &mut g);
        (loss_mse(&cache.out, y), g)
    }

    /// Mean batch loss with explicit parameters (finite-difference checks).
    pub fn loss_with_params(&self, params: &[f64], data: &Dataset, idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&i| loss_mse(&self.forward_cached(params, &data.x[i]).out, &data.y[i]))
            .sum::<f64>()
            / idx.len().max(1) as f64
    }
}

/// Hidden states for steps `1..=T`, time-major.
fn lstm_outputs(c: &LstmCache) -> &[f64] {
    &c.h[c.width..]
}

/// SGD with momentum over seeded shuffles. Returns the mean training loss
/// of each epoch, accumulated in sample order.
pub fn train_net(net: &mut Net, data: &Dataset, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    net.check_features(data.n_features())?;
    if data.is_empty() {
        return Err(Error::Invalid("cannot train on zero samples".into()));
    }
    let n = data.len();
    let mut velocity = vec![0.0; net.params.len()];
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(config.seed, purpose::NET_SHUFFLE, epoch as u64));
        let mut losses = vec![0.0; n];
        for batch in order.chunks(config.batch_size) {
            let per: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| net.sample_gradient(&net.params, data, i))
                .collect();
            let mut grad = vec![0.0; net.params.len()];
            for ((l, g), &i) in per.iter().zip(batch) {
                losses[i] = *l;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if config.clip_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > config.clip_norm {
                    let f = config.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= f);
                }
            }
            for ((p, v), g) in net.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
        }
        let loss = losses.iter().sum::<f64>() / n as f64;
        if !loss.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch: epoch + 1, loss });
        }
        history.push(loss);
    }
    Ok(history)
}
