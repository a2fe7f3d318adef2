use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub input_len: usize,
    pub conv: Vec<ConvSpec>,
    pub activation: Activation,
    /// Average-pooling factor applied after the conv stack.
    pub pool: usize,
    pub lstm_hidden: usize,
    /// Hidden dense widths before the output layer.
    pub dense: Vec<usize>,
    pub n_classes: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_channels: 2,
            input_len: 1001,
            conv: vec![
                ConvSpec {
                    out_channels: 16,
                    kernel: 7,
                    stride: 2,
                },
                ConvSpec {
                    out_channels: 32,
                    kernel: 5,
                    stride: 2,
                },
            ],
            activation: Activation::Relu,
            pool: 2,
            lstm_hidden: 64,
            dense: vec![32],
            n_classes: 5,
            init_seed: 7,
        }
    }
}

fn shape_err(layer: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Shape {
        layer: layer.into(),
        msg: msg.into(),
    }
}

/// (channels, length) at each stage of the conv stack, input first.
fn conv_chain(cfg: &ModelConfig) -> Result<Vec<(usize, usize)>> {
    let mut chain = vec![(cfg.input_channels, cfg.input_len)];
    for (l, spec) in cfg.conv.iter().enumerate() {
        let (_, len) = *chain.last().unwrap();
        if spec.kernel == 0 || spec.stride == 0 || spec.out_channels == 0 {
            return Err(shape_err(
                format!("conv{l}"),
                "kernel, stride and channels must be positive",
            ));
        }
        if len < spec.kernel {
            return Err(shape_err(
                format!("conv{l}"),
                format!("input length {len} shorter than kernel {}", spec.kernel),
            ));
        }
        chain.push((spec.out_channels, (len - spec.kernel) / spec.stride + 1));
    }
    Ok(chain)
}

impl ModelConfig {
    /// Checks that shapes chain from input to logits; returns the LSTM
    /// sequence length.
    pub fn validate(&self) -> Result<usize> {
        if self.n_classes != 5 {
            return Err(shape_err(
                "config",
                format!("n_classes must be 5, got {}", self.n_classes),
            ));
        }
        if self.input_channels == 0 || self.lstm_hidden == 0 || self.pool == 0 {
            return Err(shape_err("config", "channels, hidden size and pool must be positive"));
        }
        if self.dense.contains(&0) {
            return Err(shape_err("config", "dense widths must be positive"));
        }
        let (_, len) = *conv_chain(self)?.last().unwrap();
        let steps = len / self.pool;
        if steps == 0 {
            return Err(shape_err(
                "pool",
                format!("length {len} vanishes under pool {}", self.pool),
            ));
        }
        Ok(steps)
    }

    fn lstm_input(&self) -> usize {
        self.conv.last().map_or(self.input_channels, |c| c.out_channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// [out, in, kernel]
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Gate blocks are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// [4H, input]
    pub w_ih: Tensor,
    /// [4H, H]
    pub w_hh: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// [out, in]
    pub weight: Tensor,
    pub bias: Tensor,
}

/// All trainable tensors. Gradients share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub conv: Vec<ConvParams>,
    pub lstm: LstmParams,
    pub dense: Vec<DenseParams>,
}

impl Params {
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, c) in self.conv.iter().enumerate() {
            out.push((format!("conv{l}.weight"), &c.weight));
            out.push((format!("conv{l}.bias"), &c.bias));
        }
        out.push(("lstm.w_ih".into(), &self.lstm.w_ih));
        out.push(("lstm.w_hh".into(), &self.lstm.w_hh));
        out.push(("lstm.bias".into(), &self.lstm.bias));
        for (l, d) in self.dense.iter().enumerate() {
            out.push((format!("dense{l}.weight"), &d.weight));
            out.push((format!("dense{l}.bias"), &d.bias));
        }
        out
    }

    /// Same order as [`Params::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.push(&mut self.lstm.w_ih);
        out.push(&mut self.lstm.w_hh);
        out.push(&mut self.lstm.bias);
        for d in &mut self.dense {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        z
    }

    pub fn add_assign(&mut self, other: &Params) {
        let src: Vec<&Tensor> = other.named().into_iter().map(|(_, t)| t).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            dst.add_assign(s);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.named().iter().map(|(_, t)| t.sum_sq()).sum::<f64>().sqrt()
    }

    pub fn count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
}

fn uniform(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}

/// Softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Eight-lane accumulation so the loop vectorizes. The summation order is
/// fixed, so results do not depend on the instruction set used.
#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += a·x`
#[inline(always)]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `[rows, cols]` to `[cols, rows]`.
#[inline(always)]
fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = m[r * cols + c];
        }
    }
    out
}

/// Row `t` holds the receptive field of output `t`, channel-major.
#[inline(always)]
fn im2col(x: &[f64], cin: usize, lin: usize, k: usize, s: usize, lout: usize) -> Vec<f64> {
    let mut cols = Vec::with_capacity(lout * cin * k);
    for t in 0..lout {
        for i in 0..cin {
            cols.extend_from_slice(&x[i * lin + t * s..i * lin + t * s + k]);
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds receptive-field rows back.
#[inline(always)]
fn col2im(cols: &[f64], cin: usize, lin: usize, k: usize, s: usize, lout: usize) -> Vec<f64> {
    let mut x = vec![0.0; cin * lin];
    for t in 0..lout {
        for i in 0..cin {
            let src = &cols[(t * cin + i) * k..(t * cin + i + 1) * k];
            axpy(&mut x[i * lin + t * s..i * lin + t * s + k], 1.0, src);
        }
    }
    x
}

fn check_finite(v: &[f64], layer: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            layer: layer.to_string(),
        })
    }
}

/// Forward intermediates for one sample.
struct Cache {
    /// receptive fields of each conv layer, [L_out, C_in·K]
    conv_cols: Vec<Vec<f64>>,
    conv_pre: Vec<Vec<f64>>,
    conv_post: Vec<Vec<f64>>,
    /// pooled sequence, [T, C]
    seq: Vec<f64>,
    /// post-activation gates, [T, 4H]
    gates: Vec<f64>,
    /// [T+1, H]
    cs: Vec<f64>,
    hs: Vec<f64>,
    dense_in: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
    dense_post: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

/// Per-sample contribution to a batch gradient.
pub(crate) struct SampleGrad {
    pub loss: f64,
    pub predicted: usize,
    pub grads: Params,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(config.init_seed);
        let chain = conv_chain(&config)?;
        let mut conv = Vec::new();
        for (l, spec) in config.conv.iter().enumerate() {
            let cin = chain[l].0;
            let bound = (6.0 / ((cin + spec.out_channels) * spec.kernel) as f64).sqrt();
            conv.push(ConvParams {
                weight: uniform(&mut rng, &[spec.out_channels, cin, spec.kernel], bound),
                bias: Tensor::zeros(&[spec.out_channels]),
            });
        }
        let h = config.lstm_hidden;
        let inp = config.lstm_input();
        let b = 1.0 / (h as f64).sqrt();
        let mut bias = Tensor::zeros(&[4 * h]);
        bias.data_mut()[h..2 * h].fill(1.0);
        let lstm = LstmParams {
            w_ih: uniform(&mut rng, &[4 * h, inp], b),
            w_hh: uniform(&mut rng, &[4 * h, h], b),
            bias,
        };
        let mut dense = Vec::new();
        let mut width = h;
        let outs: Vec<usize> = config.dense.iter().copied().chain([config.n_classes]).collect();
        for (l, &out) in outs.iter().enumerate() {
            let mut bound = (6.0 / (width + out) as f64).sqrt();
            if l + 1 == outs.len() {
                // near-uniform initial predictions
                bound *= 0.1;
            }
            dense.push(DenseParams {
                weight: uniform(&mut rng, &[out, width], bound),
                bias: Tensor::zeros(&[out]),
            });
            width = out;
        }
        Ok(Self {
            config,
            params: Params { conv, lstm, dense },
        })
    }

    /// Checks that `params` has the shapes `config` implies.
    pub fn from_parts(config: ModelConfig, params: Params) -> Result<Self> {
        let template = Model::new(ModelConfig {
            init_seed: 0,
            ..config.clone()
        })?;
        let want = template.params.named();
        let got = params.named();
        if want.len() != got.len() {
            return Err(shape_err("model", "parameter count mismatch"));
        }
        for ((name, w), (_, g)) in want.iter().zip(&got) {
            if w.shape() != g.shape() {
                return Err(shape_err(
                    name.clone(),
                    format!("expected shape {:?}, found {:?}", w.shape(), g.shape()),
                ));
            }
        }
        Ok(Self { config, params })
    }

    fn sample_len(&self) -> usize {
        self.config.input_channels * self.config.input_len
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = [self.config.input_channels, self.config.input_len];
        if shape != want {
            return Err(shape_err(
                "input",
                format!("expected sample shape {want:?}, got {shape:?}"),
            ));
        }
        Ok(())
    }

    fn forward_cache(&self, x: &[f64]) -> Result<Cache> {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { self.forward_cache_avx2(x) };
        }
        self.forward_cache_impl(x)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn forward_cache_avx2(&self, x: &[f64]) -> Result<Cache> {
        self.forward_cache_impl(x)
    }

    fn backward(&self, cache: &Cache, dlogits: &[f64]) -> Params {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the required CPU feature was detected at runtime.
            return unsafe { self.backward_avx2(cache, dlogits) };
        }
        self.backward_impl(cache, dlogits)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn backward_avx2(&self, cache: &Cache, dlogits: &[f64]) -> Params {
        self.backward_impl(cache, dlogits)
    }

    #[inline(always)]
    fn forward_cache_impl(&self, x: &[f64]) -> Result<Cache> {
        let cfg = &self.config;
        let act = cfg.activation;
        let chain = conv_chain(cfg)?;

        let mut conv_cols = Vec::with_capacity(cfg.conv.len());
        let mut conv_pre = Vec::with_capacity(cfg.conv.len());
        let mut conv_post = Vec::with_capacity(cfg.conv.len());
        let mut cur = x.to_vec();
        for (l, (spec, p)) in cfg.conv.iter().zip(&self.params.conv).enumerate() {
            let (cin, lin) = chain[l];
            let lout = chain[l + 1].1;
            let (k, s) = (spec.kernel, spec.stride);
            let w = p.weight.data();
            let b = p.bias.data();
            let rf = cin * k;
            let cols = im2col(&cur, cin, lin, k, s, lout);
            let cout = spec.out_channels;
            let wt = transpose(w, cout, rf);
            let mut pre_t = vec![0.0; lout * cout];
            for (t, col) in cols.chunks_exact(rf).enumerate() {
                let out = &mut pre_t[t * cout..(t + 1) * cout];
                out.copy_from_slice(b);
                for (f, &v) in col.iter().enumerate() {
                    axpy(out, v, &wt[f * cout..(f + 1) * cout]);
                }
            }
            let pre = transpose(&pre_t, lout, cout);
            check_finite(&pre, &format!("conv{l}"))?;
            let post: Vec<f64> = pre.iter().map(|&v| act.apply(v)).collect();
            conv_cols.push(cols);
            conv_pre.push(pre);
            cur = post.clone();
            conv_post.push(post);
        }

        // average pool into a time-major sequence
        let (ch, len) = *chain.last().unwrap();
        let pool = cfg.pool;
        let steps = len / pool;
        let mut seq = vec![0.0; steps * ch];
        for c in 0..ch {
            for t in 0..steps {
                let w = &cur[c * len + t * pool..c * len + (t + 1) * pool];
                seq[t * ch + c] = w.iter().sum::<f64>() / pool as f64;
            }
        }

        let h = cfg.lstm_hidden;
        let lp = &self.params.lstm;
        let bias = lp.bias.data();
        let w_ih = lp.w_ih.data();
        let w_hh = lp.w_hh.data();
        let mut gates = vec![0.0; steps * 4 * h];
        let mut cs = vec![0.0; (steps + 1) * h];
        let mut hs = vec![0.0; (steps + 1) * h];
        let mut a = vec![0.0; 4 * h];
        for t in 0..steps {
            let xt = &seq[t * ch..(t + 1) * ch];
            let h_prev = &hs[t * h..(t + 1) * h];
            for (r, ar) in a.iter_mut().enumerate() {
                *ar = bias[r] + dot(&w_ih[r * ch..(r + 1) * ch], xt) + dot(&w_hh[r * h..(r + 1) * h], h_prev);
            }
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let i_g = sigmoid(a[j]);
                let f_g = sigmoid(a[h + j]);
                let c_g = a[2 * h + j].tanh();
                let o_g = sigmoid(a[3 * h + j]);
                g[j] = i_g;
                g[h + j] = f_g;
                g[2 * h + j] = c_g;
                g[3 * h + j] = o_g;
                let c = f_g * cs[t * h + j] + i_g * c_g;
                cs[(t + 1) * h + j] = c;
                hs[(t + 1) * h + j] = o_g * c.tanh();
            }
        }
        check_finite(&hs[steps * h..], "lstm")?;

        let mut dense_in = Vec::new();
        let mut dense_pre = Vec::new();
        let mut dense_post = Vec::new();
        let mut v = hs[steps * h..].to_vec();
        let nd = self.params.dense.len();
        for (l, d) in self.params.dense.iter().enumerate() {
            let out = d.bias.len();
            let wd = d.weight.data();
            let pre: Vec<f64> = (0..out)
                .map(|o| d.bias.data()[o] + dot(&wd[o * v.len()..(o + 1) * v.len()], &v))
                .collect();
            check_finite(&pre, &format!("dense{l}"))?;
            let post: Vec<f64> = if l + 1 < nd {
                pre.iter().map(|&z| act.apply(z)).collect()
            } else {
                pre.clone()
            };
            dense_in.push(v);
            dense_pre.push(pre);
            v = post.clone();
            dense_post.push(post);
        }

        Ok(Cache {
            conv_cols,
            conv_pre,
            conv_post,
            seq,
            gates,
            cs,
            hs,
            dense_in,
            dense_pre,
            dense_post,
            logits: v,
        })
    }

    #[inline(always)]
    fn backward_impl(&self, cache: &Cache, dlogits: &[f64]) -> Params {
        let cfg = &self.config;
        let act = cfg.activation;
        let chain = conv_chain(cfg).expect("validated");
        let mut g = self.params.zeros_like();

        // dense head
        let nd = self.params.dense.len();
        let mut d = dlogits.to_vec();
        for l in (0..nd).rev() {
            if l + 1 < nd {
                for (k, dk) in d.iter_mut().enumerate() {
                    *dk *= act.derivative(cache.dense_pre[l][k], cache.dense_post[l][k]);
                }
            }
            let x = &cache.dense_in[l];
            let n_in = x.len();
            let w = self.params.dense[l].weight.data();
            let gd = &mut g.dense[l];
            let mut dx = vec![0.0; n_in];
            for (o, &dz) in d.iter().enumerate() {
                gd.bias.data_mut()[o] += dz;
                let gw = &mut gd.weight.data_mut()[o * n_in..(o + 1) * n_in];
                let wo = &w[o * n_in..(o + 1) * n_in];
                for k in 0..n_in {
                    gw[k] += dz * x[k];
                    dx[k] += wo[k] * dz;
                }
            }
            d = dx;
        }

        // LSTM, back through time
        let h = cfg.lstm_hidden;
        let (ch, len) = *chain.last().unwrap();
        let steps = cache.seq.len() / ch;
        let lp = &self.params.lstm;
        let (w_ih, w_hh) = (lp.w_ih.data(), lp.w_hh.data());
        let mut dseq = vec![0.0; steps * ch];
        let mut dh = d;
        let mut dc = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let gt = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let c_t = &cache.cs[(t + 1) * h..(t + 2) * h];
            let c_prev = &cache.cs[t * h..(t + 1) * h];
            for j in 0..h {
                let (i_g, f_g, c_g, o_g) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let tc = c_t[j].tanh();
                let dcj = dc[j] + dh[j] * o_g * (1.0 - tc * tc);
                da[j] = dcj * c_g * i_g * (1.0 - i_g);
                da[h + j] = dcj * c_prev[j] * f_g * (1.0 - f_g);
                da[2 * h + j] = dcj * i_g * (1.0 - c_g * c_g);
                da[3 * h + j] = dh[j] * tc * o_g * (1.0 - o_g);
                dc[j] = dcj * f_g;
            }
            let xt = &cache.seq[t * ch..(t + 1) * ch];
            let h_prev = &cache.hs[t * h..(t + 1) * h];
            let dxt = &mut dseq[t * ch..(t + 1) * ch];
            let mut dh_prev = vec![0.0; h];
            let gl = &mut g.lstm;
            for (r, &dr) in da.iter().enumerate() {
                gl.bias.data_mut()[r] += dr;
                axpy(&mut gl.w_ih.data_mut()[r * ch..(r + 1) * ch], dr, xt);
                axpy(dxt, dr, &w_ih[r * ch..(r + 1) * ch]);
                axpy(&mut gl.w_hh.data_mut()[r * h..(r + 1) * h], dr, h_prev);
                axpy(&mut dh_prev, dr, &w_hh[r * h..(r + 1) * h]);
            }
            dh = dh_prev;
        }

        // un-pool
        let pool = cfg.pool;
        let mut dpost = vec![0.0; ch * len];
        for c in 0..ch {
            for t in 0..steps {
                let v = dseq[t * ch + c] / pool as f64;
                dpost[c * len + t * pool..c * len + (t + 1) * pool].fill(v);
            }
        }

        // conv stack
        for l in (0..cfg.conv.len()).rev() {
            let spec = cfg.conv[l];
            let (cin, lin) = chain[l];
            let lout = chain[l + 1].1;
            let (k, s) = (spec.kernel, spec.stride);
            let pre = &cache.conv_pre[l];
            let post = &cache.conv_post[l];
            let dz: Vec<f64> = dpost
                .iter()
                .zip(pre.iter().zip(post))
                .map(|(d, (&p, &q))| d * act.derivative(p, q))
                .collect();
            let cols = &cache.conv_cols[l];
            let rf = cin * k;
            let w = self.params.conv[l].weight.data();
            let need_dx = l > 0;
            let mut dcols = if need_dx { vec![0.0; cols.len()] } else { Vec::new() };
            let gc = &mut g.conv[l];
            for o in 0..spec.out_channels {
                let wo = &w[o * rf..(o + 1) * rf];
                let dzo = &dz[o * lout..(o + 1) * lout];
                gc.bias.data_mut()[o] += dzo.iter().sum::<f64>();
                let gw = &mut gc.weight.data_mut()[o * rf..(o + 1) * rf];
                for (t, &dzt) in dzo.iter().enumerate() {
                    if dzt == 0.0 {
                        continue;
                    }
                    axpy(gw, dzt, &cols[t * rf..(t + 1) * rf]);
                    if need_dx {
                        axpy(&mut dcols[t * rf..(t + 1) * rf], dzt, wo);
                    }
                }
            }
            let dx = if need_dx {
                col2im(&dcols, cin, lin, k, s, lout)
            } else {
                Vec::new()
            };
            dpost = dx;
        }
        g
    }

    /// Logits for one `[channels, length]` sample.
    pub fn forward_one(&self, sample: &Tensor) -> Result<Vec<f64>> {
        self.check_input(sample.shape())?;
        Ok(self.forward_cache(sample.data())?.logits)
    }

    /// Logits `[B, n_classes]` for a batch `[B, channels, length]`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let shape = batch.shape();
        if shape.len() != 3 {
            return Err(shape_err("input", format!("expected [B, C, N], got {shape:?}")));
        }
        self.check_input(&shape[1..])?;
        let n = self.sample_len();
        let rows = batch
            .data()
            .par_chunks(n)
            .map(|x| self.forward_cache(x).map(|c| c.logits))
            .collect::<Result<Vec<_>>>()?;
        Tensor::new(vec![shape[0], self.config.n_classes], rows.concat())
    }

    pub(crate) fn sample_gradient(&self, sample: &Tensor, label: usize, scale: f64) -> Result<SampleGrad> {
        self.check_input(sample.shape())?;
        if label >= self.config.n_classes {
            return Err(shape_err("loss", format!("label {label} out of range")));
        }
        let cache = self.forward_cache(sample.data())?;
        let p = softmax(&cache.logits);
        let m = cache.logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + cache.logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        let loss = lse - cache.logits[label];
        if !loss.is_finite() {
            return Err(Error::Numeric { layer: "loss".into() });
        }
        let dlogits: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(k, &pk)| scale * (pk - if k == label { 1.0 } else { 0.0 }))
            .collect();
        let predicted = argmax(&cache.logits);
        Ok(SampleGrad {
            loss,
            predicted,
            grads: self.backward(&cache, &dlogits),
        })
    }

    /// Per-sample gradients reduced in sample order, so the result is the
    /// same with or without parallelism. Returns (summed loss, mean-loss
    /// gradient, predictions).
    pub(crate) fn batch_gradient(
        &self,
        samples: &[&Tensor],
        labels: &[usize],
        parallel: bool,
    ) -> Result<(f64, Params, Vec<usize>)> {
        let scale = 1.0 / samples.len() as f64;
        let parts: Vec<SampleGrad> = if parallel {
            samples
                .par_iter()
                .zip(labels.par_iter())
                .map(|(x, &y)| self.sample_gradient(x, y, scale))
                .collect::<Result<_>>()?
        } else {
            samples
                .iter()
                .zip(labels)
                .map(|(x, &y)| self.sample_gradient(x, y, scale))
                .collect::<Result<_>>()?
        };
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        let mut preds = Vec::with_capacity(parts.len());
        for p in &parts {
            grads.add_assign(&p.grads);
            loss += p.loss;
            preds.push(p.predicted);
        }
        Ok((loss, grads, preds))
    }

    /// Mean softmax cross-entropy over a `[B, C, N]` batch and its gradient
    /// with respect to every parameter.
    pub fn loss_and_gradients(&self, batch: &Tensor, labels: &[usize]) -> Result<(f64, Params)> {
        if batch.shape().len() != 3 || batch.shape()[0] != labels.len() || labels.is_empty() {
            return Err(shape_err(
                "loss",
                format!("batch {:?} does not match {} labels", batch.shape(), labels.len()),
            ));
        }
        let samples: Vec<Tensor> = (0..labels.len()).map(|i| batch.index(i)).collect();
        let refs: Vec<&Tensor> = samples.iter().collect();
        let (loss, grads, _) = self.batch_gradient(&refs, labels, false)?;
        Ok((loss / labels.len() as f64, grads))
    }

    /// Mean loss only, for finite-difference checks.
    pub fn loss(&self, batch: &Tensor, labels: &[usize]) -> Result<f64> {
        let logits = self.forward(batch)?;
        let k = self.config.n_classes;
        let mut total = 0.0;
        for (row, &y) in logits.data().chunks(k).zip(labels) {
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        Ok(total / labels.len() as f64)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (k, x)| if *x > v[best] { k } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_len: 32,
            conv: vec![
                ConvSpec {
                    out_channels: 3,
                    kernel: 5,
                    stride: 2,
                },
                ConvSpec {
                    out_channels: 4,
                    kernel: 3,
                    stride: 1,
                },
            ],
            lstm_hidden: 5,
            dense: vec![6],
            ..Default::default()
        }
    }

    fn input(len: usize, seed: u64) -> Tensor {
        let mut rng = seed::rng(seed);
        let data = (0..2 * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(vec![2, len], data).unwrap()
    }

    #[test]
    fn default_chain() {
        let cfg = ModelConfig::default();
        assert_eq!(conv_chain(&cfg).unwrap(), vec![(2, 1001), (16, 498), (32, 247)]);
        assert_eq!(cfg.validate().unwrap(), 123);
    }

    #[test]
    fn bad_configs() {
        let mut cfg = tiny();
        cfg.n_classes = 4;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny();
        cfg.input_len = 4;
        assert!(matches!(cfg.validate(), Err(Error::Shape { .. })));
        let mut cfg = tiny();
        cfg.pool = 64;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn output_shape_and_batch_independence() {
        let m = Model::new(tiny()).unwrap();
        let x = input(32, 1);
        let one = m.forward(&Tensor::stack(std::slice::from_ref(&x)).unwrap()).unwrap();
        let eight = m.forward(&Tensor::stack(&vec![x; 8]).unwrap()).unwrap();
        assert_eq!(one.shape(), &[1, 5]);
        assert_eq!(eight.shape(), &[8, 5]);
        for row in eight.data().chunks(5) {
            assert_eq!(row, one.data());
        }
    }

    #[test]
    fn wrong_input_shape_names_layer() {
        let m = Model::new(tiny()).unwrap();
        let e = m.forward(&Tensor::zeros(&[1, 2, 31])).unwrap_err();
        assert!(matches!(e, Error::Shape { ref layer, .. } if layer == "input"), "{e}");
    }

    #[test]
    fn zero_head_gives_uniform_softmax_and_ln5_loss() {
        let mut m = Model::new(tiny()).unwrap();
        let last = m.params.dense.last_mut().unwrap();
        last.weight.data_mut().fill(0.0);
        last.bias.data_mut().fill(0.0);
        let batch = Tensor::stack(&[input(32, 2), input(32, 3)]).unwrap();
        let logits = m.forward(&batch).unwrap();
        for row in logits.data().chunks(5) {
            for p in softmax(row) {
                assert!((p - 0.2).abs() < 1e-15);
            }
        }
        let (loss, _) = m.loss_and_gradients(&batch, &[0, 4]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_properties() {
        let z = [1.0, -2.0, 0.5, 3.0, 0.0];
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = z.iter().map(|v| v + 100.0).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_and_serial_gradients_identical() {
        let m = Model::new(tiny()).unwrap();
        let xs: Vec<Tensor> = (0..6).map(|s| input(32, 10 + s)).collect();
        let refs: Vec<&Tensor> = xs.iter().collect();
        let labels = [0, 1, 2, 3, 4, 0];
        let a = m.batch_gradient(&refs, &labels, false).unwrap();
        let b = m.batch_gradient(&refs, &labels, true).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn label_out_of_range() {
        let m = Model::new(tiny()).unwrap();
        let batch = Tensor::stack(&[input(32, 2)]).unwrap();
        assert!(m.loss_and_gradients(&batch, &[5]).is_err());
    }
}
