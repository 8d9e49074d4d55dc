//! Trainable transformer text encoder.
//!
//! Data flows exactly as in the classification architecture: tokens are
//! embedded (with learned positions), passed through bidirectional
//! self-attention layers, and the final start-token embedding represents
//! the whole text. Forward and backward passes are implemented directly in
//! f64, so gradients are exact, training is bit-deterministic for a fixed
//! seed, and every encoder parameter receives updates.

use super::tokenizer::{Tokenizer, TokenizerConfig, PAD_ID};
use crate::rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

const LN_EPS: f64 = 1e-5;
const MASK_NEG: f64 = -1e30;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const INIT_STD: f64 = 0.02;

/// Encoder size class. The reference characteristics describe the published
/// pretrained architectures; custom dimensions are allowed for desk-scale
/// encoders and carry the tag of the variant they stand in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderVariant {
    Base,
    Large,
}

impl EncoderVariant {
    /// (total weights, attention layers, embedding dimension)
    pub fn reference_characteristics(self) -> (u64, usize, usize) {
        match self {
            EncoderVariant::Base => (110_000_000, 12, 768),
            EncoderVariant::Large => (340_000_000, 24, 1024),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub variant: EncoderVariant,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub tokenizer: TokenizerConfig,
    /// When false the checkpoint is inference-only and training must abort.
    pub trainable: bool,
}

impl EncoderConfig {
    pub fn base() -> Self {
        EncoderConfig {
            variant: EncoderVariant::Base,
            dim: 768,
            layers: 12,
            heads: 12,
            ffn_dim: 3072,
            tokenizer: TokenizerConfig::default(),
            trainable: true,
        }
    }

    pub fn large() -> Self {
        EncoderConfig {
            variant: EncoderVariant::Large,
            dim: 1024,
            layers: 24,
            heads: 16,
            ffn_dim: 4096,
            tokenizer: TokenizerConfig::default(),
            trainable: true,
        }
    }

    /// Small configuration for CPU-scale runs and tests.
    pub fn tiny(vocab_size: usize, max_len: usize) -> Self {
        EncoderConfig {
            variant: EncoderVariant::Base,
            dim: 32,
            layers: 2,
            heads: 2,
            ffn_dim: 64,
            tokenizer: TokenizerConfig {
                vocab_size,
                max_len,
                lowercase: true,
                normalize_tweets: true,
            },
            trainable: true,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 || self.layers == 0 || self.heads == 0 || self.ffn_dim == 0 {
            return Err("encoder dimensions must be positive".into());
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(format!("dim {} not divisible by heads {}", self.dim, self.heads));
        }
        if self.tokenizer.vocab_size < 3 {
            return Err("vocab too small".into());
        }
        Ok(())
    }
}

/// One attention block's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Vec<f64>,
    pub bq: Vec<f64>,
    pub wk: Vec<f64>,
    pub bk: Vec<f64>,
    pub wv: Vec<f64>,
    pub bv: Vec<f64>,
    pub wo: Vec<f64>,
    pub bo: Vec<f64>,
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
}

/// All encoder parameters; also reused as the gradient accumulator, which
/// shares the exact same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub tok_emb: Vec<f64>,
    pub pos_emb: Vec<f64>,
    pub layers: Vec<LayerParams>,
}

impl EncoderParams {
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let d = cfg.dim;
        let f = cfg.ffn_dim;
        let layer = || LayerParams {
            wq: vec![0.0; d * d],
            bq: vec![0.0; d],
            wk: vec![0.0; d * d],
            bk: vec![0.0; d],
            wv: vec![0.0; d * d],
            bv: vec![0.0; d],
            wo: vec![0.0; d * d],
            bo: vec![0.0; d],
            ln1_gamma: vec![0.0; d],
            ln1_beta: vec![0.0; d],
            w1: vec![0.0; d * f],
            b1: vec![0.0; f],
            w2: vec![0.0; f * d],
            b2: vec![0.0; d],
            ln2_gamma: vec![0.0; d],
            ln2_beta: vec![0.0; d],
        };
        EncoderParams {
            tok_emb: vec![0.0; cfg.tokenizer.vocab_size * d],
            pos_emb: vec![0.0; cfg.tokenizer.max_len * d],
            layers: (0..cfg.layers).map(|_| layer()).collect(),
        }
    }

    pub fn random(cfg: &EncoderConfig, rng: &mut ChaCha20Rng) -> Self {
        let mut params = EncoderParams::zeros(cfg);
        let fill = |v: &mut Vec<f64>, rng: &mut ChaCha20Rng| {
            for x in v.iter_mut() {
                *x = INIT_STD * rng::normal(rng);
            }
        };
        fill(&mut params.tok_emb, rng);
        fill(&mut params.pos_emb, rng);
        for layer in &mut params.layers {
            fill(&mut layer.wq, rng);
            fill(&mut layer.wk, rng);
            fill(&mut layer.wv, rng);
            fill(&mut layer.wo, rng);
            fill(&mut layer.w1, rng);
            fill(&mut layer.w2, rng);
            layer.ln1_gamma.fill(1.0);
            layer.ln2_gamma.fill(1.0);
        }
        params
    }

    pub fn zero_(&mut self) {
        self.tok_emb.fill(0.0);
        self.pos_emb.fill(0.0);
        for layer in &mut self.layers {
            for t in layer.tensors_mut() {
                t.1.fill(0.0);
            }
        }
    }

    /// All tensors with stable names, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out: Vec<(String, &mut Vec<f64>)> = vec![
            ("tok_emb".into(), &mut self.tok_emb),
            ("pos_emb".into(), &mut self.pos_emb),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, tensor) in layer.tensors_mut() {
                out.push((format!("layer{i}.{name}"), tensor));
            }
        }
        out
    }

    pub fn tensors(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out: Vec<(String, &Vec<f64>)> = vec![
            ("tok_emb".into(), &self.tok_emb),
            ("pos_emb".into(), &self.pos_emb),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, tensor) in layer.tensors() {
                out.push((format!("layer{i}.{name}"), tensor));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl LayerParams {
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        vec![
            ("wq", &mut self.wq),
            ("bq", &mut self.bq),
            ("wk", &mut self.wk),
            ("bk", &mut self.bk),
            ("wv", &mut self.wv),
            ("bv", &mut self.bv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
            ("ln1_gamma", &mut self.ln1_gamma),
            ("ln1_beta", &mut self.ln1_beta),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
            ("ln2_gamma", &mut self.ln2_gamma),
            ("ln2_beta", &mut self.ln2_beta),
        ]
    }

    fn tensors(&self) -> Vec<(&'static str, &Vec<f64>)> {
        vec![
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
            ("ln1_gamma", &self.ln1_gamma),
            ("ln1_beta", &self.ln1_beta),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
            ("ln2_gamma", &self.ln2_gamma),
            ("ln2_beta", &self.ln2_beta),
        ]
    }
}

/// A padded batch of token IDs with an attention mask.
#[derive(Debug, Clone)]
pub struct BatchEncoding {
    pub ids: Vec<u32>,
    pub mask: Vec<f64>,
    pub batch: usize,
    pub seq_len: usize,
}

impl BatchEncoding {
    pub fn from_texts(tokenizer: &Tokenizer, texts: &[&str]) -> BatchEncoding {
        let encoded: Vec<Vec<u32>> = texts.iter().map(|t| tokenizer.encode(t)).collect();
        let seq_len = encoded.iter().map(|e| e.len()).max().unwrap_or(1);
        let batch = encoded.len();
        let mut ids = vec![PAD_ID; batch * seq_len];
        let mut mask = vec![0.0; batch * seq_len];
        for (b, row) in encoded.iter().enumerate() {
            for (t, &id) in row.iter().enumerate() {
                ids[b * seq_len + t] = id;
                mask[b * seq_len + t] = 1.0;
            }
        }
        BatchEncoding { ids, mask, batch, seq_len }
    }
}

struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

struct LayerCache {
    x_in: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    ln1: LnCache,
    y1: Vec<f64>,
    ffn_pre: Vec<f64>,
    ln2: LnCache,
}

/// Activations retained from a forward pass for the backward pass.
pub struct ForwardCache {
    batch: usize,
    seq_len: usize,
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
}

/// y = x . W + b, where x is [n, d_in] and w is [d_in, d_out] row-major.
fn linear_fwd(x: &[f64], w: &[f64], b: &[f64], n: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * d_out];
    for row in 0..n {
        let xr = &x[row * d_in..(row + 1) * d_in];
        let yr = &mut y[row * d_out..(row + 1) * d_out];
        yr.copy_from_slice(b);
        for (i, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[i * d_out..(i + 1) * d_out];
            for (o, &wv) in wr.iter().enumerate() {
                yr[o] += xv * wv;
            }
        }
    }
    y
}

/// Accumulates dw/db and writes dx for y = x . W + b.
#[allow(clippy::too_many_arguments)]
fn linear_bwd(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    n: usize,
    d_in: usize,
    d_out: usize,
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    for row in 0..n {
        let xr = &x[row * d_in..(row + 1) * d_in];
        let dyr = &dy[row * d_out..(row + 1) * d_out];
        let dxr = &mut dx[row * d_in..(row + 1) * d_in];
        for (o, &dyv) in dyr.iter().enumerate() {
            db[o] += dyv;
        }
        for (i, &xv) in xr.iter().enumerate() {
            let wr = &w[i * d_out..(i + 1) * d_out];
            let dwr = &mut dw[i * d_out..(i + 1) * d_out];
            let mut acc = 0.0;
            for (o, &dyv) in dyr.iter().enumerate() {
                acc += dyv * wr[o];
                dwr[o] += xv * dyv;
            }
            dxr[i] += acc;
        }
    }
}

fn layer_norm_fwd(x: &[f64], gamma: &[f64], beta: &[f64], n: usize, d: usize) -> (Vec<f64>, LnCache) {
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut rstd = vec![0.0; n];
    for row in 0..n {
        let xr = &x[row * d..(row + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[row] = r;
        for c in 0..d {
            let h = (xr[c] - mean) * r;
            xhat[row * d + c] = h;
            y[row * d + c] = gamma[c] * h + beta[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

#[allow(clippy::too_many_arguments)]
fn layer_norm_bwd(
    dy: &[f64],
    cache: &LnCache,
    gamma: &[f64],
    n: usize,
    d: usize,
    dx: &mut [f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) {
    for row in 0..n {
        let dyr = &dy[row * d..(row + 1) * d];
        let xhat = &cache.xhat[row * d..(row + 1) * d];
        let r = cache.rstd[row];
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for c in 0..d {
            let dxhat = dyr[c] * gamma[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat[c];
            dgamma[c] += dyr[c] * xhat[c];
            dbeta[c] += dyr[c];
        }
        let m1 = sum_dxhat / d as f64;
        let m2 = sum_dxhat_xhat / d as f64;
        for c in 0..d {
            let dxhat = dyr[c] * gamma[c];
            dx[row * d + c] += r * (dxhat - m1 - xhat[c] * m2);
        }
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_deriv(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub cfg: EncoderConfig,
    pub params: EncoderParams,
}

impl Encoder {
    pub fn new(cfg: EncoderConfig, params: EncoderParams) -> Self {
        Encoder { cfg, params }
    }

    pub fn init_random(cfg: EncoderConfig, seed: u64) -> Self {
        let mut rng = rng::seeded_rng(seed);
        let params = EncoderParams::random(&cfg, &mut rng);
        Encoder { cfg, params }
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.cfg.tokenizer.clone())
    }

    /// Forward pass; returns the start-token embeddings `[batch, dim]` and
    /// the activation cache needed for [`Encoder::backward`].
    pub fn forward(&self, enc: &BatchEncoding) -> (Vec<f64>, ForwardCache) {
        let d = self.cfg.dim;
        let heads = self.cfg.heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let b = enc.batch;
        let t = enc.seq_len;
        let n = b * t;

        // Token + position embeddings.
        let mut x = vec![0.0; n * d];
        for row in 0..n {
            let id = enc.ids[row] as usize;
            let pos = row % t;
            let te = &self.params.tok_emb[id * d..(id + 1) * d];
            let pe = &self.params.pos_emb[pos * d..(pos + 1) * d];
            for c in 0..d {
                x[row * d + c] = te[c] + pe[c];
            }
        }

        let mut layer_caches = Vec::with_capacity(self.cfg.layers);
        for layer in &self.params.layers {
            let x_in = x;
            let q = linear_fwd(&x_in, &layer.wq, &layer.bq, n, d, d);
            let k = linear_fwd(&x_in, &layer.wk, &layer.bk, n, d, d);
            let v = linear_fwd(&x_in, &layer.wv, &layer.bv, n, d, d);

            // Scaled dot-product attention per batch row and head, with pad
            // columns masked out before the row softmax.
            let mut probs = vec![0.0; b * heads * t * t];
            let mut ctx = vec![0.0; n * d];
            for bi in 0..b {
                for h in 0..heads {
                    let ch0 = h * dh;
                    for i in 0..t {
                        let qrow = &q[(bi * t + i) * d + ch0..(bi * t + i) * d + ch0 + dh];
                        let prow =
                            &mut probs[((bi * heads + h) * t + i) * t..((bi * heads + h) * t + i) * t + t];
                        let mut max = f64::NEG_INFINITY;
                        for j in 0..t {
                            let krow = &k[(bi * t + j) * d + ch0..(bi * t + j) * d + ch0 + dh];
                            let mut s = 0.0;
                            for c in 0..dh {
                                s += qrow[c] * krow[c];
                            }
                            s *= scale;
                            if enc.mask[bi * t + j] == 0.0 {
                                s = MASK_NEG;
                            }
                            prow[j] = s;
                            if s > max {
                                max = s;
                            }
                        }
                        let mut total = 0.0;
                        for p in prow.iter_mut() {
                            *p = (*p - max).exp();
                            total += *p;
                        }
                        for p in prow.iter_mut() {
                            *p /= total;
                        }
                        let crow = &mut ctx[(bi * t + i) * d + ch0..(bi * t + i) * d + ch0 + dh];
                        for j in 0..t {
                            let a = prow[j];
                            if a == 0.0 {
                                continue;
                            }
                            let vrow = &v[(bi * t + j) * d + ch0..(bi * t + j) * d + ch0 + dh];
                            for c in 0..dh {
                                crow[c] += a * vrow[c];
                            }
                        }
                    }
                }
            }

            let attn_out = linear_fwd(&ctx, &layer.wo, &layer.bo, n, d, d);
            let mut res1 = vec![0.0; n * d];
            for i in 0..n * d {
                res1[i] = x_in[i] + attn_out[i];
            }
            let (y1, ln1) = layer_norm_fwd(&res1, &layer.ln1_gamma, &layer.ln1_beta, n, d);

            let f = self.cfg.ffn_dim;
            let ffn_pre = linear_fwd(&y1, &layer.w1, &layer.b1, n, d, f);
            let ffn_act: Vec<f64> = ffn_pre.iter().map(|&p| gelu(p)).collect();
            let ffn_out = linear_fwd(&ffn_act, &layer.w2, &layer.b2, n, f, d);
            let mut res2 = vec![0.0; n * d];
            for i in 0..n * d {
                res2[i] = y1[i] + ffn_out[i];
            }
            let (y2, ln2) = layer_norm_fwd(&res2, &layer.ln2_gamma, &layer.ln2_beta, n, d);

            layer_caches.push(LayerCache { x_in, q, k, v, probs, ctx, ln1, y1, ffn_pre, ln2 });
            x = y2;
        }

        // Start-token pooling: position 0 of every sequence.
        let mut bos = vec![0.0; b * d];
        for bi in 0..b {
            bos[bi * d..(bi + 1) * d].copy_from_slice(&x[bi * t * d..bi * t * d + d]);
        }

        (bos, ForwardCache { batch: b, seq_len: t, ids: enc.ids.clone(), layers: layer_caches })
    }

    /// Backward pass from gradients on the start-token embeddings,
    /// accumulating into `grads` (same shape as the parameters).
    pub fn backward(&self, cache: &ForwardCache, grad_bos: &[f64], grads: &mut EncoderParams) {
        let d = self.cfg.dim;
        let heads = self.cfg.heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let b = cache.batch;
        let t = cache.seq_len;
        let n = b * t;
        let f = self.cfg.ffn_dim;

        // Scatter bos gradients to position 0 of each sequence.
        let mut dx = vec![0.0; n * d];
        for bi in 0..b {
            dx[bi * t * d..bi * t * d + d].copy_from_slice(&grad_bos[bi * d..(bi + 1) * d]);
        }

        for li in (0..self.cfg.layers).rev() {
            let layer = &self.params.layers[li];
            let lc = &cache.layers[li];
            let gl = &mut grads.layers[li];

            // LN2 backward.
            let mut d_res2 = vec![0.0; n * d];
            layer_norm_bwd(&dx, &lc.ln2, &layer.ln2_gamma, n, d, &mut d_res2, &mut gl.ln2_gamma, &mut gl.ln2_beta);

            // Residual: res2 = y1 + ffn_out.
            let mut d_y1 = d_res2.clone();

            // FFN backward: ffn_out = gelu(y1.W1 + b1).W2 + b2.
            let ffn_act: Vec<f64> = lc.ffn_pre.iter().map(|&p| gelu(p)).collect();
            let mut d_act = vec![0.0; n * f];
            linear_bwd(&ffn_act, &layer.w2, &d_res2, n, f, d, &mut d_act, &mut gl.w2, &mut gl.b2);
            let mut d_pre = vec![0.0; n * f];
            for i in 0..n * f {
                d_pre[i] = d_act[i] * gelu_deriv(lc.ffn_pre[i]);
            }
            linear_bwd(&lc.y1, &layer.w1, &d_pre, n, d, f, &mut d_y1, &mut gl.w1, &mut gl.b1);

            // LN1 backward.
            let mut d_res1 = vec![0.0; n * d];
            layer_norm_bwd(&d_y1, &lc.ln1, &layer.ln1_gamma, n, d, &mut d_res1, &mut gl.ln1_gamma, &mut gl.ln1_beta);

            // Residual: res1 = x_in + attn_out.
            let mut d_x_in = d_res1.clone();

            // Output projection backward: attn_out = ctx.Wo + bo.
            let mut d_ctx = vec![0.0; n * d];
            linear_bwd(&lc.ctx, &layer.wo, &d_res1, n, d, d, &mut d_ctx, &mut gl.wo, &mut gl.bo);

            // Attention core backward.
            let mut d_q = vec![0.0; n * d];
            let mut d_k = vec![0.0; n * d];
            let mut d_v = vec![0.0; n * d];
            for bi in 0..b {
                for h in 0..heads {
                    let ch0 = h * dh;
                    for i in 0..t {
                        let prow =
                            &lc.probs[((bi * heads + h) * t + i) * t..((bi * heads + h) * t + i) * t + t];
                        let dctx_row =
                            &d_ctx[(bi * t + i) * d + ch0..(bi * t + i) * d + ch0 + dh];
                        // dA and dV.
                        let mut d_a = vec![0.0; t];
                        for j in 0..t {
                            let vrow = &lc.v[(bi * t + j) * d + ch0..(bi * t + j) * d + ch0 + dh];
                            let mut acc = 0.0;
                            for c in 0..dh {
                                acc += dctx_row[c] * vrow[c];
                            }
                            d_a[j] = acc;
                            let a = prow[j];
                            if a != 0.0 {
                                let dvrow =
                                    &mut d_v[(bi * t + j) * d + ch0..(bi * t + j) * d + ch0 + dh];
                                for c in 0..dh {
                                    dvrow[c] += a * dctx_row[c];
                                }
                            }
                        }
                        // Softmax backward: dS = A * (dA - sum(dA*A)).
                        let dot: f64 = d_a.iter().zip(prow.iter()).map(|(da, a)| da * a).sum();
                        let qrow = &lc.q[(bi * t + i) * d + ch0..(bi * t + i) * d + ch0 + dh];
                        for j in 0..t {
                            let ds = prow[j] * (d_a[j] - dot);
                            if ds == 0.0 {
                                continue;
                            }
                            let krow = &lc.k[(bi * t + j) * d + ch0..(bi * t + j) * d + ch0 + dh];
                            let dqrow =
                                &mut d_q[(bi * t + i) * d + ch0..(bi * t + i) * d + ch0 + dh];
                            for c in 0..dh {
                                dqrow[c] += ds * krow[c] * scale;
                            }
                            let dkrow =
                                &mut d_k[(bi * t + j) * d + ch0..(bi * t + j) * d + ch0 + dh];
                            for c in 0..dh {
                                dkrow[c] += ds * qrow[c] * scale;
                            }
                        }
                    }
                }
            }

            // Q/K/V projection backward.
            linear_bwd(&lc.x_in, &layer.wq, &d_q, n, d, d, &mut d_x_in, &mut gl.wq, &mut gl.bq);
            linear_bwd(&lc.x_in, &layer.wk, &d_k, n, d, d, &mut d_x_in, &mut gl.wk, &mut gl.bk);
            linear_bwd(&lc.x_in, &layer.wv, &d_v, n, d, d, &mut d_x_in, &mut gl.wv, &mut gl.bv);

            dx = d_x_in;
        }

        // Embedding backward: scatter-add into token and position tables.
        for row in 0..n {
            let id = cache.ids[row] as usize;
            let pos = row % t;
            for c in 0..d {
                let g = dx[row * d + c];
                grads.tok_emb[id * d + c] += g;
                grads.pos_emb[pos * d + c] += g;
            }
        }
    }
}
