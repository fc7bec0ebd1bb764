//! Pre-LN transformer encoder classifier, f64 throughout with exact
//! hand-derived gradients (no autograd). Parameters live in one flat buffer
//! so the optimizer and checkpoint code can treat them uniformly.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vectorizer::{hex_f64, parse_hex_f64};

pub const ALLOWED_MAX_LEN: [usize; 4] = [64, 128, 256, 512];

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout: f64,
    /// permit max_len outside the standard variants
    pub allow_custom_max_len: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vocab_size: 8000,
            max_len: 128,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            dropout: 0.1,
            allow_custom_max_len: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::InvalidConfig(m.to_string());
        if self.vocab_size <= 4 {
            return Err(bad("vocab_size must exceed the special tokens"));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 || self.d_ff == 0 {
            return Err(bad("encoder dimensions must be positive"));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(bad("d_model must be divisible by n_heads"));
        }
        if !self.allow_custom_max_len && !ALLOWED_MAX_LEN.contains(&self.max_len) {
            return Err(bad("max_len must be one of 64/128/256/512"));
        }
        if self.max_len < 2 {
            return Err(bad("max_len must fit [CLS] and [SEP]"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(bad("dropout must be in [0,1)"));
        }
        Ok(())
    }
}

/// Offset and length of one named tensor inside the flat parameter buffer.
#[derive(Debug, Clone)]
pub struct ParamInfo {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    /// whether weight decay applies (false for biases and layer-norm params)
    pub decay: bool,
}

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
pub struct EncoderModel {
    pub config: EncoderConfig,
    pub params: Vec<f64>,
    infos: Vec<ParamInfo>,
    tok_emb: usize,
    pos_emb: usize,
    layers: Vec<LayerOffsets>,
    ln_f_g: usize,
    ln_f_b: usize,
    head_w: usize,
    head_b: usize,
}

fn layout(config: &EncoderConfig) -> (Vec<ParamInfo>, usize, usize, Vec<LayerOffsets>, [usize; 4]) {
    let d = config.d_model;
    let mut infos = Vec::new();
    let mut cursor = 0usize;
    let mut push = |infos: &mut Vec<ParamInfo>, name: String, len: usize, decay: bool| {
        let offset = cursor;
        infos.push(ParamInfo { name, offset, len, decay });
        cursor += len;
        offset
    };
    let tok_emb = push(&mut infos, "tok_emb".into(), config.vocab_size * d, true);
    let pos_emb = push(&mut infos, "pos_emb".into(), config.max_len * d, true);
    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let n = |s: &str| format!("layer{l}.{s}");
        layers.push(LayerOffsets {
            ln1_g: push(&mut infos, n("ln1_g"), d, false),
            ln1_b: push(&mut infos, n("ln1_b"), d, false),
            wq: push(&mut infos, n("wq"), d * d, true),
            bq: push(&mut infos, n("bq"), d, false),
            wk: push(&mut infos, n("wk"), d * d, true),
            bk: push(&mut infos, n("bk"), d, false),
            wv: push(&mut infos, n("wv"), d * d, true),
            bv: push(&mut infos, n("bv"), d, false),
            wo: push(&mut infos, n("wo"), d * d, true),
            bo: push(&mut infos, n("bo"), d, false),
            ln2_g: push(&mut infos, n("ln2_g"), d, false),
            ln2_b: push(&mut infos, n("ln2_b"), d, false),
            w1: push(&mut infos, n("w1"), d * config.d_ff, true),
            b1: push(&mut infos, n("b1"), config.d_ff, false),
            w2: push(&mut infos, n("w2"), config.d_ff * d, true),
            b2: push(&mut infos, n("b2"), d, false),
        });
    }
    let ln_f_g = push(&mut infos, "ln_f_g".into(), d, false);
    let ln_f_b = push(&mut infos, "ln_f_b".into(), d, false);
    let head_w = push(&mut infos, "head_w".into(), d * 2, true);
    let head_b = push(&mut infos, "head_b".into(), 2, false);
    (infos, tok_emb, pos_emb, layers, [ln_f_g, ln_f_b, head_w, head_b])
}

fn normal(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl EncoderModel {
    pub fn new(config: EncoderConfig, seed: u64) -> Result<EncoderModel> {
        config.validate()?;
        let (infos, tok_emb, pos_emb, layers, tail) = layout(&config);
        let total = infos.iter().map(|i| i.len).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; total];
        for info in &infos {
            let is_gamma = info.name.ends_with("_g");
            for p in &mut params[info.offset..info.offset + info.len] {
                *p = if is_gamma {
                    1.0
                } else if info.decay {
                    normal(&mut rng, 0.02)
                } else {
                    0.0
                };
            }
        }
        Ok(EncoderModel {
            config,
            params,
            infos,
            tok_emb,
            pos_emb,
            layers,
            ln_f_g: tail[0],
            ln_f_b: tail[1],
            head_w: tail[2],
            head_b: tail[3],
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn param_infos(&self) -> &[ParamInfo] {
        &self.infos
    }

    fn check_input(&self, ids: &[usize], mask: &[u8]) -> Result<()> {
        if ids.len() != self.config.max_len || mask.len() != self.config.max_len {
            return Err(Error::LengthMismatch {
                left: ids.len(),
                right: self.config.max_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(Error::TokenIdOutOfRange {
                id: bad,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Logits for one sequence (inference mode, no dropout).
    pub fn forward(&self, ids: &[usize], mask: &[u8]) -> Result<[f64; 2]> {
        self.check_input(ids, mask)?;
        Ok(self.forward_seq(ids, mask, None).logits)
    }

    /// Class-1 probability.
    pub fn predict_proba(&self, ids: &[usize], mask: &[u8]) -> Result<f64> {
        let [z0, z1] = self.forward(ids, mask)?;
        let m = z0.max(z1);
        let e0 = (z0 - m).exp();
        let e1 = (z1 - m).exp();
        Ok(e1 / (e0 + e1))
    }

    /// Post-softmax attention maps, `[layer][head]` each an LxL row-major
    /// matrix. Rows over real key positions sum to 1.
    pub fn attention_maps(&self, ids: &[usize], mask: &[u8]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.check_input(ids, mask)?;
        let cache = self.forward_seq(ids, mask, None);
        let l = self.config.max_len;
        let h = self.config.n_heads;
        Ok(cache
            .layers
            .iter()
            .map(|lc| {
                (0..h)
                    .map(|head| lc.attn[head * l * l..(head + 1) * l * l].to_vec())
                    .collect()
            })
            .collect())
    }

    /// Mean cross-entropy loss and flat gradient over a batch. `dropout_rng`
    /// enables training-mode inverted dropout.
    pub fn loss_and_grad(
        &self,
        batch: &[(Vec<usize>, Vec<u8>)],
        labels: &[u8],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("encoder batch".into()));
        }
        if batch.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: batch.len(),
                right: labels.len(),
            });
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let inv_b = 1.0 / batch.len() as f64;
        for ((ids, mask), &y) in batch.iter().zip(labels) {
            self.check_input(ids, mask)?;
            let cache = self.forward_seq(ids, mask, dropout_rng.as_deref_mut());
            let [z0, z1] = cache.logits;
            let m = z0.max(z1);
            let e0 = (z0 - m).exp();
            let e1 = (z1 - m).exp();
            let zsum = e0 + e1;
            let p = [e0 / zsum, e1 / zsum];
            loss += -p[y as usize].ln() * inv_b;
            let dlogits = [
                (p[0] - if y == 0 { 1.0 } else { 0.0 }) * inv_b,
                (p[1] - if y == 1 { 1.0 } else { 0.0 }) * inv_b,
            ];
            self.backward_seq(ids, mask, &cache, dlogits, &mut grad);
        }
        Ok((loss, grad))
    }

    /// Mean loss only (used by gradient checking).
    pub fn loss(&self, batch: &[(Vec<usize>, Vec<u8>)], labels: &[u8]) -> Result<f64> {
        let mut loss = 0.0;
        for ((ids, mask), &y) in batch.iter().zip(labels) {
            self.check_input(ids, mask)?;
            let [z0, z1] = self.forward_seq(ids, mask, None).logits;
            let m = z0.max(z1);
            let e0 = (z0 - m).exp();
            let e1 = (z1 - m).exp();
            let p = if y == 1 { e1 } else { e0 } / (e0 + e1);
            loss += -p.ln();
        }
        Ok(loss / batch.len() as f64)
    }

    // ---- forward/backward internals ----

    fn forward_seq(&self, ids: &[usize], mask: &[u8], mut rng: Option<&mut ChaCha8Rng>) -> SeqCache {
        let cfg = &self.config;
        let (l, d) = (cfg.max_len, cfg.d_model);
        let p = &self.params;
        let mut x = vec![0.0; l * d];
        for t in 0..l {
            let te = self.tok_emb + ids[t] * d;
            let pe = self.pos_emb + t * d;
            for k in 0..d {
                x[t * d + k] = p[te + k] + p[pe + k];
            }
        }
        let emb_drop = self.dropout_mask(l * d, rng.as_deref_mut());
        apply_mask(&mut x, &emb_drop);

        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lo in &self.layers {
            let (lc, x_next) = self.layer_forward(&x, mask, lo, rng.as_deref_mut());
            layers.push(lc);
            x = x_next;
        }
        let (normed, ln_stats) = layer_norm(&x, &p[self.ln_f_g..self.ln_f_g + d], &p[self.ln_f_b..self.ln_f_b + d], l, d);
        let cls = &normed[0..d];
        let mut logits = [p[self.head_b], p[self.head_b + 1]];
        for k in 0..d {
            logits[0] += cls[k] * p[self.head_w + k * 2];
            logits[1] += cls[k] * p[self.head_w + k * 2 + 1];
        }
        SeqCache {
            emb_drop,
            layers,
            x_final: x,
            ln_f: ln_stats,
            normed_final: normed,
            logits,
        }
    }

    fn dropout_mask(&self, len: usize, rng: Option<&mut ChaCha8Rng>) -> Option<Vec<f64>> {
        let rate = self.config.dropout;
        let rng = rng?;
        if rate == 0.0 {
            return None;
        }
        let keep = 1.0 - rate;
        Some(
            (0..len)
                .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }

    fn layer_forward(
        &self,
        x: &[f64],
        mask: &[u8],
        lo: &LayerOffsets,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (LayerCache, Vec<f64>) {
        let cfg = &self.config;
        let (l, d, h) = (cfg.max_len, cfg.d_model, cfg.n_heads);
        let dh = d / h;
        let p = &self.params;

        let (h1, ln1) = layer_norm(x, &p[lo.ln1_g..lo.ln1_g + d], &p[lo.ln1_b..lo.ln1_b + d], l, d);
        let q = linear(&h1, &p[lo.wq..lo.wq + d * d], &p[lo.bq..lo.bq + d], l, d, d);
        let k = linear(&h1, &p[lo.wk..lo.wk + d * d], &p[lo.bk..lo.bk + d], l, d, d);
        let v = linear(&h1, &p[lo.wv..lo.wv + d * d], &p[lo.bv..lo.bv + d], l, d, d);

        let scale = 1.0 / (dh as f64).sqrt();
        let mut attn = vec![0.0; h * l * l];
        let mut ctx = vec![0.0; l * d];
        for head in 0..h {
            let hoff = head * dh;
            for t in 0..l {
                let row = &mut attn[head * l * l + t * l..head * l * l + (t + 1) * l];
                let mut maxv = f64::NEG_INFINITY;
                for s in 0..l {
                    let score = if mask[s] == 1 {
                        let mut dot = 0.0;
                        for j in 0..dh {
                            dot += q[t * d + hoff + j] * k[s * d + hoff + j];
                        }
                        dot * scale
                    } else {
                        f64::NEG_INFINITY
                    };
                    row[s] = score;
                    maxv = maxv.max(score);
                }
                let mut sum = 0.0;
                for s in 0..l {
                    row[s] = if row[s] == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (row[s] - maxv).exp()
                    };
                    sum += row[s];
                }
                for s in 0..l {
                    row[s] /= sum;
                }
                for s in 0..l {
                    let a = row[s];
                    if a != 0.0 {
                        for j in 0..dh {
                            ctx[t * d + hoff + j] += a * v[s * d + hoff + j];
                        }
                    }
                }
            }
        }
        let o = linear(&ctx, &p[lo.wo..lo.wo + d * d], &p[lo.bo..lo.bo + d], l, d, d);
        let o_drop = self.dropout_mask(l * d, rng.as_deref_mut());
        let mut x1 = x.to_vec();
        add_masked(&mut x1, &o, &o_drop);

        let (h2, ln2) = layer_norm(&x1, &p[lo.ln2_g..lo.ln2_g + d], &p[lo.ln2_b..lo.ln2_b + d], l, d);
        let a1 = linear(&h2, &p[lo.w1..lo.w1 + d * cfg.d_ff], &p[lo.b1..lo.b1 + cfg.d_ff], l, d, cfg.d_ff);
        let g1: Vec<f64> = a1.iter().map(|&z| gelu(z)).collect();
        let f2 = linear(&g1, &p[lo.w2..lo.w2 + cfg.d_ff * d], &p[lo.b2..lo.b2 + d], l, cfg.d_ff, d);
        let f_drop = self.dropout_mask(l * d, rng.as_deref_mut());
        let mut x2 = x1.clone();
        add_masked(&mut x2, &f2, &f_drop);

        (
            LayerCache {
                x_in: x.to_vec(),
                ln1,
                h1,
                q,
                k,
                v,
                attn,
                ctx,
                o_drop,
                x1,
                ln2,
                h2,
                a1,
                g1,
                f_drop,
            },
            x2,
        )
    }

    fn backward_seq(
        &self,
        ids: &[usize],
        mask: &[u8],
        cache: &SeqCache,
        dlogits: [f64; 2],
        grad: &mut [f64],
    ) {
        let cfg = &self.config;
        let (l, d) = (cfg.max_len, cfg.d_model);
        let p = &self.params;

        // head
        let cls = &cache.normed_final[0..d];
        let mut dnormed = vec![0.0; l * d];
        for k in 0..d {
            grad[self.head_w + k * 2] += cls[k] * dlogits[0];
            grad[self.head_w + k * 2 + 1] += cls[k] * dlogits[1];
            dnormed[k] = p[self.head_w + k * 2] * dlogits[0] + p[self.head_w + k * 2 + 1] * dlogits[1];
        }
        grad[self.head_b] += dlogits[0];
        grad[self.head_b + 1] += dlogits[1];

        // final layer norm
        let mut dx = vec![0.0; l * d];
        {
            let rstd = &cache.ln_f.rstd;
            let mean = &cache.ln_f.mean;
            for t in 0..l {
                for k in 0..d {
                    let xhat = (cache.x_final[t * d + k] - mean[t]) * rstd[t];
                    grad[self.ln_f_g + k] += dnormed[t * d + k] * xhat;
                    grad[self.ln_f_b + k] += dnormed[t * d + k];
                }
            }
        }
        layer_norm_input_grad(
            &dnormed,
            &cache.x_final,
            &cache.ln_f,
            &p[self.ln_f_g..self.ln_f_g + d],
            &mut dx,
            l,
            d,
        );

        for (lo, lc) in self.layers.iter().zip(&cache.layers).rev() {
            dx = self.layer_backward(mask, lo, lc, &dx, grad);
        }

        apply_mask(&mut dx, &cache.emb_drop);
        for t in 0..l {
            let te = self.tok_emb + ids[t] * d;
            let pe = self.pos_emb + t * d;
            for k in 0..d {
                grad[te + k] += dx[t * d + k];
                grad[pe + k] += dx[t * d + k];
            }
        }
    }

    fn layer_backward(
        &self,
        mask: &[u8],
        lo: &LayerOffsets,
        lc: &LayerCache,
        dx2: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let cfg = &self.config;
        let (l, d, h, dff) = (cfg.max_len, cfg.d_model, cfg.n_heads, cfg.d_ff);
        let dh = d / h;
        let p = &self.params;

        // x2 = x1 + drop(f2)
        let mut df2 = dx2.to_vec();
        apply_mask(&mut df2, &lc.f_drop);
        let mut dx1 = dx2.to_vec();

        // f2 = g1 W2 + b2  (each weight block is immediately followed by its
        // bias in the layout, so split_at_mut gives disjoint views)
        let mut dg1 = vec![0.0; l * dff];
        {
            let (dw, db) = grad[lo.w2..lo.b2 + d].split_at_mut(dff * d);
            linear_backward(&df2, &lc.g1, &p[lo.w2..lo.w2 + dff * d], l, dff, d, &mut dg1, dw, db);
        }
        // gelu
        let da1: Vec<f64> = dg1.iter().zip(&lc.a1).map(|(&g, &z)| g * dgelu(z)).collect();
        // a1 = h2 W1 + b1
        let mut dh2 = vec![0.0; l * d];
        {
            let (dw, db) = grad[lo.w1..lo.b1 + dff].split_at_mut(d * dff);
            linear_backward(&da1, &lc.h2, &p[lo.w1..lo.w1 + d * dff], l, d, dff, &mut dh2, dw, db);
        }
        // ln2
        {
            let rstd = &lc.ln2.rstd;
            let mean = &lc.ln2.mean;
            for t in 0..l {
                for k in 0..d {
                    let xhat = (lc.x1[t * d + k] - mean[t]) * rstd[t];
                    grad[lo.ln2_g + k] += dh2[t * d + k] * xhat;
                    grad[lo.ln2_b + k] += dh2[t * d + k];
                }
            }
        }
        let mut dx1_ln = vec![0.0; l * d];
        layer_norm_input_grad(&dh2, &lc.x1, &lc.ln2, &p[lo.ln2_g..lo.ln2_g + d], &mut dx1_ln, l, d);
        for i in 0..l * d {
            dx1[i] += dx1_ln[i];
        }

        // x1 = x + drop(o)
        let mut do_ = dx1.clone();
        apply_mask(&mut do_, &lc.o_drop);
        let mut dx = dx1.clone();

        // o = ctx Wo + bo
        let mut dctx = vec![0.0; l * d];
        {
            let (dw, db) = grad[lo.wo..lo.bo + d].split_at_mut(d * d);
            linear_backward(&do_, &lc.ctx, &p[lo.wo..lo.wo + d * d], l, d, d, &mut dctx, dw, db);
        }

        // attention
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = vec![0.0; l * d];
        let mut dk = vec![0.0; l * d];
        let mut dv = vec![0.0; l * d];
        for head in 0..h {
            let hoff = head * dh;
            let abase = head * l * l;
            for t in 0..l {
                let arow = &lc.attn[abase + t * l..abase + (t + 1) * l];
                // dA[s] = sum_j dctx[t,hoff+j] * v[s,hoff+j]
                let mut da = vec![0.0; l];
                for s in 0..l {
                    if arow[s] != 0.0 {
                        let mut acc = 0.0;
                        for j in 0..dh {
                            acc += dctx[t * d + hoff + j] * lc.v[s * d + hoff + j];
                            dv[s * d + hoff + j] += arow[s] * dctx[t * d + hoff + j];
                        }
                        da[s] = acc;
                    }
                }
                // softmax backward: ds = A * (dA - sum(dA*A))
                let dot: f64 = (0..l).map(|s| da[s] * arow[s]).sum();
                for s in 0..l {
                    if mask[s] != 1 || arow[s] == 0.0 {
                        continue;
                    }
                    let dscore = arow[s] * (da[s] - dot) * scale;
                    for j in 0..dh {
                        dq[t * d + hoff + j] += dscore * lc.k[s * d + hoff + j];
                        dk[s * d + hoff + j] += dscore * lc.q[t * d + hoff + j];
                    }
                }
            }
        }

        // q/k/v = h1 W + b
        let mut dh1 = vec![0.0; l * d];
        for (dproj, w_off, b_off) in [(&dq, lo.wq, lo.bq), (&dk, lo.wk, lo.bk), (&dv, lo.wv, lo.bv)] {
            let (dw, db) = grad[w_off..b_off + d].split_at_mut(d * d);
            linear_backward(dproj, &lc.h1, &p[w_off..w_off + d * d], l, d, d, &mut dh1, dw, db);
        }

        // ln1
        {
            let rstd = &lc.ln1.rstd;
            let mean = &lc.ln1.mean;
            for t in 0..l {
                for k in 0..d {
                    let xhat = (lc.x_in[t * d + k] - mean[t]) * rstd[t];
                    grad[lo.ln1_g + k] += dh1[t * d + k] * xhat;
                    grad[lo.ln1_b + k] += dh1[t * d + k];
                }
            }
        }
        let mut dx_ln = vec![0.0; l * d];
        layer_norm_input_grad(&dh1, &lc.x_in, &lc.ln1, &p[lo.ln1_g..lo.ln1_g + d], &mut dx_ln, l, d);
        for i in 0..l * d {
            dx[i] += dx_ln[i];
        }
        dx
    }

    // ---- persistence ----

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "encoder-ckpt-v1")?;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.config.vocab_size,
            self.config.max_len,
            self.config.d_model,
            self.config.n_heads,
            self.config.n_layers,
            self.config.d_ff,
            hex_f64(self.config.dropout),
            self.config.allow_custom_max_len as u8,
        )?;
        for info in &self.infos {
            writeln!(f, "{},{}", info.name, info.len)?;
            let vals: Vec<String> = self.params[info.offset..info.offset + info.len]
                .iter()
                .map(|&v| hex_f64(v))
                .collect();
            writeln!(f, "{}", vals.join(","))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EncoderModel> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let bad = |m: &str| Error::BadModelFile(m.to_string());
        if lines.next().transpose()?.as_deref() != Some("encoder-ckpt-v1") {
            return Err(bad("bad magic"));
        }
        let header = lines.next().transpose()?.ok_or_else(|| bad("missing config"))?;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 8 {
            return Err(bad("bad config line"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad config value"));
        let config = EncoderConfig {
            vocab_size: num(parts[0])?,
            max_len: num(parts[1])?,
            d_model: num(parts[2])?,
            n_heads: num(parts[3])?,
            n_layers: num(parts[4])?,
            d_ff: num(parts[5])?,
            dropout: parse_hex_f64(parts[6]).ok_or_else(|| bad("bad dropout"))?,
            allow_custom_max_len: parts[7] == "1",
        };
        let mut model = EncoderModel::new(config, 0)?;
        for info in model.infos.clone() {
            let name_line = lines.next().transpose()?.ok_or_else(|| bad("truncated"))?;
            let (name, len) = name_line.split_once(',').ok_or_else(|| bad("bad tensor header"))?;
            if name != info.name || num(len)? != info.len {
                return Err(bad("tensor layout mismatch"));
            }
            let data = lines.next().transpose()?.ok_or_else(|| bad("missing tensor data"))?;
            let vals: Vec<f64> = data
                .split(',')
                .map(|s| parse_hex_f64(s).ok_or_else(|| bad("bad tensor value")))
                .collect::<Result<_>>()?;
            if vals.len() != info.len {
                return Err(bad("tensor length mismatch"));
            }
            model.params[info.offset..info.offset + info.len].copy_from_slice(&vals);
        }
        Ok(model)
    }
}

// ---- shared numeric pieces ----

struct LnStats {
    mean: Vec<f64>,
    rstd: Vec<f64>,
}

struct LayerCache {
    x_in: Vec<f64>,
    ln1: LnStats,
    h1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<f64>,
    ctx: Vec<f64>,
    o_drop: Option<Vec<f64>>,
    x1: Vec<f64>,
    ln2: LnStats,
    h2: Vec<f64>,
    a1: Vec<f64>,
    g1: Vec<f64>,
    f_drop: Option<Vec<f64>>,
}

struct SeqCache {
    emb_drop: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    x_final: Vec<f64>,
    ln_f: LnStats,
    normed_final: Vec<f64>,
    logits: [f64; 2],
}

const LN_EPS: f64 = 1e-5;

fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], l: usize, d: usize) -> (Vec<f64>, LnStats) {
    let mut out = vec![0.0; l * d];
    let mut mean = vec![0.0; l];
    let mut rstd = vec![0.0; l];
    for t in 0..l {
        let row = &x[t * d..(t + 1) * d];
        let m: f64 = row.iter().sum::<f64>() / d as f64;
        let var: f64 = row.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        mean[t] = m;
        rstd[t] = r;
        for k in 0..d {
            out[t * d + k] = gamma[k] * (row[k] - m) * r + beta[k];
        }
    }
    (out, LnStats { mean, rstd })
}

/// Gradient w.r.t. the layer-norm input only (gamma/beta grads are
/// accumulated by the caller).
fn layer_norm_input_grad(
    dout: &[f64],
    x: &[f64],
    stats: &LnStats,
    gamma: &[f64],
    dx: &mut [f64],
    l: usize,
    d: usize,
) {
    for t in 0..l {
        let m = stats.mean[t];
        let r = stats.rstd[t];
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for k in 0..d {
            let xhat = (x[t * d + k] - m) * r;
            let dxhat = dout[t * d + k] * gamma[k];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        let inv_d = 1.0 / d as f64;
        for k in 0..d {
            let xhat = (x[t * d + k] - m) * r;
            let dxhat = dout[t * d + k] * gamma[k];
            dx[t * d + k] = r * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
        }
    }
}

/// out[t] = x[t] W + b, with W stored row-major (d_in x d_out).
fn linear(x: &[f64], w: &[f64], b: &[f64], l: usize, d_in: usize, d_out: usize) -> Vec<f64> {
    let mut out = vec![0.0; l * d_out];
    for t in 0..l {
        let row = &x[t * d_in..(t + 1) * d_in];
        let orow = &mut out[t * d_out..(t + 1) * d_out];
        orow.copy_from_slice(b);
        for (i, &xi) in row.iter().enumerate() {
            if xi != 0.0 {
                let wrow = &w[i * d_out..(i + 1) * d_out];
                for j in 0..d_out {
                    orow[j] += xi * wrow[j];
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn linear_backward(
    dout: &[f64],
    x: &[f64],
    w: &[f64],
    l: usize,
    d_in: usize,
    d_out: usize,
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    for t in 0..l {
        let drow = &dout[t * d_out..(t + 1) * d_out];
        let xrow = &x[t * d_in..(t + 1) * d_in];
        for j in 0..d_out {
            db[j] += drow[j];
        }
        for i in 0..d_in {
            let wrow = &w[i * d_out..(i + 1) * d_out];
            let mut acc = 0.0;
            for j in 0..d_out {
                acc += drow[j] * wrow[j];
                dw[i * d_out + j] += xrow[i] * drow[j];
            }
            dx[t * d_in + i] += acc;
        }
    }
}

fn gelu(z: f64) -> f64 {
    // tanh approximation; smooth, so finite-difference checks behave
    const C: f64 = 0.7978845608028654; // sqrt(2/pi)
    0.5 * z * (1.0 + (C * (z + 0.044715 * z * z * z)).tanh())
}

fn dgelu(z: f64) -> f64 {
    const C: f64 = 0.7978845608028654;
    let inner = C * (z + 0.044715 * z * z * z);
    let t = inner.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * z * sech2 * C * (1.0 + 3.0 * 0.044715 * z * z)
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, &f) in x.iter_mut().zip(m) {
            *v *= f;
        }
    }
}

fn add_masked(acc: &mut [f64], add: &[f64], mask: &Option<Vec<f64>>) {
    match mask {
        Some(m) => {
            for i in 0..acc.len() {
                acc[i] += add[i] * m[i];
            }
        }
        None => {
            for i in 0..acc.len() {
                acc[i] += add[i];
            }
        }
    }
}
