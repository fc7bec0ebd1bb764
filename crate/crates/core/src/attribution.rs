//! Shapley-value token attribution with exact enumeration on short inputs
//! and seeded permutation sampling on long ones, plus red/blue reporting.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::Classifier;
use crate::encoder::{EncoderModel, SubwordTokenizer, CLS, PAD, SEP};
use crate::error::{Error, Result};
use crate::vectorizer::TfidfModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// surface tokens in input order
    pub tokens: Vec<String>,
    /// signed contribution of each token to the class-1 output
    pub phi: Vec<f64>,
    /// model output on the fully-masked input
    pub base_value: f64,
    /// model output on the full input
    pub fx: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExplainConfig {
    pub exact_max_tokens: usize,
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            exact_max_tokens: 12,
            n_permutations: 2000,
            seed: 0,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exact_max_tokens < 1 || self.n_permutations < 1 {
            return Err(Error::InvalidConfig(
                "exact_max_tokens and n_permutations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Output space of the coalition value function. Reports use probability;
/// the logit space is the one on which model mixtures are linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSpace {
    Probability,
    Logit,
}

/// Coalition value for a bag-of-words model: tokens outside the subset are
/// dropped from the count vector before tf-idf weighting.
pub fn tfidf_value<C: Classifier>(
    model: &C,
    tfidf: &TfidfModel,
    tokens: &[String],
    subset: &[bool],
    space: ValueSpace,
) -> Result<f64> {
    let kept: Vec<String> = tokens
        .iter()
        .zip(subset)
        .filter(|(_, &keep)| keep)
        .map(|(t, _)| t.clone())
        .collect();
    let x = tfidf.transform_tokens(&kept);
    let p = model.predict_proba(&x)?;
    Ok(match space {
        ValueSpace::Probability => p,
        ValueSpace::Logit => logit(p),
    })
}

/// Coalition value for the encoder: subwords of masked-out words are replaced
/// by [PAD] in place, keeping every surviving token at its original position.
pub fn encoder_value(
    model: &EncoderModel,
    tokenizer: &SubwordTokenizer,
    words: &[String],
    subset: &[bool],
    space: ValueSpace,
) -> Result<f64> {
    let max_len = model.config.max_len;
    let mut ids = vec![CLS];
    for (word, &keep) in words.iter().zip(subset) {
        for id in tokenizer.tokenize_ids(word) {
            ids.push(if keep { id } else { PAD });
        }
    }
    ids.truncate(max_len - 1);
    ids.push(SEP);
    let real = ids.len();
    ids.resize(max_len, PAD);
    let mut mask = vec![0u8; max_len];
    mask[..real].fill(1);
    if space == ValueSpace::Probability {
        model.predict_proba(&ids, &mask)
    } else {
        let [z0, z1] = model.forward(&ids, &mask)?;
        Ok(z1 - z0)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Whitespace words of the normalized text — the attribution units for the
/// encoder. Attribution is per whole word, not per subword.
pub fn attribution_words(text: &str) -> Vec<String> {
    crate::encoder::normalize(text)
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(|w| w.to_string())
        .collect()
}

/// Exact Shapley values by subset enumeration. The value function maps a
/// keep-mask over tokens to the model output; it must be deterministic.
pub fn shapley_exact<F>(tokens: &[String], value: F, exact_max_tokens: usize) -> Result<Attribution>
where
    F: Fn(&[bool]) -> Result<f64> + Sync,
{
    let n = tokens.len();
    if n == 0 {
        return Err(Error::EmptyInput("attribution tokens".into()));
    }
    if n > exact_max_tokens {
        return Err(Error::TooManyTokens {
            count: n,
            limit: exact_max_tokens,
        });
    }
    // evaluate all 2^n coalitions (independent, run in parallel)
    let values: Vec<f64> = (0u64..1 << n)
        .into_par_iter()
        .map(|bits| {
            let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            value(&mask)
        })
        .collect::<Result<_>>()?;
    let base_value = values[0];
    let fx = values[(1usize << n) - 1];

    let mut fact = [1.0f64; 13];
    for i in 1..13 {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight = |s: usize| fact[s] * fact[n - s - 1] / fact[n];

    let mut phi = vec![0.0; n];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        for bits in 0u64..1 << n {
            if bits >> i & 1 == 1 {
                continue;
            }
            let s = bits.count_ones() as usize;
            *phi_i += weight(s) * (values[(bits | 1 << i) as usize] - values[bits as usize]);
        }
    }
    Ok(Attribution {
        tokens: tokens.to_vec(),
        phi,
        base_value,
        fx,
    })
}

/// Permutation-sampling approximation. After averaging marginal
/// contributions, phi is shifted uniformly so efficiency holds exactly.
pub fn shapley_sampled<F>(tokens: &[String], value: F, cfg: &ExplainConfig) -> Result<Attribution>
where
    F: Fn(&[bool]) -> Result<f64>,
{
    cfg.validate()?;
    let n = tokens.len();
    if n == 0 {
        return Err(Error::EmptyInput("attribution tokens".into()));
    }
    let base_value = value(&vec![false; n])?;
    let fx = value(&vec![true; n])?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut phi = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.n_permutations {
        order.shuffle(&mut rng);
        let mut mask = vec![false; n];
        let mut prev = base_value;
        for &i in &order {
            mask[i] = true;
            let cur = value(&mask)?;
            phi[i] += cur - prev;
            prev = cur;
        }
    }
    for p in &mut phi {
        *p /= cfg.n_permutations as f64;
    }
    let shift = (fx - base_value - phi.iter().sum::<f64>()) / n as f64;
    for p in &mut phi {
        *p += shift;
    }
    Ok(Attribution {
        tokens: tokens.to_vec(),
        phi,
        base_value,
        fx,
    })
}

// ---- reporting ----

fn intensities(phi: &[f64]) -> Vec<f64> {
    let max_abs = phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if max_abs == 0.0 {
        vec![0.0; phi.len()]
    } else {
        phi.iter().map(|p| p.abs() / max_abs).collect()
    }
}

/// Self-contained HTML report: red tint for phi > 0, blue for phi < 0,
/// opacity proportional to |phi| / max|phi|.
pub fn render_html(a: &Attribution, out_path: &Path) -> Result<()> {
    let mut f = File::create(out_path)?;
    writeln!(
        f,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Token attribution</title></head>\n<body style=\"font-family:sans-serif;max-width:60em\">"
    )?;
    writeln!(
        f,
        "<p>base_value = {:.6}, f(x) = {:.6}</p>\n<p>",
        a.base_value, a.fx
    )?;
    for ((token, &phi), inten) in a.tokens.iter().zip(&a.phi).zip(intensities(&a.phi)) {
        let esc = html_escape(token);
        if phi == 0.0 || inten == 0.0 {
            writeln!(f, "<span data-phi=\"{phi}\">{esc}</span>")?;
        } else {
            let color = if phi > 0.0 { "255,0,0" } else { "0,0,255" };
            writeln!(
                f,
                "<span data-phi=\"{phi}\" style=\"background-color:rgba({color},{inten:.3})\">{esc}</span>"
            )?;
        }
    }
    writeln!(f, "</p></body></html>")?;
    Ok(())
}

/// ANSI terminal rendering of the same coloring.
pub fn render_ansi(a: &Attribution) -> String {
    let mut out = format!("base_value={:.6} f(x)={:.6}\n", a.base_value, a.fx);
    for ((token, &phi), inten) in a.tokens.iter().zip(&a.phi).zip(intensities(&a.phi)) {
        if phi == 0.0 || inten == 0.0 {
            out.push_str(token);
        } else {
            let level = 100 + (155.0 * inten) as u8;
            let (r, g, b) = if phi > 0.0 { (level, 60, 60) } else { (60, 60, level) };
            out.push_str(&format!("\x1b[38;2;{r};{g};{b}m{token}\x1b[0m"));
        }
        out.push(' ');
    }
    out.pop();
    out.push('\n');
    out
}

/// Machine-readable sidecar: token,phi rows.
pub fn write_sidecar_csv(a: &Attribution, out_path: &Path) -> Result<()> {
    let mut f = File::create(out_path)?;
    writeln!(f, "token,phi")?;
    for (token, &phi) in a.tokens.iter().zip(&a.phi) {
        writeln!(f, "{},{}", csv_escape(token), phi)?;
    }
    writeln!(f, "base_value,{}", a.base_value)?;
    writeln!(f, "fx,{}", a.fx)?;
    Ok(())
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
