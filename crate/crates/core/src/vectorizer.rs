//! TF-IDF vectorization with smoothed idf and L2 normalization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub lowercase: bool,
    pub min_token_len: usize,
    pub max_vocab: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            lowercase: true,
            min_token_len: 2,
            max_vocab: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub term_to_index: HashMap<String, usize>,
    /// per-index document frequency
    pub df: Vec<u64>,
    pub n_docs: u64,
    /// index -> term, for attribution and persistence
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
    pub config: TfidfConfig,
}

/// Ordered (index, weight) pairs with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector(pub Vec<(usize, f64)>);

impl SparseVector {
    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|pos| self.0[pos].1)
            .unwrap_or(0.0)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.0.iter().map(|(i, w)| w * dense[*i]).sum()
    }
}

/// Lowercase, then extract maximal runs of Unicode word characters of length
/// >= 2 (single characters dropped).
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, &TfidfConfig::default())
}

pub fn tokenize_with(text: &str, cfg: &TfidfConfig) -> Vec<String> {
    let source = if cfg.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in source.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            current.push(ch);
        } else if !current.is_empty() {
            if current.chars().count() >= cfg.min_token_len {
                tokens.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
    }
    if current.chars().count() >= cfg.min_token_len {
        tokens.push(current);
    }
    tokens
}

/// Build the vocabulary (truncated to the `max_vocab` most frequent terms,
/// ties by lexicographic order) and smoothed idf
/// `ln((1 + n) / (1 + df)) + 1`.
pub fn fit(docs: &[String], cfg: &TfidfConfig) -> Result<TfidfModel> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("tfidf corpus".into()));
    }
    let mut total_counts: HashMap<String, u64> = HashMap::new();
    let mut doc_freq: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        let tokens = tokenize_with(doc, cfg);
        let mut seen = std::collections::HashSet::new();
        for t in tokens {
            *total_counts.entry(t.clone()).or_insert(0) += 1;
            if seen.insert(t.clone()) {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
    }
    if total_counts.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut ranked: Vec<(String, u64)> = total_counts.into_iter().collect();
    ranked.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
    ranked.truncate(cfg.max_vocab);
    // dense indices in lexicographic term order for deterministic layout
    ranked.sort_by(|(ta, _), (tb, _)| ta.cmp(tb));

    let n_docs = docs.len() as u64;
    let mut term_to_index = HashMap::with_capacity(ranked.len());
    let mut df = Vec::with_capacity(ranked.len());
    let mut terms = Vec::with_capacity(ranked.len());
    let mut idf = Vec::with_capacity(ranked.len());
    for (i, (term, _)) in ranked.into_iter().enumerate() {
        let d = doc_freq[&term];
        term_to_index.insert(term.clone(), i);
        df.push(d);
        terms.push(term);
        idf.push(((1 + n_docs) as f64 / (1 + d) as f64).ln() + 1.0);
    }
    Ok(TfidfModel {
        vocabulary: Vocabulary {
            term_to_index,
            df,
            n_docs,
            terms,
        },
        idf,
        config: *cfg,
    })
}

impl TfidfModel {
    pub fn vocab_size(&self) -> usize {
        self.idf.len()
    }

    /// Raw term counts weighted by idf, then L2-normalized. OOV tokens are
    /// ignored; a fully-OOV or empty document maps to the zero vector.
    pub fn transform(&self, doc: &str) -> SparseVector {
        self.transform_tokens(&tokenize_with(doc, &self.config))
    }

    pub fn transform_tokens(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in tokens {
            if let Some(&i) = self.vocabulary.term_to_index.get(t) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut pairs: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i]))
            .collect();
        pairs.sort_by_key(|(i, _)| *i);
        let norm = pairs.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in pairs.iter_mut() {
                *w /= norm;
            }
        }
        SparseVector(pairs)
    }

    /// Versioned flat-file dump: header, config, then `term,index,df,idf`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "tfidf-v1")?;
        writeln!(
            f,
            "config,{},{},{},{}",
            self.config.lowercase,
            self.config.min_token_len,
            self.config.max_vocab,
            self.vocabulary.n_docs
        )?;
        writeln!(f, "term,index,df,idf")?;
        for (i, term) in self.vocabulary.terms.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{}",
                term,
                i,
                self.vocabulary.df[i],
                hex_f64(self.idf[i])
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TfidfModel> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let magic = lines.next().transpose()?.unwrap_or_default();
        if magic != "tfidf-v1" {
            return Err(Error::BadModelFile(format!("bad magic {magic:?}")));
        }
        let cfg_line = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::BadModelFile("missing config line".into()))?;
        let parts: Vec<&str> = cfg_line.split(',').collect();
        if parts.len() != 5 || parts[0] != "config" {
            return Err(Error::BadModelFile("bad config line".into()));
        }
        let bad = |m: &str| Error::BadModelFile(m.to_string());
        let config = TfidfConfig {
            lowercase: parts[1].parse().map_err(|_| bad("lowercase"))?,
            min_token_len: parts[2].parse().map_err(|_| bad("min_token_len"))?,
            max_vocab: parts[3].parse().map_err(|_| bad("max_vocab"))?,
        };
        let n_docs: u64 = parts[4].parse().map_err(|_| bad("n_docs"))?;
        lines.next(); // column header
        let mut terms = Vec::new();
        let mut df = Vec::new();
        let mut idf = Vec::new();
        let mut term_to_index = HashMap::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad("bad row"));
            }
            let index: usize = fields[1].parse().map_err(|_| bad("index"))?;
            if index != terms.len() {
                return Err(bad("non-dense index"));
            }
            term_to_index.insert(fields[0].to_string(), index);
            terms.push(fields[0].to_string());
            df.push(fields[2].parse().map_err(|_| bad("df"))?);
            idf.push(parse_hex_f64(fields[3]).ok_or_else(|| bad("idf"))?);
        }
        Ok(TfidfModel {
            vocabulary: Vocabulary {
                term_to_index,
                df,
                n_docs,
                terms,
            },
            idf,
            config,
        })
    }
}

/// Exact f64 round-trip encoding used by all model dumps.
pub(crate) fn hex_f64(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub(crate) fn parse_hex_f64(s: &str) -> Option<f64> {
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}
