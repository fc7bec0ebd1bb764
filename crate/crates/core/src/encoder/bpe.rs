//! Byte-pair subword tokenizer trained on the target corpus. Merges are
//! learned greedily by highest pair frequency, ties by lexicographic order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const SEP: usize = 3;
pub const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// End-of-word marker appended to a word's final symbol.
const EOW: &str = "</w>";

#[derive(Debug, Clone, PartialEq)]
pub struct SubwordTokenizer {
    pub token_to_id: HashMap<String, usize>,
    pub id_to_token: Vec<String>,
    /// learned merges in rank order
    pub merges: Vec<(String, String)>,
    merge_rank: HashMap<(String, String), usize>,
}

/// Lowercase and collapse whitespace; the form encode/decode round-trips.
pub fn normalize(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn word_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == n - 1 {
                format!("{c}{EOW}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn pair_counts(words: &HashMap<Vec<String>, u64>) -> HashMap<(String, String), u64> {
    let mut counts = HashMap::new();
    for (symbols, &freq) in words {
        for w in symbols.windows(2) {
            *counts
                .entry((w[0].clone(), w[1].clone()))
                .or_insert(0) += freq;
        }
    }
    counts
}

fn apply_merge(symbols: &[String], pair: &(String, String)) -> Vec<String> {
    let merged = format!("{}{}", pair.0, pair.1);
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(merged.clone());
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Learn merges until the vocabulary is full or no pair repeats.
pub fn train_tokenizer(corpus: &[String], vocab_size: usize) -> Result<SubwordTokenizer> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("tokenizer corpus".into()));
    }
    let mut words: HashMap<Vec<String>, u64> = HashMap::new();
    for text in corpus {
        for word in normalize(text).split(' ') {
            if word.is_empty() {
                continue;
            }
            *words.entry(word_symbols(word)).or_insert(0) += 1;
        }
    }
    let mut base: Vec<String> = words
        .keys()
        .flat_map(|s| s.iter().cloned())
        .collect::<std::collections::HashSet<_>>()
        .into_iter()
        .collect();
    base.sort();
    let minimum = SPECIALS.len() + base.len();
    if vocab_size < minimum {
        return Err(Error::VocabTooSmall {
            requested: vocab_size,
            minimum,
        });
    }

    let mut merges = Vec::new();
    let mut n_tokens = minimum;
    while n_tokens < vocab_size {
        let counts = pair_counts(&words);
        let Some((pair, count)) = counts.into_iter().max_by(|(pa, ca), (pb, cb)| {
            ca.cmp(cb).then_with(|| pb.cmp(pa)) // highest count, then lex-smallest pair
        }) else {
            break;
        };
        if count < 2 {
            break;
        }
        words = words
            .into_iter()
            .map(|(symbols, freq)| (apply_merge(&symbols, &pair), freq))
            .collect();
        merges.push(pair);
        n_tokens += 1;
    }

    let mut id_to_token: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    id_to_token.extend(base);
    id_to_token.extend(merges.iter().map(|(a, b)| format!("{a}{b}")));
    let token_to_id = id_to_token
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let merge_rank = merges
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    Ok(SubwordTokenizer {
        token_to_id,
        id_to_token,
        merges,
        merge_rank,
    })
}

impl SubwordTokenizer {
    pub fn vocab_size(&self) -> usize {
        self.id_to_token.len()
    }

    fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = word_symbols(word);
        loop {
            // lowest-rank applicable merge first
            let best = symbols
                .windows(2)
                .filter_map(|w| {
                    self.merge_rank
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&r| (r, (w[0].clone(), w[1].clone())))
                })
                .min_by_key(|(r, _)| *r);
            match best {
                Some((_, pair)) => symbols = apply_merge(&symbols, &pair),
                None => return symbols,
            }
        }
    }

    /// Subword ids of the normalized text, without specials or padding.
    pub fn tokenize_ids(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::new();
        for word in normalize(text).split(' ') {
            if word.is_empty() {
                continue;
            }
            for symbol in self.segment_word(word) {
                ids.push(*self.token_to_id.get(&symbol).unwrap_or(&UNK));
            }
        }
        ids
    }

    /// `[CLS] subwords [SEP]`, head-truncated so [SEP] is always the last
    /// real token, padded to `max_len`. Mask is 1 over real tokens.
    pub fn encode(&self, text: &str, max_len: usize) -> (Vec<usize>, Vec<u8>) {
        assert!(max_len >= 2, "max_len must fit [CLS] and [SEP]");
        let mut body = self.tokenize_ids(text);
        body.truncate(max_len - 2);
        let mut ids = Vec::with_capacity(max_len);
        ids.push(CLS);
        ids.extend_from_slice(&body);
        ids.push(SEP);
        let real = ids.len();
        ids.resize(max_len, PAD);
        let mut mask = vec![0u8; max_len];
        mask[..real].fill(1);
        (ids, mask)
    }

    /// Inverse of encode for non-special tokens; reproduces normalized text
    /// when nothing was truncated or unknown.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id < SPECIALS.len() {
                continue;
            }
            out.push_str(&self.id_to_token[id]);
        }
        out.replace(EOW, " ").trim_end().to_string()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "bpe-v1")?;
        writeln!(f, "{},{}", self.id_to_token.len(), self.merges.len())?;
        for token in &self.id_to_token {
            writeln!(f, "{}", hex_str(token))?;
        }
        for (a, b) in &self.merges {
            writeln!(f, "{},{}", hex_str(a), hex_str(b))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SubwordTokenizer> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let bad = |m: &str| Error::BadModelFile(m.to_string());
        if lines.next().transpose()?.as_deref() != Some("bpe-v1") {
            return Err(bad("bad magic"));
        }
        let header = lines.next().transpose()?.ok_or_else(|| bad("missing header"))?;
        let (nt, nm) = header.split_once(',').ok_or_else(|| bad("bad header"))?;
        let n_tokens: usize = nt.parse().map_err(|_| bad("token count"))?;
        let n_merges: usize = nm.parse().map_err(|_| bad("merge count"))?;
        let mut id_to_token = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            let line = lines.next().transpose()?.ok_or_else(|| bad("truncated tokens"))?;
            id_to_token.push(parse_hex_str(&line).ok_or_else(|| bad("bad token"))?);
        }
        let mut merges = Vec::with_capacity(n_merges);
        for _ in 0..n_merges {
            let line = lines.next().transpose()?.ok_or_else(|| bad("truncated merges"))?;
            let (a, b) = line.split_once(',').ok_or_else(|| bad("bad merge"))?;
            merges.push((
                parse_hex_str(a).ok_or_else(|| bad("bad merge"))?,
                parse_hex_str(b).ok_or_else(|| bad("bad merge"))?,
            ));
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let merge_rank = merges
            .iter()
            .enumerate()
            .map(|(i, p): (usize, &(String, String))| (p.clone(), i))
            .collect();
        Ok(SubwordTokenizer {
            token_to_id,
            id_to_token,
            merges,
            merge_rank,
        })
    }
}

fn hex_str(s: &str) -> String {
    s.bytes().map(|b| format!("{b:02x}")).collect()
}

fn parse_hex_str(s: &str) -> Option<String> {
    if s.len() % 2 != 0 {
        return None;
    }
    let bytes: Option<Vec<u8>> = (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok())
        .collect();
    String::from_utf8(bytes?).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate_merge() {
        let corpus = vec!["aaaa".to_string()];
        // base symbols: "a", "a</w>"; room for exactly one merge
        let t = train_tokenizer(&corpus, SPECIALS.len() + 3).unwrap();
        assert_eq!(t.merges, vec![("a".to_string(), "a".to_string())]);
    }

    #[test]
    fn zero_merges_pure_char_fallback() {
        let corpus = vec!["ab ba".to_string()];
        // base symbols: a, b, a</w>, b</w>
        let t = train_tokenizer(&corpus, SPECIALS.len() + 4).unwrap();
        assert!(t.merges.is_empty());
        assert_eq!(t.vocab_size(), SPECIALS.len() + 4);
    }

    #[test]
    fn vocab_too_small_errors() {
        assert!(matches!(
            train_tokenizer(&vec!["abc".to_string()], 4),
            Err(Error::VocabTooSmall { .. })
        ));
    }

    #[test]
    fn merge_sequence_matches_reference_greedy_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let stems = ["цен", "рост", "пад", "инфл", "был", "наш"];
        let suffixes = ["а", "ы", "ой", "ение", ""];
        let corpus: Vec<String> = (0..200)
            .map(|_| {
                let mut sentence = Vec::new();
                for _ in 0..rng.gen_range(3..8) {
                    let w = format!(
                        "{}{}",
                        stems[rng.gen_range(0..stems.len())],
                        suffixes[rng.gen_range(0..suffixes.len())]
                    );
                    sentence.push(w);
                }
                sentence.join(" ")
            })
            .collect();
        let t = train_tokenizer(&corpus, 80).unwrap();

        // independent greedy reimplementation over raw pair counts
        let mut words: HashMap<Vec<String>, u64> = HashMap::new();
        for text in &corpus {
            for word in normalize(text).split(' ') {
                if !word.is_empty() {
                    *words.entry(word_symbols(word)).or_insert(0) += 1;
                }
            }
        }
        let base: std::collections::HashSet<String> =
            words.keys().flat_map(|s| s.iter().cloned()).collect();
        let budget = 80 - SPECIALS.len() - base.len();
        let mut oracle_merges = Vec::new();
        for _ in 0..budget {
            let mut counts: Vec<((String, String), u64)> =
                pair_counts(&words).into_iter().collect();
            counts.sort_by(|(pa, ca), (pb, cb)| cb.cmp(ca).then_with(|| pa.cmp(pb)));
            let Some((pair, count)) = counts.into_iter().next() else { break };
            if count < 2 {
                break;
            }
            words = words
                .into_iter()
                .map(|(s, f)| (apply_merge(&s, &pair), f))
                .collect();
            oracle_merges.push(pair);
        }
        assert_eq!(t.merges, oracle_merges);
    }

    #[test]
    fn encode_empty_text() {
        let t = train_tokenizer(&vec!["ab".to_string()], 8).unwrap();
        let (ids, mask) = t.encode("", 8);
        assert_eq!(&ids[..2], &[CLS, SEP]);
        assert_eq!(&ids[2..], &[PAD; 6]);
        assert_eq!(mask, vec![1, 1, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn encode_truncation_keeps_sep_last() {
        let t = train_tokenizer(&vec!["ab cd ef gh".to_string()], 20).unwrap();
        let (ids, mask) = t.encode("ab cd ef gh ab cd ef gh", 6);
        assert_eq!(ids.len(), 6);
        assert_eq!(ids[5], SEP);
        assert!(mask.iter().all(|&m| m == 1));
    }

    #[test]
    fn roundtrip_decode_reproduces_normalized_text() {
        let corpus = vec![
            "Цены выросли на хлеб".to_string(),
            "цены упали на бензин".to_string(),
        ];
        let t = train_tokenizer(&corpus, 64).unwrap();
        let text = "Цены  ВЫРОСЛИ на хлеб";
        let (ids, _) = t.encode(text, 64);
        assert_eq!(t.decode(&ids), normalize(text));
    }

    #[test]
    fn unknown_chars_map_to_unk() {
        let t = train_tokenizer(&vec!["ab".to_string()], 10).unwrap();
        let ids = t.tokenize_ids("xyz");
        assert!(ids.iter().all(|&id| id == UNK));
    }

    #[test]
    fn save_load_roundtrip() {
        let t = train_tokenizer(
            &vec!["цены выросли".to_string(), "цены упали".to_string()],
            40,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tok.bpe");
        t.save(&p).unwrap();
        assert_eq!(SubwordTokenizer::load(&p).unwrap(), t);
    }
}
