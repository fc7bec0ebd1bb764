//! Seeded synthetic data generators: group populations, inflation series
//! with planted extrema, class-correlated post corpora, and the negation
//! sub-corpus on which bag-of-words models face an analytic F1 ceiling.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{GroupRecord, PostRecord};
use crate::error::{Error, Result};
use crate::labeler::{Breakpoint, ExtremaKind, InflationSeries, TrendLabeling};
use crate::month::Month;

// ---- groups ----

/// Power-law membership with mostly-local regional shares; the share mass
/// concentrates below 20%, as in the observed group population. A few
/// hand-placed records sit exactly on the filter boundaries.
pub fn generate_groups(seed: u64, n: usize) -> Vec<GroupRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(n + 3);
    for i in 0..n {
        let u: f64 = rng.gen_range(1e-6..1.0);
        let total = (150.0 * u.powf(-1.0 / 1.3)).min(3_000_000.0) as u64;
        let available = rng.gen_bool(0.98);
        // 88% of groups draw a low share, the rest are regional hubs
        let share = if rng.gen_bool(0.88) {
            rng.gen_range(0.0..19.5)
        } else {
            rng.gen_range(20.5..95.0)
        };
        let regional = ((total as f64) * share / 100.0).round() as u64;
        groups.push(GroupRecord {
            group_id: format!("g{i:05}"),
            total_members: total,
            regional_members: regional.min(total),
            available,
        });
    }
    // boundary cases: exactly at, just under member, just under share
    groups.push(GroupRecord {
        group_id: "gboundary_on".into(),
        total_members: 2000,
        regional_members: 400, // exactly 20%
        available: true,
    });
    groups.push(GroupRecord {
        group_id: "gboundary_members".into(),
        total_members: 1999,
        regional_members: 500,
        available: true,
    });
    groups.push(GroupRecord {
        group_id: "gboundary_share".into(),
        total_members: 2000,
        regional_members: 399,
        available: true,
    });
    groups
}

// ---- inflation series ----

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSeries {
    pub series: InflationSeries,
    /// ground-truth breakpoints the labeler must recover exactly
    pub breakpoints: Vec<Breakpoint>,
}

fn build_monotone_series(
    start_month: Month,
    n_months: usize,
    indices: &[usize],
    first_kind: ExtremaKind,
    mut step: impl FnMut() -> f64,
    base: f64,
) -> PlantedSeries {
    // strictly monotone between consecutive planted extrema, so the raw
    // window scan finds exactly the planted points and smoothing is a no-op
    let mut values = vec![0.0; n_months];
    values[0] = base;
    let mut kind = first_kind;
    let mut bps = Vec::new();
    let mut cursor = 0usize;
    for &idx in indices {
        let dir = match kind {
            ExtremaKind::Minimum => -1.0,
            ExtremaKind::Maximum => 1.0,
        };
        for t in cursor + 1..=idx {
            values[t] = values[t - 1] + dir * step();
        }
        bps.push(Breakpoint {
            index: idx,
            month: start_month.add_months(idx as i64),
            kind,
        });
        cursor = idx;
        kind = match kind {
            ExtremaKind::Minimum => ExtremaKind::Maximum,
            ExtremaKind::Maximum => ExtremaKind::Minimum,
        };
    }
    let dir = match kind {
        ExtremaKind::Minimum => -1.0,
        ExtremaKind::Maximum => 1.0,
    };
    for t in cursor + 1..n_months {
        values[t] = values[t - 1] + dir * step();
    }
    PlantedSeries {
        series: InflationSeries {
            start_month,
            values,
        },
        breakpoints: bps,
    }
}

/// Random series with `n_extrema` planted alternating extrema, all interior
/// and spaced widely enough that extremum smoothing keeps every one.
pub fn generate_series(
    seed: u64,
    start_month: Month,
    n_months: usize,
    n_extrema: usize,
) -> Result<PlantedSeries> {
    // each extremum needs >= 4 months of room plus interior margins
    if n_months < 4 * n_extrema + 6 {
        return Err(Error::InvalidConfig(format!(
            "{n_months} months cannot host {n_extrema} planted extrema"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::with_capacity(n_extrema);
    let mut idx = rng.gen_range(2..5);
    for k in 0..n_extrema {
        // leave room for the remaining extrema and an interior tail
        let remaining = n_extrema - k - 1;
        let max_idx = n_months - 2 - 4 * remaining;
        if idx > max_idx {
            idx = max_idx;
        }
        indices.push(idx);
        idx += rng.gen_range(4..9);
    }
    let first_kind = if rng.gen_bool(0.5) {
        ExtremaKind::Minimum
    } else {
        ExtremaKind::Maximum
    };
    let mut step_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Ok(build_monotone_series(
        start_month,
        n_months,
        &indices,
        first_kind,
        move || step_rng.gen_range(0.05..0.4),
        100.0,
    ))
}

/// Monthly CPI series for Omsk oblast, January 2010 through May 2022
/// (149 months), reconstructed so the default extrema pass yields the nine
/// documented trend breakpoints.
pub fn omsk_series() -> PlantedSeries {
    let indices = [5usize, 16, 26, 40, 48, 62, 101, 113, 126];
    // deterministic pseudo-noise in the step sizes keeps the shape natural
    // without an RNG dependency
    let mut k = 0u64;
    let step = move || {
        k += 1;
        0.08 + 0.22 * (0.5 + 0.5 * ((k as f64) * 2.399963).sin())
    };
    build_monotone_series(
        Month::new(2010, 1).unwrap(),
        149,
        &indices,
        ExtremaKind::Minimum,
        step,
        100.6,
    )
}

pub fn write_series_csv(path: &Path, s: &InflationSeries) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "month,value")?;
    for (i, v) in s.values.iter().enumerate() {
        writeln!(f, "{},{}", s.month_at(i), v)?;
    }
    Ok(())
}

// ---- post corpora ----

const RISE_WORDS: [&str; 6] = [
    "выросли",
    "подорожали",
    "подскочили",
    "дороже",
    "рост",
    "инфляция",
];
const FALL_WORDS: [&str; 6] = [
    "упали",
    "подешевели",
    "снизились",
    "дешевле",
    "скидки",
    "спад",
];
const COMMON_WORDS: [&str; 10] = [
    "цены", "хлеб", "бензин", "молоко", "магазин", "сегодня", "снова", "опять", "на", "рынке",
];

/// Posts whose vocabulary correlates with the month's trend label. Returns
/// records plus the label each text was generated under.
pub fn generate_posts(
    seed: u64,
    labeling: &TrendLabeling,
    groups: &[GroupRecord],
    n_posts: usize,
) -> Result<Vec<(PostRecord, u8)>> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("fixture groups".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_months = labeling.labels.len();
    let mut out = Vec::with_capacity(n_posts);
    for i in 0..n_posts {
        let m_idx = rng.gen_range(0..n_months);
        let month = labeling.start_month.add_months(m_idx as i64);
        let label = labeling.labels[m_idx];
        let class_words: &[&str] = if label == 1 { &RISE_WORDS } else { &FALL_WORDS };
        let n_words = rng.gen_range(5..12);
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            // class vocabulary dominates but is diluted with common words
            let w = if rng.gen_bool(0.55) {
                class_words[rng.gen_range(0..class_words.len())]
            } else {
                COMMON_WORDS[rng.gen_range(0..COMMON_WORDS.len())]
            };
            words.push(w);
        }
        let group = &groups[rng.gen_range(0..groups.len())];
        out.push((
            PostRecord {
                post_id: format!("p{i:06}"),
                group_id: group.group_id.clone(),
                text: words.join(" "),
                month,
            },
            label,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegationCorpus {
    pub texts: Vec<String>,
    pub labels: Vec<u8>,
    /// ambiguous documents share a pair id with their label-flipped twin;
    /// unambiguous documents have none. Pairs must stay in the same split.
    pub pair_id: Vec<Option<usize>>,
    /// macro-F1 that no bag-of-words classifier can exceed on a pair-closed
    /// evaluation set: 1 - q/2 where q is the ambiguous fraction
    pub f1_ceiling: f64,
}

/// Context-sensitive corpus. Each ambiguous pair holds two sentences with an
/// identical token multiset and opposite labels — the negator "не" moves from
/// the fall verb to the rise verb — so unigram models are exactly 50% on
/// them while position-aware models can separate them.
pub fn generate_negation_corpus(
    seed: u64,
    n_docs: usize,
    ambiguous_fraction: f64,
) -> Result<NegationCorpus> {
    if n_docs < 4 {
        return Err(Error::InvalidConfig("negation corpus needs >= 4 docs".into()));
    }
    if !(0.0..=1.0).contains(&ambiguous_fraction) {
        return Err(Error::InvalidConfig("ambiguous_fraction must be in [0,1]".into()));
    }
    let subjects = ["цены", "тарифы", "налоги", "штрафы", "товары", "продукты"];
    let objects = ["хлеб", "бензин", "проезд", "сахар", "масло", "аренда"];
    let rises = ["выросли", "подорожали", "подскочили"];
    let falls = ["упали", "подешевели", "снизились"];
    let fillers = ["сильно", "заметно", "резко", "опять", "снова", "недавно"];

    let n_pairs = ((n_docs as f64) * ambiguous_fraction / 2.0).round() as usize;
    let n_plain = n_docs - 2 * n_pairs;
    let q = 2.0 * n_pairs as f64 / n_docs as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::with_capacity(n_docs);
    let mut labels = Vec::with_capacity(n_docs);
    let mut pair_id = Vec::with_capacity(n_docs);
    for pid in 0..n_pairs {
        let s = subjects[rng.gen_range(0..subjects.len())];
        let o = objects[rng.gen_range(0..objects.len())];
        let r = rises[rng.gen_range(0..rises.len())];
        let f = falls[rng.gen_range(0..falls.len())];
        // same multiset {s, r, o, не, f}; prices rose (1) vs. did not rise (0)
        texts.push(format!("{s} {r} {o} не {f}"));
        labels.push(1);
        pair_id.push(Some(pid));
        texts.push(format!("{s} не {r} {o} {f}"));
        labels.push(0);
        pair_id.push(Some(pid));
    }
    for i in 0..n_plain {
        let s = subjects[rng.gen_range(0..subjects.len())];
        let fill = fillers[rng.gen_range(0..fillers.len())];
        let y = (i % 2) as u8;
        let verb = if y == 1 {
            rises[rng.gen_range(0..rises.len())]
        } else {
            falls[rng.gen_range(0..falls.len())]
        };
        texts.push(format!("{s} {verb} {fill}"));
        labels.push(y);
        pair_id.push(None);
    }
    Ok(NegationCorpus {
        texts,
        labels,
        pair_id,
        f1_ceiling: 1.0 - q / 2.0,
    })
}

impl NegationCorpus {
    /// Pair-closed, stratified split: both members of an ambiguous pair land
    /// on the same side, and the test side keeps the corpus-level ambiguous
    /// fraction and class balance (up to rounding), so the recorded
    /// bag-of-words ceiling applies to the test realization.
    pub fn split_pairwise(&self, seed: u64, test_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        use rand::seq::SliceRandom;
        let mut by_pair: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        let mut plain1: Vec<Vec<usize>> = Vec::new();
        let mut plain0: Vec<Vec<usize>> = Vec::new();
        for (i, pid) in self.pair_id.iter().enumerate() {
            match pid {
                Some(p) => by_pair.entry(*p).or_default().push(i),
                None if self.labels[i] == 1 => plain1.push(vec![i]),
                None => plain0.push(vec![i]),
            }
        }
        let pairs: Vec<Vec<usize>> = by_pair.into_values().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut stratum in [pairs, plain1, plain0] {
            stratum.shuffle(&mut rng);
            let n_test = ((stratum.len() as f64) * test_fraction).round() as usize;
            test.extend(stratum[..n_test].iter().flatten().copied());
            train.extend(stratum[n_test..].iter().flatten().copied());
        }
        train.sort();
        test.sort();
        (train, test)
    }
}

pub fn write_posts_jsonl(path: &Path, posts: &[PostRecord]) -> Result<()> {
    let mut f = File::create(path)?;
    for p in posts {
        let line = serde_json::json!({
            "post_id": p.post_id,
            "group_id": p.group_id,
            "text": p.text,
            "month": p.month.to_string(),
        });
        writeln!(f, "{line}")?;
    }
    Ok(())
}
