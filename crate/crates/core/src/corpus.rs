//! Corpus ingestion and the two empirical group filters (minimum members,
//! minimum regional share).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_id: String,
    pub total_members: u64,
    pub regional_members: u64,
    /// false models deleted/closed groups whose member count was not found
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub group_id: String,
    pub text: String,
    pub month: Month,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_members: u64,
    pub min_share_pct: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_members: 2000,
            min_share_pct: 20.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_members < 1 {
            return Err(Error::InvalidConfig("min_members must be >= 1".into()));
        }
        if !(0.0..=100.0).contains(&self.min_share_pct) {
            return Err(Error::InvalidConfig(
                "min_share_pct must be in [0, 100]".into(),
            ));
        }
        Ok(())
    }
}

/// Percentage of a group's members registered in the target region.
pub fn relative_representation(g: &GroupRecord) -> Result<f64> {
    if !g.available {
        return Err(Error::NotComputable {
            group_id: g.group_id.clone(),
            reason: "group unavailable".into(),
        });
    }
    if g.total_members == 0 {
        return Err(Error::NotComputable {
            group_id: g.group_id.clone(),
            reason: "zero total members".into(),
        });
    }
    Ok(100.0 * g.regional_members as f64 / g.total_members as f64)
}

/// Keep available groups passing both inclusive thresholds, sorted by share
/// descending, ties by ascending group_id.
pub fn filter_groups(groups: &[GroupRecord], cfg: &FilterConfig) -> Vec<GroupRecord> {
    let mut kept: Vec<(f64, GroupRecord)> = groups
        .iter()
        .filter(|g| g.available && g.total_members >= cfg.min_members)
        .filter_map(|g| {
            let share = relative_representation(g).ok()?;
            (share >= cfg.min_share_pct).then(|| (share, g.clone()))
        })
        .collect();
    kept.sort_by(|(sa, ga), (sb, gb)| {
        sb.partial_cmp(sa)
            .unwrap()
            .then_with(|| ga.group_id.cmp(&gb.group_id))
    });
    kept.into_iter().map(|(_, g)| g).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// bins + 1 edges over [0, 100]
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// log10(count + 1), emitted alongside counts for the log-scale view
    pub log_counts: Vec<f64>,
}

/// Histogram of relative representation over [0, 100]. Groups with no
/// computable share are skipped. Values equal to 100 land in the last bin.
pub fn share_histogram(groups: &[GroupRecord], bins: usize, log_scale: bool) -> Histogram {
    assert!(bins >= 1, "bins must be >= 1");
    let width = 100.0 / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for g in groups {
        if let Ok(share) = relative_representation(g) {
            let idx = ((share / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    let log_counts = if log_scale {
        counts.iter().map(|&c| ((c + 1) as f64).log10()).collect()
    } else {
        Vec::new()
    };
    Histogram {
        edges,
        counts,
        log_counts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: u64,
    pub surviving_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// max |count - count_min| / count_max over the sweep, as a percentage;
    /// 0 when every count is zero
    pub max_relative_change_pct: f64,
}

/// Evaluate the member filter at evenly spaced thresholds in [lo, hi].
pub fn robustness_sweep(
    groups: &[GroupRecord],
    cfg: &FilterConfig,
    lo: u64,
    hi: u64,
    steps: usize,
) -> SweepResult {
    assert!(lo <= hi, "lo must be <= hi");
    let steps = if lo == hi { 1 } else { steps.max(2) };
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let threshold = if steps == 1 {
            lo
        } else {
            lo + ((hi - lo) as f64 * i as f64 / (steps - 1) as f64).round() as u64
        };
        let sweep_cfg = FilterConfig {
            min_members: threshold,
            ..*cfg
        };
        rows.push(SweepRow {
            threshold,
            surviving_count: filter_groups(groups, &sweep_cfg).len(),
        });
    }
    let max = rows.iter().map(|r| r.surviving_count).max().unwrap_or(0);
    let min = rows.iter().map(|r| r.surviving_count).min().unwrap_or(0);
    let max_relative_change_pct = if max == 0 {
        0.0
    } else {
        100.0 * (max - min) as f64 / max as f64
    };
    SweepResult {
        rows,
        max_relative_change_pct,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub start: Month,
    pub end: Month,
}

impl MonthWindow {
    pub fn contains(&self, m: Month) -> bool {
        self.start <= m && m <= self.end
    }
}

impl Default for MonthWindow {
    /// The corpus collection window, January 2010 through May 2022.
    fn default() -> Self {
        MonthWindow {
            start: Month::new(2010, 1).unwrap(),
            end: Month::new(2022, 5).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub window: MonthWindow,
    pub keep_empty: bool,
    /// strict: first malformed line aborts; lenient: malformed lines skipped
    pub strict: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            window: MonthWindow::default(),
            keep_empty: false,
            strict: true,
        }
    }
}

#[derive(Deserialize)]
struct RawPost {
    post_id: String,
    group_id: String,
    text: String,
    month: String,
}

/// Parse line-delimited post records, drop out-of-window and (by default)
/// empty-text rows, deduplicate on post_id keeping the first occurrence.
pub fn ingest_posts(path: &Path, opts: &IngestOptions) -> Result<Vec<PostRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_post_line(&line) {
            Ok(post) => {
                if !opts.window.contains(post.month) {
                    continue;
                }
                if post.text.is_empty() && !opts.keep_empty {
                    continue;
                }
                if seen.insert(post.post_id.clone()) {
                    out.push(post);
                }
            }
            Err(e) => {
                if opts.strict {
                    return Err(Error::MalformedLine {
                        line: i + 1,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn parse_post_line(line: &str) -> Result<PostRecord> {
    let raw: RawPost = serde_json::from_str(line)
        .map_err(|e| Error::MalformedLine { line: 0, message: e.to_string() })?;
    Ok(PostRecord {
        post_id: raw.post_id,
        group_id: raw.group_id,
        text: raw.text,
        month: raw.month.parse()?,
    })
}

/// Read the comma-separated group table with header
/// `group_id,total_members,regional_members,available`.
pub fn read_groups_csv(path: &Path) -> Result<Vec<GroupRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |msg: &str| Error::MalformedLine {
            line: i + 1,
            message: msg.to_string(),
        };
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        out.push(GroupRecord {
            group_id: fields[0].to_string(),
            total_members: fields[1].parse().map_err(|_| bad("bad total_members"))?,
            regional_members: fields[2].parse().map_err(|_| bad("bad regional_members"))?,
            available: fields[3].parse().map_err(|_| bad("bad available flag"))?,
        });
    }
    Ok(out)
}

pub fn write_groups_csv(path: &Path, groups: &[GroupRecord]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "group_id,total_members,regional_members,available")?;
    for g in groups {
        writeln!(
            f,
            "{},{},{},{}",
            g.group_id, g.total_members, g.regional_members, g.available
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut f = File::create(path)?;
    if h.log_counts.is_empty() {
        writeln!(f, "bin_lo,bin_hi,count")?;
        for (i, &c) in h.counts.iter().enumerate() {
            writeln!(f, "{},{},{}", h.edges[i], h.edges[i + 1], c)?;
        }
    } else {
        writeln!(f, "bin_lo,bin_hi,count,log10_count_plus_1")?;
        for (i, &c) in h.counts.iter().enumerate() {
            writeln!(f, "{},{},{},{}", h.edges[i], h.edges[i + 1], c, h.log_counts[i])?;
        }
    }
    Ok(())
}

pub fn write_sweep_csv(path: &Path, s: &SweepResult) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "threshold,surviving_count")?;
    for r in &s.rows {
        writeln!(f, "{},{}", r.threshold, r.surviving_count)?;
    }
    writeln!(f, "# max_relative_change_pct,{}", s.max_relative_change_pct)?;
    Ok(())
}
