//! Relative-extrema detection on the monthly inflation series and the
//! rising/falling trend labels derived from it.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::PostRecord;
use crate::error::{Error, Result};
use crate::month::Month;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationSeries {
    pub start_month: Month,
    /// month-on-month inflation readings, percent
    pub values: Vec<f64>,
}

impl InflationSeries {
    pub fn month_at(&self, index: usize) -> Month {
        self.start_month.add_months(index as i64)
    }

    pub fn index_of(&self, m: Month) -> Option<usize> {
        let d = m.months_since(self.start_month);
        (d >= 0 && (d as usize) < self.values.len()).then_some(d as usize)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremaKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub index: usize,
    pub month: Month,
    pub kind: ExtremaKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremaConfig {
    /// neighborhood half-width for the extremum comparison
    pub order: usize,
    pub merge_window_months: usize,
}

impl Default for ExtremaConfig {
    fn default() -> Self {
        ExtremaConfig {
            order: 1,
            merge_window_months: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendLabeling {
    pub start_month: Month,
    /// per-month class, 1 = inflation rising, 0 = falling
    pub labels: Vec<u8>,
    pub breakpoints: Vec<Breakpoint>,
}

impl TrendLabeling {
    pub fn label_for_month(&self, m: Month) -> Result<u8> {
        let d = m.months_since(self.start_month);
        if d < 0 || d as usize >= self.labels.len() {
            return Err(Error::UnlabeledMonth(m));
        }
        Ok(self.labels[d as usize])
    }
}

/// Strict relative extrema over a clipped window of half-width `order`.
/// Endpoints are excluded.
pub fn find_raw_extrema(s: &InflationSeries, order: usize) -> Result<Vec<Breakpoint>> {
    let n = s.values.len();
    if n <= 2 * order {
        return Err(Error::SeriesTooShort { len: n, min: 2 * order });
    }
    let mut out = Vec::new();
    for i in 1..n - 1 {
        let lo = i.saturating_sub(order);
        let hi = (i + order).min(n - 1);
        let v = s.values[i];
        let mut is_max = true;
        let mut is_min = true;
        for j in lo..=hi {
            if j == i {
                continue;
            }
            if s.values[j] >= v {
                is_max = false;
            }
            if s.values[j] <= v {
                is_min = false;
            }
        }
        let kind = match (is_max, is_min) {
            (true, _) => Some(ExtremaKind::Maximum),
            (_, true) => Some(ExtremaKind::Minimum),
            _ => None,
        };
        if let Some(kind) = kind {
            out.push(Breakpoint {
                index: i,
                month: s.month_at(i),
                kind,
            });
        }
    }
    Ok(out)
}

/// Merge extrema closer than the window (keeping the one deviating more from
/// the series mean, ties keep the earlier), then collapse same-kind runs to
/// their most extreme member so the result alternates.
pub fn smooth_extrema(
    raw: &[Breakpoint],
    s: &InflationSeries,
    cfg: &ExtremaConfig,
) -> Vec<Breakpoint> {
    let mean = s.mean();
    let mut bps = raw.to_vec();

    // neighborhood elimination, first offending pair each pass
    loop {
        let Some(pos) = bps
            .windows(2)
            .position(|w| w[1].index - w[0].index < cfg.merge_window_months)
        else {
            break;
        };
        let dev_a = (s.values[bps[pos].index] - mean).abs();
        let dev_b = (s.values[bps[pos + 1].index] - mean).abs();
        if dev_a >= dev_b {
            bps.remove(pos + 1);
        } else {
            bps.remove(pos);
        }
    }

    // collapse same-kind runs, keeping the most extreme member
    let mut out: Vec<Breakpoint> = Vec::with_capacity(bps.len());
    for bp in bps {
        match out.last() {
            Some(last) if last.kind == bp.kind => {
                let keep_new = match bp.kind {
                    ExtremaKind::Maximum => s.values[bp.index] > s.values[last.index],
                    ExtremaKind::Minimum => s.values[bp.index] < s.values[last.index],
                };
                if keep_new {
                    *out.last_mut().unwrap() = bp;
                }
            }
            _ => out.push(bp),
        }
    }
    out
}

pub fn find_breakpoints(s: &InflationSeries, cfg: &ExtremaConfig) -> Result<Vec<Breakpoint>> {
    let raw = find_raw_extrema(s, cfg.order)?;
    Ok(smooth_extrema(&raw, s, cfg))
}

/// A breakpoint month belongs to the segment it terminates: months up to and
/// including a maximum are rising (1), up to a minimum falling (0). Months
/// after the last breakpoint take the reversed direction.
pub fn assign_labels(s: &InflationSeries, bps: &[Breakpoint]) -> Result<TrendLabeling> {
    if bps.is_empty() {
        return Err(Error::NoBreakpoints);
    }
    let n = s.values.len();
    let mut labels = vec![0u8; n];
    let mut seg_start = 0usize;
    for bp in bps {
        let label = match bp.kind {
            ExtremaKind::Maximum => 1,
            ExtremaKind::Minimum => 0,
        };
        for l in labels.iter_mut().take(bp.index + 1).skip(seg_start) {
            *l = label;
        }
        seg_start = bp.index + 1;
    }
    let last_label = match bps.last().unwrap().kind {
        ExtremaKind::Maximum => 0,
        ExtremaKind::Minimum => 1,
    };
    for l in labels.iter_mut().skip(seg_start) {
        *l = last_label;
    }
    Ok(TrendLabeling {
        start_month: s.start_month,
        labels,
        breakpoints: bps.to_vec(),
    })
}

pub fn label_series(s: &InflationSeries, cfg: &ExtremaConfig) -> Result<TrendLabeling> {
    assign_labels(s, &find_breakpoints(s, cfg)?)
}

/// Pair each post with the label of its month, preserving order.
pub fn label_posts(
    posts: &[PostRecord],
    tl: &TrendLabeling,
) -> Result<Vec<(PostRecord, u8)>> {
    posts
        .iter()
        .map(|p| Ok((p.clone(), tl.label_for_month(p.month)?)))
        .collect()
}

/// Read the comma-separated series `month,value_pct`; months must be
/// consecutive.
pub fn read_series_csv(path: &Path) -> Result<InflationSeries> {
    let reader = BufReader::new(File::open(path)?);
    let mut start_month: Option<Month> = None;
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::MalformedLine {
            line: i + 1,
            message: msg.to_string(),
        };
        let (m, v) = line.split_once(',').ok_or_else(|| bad("expected 2 fields"))?;
        let month: Month = m.trim().parse()?;
        let value: f64 = v.trim().parse().map_err(|_| bad("bad value"))?;
        match start_month {
            None => start_month = Some(month),
            Some(start) => {
                if month.months_since(start) != values.len() as i64 {
                    return Err(bad("months not consecutive"));
                }
            }
        }
        values.push(value);
    }
    let start_month = start_month.ok_or_else(|| Error::EmptyInput("series csv".into()))?;
    Ok(InflationSeries {
        start_month,
        values,
    })
}

/// Export `month,label,segment_id,breakpoint_kind_if_any`.
pub fn write_labeling_csv(path: &Path, tl: &TrendLabeling) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "month,label,segment_id,breakpoint_kind_if_any")?;
    let mut seg = 0usize;
    let mut bp_iter = tl.breakpoints.iter().peekable();
    for (i, &label) in tl.labels.iter().enumerate() {
        let kind = match bp_iter.peek() {
            Some(bp) if bp.index == i => {
                let k = match bp.kind {
                    ExtremaKind::Minimum => "minimum",
                    ExtremaKind::Maximum => "maximum",
                };
                bp_iter.next();
                k
            }
            _ => "",
        };
        writeln!(
            f,
            "{},{},{},{}",
            tl.start_month.add_months(i as i64),
            label,
            seg,
            kind
        )?;
        if !kind.is_empty() {
            seg += 1;
        }
    }
    Ok(())
}

pub fn write_breakpoints_csv(path: &Path, bps: &[Breakpoint]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "index,month,kind")?;
    for bp in bps {
        let kind = match bp.kind {
            ExtremaKind::Minimum => "minimum",
            ExtremaKind::Maximum => "maximum",
        };
        writeln!(f, "{},{},{}", bp.index, bp.month, kind)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> InflationSeries {
        InflationSeries {
            start_month: Month::new(2010, 1).unwrap(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn single_peak() {
        let s = series(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        let bps = find_raw_extrema(&s, 1).unwrap();
        assert_eq!(bps.len(), 1);
        assert_eq!(bps[0].index, 2);
        assert_eq!(bps[0].kind, ExtremaKind::Maximum);
    }

    #[test]
    fn monotone_has_no_extrema() {
        let s = series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(find_raw_extrema(&s, 1).unwrap().is_empty());
    }

    #[test]
    fn plateau_yields_no_extremum() {
        let s = series(&[1.0, 3.0, 3.0, 1.0]);
        assert!(find_raw_extrema(&s, 1).unwrap().is_empty());
    }

    #[test]
    fn too_short_series_errors() {
        let s = series(&[1.0, 2.0]);
        assert!(matches!(
            find_raw_extrema(&s, 1),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn raw_extrema_match_window_scan_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let values: Vec<f64> = (0..60).map(|_| rng.gen_range(-2.0..5.0)).collect();
        let s = series(&values);
        for order in 1..=3usize {
            let got = find_raw_extrema(&s, order).unwrap();
            // exhaustive scan of every interior index
            let mut want = Vec::new();
            for i in 1..values.len() - 1 {
                let lo = i.saturating_sub(order);
                let hi = (i + order).min(values.len() - 1);
                let others: Vec<f64> = (lo..=hi).filter(|&j| j != i).map(|j| values[j]).collect();
                if others.iter().all(|&o| o < values[i]) {
                    want.push((i, ExtremaKind::Maximum));
                } else if others.iter().all(|&o| o > values[i]) {
                    want.push((i, ExtremaKind::Minimum));
                }
            }
            let got_pairs: Vec<(usize, ExtremaKind)> =
                got.iter().map(|b| (b.index, b.kind)).collect();
            assert_eq!(got_pairs, want, "order {order}");
        }
    }

    #[test]
    fn smoothing_keeps_dominant_of_close_pair() {
        // two maxima 1 month apart; mean pulled low by the rest
        let s = series(&[0.0, 5.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let raw = vec![
            Breakpoint { index: 1, month: s.month_at(1), kind: ExtremaKind::Maximum },
            Breakpoint { index: 2, month: s.month_at(2), kind: ExtremaKind::Maximum },
        ];
        let out = smooth_extrema(&raw, &s, &ExtremaConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].index, 2);
    }

    #[test]
    fn smoothing_is_fixed_point_on_clean_input() {
        let s = series(&[0.0, 5.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 5.0, 0.0]);
        let raw = find_raw_extrema(&s, 1).unwrap();
        let once = smooth_extrema(&raw, &s, &ExtremaConfig::default());
        assert_eq!(once, raw);
        let twice = smooth_extrema(&once, &s, &ExtremaConfig::default());
        assert_eq!(once, twice);
    }

    #[test]
    fn smoothing_output_alternates_and_respects_window() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let values: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..3.0)).collect();
            let s = series(&values);
            let cfg = ExtremaConfig::default();
            let out = smooth_extrema(&find_raw_extrema(&s, 1).unwrap(), &s, &cfg);
            for w in out.windows(2) {
                assert!(w[1].index - w[0].index >= cfg.merge_window_months);
                assert_ne!(w[0].kind, w[1].kind);
            }
        }
    }

    #[test]
    fn labels_single_peak() {
        let s = series(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        let tl = label_series(&s, &ExtremaConfig { order: 1, merge_window_months: 0 }).unwrap();
        assert_eq!(tl.labels, vec![1, 1, 1, 0, 0]);
    }

    #[test]
    fn labels_single_trough() {
        let s = series(&[3.0, 2.0, 1.0, 2.0, 3.0]);
        let tl = label_series(&s, &ExtremaConfig { order: 1, merge_window_months: 0 }).unwrap();
        assert_eq!(tl.labels, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn labels_shift_invariant() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..4.0)).collect();
        let shifted: Vec<f64> = values.iter().map(|v| v + 100.0).collect();
        let cfg = ExtremaConfig::default();
        let a = label_series(&series(&values), &cfg).unwrap();
        let b = label_series(&series(&shifted), &cfg).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.breakpoints, b.breakpoints);
    }

    #[test]
    fn empty_breakpoints_error() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert!(matches!(assign_labels(&s, &[]), Err(Error::NoBreakpoints)));
    }

    #[test]
    fn label_posts_join_matches_map_oracle() {
        use rand::{Rng, SeedableRng};
        use std::collections::HashMap;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..24).map(|_| rng.gen_range(0.0..2.0)).collect();
        let s = series(&values);
        let tl = label_series(&s, &ExtremaConfig::default()).unwrap();
        let posts: Vec<PostRecord> = (0..500)
            .map(|i| PostRecord {
                post_id: format!("p{i}"),
                group_id: "g".into(),
                text: "text".into(),
                month: s.month_at(rng.gen_range(0..24)),
            })
            .collect();
        let joined = label_posts(&posts, &tl).unwrap();
        // independent month -> label map
        let map: HashMap<Month, u8> = (0..24)
            .map(|i| (s.month_at(i), tl.labels[i]))
            .collect();
        for (p, label) in &joined {
            assert_eq!(*label, map[&p.month]);
        }
        assert_eq!(joined.len(), posts.len());
    }

    #[test]
    fn post_outside_range_errors() {
        let s = series(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        let tl = label_series(&s, &ExtremaConfig { order: 1, merge_window_months: 0 }).unwrap();
        let p = PostRecord {
            post_id: "p".into(),
            group_id: "g".into(),
            text: "t".into(),
            month: s.month_at(4).add_months(1),
        };
        assert!(matches!(
            label_posts(&[p], &tl),
            Err(Error::UnlabeledMonth(_))
        ));
    }
}
