//! Stratified 60/20/20 splitting and confusion-matrix metrics.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded stratified shuffle into 60/20/20: 20% test per class, then 25% of
/// the remaining training portion as validation; rounding remainder to train.
pub fn split(labels: &[u8], seed: u64) -> Result<DatasetSplit> {
    for class in [0u8, 1u8] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < 5 {
            return Err(Error::ClassTooSmall {
                label: class,
                count,
                needed: 5,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_test = ((n as f64) * 0.2).round() as usize;
        let n_val = (((n - n_test) as f64) * 0.25).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        validation.extend_from_slice(&idx[n_test..n_test + n_val]);
        train.extend_from_slice(&idx[n_test + n_val..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts with the positive class swapped.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// set when any denominator was zero and the value was reported as 0
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class1: ClassMetrics,
    pub class0: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_);
    ClassMetrics {
        precision,
        recall,
        f1,
        degenerate,
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let class1 = class_metrics(cm);
    let class0 = class_metrics(&cm.swapped());
    MetricsReport {
        class1,
        class0,
        macro_precision: (class1.precision + class0.precision) / 2.0,
        macro_recall: (class1.recall + class0.recall) / 2.0,
        macro_f1: (class1.f1 + class0.f1) / 2.0,
    }
}

pub fn macro_f1(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    Ok(metrics(&confusion(y_true, y_pred)?).macro_f1)
}

/// `model,recall,precision,f1` rows, column order as reported.
pub fn write_metrics_csv(path: &Path, rows: &[(String, MetricsReport)]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "model,recall,precision,f1")?;
    for (name, r) in rows {
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6}",
            name, r.macro_recall, r.macro_precision, r.macro_f1
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_100_is_60_20_20() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let s = split(&labels, 1).unwrap();
        assert_eq!(s.train.len(), 60);
        assert_eq!(s.validation.len(), 20);
        assert_eq!(s.test.len(), 20);
    }

    #[test]
    fn split_10_balanced_is_6_2_2() {
        let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let s = split(&labels, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
    }

    #[test]
    fn split_is_seed_stable_and_disjoint() {
        let labels: Vec<u8> = (0..137).map(|i| if i % 3 == 0 { 1 } else { 0 }).collect();
        let a = split(&labels, 42).unwrap();
        let b = split(&labels, 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a
            .train
            .iter()
            .chain(&a.validation)
            .chain(&a.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..137).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_stratified_per_class() {
        let labels: Vec<u8> = (0..200).map(|i| if i < 50 { 1 } else { 0 }).collect();
        let s = split(&labels, 7).unwrap();
        let count1 = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(count1(&s.test), 10);
        assert_eq!(count1(&s.validation), 10);
        assert_eq!(count1(&s.train), 30);
    }

    #[test]
    fn split_small_class_errors() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1];
        assert!(matches!(
            split(&labels, 0),
            Err(Error::ClassTooSmall { label: 1, .. })
        ));
    }

    #[test]
    fn confusion_direct_count() {
        let cm = confusion(&[1, 1, 0], &[1, 0, 0]).unwrap();
        assert_eq!((cm.tp, cm.fn_, cm.tn, cm.fp), (1, 1, 1, 0));
    }

    #[test]
    fn confusion_all_correct() {
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(cm.fp, 0);
        assert_eq!(cm.fn_, 0);
    }

    #[test]
    fn confusion_matches_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y_true: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..2) as u8).collect();
        let y_pred: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..2) as u8).collect();
        let cm = confusion(&y_true, &y_pred).unwrap();
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..1000 {
            if y_true[i] == 1 && y_pred[i] == 1 {
                tp += 1;
            } else if y_true[i] == 0 && y_pred[i] == 1 {
                fp += 1;
            } else if y_true[i] == 1 && y_pred[i] == 0 {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (tp, fp, fn_, tn));
    }

    #[test]
    fn confusion_length_mismatch() {
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn metrics_perfect() {
        let r = metrics(&ConfusionMatrix { tp: 5, fp: 0, fn_: 0, tn: 5 });
        assert_eq!(r.class1.precision, 1.0);
        assert_eq!(r.class1.recall, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn metrics_symmetric_half() {
        let r = metrics(&ConfusionMatrix { tp: 1, fp: 1, fn_: 1, tn: 0 });
        assert_eq!(r.class1.precision, 0.5);
        assert_eq!(r.class1.recall, 0.5);
        assert_eq!(r.class1.f1, 0.5);
    }

    #[test]
    fn metrics_hand_computed() {
        // precision 2/3, recall 0.4, f1 = 2*2/(4+1+3) = 0.5
        let r = metrics(&ConfusionMatrix { tp: 2, fp: 1, fn_: 3, tn: 0 });
        assert!((r.class1.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.class1.recall - 0.4).abs() < 1e-15);
        assert!((r.class1.f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_denominator_flags_degenerate() {
        let r = metrics(&ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 3 });
        assert_eq!(r.class1.precision, 0.0);
        assert!(r.class1.degenerate);
        assert!(!r.class0.degenerate);
    }

    #[test]
    fn macro_invariant_under_class_swap() {
        let cm = ConfusionMatrix { tp: 7, fp: 3, fn_: 2, tn: 11 };
        let a = metrics(&cm);
        let b = metrics(&cm.swapped());
        assert_eq!(a.macro_f1, b.macro_f1);
        assert_eq!(a.macro_precision, b.macro_precision);
        assert_eq!(a.macro_recall, b.macro_recall);
    }
}
