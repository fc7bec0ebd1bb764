//! Greedy CART trees: Gini classification trees and squared-error regression
//! trees (the latter back the boosting stages).

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{check_dims, Classifier};
use crate::error::{Error, Result};
use crate::vectorizer::{hex_f64, parse_hex_f64, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 10,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        /// class probabilities, summing to 1
        p0: f64,
        p1: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub root: Node,
    pub n_features: usize,
    pub max_depth: usize,
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        check_dims(self.n_features, x)?;
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { p1, .. } => return Ok(*p1),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.get(*feature) <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// Candidate thresholds for a feature over the node's samples: midpoints of
/// consecutive distinct values, with zero always included (sparse data).
pub(crate) fn candidate_thresholds(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let mut out = Vec::with_capacity(values.len());
    let mut saw_zero = false;
    for w in values.windows(2) {
        let mid = (w[0] + w[1]) / 2.0;
        if mid == 0.0 {
            saw_zero = true;
        }
        out.push(mid);
    }
    if !saw_zero {
        out.push(0.0);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    out
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Best (feature, threshold) by weighted Gini over the given features, ties
/// by lowest feature then lowest threshold. None when nothing improves.
pub(crate) fn best_gini_split(
    x: &[SparseVector],
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let mut counts = [0usize; 2];
    for &i in idx {
        counts[y[i] as usize] += 1;
    }
    let parent = gini(counts);
    let n = idx.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for &feature in features {
        let values: Vec<f64> = idx.iter().map(|&i| x[i].get(feature)).collect();
        for threshold in candidate_thresholds(values) {
            let mut left = [0usize; 2];
            let mut right = [0usize; 2];
            for &i in idx {
                if x[i].get(feature) <= threshold {
                    left[y[i] as usize] += 1;
                } else {
                    right[y[i] as usize] += 1;
                }
            }
            let nl = left[0] + left[1];
            let nr = right[0] + right[1];
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let weighted = (nl as f64 / n) * gini(left) + (nr as f64 / n) * gini(right);
            if weighted >= parent - 1e-12 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bf, bt, bw)) => {
                    weighted < bw - 1e-12
                        || (weighted <= bw + 1e-12
                            && (feature < bf || (feature == bf && threshold < bt)))
                }
            };
            if better {
                best = Some((feature, threshold, weighted));
            }
        }
    }
    best
}

pub(crate) fn grow_classification(
    x: &[SparseVector],
    y: &[u8],
    idx: &[usize],
    depth: usize,
    cfg: &TreeConfig,
    n_features: usize,
    feature_subsample: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> Node {
    let mut counts = [0usize; 2];
    for &i in idx {
        counts[y[i] as usize] += 1;
    }
    let n = idx.len();
    let leaf = || Node::Leaf {
        p0: counts[0] as f64 / n as f64,
        p1: counts[1] as f64 / n as f64,
    };
    if depth >= cfg.max_depth || counts[0] == 0 || counts[1] == 0 || n < cfg.min_leaf.max(1) * 2 {
        return leaf();
    }
    let all: Vec<usize> = (0..n_features).collect();
    let (features, mut rng) = match (feature_subsample, rng) {
        (Some(k), Some(rng)) => {
            let mut f = all.clone();
            f.shuffle(rng);
            f.truncate(k.max(1));
            f.sort_unstable();
            (f, Some(rng))
        }
        (_, rng) => (all, rng),
    };
    let Some((feature, threshold, _)) = best_gini_split(x, y, idx, &features, cfg.min_leaf)
    else {
        return leaf();
    };
    let (li, ri): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| x[i].get(feature) <= threshold);
    let left = grow_classification(
        x,
        y,
        &li,
        depth + 1,
        cfg,
        n_features,
        feature_subsample,
        rng.as_deref_mut(),
    );
    let right = grow_classification(
        x,
        y,
        &ri,
        depth + 1,
        cfg,
        n_features,
        feature_subsample,
        rng.as_deref_mut(),
    );
    Node::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Greedy CART classification tree. Single-class input yields a single leaf.
pub fn train_tree(
    x: &[SparseVector],
    y: &[u8],
    n_features: usize,
    cfg: &TreeConfig,
) -> Result<TreeModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("tree training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    for xi in x {
        check_dims(n_features, xi)?;
    }
    let idx: Vec<usize> = (0..x.len()).collect();
    let root = grow_classification(x, y, &idx, 0, cfg, n_features, None, None);
    Ok(TreeModel {
        root,
        n_features,
        max_depth: cfg.max_depth,
    })
}

// ---- regression trees (gradient boosting stages) ----

#[derive(Debug, Clone, PartialEq)]
pub enum RegNode {
    Leaf { value: f64 },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub root: RegNode,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn predict(&self, x: &SparseVector) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.get(*feature) <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

fn sse_stats(targets: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let sum: f64 = idx.iter().map(|&i| targets[i]).sum();
    let sum_sq: f64 = idx.iter().map(|&i| targets[i] * targets[i]).sum();
    (sum, sum_sq - sum * sum / n)
}

#[allow(clippy::too_many_arguments)]
fn grow_regression(
    x: &[SparseVector],
    targets: &[f64],
    hessians: &[f64],
    idx: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    n_features: usize,
) -> RegNode {
    let leaf = || {
        // one Newton step: sum(residuals) / sum(hessians)
        let num: f64 = idx.iter().map(|&i| targets[i]).sum();
        let den: f64 = idx.iter().map(|&i| hessians[i]).sum();
        RegNode::Leaf {
            value: if den.abs() < 1e-12 { 0.0 } else { num / den },
        }
    };
    if depth >= max_depth || idx.len() < min_leaf.max(1) * 2 {
        return leaf();
    }
    let (_, parent_sse) = sse_stats(targets, idx);
    if parent_sse < 1e-12 {
        return leaf();
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..n_features {
        let values: Vec<f64> = idx.iter().map(|&i| x[i].get(feature)).collect();
        for threshold in candidate_thresholds(values) {
            let (li, ri): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| x[i].get(feature) <= threshold);
            if li.len() < min_leaf || ri.len() < min_leaf {
                continue;
            }
            let (_, sl) = sse_stats(targets, &li);
            let (_, sr) = sse_stats(targets, &ri);
            let total = sl + sr;
            if total >= parent_sse - 1e-12 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bf, bt, bw)) => {
                    total < bw - 1e-12
                        || (total <= bw + 1e-12
                            && (feature < bf || (feature == bf && threshold < bt)))
                }
            };
            if better {
                best = Some((feature, threshold, total));
            }
        }
    }
    let Some((feature, threshold, _)) = best else {
        return leaf();
    };
    let (li, ri): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| x[i].get(feature) <= threshold);
    RegNode::Split {
        feature,
        threshold,
        left: Box::new(grow_regression(
            x, targets, hessians, &li, depth + 1, max_depth, min_leaf, n_features,
        )),
        right: Box::new(grow_regression(
            x, targets, hessians, &ri, depth + 1, max_depth, min_leaf, n_features,
        )),
    }
}

pub fn train_regression_tree(
    x: &[SparseVector],
    targets: &[f64],
    hessians: &[f64],
    n_features: usize,
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let idx: Vec<usize> = (0..x.len()).collect();
    let root = grow_regression(x, targets, hessians, &idx, 0, max_depth, min_leaf, n_features);
    RegressionTree { root, n_features }
}

// ---- persistence ----

fn write_node(f: &mut File, node: &Node) -> std::io::Result<()> {
    match node {
        Node::Leaf { p0, p1 } => writeln!(f, "L,{},{}", hex_f64(*p0), hex_f64(*p1)),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(f, "S,{},{}", feature, hex_f64(*threshold))?;
            write_node(f, left)?;
            write_node(f, right)
        }
    }
}

fn read_node(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<Node> {
    let bad = |m: &str| Error::BadModelFile(m.to_string());
    let line = lines
        .next()
        .transpose()?
        .ok_or_else(|| bad("truncated tree"))?;
    let fields: Vec<&str> = line.split(',').collect();
    match fields.first() {
        Some(&"L") if fields.len() == 3 => Ok(Node::Leaf {
            p0: parse_hex_f64(fields[1]).ok_or_else(|| bad("p0"))?,
            p1: parse_hex_f64(fields[2]).ok_or_else(|| bad("p1"))?,
        }),
        Some(&"S") if fields.len() == 3 => {
            let feature = fields[1].parse().map_err(|_| bad("feature"))?;
            let threshold = parse_hex_f64(fields[2]).ok_or_else(|| bad("threshold"))?;
            let left = read_node(lines)?;
            let right = read_node(lines)?;
            Ok(Node::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(bad("bad node line")),
    }
}

impl TreeModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "tree-v1")?;
        writeln!(f, "{},{}", self.n_features, self.max_depth)?;
        write_node(&mut f, &self.root)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TreeModel> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let bad = |m: &str| Error::BadModelFile(m.to_string());
        if lines.next().transpose()?.as_deref() != Some("tree-v1") {
            return Err(bad("bad magic"));
        }
        let header = lines.next().transpose()?.ok_or_else(|| bad("missing header"))?;
        let (n, d) = header.split_once(',').ok_or_else(|| bad("bad header"))?;
        let n_features = n.parse().map_err(|_| bad("n_features"))?;
        let max_depth = d.parse().map_err(|_| bad("max_depth"))?;
        let root = read_node(&mut lines)?;
        Ok(TreeModel {
            root,
            n_features,
            max_depth,
        })
    }
}

pub(crate) fn write_tree_body(f: &mut File, tree: &TreeModel) -> std::io::Result<()> {
    write_node(f, &tree.root)
}

pub(crate) fn read_tree_body(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    n_features: usize,
    max_depth: usize,
) -> Result<TreeModel> {
    Ok(TreeModel {
        root: read_node(lines)?,
        n_features,
        max_depth,
    })
}

pub(crate) fn write_reg_node(f: &mut File, node: &RegNode) -> std::io::Result<()> {
    match node {
        RegNode::Leaf { value } => writeln!(f, "L,{}", hex_f64(*value)),
        RegNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(f, "S,{},{}", feature, hex_f64(*threshold))?;
            write_reg_node(f, left)?;
            write_reg_node(f, right)
        }
    }
}

pub(crate) fn read_reg_node(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
) -> Result<RegNode> {
    let bad = |m: &str| Error::BadModelFile(m.to_string());
    let line = lines
        .next()
        .transpose()?
        .ok_or_else(|| bad("truncated tree"))?;
    let fields: Vec<&str> = line.split(',').collect();
    match fields.first() {
        Some(&"L") if fields.len() == 2 => Ok(RegNode::Leaf {
            value: parse_hex_f64(fields[1]).ok_or_else(|| bad("value"))?,
        }),
        Some(&"S") if fields.len() == 3 => {
            let feature = fields[1].parse().map_err(|_| bad("feature"))?;
            let threshold = parse_hex_f64(fields[2]).ok_or_else(|| bad("threshold"))?;
            let left = read_reg_node(lines)?;
            let right = read_reg_node(lines)?;
            Ok(RegNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(bad("bad node line")),
    }
}
