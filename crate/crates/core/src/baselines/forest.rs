//! Random forest: seeded bootstrap samples, per-split random feature
//! subsets of size √n_features, mean-probability ensemble prediction.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{grow_classification, Node, TreeConfig, TreeModel};
use super::{check_dims, check_two_classes, Classifier};
use crate::error::{Error, Result};
use crate::vectorizer::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
    /// test mode: full-sample draw and full feature set per split
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 10,
            min_leaf: 1,
            seed: 0,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
    pub feature_subsample: usize,
    pub n_features: usize,
    pub config: ForestConfig,
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of per-tree probabilities.
    fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        check_dims(self.n_features, x)?;
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.predict_proba(x))
            .sum::<Result<f64>>()?;
        Ok(sum / self.trees.len() as f64)
    }
}

/// The bootstrap draw for one tree, reproducible from its seed.
pub fn bootstrap_indices(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

fn tree_seed(forest_seed: u64, tree_index: usize) -> u64 {
    forest_seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(tree_index as u64 + 1)
}

pub fn train_forest(
    x: &[SparseVector],
    y: &[u8],
    n_features: usize,
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("forest training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    check_two_classes(y)?;
    if cfg.n_trees < 1 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    for xi in x {
        check_dims(n_features, xi)?;
    }
    let feature_subsample = if cfg.bootstrap {
        (n_features as f64).sqrt().round().max(1.0) as usize
    } else {
        n_features
    };
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
    };
    let tree_seeds: Vec<u64> = (0..cfg.n_trees).map(|i| tree_seed(cfg.seed, i)).collect();
    // trees fit in parallel, collected in seed-index order
    let trees: Vec<TreeModel> = tree_seeds
        .par_iter()
        .map(|&seed| {
            let idx: Vec<usize> = if cfg.bootstrap {
                bootstrap_indices(seed, x.len())
            } else {
                (0..x.len()).collect()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5a5a5);
            let subsample = cfg.bootstrap.then_some(feature_subsample);
            let root = grow_classification(
                x,
                y,
                &idx,
                0,
                &tree_cfg,
                n_features,
                subsample,
                Some(&mut rng),
            );
            TreeModel {
                root,
                n_features,
                max_depth: cfg.max_depth,
            }
        })
        .collect();
    Ok(ForestModel {
        trees,
        tree_seeds,
        feature_subsample,
        n_features,
        config: *cfg,
    })
}

impl ForestModel {
    /// Out-of-bag accuracy: each example scored only by trees whose
    /// bootstrap draw missed it.
    pub fn oob_accuracy(&self, x: &[SparseVector], y: &[u8]) -> Result<f64> {
        let n = x.len();
        let mut votes = vec![(0.0f64, 0usize); n];
        for (tree, &seed) in self.trees.iter().zip(&self.tree_seeds) {
            let mut in_bag = vec![false; n];
            for i in bootstrap_indices(seed, n) {
                in_bag[i] = true;
            }
            for i in 0..n {
                if !in_bag[i] {
                    votes[i].0 += tree.predict_proba(&x[i])?;
                    votes[i].1 += 1;
                }
            }
        }
        let mut correct = 0usize;
        let mut scored = 0usize;
        for (i, &(sum, count)) in votes.iter().enumerate() {
            if count > 0 {
                scored += 1;
                let pred = u8::from(sum / count as f64 >= 0.5);
                if pred == y[i] {
                    correct += 1;
                }
            }
        }
        if scored == 0 {
            return Err(Error::EmptyInput("no out-of-bag examples".into()));
        }
        Ok(correct as f64 / scored as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "forest-v1")?;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.n_features,
            self.feature_subsample,
            self.config.n_trees,
            self.config.max_depth,
            self.config.min_leaf,
            self.config.seed,
            self.config.bootstrap,
            self.trees.len()
        )?;
        for seed in &self.tree_seeds {
            writeln!(f, "seed,{seed}")?;
        }
        for tree in &self.trees {
            super::tree::write_tree_body(&mut f, tree)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ForestModel> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let bad = |m: &str| Error::BadModelFile(m.to_string());
        if lines.next().transpose()?.as_deref() != Some("forest-v1") {
            return Err(bad("bad magic"));
        }
        let header = lines.next().transpose()?.ok_or_else(|| bad("missing header"))?;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 8 {
            return Err(bad("bad header"));
        }
        let n_features: usize = parts[0].parse().map_err(|_| bad("n_features"))?;
        let feature_subsample: usize = parts[1].parse().map_err(|_| bad("subsample"))?;
        let config = ForestConfig {
            n_trees: parts[2].parse().map_err(|_| bad("n_trees"))?,
            max_depth: parts[3].parse().map_err(|_| bad("max_depth"))?,
            min_leaf: parts[4].parse().map_err(|_| bad("min_leaf"))?,
            seed: parts[5].parse().map_err(|_| bad("seed"))?,
            bootstrap: parts[6].parse().map_err(|_| bad("bootstrap"))?,
        };
        let n_stored: usize = parts[7].parse().map_err(|_| bad("tree count"))?;
        let mut tree_seeds = Vec::with_capacity(n_stored);
        for _ in 0..n_stored {
            let line = lines.next().transpose()?.ok_or_else(|| bad("missing seed"))?;
            let (tag, val) = line.split_once(',').ok_or_else(|| bad("bad seed line"))?;
            if tag != "seed" {
                return Err(bad("bad seed line"));
            }
            tree_seeds.push(val.parse().map_err(|_| bad("seed value"))?);
        }
        let mut trees = Vec::with_capacity(n_stored);
        for _ in 0..n_stored {
            trees.push(super::tree::read_tree_body(&mut lines, n_features, config.max_depth)?);
        }
        Ok(ForestModel {
            trees,
            tree_seeds,
            feature_subsample,
            n_features,
            config,
        })
    }
}

// keep the unused import warning away when rayon is disabled
#[allow(unused)]
fn _node_type_check(n: &Node) -> bool {
    matches!(n, Node::Leaf { .. } | Node::Split { .. })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{train_tree, TreeConfig};

    fn sv(pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector(pairs.to_vec())
    }

    fn seeded_dataset(n: usize, seed: u64) -> (Vec<SparseVector>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<SparseVector> = (0..n)
            .map(|_| {
                let mut pairs = Vec::new();
                for j in 0..4 {
                    if rng.gen_bool(0.8) {
                        pairs.push((j, rng.gen_range(-1.0..1.0)));
                    }
                }
                sv(&pairs)
            })
            .collect();
        let y: Vec<u8> = x
            .iter()
            .map(|v| u8::from(v.get(0) + 0.5 * v.get(1) - 0.3 * v.get(2) > 0.0))
            .collect();
        (x, y)
    }

    #[test]
    fn degenerate_single_tree_equals_train_tree() {
        let (x, y) = seeded_dataset(30, 2);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_depth: 5,
            ..Default::default()
        };
        let forest = train_forest(&x, &y, 4, &cfg).unwrap();
        let tree = train_tree(&x, &y, 4, &TreeConfig { max_depth: 5, min_leaf: 1 }).unwrap();
        for xi in &x {
            assert_eq!(
                forest.predict_proba(xi).unwrap(),
                tree.predict_proba(xi).unwrap()
            );
        }
    }

    #[test]
    fn identical_seed_gives_bit_identical_model() {
        let (x, y) = seeded_dataset(60, 3);
        let cfg = ForestConfig { n_trees: 10, seed: 99, ..Default::default() };
        let a = train_forest(&x, &y, 4, &cfg).unwrap();
        let b = train_forest(&x, &y, 4, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_probability_contract() {
        let t = |p1: f64| TreeModel {
            root: Node::Leaf { p0: 1.0 - p1, p1 },
            n_features: 1,
            max_depth: 1,
        };
        let forest = ForestModel {
            trees: vec![t(0.2), t(0.6)],
            tree_seeds: vec![0, 1],
            feature_subsample: 1,
            n_features: 1,
            config: ForestConfig::default(),
        };
        assert!((forest.predict_proba(&sv(&[])).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn oob_accuracy_close_to_cv_accuracy() {
        let (x, y) = seeded_dataset(100, 7);
        let cfg = ForestConfig { n_trees: 60, max_depth: 6, seed: 5, ..Default::default() };
        let forest = train_forest(&x, &y, 4, &cfg).unwrap();
        let oob = forest.oob_accuracy(&x, &y).unwrap();

        // 5-fold CV oracle
        let folds = crate::baselines::stratified_folds(&y, 5, 5).unwrap();
        let mut correct = 0usize;
        for held in 0..5 {
            let train_idx: Vec<usize> = (0..x.len()).filter(|i| folds[*i] != held).collect();
            let xt: Vec<SparseVector> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
            let m = train_forest(&xt, &yt, 4, &cfg).unwrap();
            for i in (0..x.len()).filter(|i| folds[*i] == held) {
                if m.predict(&x[i]).unwrap() == y[i] {
                    correct += 1;
                }
            }
        }
        let cv = correct as f64 / x.len() as f64;
        assert!(
            (oob - cv).abs() <= 0.05,
            "oob {oob} vs cv {cv}"
        );
    }

    #[test]
    fn save_load_roundtrip() {
        let (x, y) = seeded_dataset(40, 11);
        let cfg = ForestConfig { n_trees: 5, max_depth: 4, seed: 1, ..Default::default() };
        let m = train_forest(&x, &y, 4, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.forest");
        m.save(&p).unwrap();
        assert_eq!(ForestModel::load(&p).unwrap(), m);
    }
}
