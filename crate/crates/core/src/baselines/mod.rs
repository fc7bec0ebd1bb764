//! From-scratch benchmark classifiers over TF-IDF vectors.

mod forest;
mod gbm;
mod grid;
mod logreg;
mod tree;

pub use forest::{bootstrap_indices, train_forest, ForestConfig, ForestModel};
pub use gbm::{train_gbm, GbmConfig, GbmModel};
pub use grid::{grid_search, stratified_folds, GridResult};
pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use tree::{
    train_regression_tree, train_tree, Node, RegNode, RegressionTree, TreeConfig, TreeModel,
};

use crate::error::Result;
use crate::vectorizer::SparseVector;

/// Uniform prediction surface for the four model families.
pub trait Classifier {
    fn n_features(&self) -> usize;

    /// Probability of class 1.
    fn predict_proba(&self, x: &SparseVector) -> Result<f64>;

    fn predict(&self, x: &SparseVector) -> Result<u8> {
        Ok(if self.predict_proba(x)? >= 0.5 { 1 } else { 0 })
    }
}

pub(crate) fn check_dims(n_features: usize, x: &SparseVector) -> Result<()> {
    if let Some((max_idx, _)) = x.0.last() {
        if *max_idx >= n_features {
            return Err(crate::error::Error::DimensionMismatch {
                expected: n_features,
                got: max_idx + 1,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_two_classes(y: &[u8]) -> Result<()> {
    if y.iter().any(|&l| l == 0) && y.iter().any(|&l| l == 1) {
        Ok(())
    } else {
        Err(crate::error::Error::SingleClass)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow
pub(crate) fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
