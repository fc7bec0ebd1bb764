//! Stratified k-fold grid search scored by macro-F1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Classifier;
use crate::error::{Error, Result};
use crate::evalkit;
use crate::vectorizer::SparseVector;

/// Seeded stratified fold assignment: per-class shuffle, then round-robin.
/// Returns a fold id per example.
pub fn stratified_folds(y: &[u8], k_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if k_folds < 2 {
        return Err(Error::InvalidConfig("k_folds must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; y.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = y
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            folds[i] = pos % k_folds;
        }
    }
    // every validation fold must contain both classes
    for fold in 0..k_folds {
        let mut has = [false; 2];
        for (i, &f) in folds.iter().enumerate() {
            if f == fold {
                has[y[i] as usize] = true;
            }
        }
        if !has[0] || !has[1] {
            return Err(Error::DegenerateFold);
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult<P> {
    pub best_params: P,
    pub best_index: usize,
    /// per-cell, per-fold macro-F1
    pub fold_scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
}

/// Evaluate each grid cell with stratified k-fold macro-F1; the best cell is
/// the highest mean score, ties by first-listed order.
pub fn grid_search<P, M, F>(
    trainer: F,
    grid: &[P],
    x: &[SparseVector],
    y: &[u8],
    k_folds: usize,
    seed: u64,
) -> Result<GridResult<P>>
where
    P: Clone,
    M: Classifier,
    F: Fn(&P, &[SparseVector], &[u8]) -> Result<M>,
{
    if grid.is_empty() {
        return Err(Error::EmptyInput("parameter grid".into()));
    }
    let folds = stratified_folds(y, k_folds, seed)?;
    let mut fold_scores = Vec::with_capacity(grid.len());
    for params in grid {
        let mut scores = Vec::with_capacity(k_folds);
        for fold in 0..k_folds {
            let train_idx: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != fold).collect();
            let val_idx: Vec<usize> = (0..x.len()).filter(|&i| folds[i] == fold).collect();
            let xt: Vec<SparseVector> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
            let model = trainer(params, &xt, &yt)?;
            let y_true: Vec<u8> = val_idx.iter().map(|&i| y[i]).collect();
            let y_pred: Vec<u8> = val_idx
                .iter()
                .map(|&i| model.predict(&x[i]))
                .collect::<Result<_>>()?;
            scores.push(evalkit::macro_f1(&y_true, &y_pred)?);
        }
        fold_scores.push(scores);
    }
    let mean_scores: Vec<f64> = fold_scores
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    let best_index = mean_scores
        .iter()
        .enumerate()
        .fold(0usize, |best, (i, &score)| {
            if score > mean_scores[best] {
                i
            } else {
                best
            }
        });
    Ok(GridResult {
        best_params: grid[best_index].clone(),
        best_index,
        fold_scores,
        mean_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{train_logreg, train_tree, LogRegConfig, TreeConfig};
    use rand::{Rng, SeedableRng};

    fn sv(pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector(pairs.to_vec())
    }

    fn seeded_dataset(n: usize, seed: u64) -> (Vec<SparseVector>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<SparseVector> = (0..n)
            .map(|_| sv(&[(0, rng.gen_range(-1.0..1.0)), (1, rng.gen_range(-1.0..1.0))]))
            .collect();
        let y: Vec<u8> = x.iter().map(|v| u8::from(v.get(0) > 0.1)).collect();
        (x, y)
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let y: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let a = stratified_folds(&y, 5, 3).unwrap();
        let b = stratified_folds(&y, 5, 3).unwrap();
        assert_eq!(a, b);
        for fold in 0..5 {
            let ones = (0..50).filter(|&i| a[i] == fold && y[i] == 1).count();
            assert_eq!(ones, 5);
        }
    }

    #[test]
    fn degenerate_fold_errors() {
        // class 1 has 2 members, 5 folds: some fold has no class-1 example
        let y = vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_folds(&y, 5, 0),
            Err(Error::DegenerateFold)
        ));
    }

    #[test]
    fn single_cell_grid_returns_it() {
        let (x, y) = seeded_dataset(40, 1);
        let r = grid_search(
            |cfg: &LogRegConfig, xt, yt| train_logreg(xt, yt, 2, cfg),
            &[LogRegConfig::default()],
            &x,
            &y,
            5,
            0,
        )
        .unwrap();
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn dominant_cell_wins() {
        let (x, y) = seeded_dataset(60, 2);
        // a depth-0 stump cannot split; a real tree dominates on every fold
        let grid = vec![
            TreeConfig { max_depth: 0, min_leaf: 1 },
            TreeConfig { max_depth: 4, min_leaf: 1 },
        ];
        let r = grid_search(
            |cfg: &TreeConfig, xt, yt| train_tree(xt, yt, 2, cfg),
            &grid,
            &x,
            &y,
            5,
            0,
        )
        .unwrap();
        assert_eq!(r.best_index, 1);
        for fold in 0..5 {
            assert!(r.fold_scores[1][fold] >= r.fold_scores[0][fold]);
        }
    }

    #[test]
    fn mean_scores_match_manual_cv_oracle() {
        let (x, y) = seeded_dataset(50, 3);
        let grid = vec![
            LogRegConfig { c: 0.1, ..Default::default() },
            LogRegConfig { c: 1.0, ..Default::default() },
            LogRegConfig { c: 10.0, ..Default::default() },
        ];
        let r = grid_search(
            |cfg: &LogRegConfig, xt, yt| train_logreg(xt, yt, 2, cfg),
            &grid,
            &x,
            &y,
            4,
            9,
        )
        .unwrap();

        // hand-rolled loop over the same folds calling evalkit directly
        let folds = stratified_folds(&y, 4, 9).unwrap();
        for (cell, cfg) in grid.iter().enumerate() {
            let mut total = 0.0;
            for fold in 0..4 {
                let ti: Vec<usize> = (0..x.len()).filter(|&i| folds[i] != fold).collect();
                let xt: Vec<SparseVector> = ti.iter().map(|&i| x[i].clone()).collect();
                let yt: Vec<u8> = ti.iter().map(|&i| y[i]).collect();
                let m = train_logreg(&xt, &yt, 2, cfg).unwrap();
                let vi: Vec<usize> = (0..x.len()).filter(|&i| folds[i] == fold).collect();
                let yv: Vec<u8> = vi.iter().map(|&i| y[i]).collect();
                let yp: Vec<u8> = vi.iter().map(|&i| m.predict(&x[i]).unwrap()).collect();
                total += evalkit::macro_f1(&yv, &yp).unwrap();
            }
            assert!((r.mean_scores[cell] - total / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_first_listed() {
        let (x, y) = seeded_dataset(40, 4);
        let grid = vec![LogRegConfig::default(), LogRegConfig::default()];
        let r = grid_search(
            |cfg: &LogRegConfig, xt, yt| train_logreg(xt, yt, 2, cfg),
            &grid,
            &x,
            &y,
            4,
            0,
        )
        .unwrap();
        assert_eq!(r.best_index, 0);
    }
}
