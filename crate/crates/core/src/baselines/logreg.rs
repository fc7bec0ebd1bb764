//! Binary logistic regression trained by full-batch gradient descent with
//! backtracking line search. Objective: summed log-loss + (1/(2C))‖w‖²,
//! bias unpenalized.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{check_dims, check_two_classes, log1p_exp, sigmoid, Classifier};
use crate::error::{Error, Result};
use crate::vectorizer::{hex_f64, parse_hex_f64, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogRegConfig {
    /// inverse regularization strength
    pub c: f64,
    pub max_iter: usize,
    /// stop when the gradient infinity norm drops below this
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 1.0,
            max_iter: 1000,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub max_iter: usize,
}

impl Classifier for LogRegModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        check_dims(self.weights.len(), x)?;
        Ok(sigmoid(self.decision(x)))
    }
}

impl LogRegModel {
    /// Raw logit w·x + b.
    pub fn decision(&self, x: &SparseVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "logreg-v1")?;
        writeln!(f, "{},{},{},{}", self.weights.len(), hex_f64(self.c), self.max_iter, hex_f64(self.bias))?;
        for w in &self.weights {
            writeln!(f, "{}", hex_f64(*w))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LogRegModel> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let bad = |m: &str| Error::BadModelFile(m.to_string());
        if lines.next().transpose()?.as_deref() != Some("logreg-v1") {
            return Err(bad("bad magic"));
        }
        let header = lines.next().transpose()?.ok_or_else(|| bad("missing header"))?;
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 4 {
            return Err(bad("bad header"));
        }
        let n: usize = parts[0].parse().map_err(|_| bad("n_features"))?;
        let c = parse_hex_f64(parts[1]).ok_or_else(|| bad("c"))?;
        let max_iter: usize = parts[2].parse().map_err(|_| bad("max_iter"))?;
        let bias = parse_hex_f64(parts[3]).ok_or_else(|| bad("bias"))?;
        let mut weights = Vec::with_capacity(n);
        for line in lines.take(n) {
            weights.push(parse_hex_f64(&line?).ok_or_else(|| bad("weight"))?);
        }
        if weights.len() != n {
            return Err(bad("truncated weights"));
        }
        Ok(LogRegModel {
            weights,
            bias,
            c,
            max_iter,
        })
    }
}

pub(crate) fn objective(
    x: &[SparseVector],
    y: &[u8],
    w: &[f64],
    b: f64,
    c: f64,
) -> f64 {
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z = xi.dot_dense(w) + b;
        // -(y ln p + (1-y) ln(1-p)) = log(1+e^z) - y z
        loss += log1p_exp(z) - yi as f64 * z;
    }
    loss + w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c)
}

fn gradient(
    x: &[SparseVector],
    y: &[u8],
    w: &[f64],
    b: f64,
    c: f64,
) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let err = sigmoid(xi.dot_dense(w) + b) - yi as f64;
        for (j, v) in &xi.0 {
            gw[*j] += err * v;
        }
        gb += err;
    }
    for (gj, wj) in gw.iter_mut().zip(w) {
        *gj += wj / c;
    }
    (gw, gb)
}

pub fn train_logreg(
    x: &[SparseVector],
    y: &[u8],
    n_features: usize,
    cfg: &LogRegConfig,
) -> Result<LogRegModel> {
    if x.is_empty() {
        return Err(Error::EmptyInput("logreg training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    check_two_classes(y)?;
    for xi in x {
        check_dims(n_features, xi)?;
    }

    let mut w = vec![0.0; n_features];
    let mut b = 0.0;
    let mut f_cur = objective(x, y, &w, b, cfg.c);
    for _ in 0..cfg.max_iter {
        let (gw, gb) = gradient(x, y, &w, b, cfg.c);
        let ginf = gw
            .iter()
            .chain(std::iter::once(&gb))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if ginf <= cfg.tol {
            break;
        }
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;

        // backtracking line search, Armijo condition
        let mut step = 1.0;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let b_new = b - step * gb;
            let f_new = objective(x, y, &w_new, b_new, cfg.c);
            if f_new <= f_cur - 1e-4 * step * gnorm2 || step < 1e-12 {
                w = w_new;
                b = b_new;
                f_cur = f_new;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(LogRegModel {
        weights: w,
        bias: b,
        c: cfg.c,
        max_iter: cfg.max_iter,
    })
}
