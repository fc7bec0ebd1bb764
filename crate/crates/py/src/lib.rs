//! Python bindings for the inflacast pipeline: trend labeling, tf-idf,
//! the four baseline classifiers, the transformer encoder, macro metrics,
//! and Shapley attributions.

use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use inflacast_core::attribution::{
    attribution_words, encoder_value, shapley_exact, shapley_sampled, tfidf_value, ExplainConfig,
    ValueSpace,
};
use inflacast_core::baselines::{
    train_forest, train_gbm, train_logreg, train_tree, Classifier, ForestConfig, ForestModel,
    GbmConfig, GbmModel, LogRegConfig, LogRegModel, TreeConfig, TreeModel,
};
use inflacast_core::corpus::{filter_groups, FilterConfig, GroupRecord};
use inflacast_core::encoder::{
    train as train_encoder, train_tokenizer, EncoderConfig, EncoderModel, SubwordTokenizer,
    TrainConfig,
};
use inflacast_core::evalkit::{metrics as eval_metrics, confusion, split as eval_split};
use inflacast_core::labeler::{label_series, ExtremaConfig, ExtremaKind, InflationSeries};
use inflacast_core::month::Month;
use inflacast_core::vectorizer::{fit as fit_tfidf, SparseVector, TfidfConfig, TfidfModel};

fn err(e: inflacast_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Lowercase and collapse whitespace, the shared text normalization.
#[pyfunction]
fn normalize(text: &str) -> String {
    inflacast_core::encoder::normalize(text)
}

fn series(start_month: &str, values: Vec<f64>) -> PyResult<InflationSeries> {
    Ok(InflationSeries {
        start_month: Month::from_str(start_month).map_err(err)?,
        values,
    })
}

/// Smoothed extrema of a monthly series: list of (index, month, kind) with
/// kind "min" or "max".
#[pyfunction]
#[pyo3(signature = (start_month, values, order=1, merge_window_months=3))]
fn find_breakpoints(
    start_month: &str,
    values: Vec<f64>,
    order: usize,
    merge_window_months: usize,
) -> PyResult<Vec<(usize, String, String)>> {
    let s = series(start_month, values)?;
    let cfg = ExtremaConfig {
        order,
        merge_window_months,
    };
    let bps = inflacast_core::labeler::find_breakpoints(&s, &cfg).map_err(err)?;
    Ok(bps
        .iter()
        .map(|b| {
            let kind = match b.kind {
                ExtremaKind::Minimum => "min",
                ExtremaKind::Maximum => "max",
            };
            (b.index, s.month_at(b.index).to_string(), kind.to_string())
        })
        .collect())
}

/// Per-month trend labels (1 = inflation rising, 0 = falling).
#[pyfunction]
#[pyo3(signature = (start_month, values, order=1, merge_window_months=3))]
fn label_months(
    start_month: &str,
    values: Vec<f64>,
    order: usize,
    merge_window_months: usize,
) -> PyResult<Vec<(String, u8)>> {
    let s = series(start_month, values)?;
    let cfg = ExtremaConfig {
        order,
        merge_window_months,
    };
    let tl = label_series(&s, &cfg).map_err(err)?;
    Ok(tl
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (s.month_at(i).to_string(), l))
        .collect())
}

/// Apply the member-count and regional-share filters. Groups are
/// (group_id, total_members, regional_members) triples; returns the
/// surviving group ids in input order.
#[pyfunction]
#[pyo3(signature = (groups, min_members=2000, min_share_pct=20.0))]
fn filter_group_ids(
    groups: Vec<(String, u64, u64)>,
    min_members: u64,
    min_share_pct: f64,
) -> PyResult<Vec<String>> {
    let records: Vec<GroupRecord> = groups
        .into_iter()
        .map(|(group_id, total_members, regional_members)| GroupRecord {
            group_id,
            total_members,
            regional_members,
            available: true,
        })
        .collect();
    let cfg = FilterConfig {
        min_members,
        min_share_pct,
    };
    cfg.validate().map_err(err)?;
    Ok(filter_groups(&records, &cfg)
        .into_iter()
        .map(|g| g.group_id)
        .collect())
}

/// Stratified 60/20/20 split: (train, validation, test) index lists.
#[pyfunction]
fn split(labels: Vec<u8>, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let s = eval_split(&labels, seed).map_err(err)?;
    Ok((s.train, s.validation, s.test))
}

/// Macro-averaged metrics as a dict with per-class and macro entries.
#[pyfunction]
fn metrics(py: Python<'_>, y_true: Vec<u8>, y_pred: Vec<u8>) -> PyResult<Py<PyAny>> {
    let cm = confusion(&y_true, &y_pred).map_err(err)?;
    let r = eval_metrics(&cm);
    let d = pyo3::types::PyDict::new(py);
    for (name, c) in [("class1", r.class1), ("class0", r.class0)] {
        let sub = pyo3::types::PyDict::new(py);
        sub.set_item("precision", c.precision)?;
        sub.set_item("recall", c.recall)?;
        sub.set_item("f1", c.f1)?;
        d.set_item(name, sub)?;
    }
    d.set_item("macro_precision", r.macro_precision)?;
    d.set_item("macro_recall", r.macro_recall)?;
    d.set_item("macro_f1", r.macro_f1)?;
    Ok(d.into_any().unbind())
}

enum Fitted {
    LogReg(LogRegModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Gbm(GbmModel),
}

/// A tf-idf bag-of-words classifier: "logreg", "tree", "forest", or "gbm".
#[pyclass]
struct BaselineModel {
    tfidf: TfidfModel,
    fitted: Fitted,
}

#[pymethods]
impl BaselineModel {
    #[staticmethod]
    #[pyo3(signature = (kind, texts, labels, seed=0))]
    fn fit(kind: &str, texts: Vec<String>, labels: Vec<u8>, seed: u64) -> PyResult<Self> {
        let tfidf = fit_tfidf(&texts, &TfidfConfig::default()).map_err(err)?;
        let xs: Vec<SparseVector> = texts.iter().map(|t| tfidf.transform(t)).collect();
        let nf = tfidf.vocab_size();
        let fitted = match kind {
            "logreg" => Fitted::LogReg(
                train_logreg(&xs, &labels, nf, &LogRegConfig::default()).map_err(err)?,
            ),
            "tree" => {
                Fitted::Tree(train_tree(&xs, &labels, nf, &TreeConfig::default()).map_err(err)?)
            }
            "forest" => Fitted::Forest(
                train_forest(
                    &xs,
                    &labels,
                    nf,
                    &ForestConfig {
                        seed,
                        ..ForestConfig::default()
                    },
                )
                .map_err(err)?,
            ),
            "gbm" => Fitted::Gbm(
                train_gbm(&xs, &labels, nf, &GbmConfig::default())
                    .map_err(err)?
                    .model,
            ),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown model kind: {other} (expected logreg|tree|forest|gbm)"
                )))
            }
        };
        Ok(BaselineModel { tfidf, fitted })
    }

    fn predict_proba(&self, text: &str) -> PyResult<f64> {
        let x = self.tfidf.transform(text);
        match &self.fitted {
            Fitted::LogReg(m) => m.predict_proba(&x),
            Fitted::Tree(m) => m.predict_proba(&x),
            Fitted::Forest(m) => m.predict_proba(&x),
            Fitted::Gbm(m) => m.predict_proba(&x),
        }
        .map_err(err)
    }

    fn vocab_size(&self) -> usize {
        self.tfidf.vocab_size()
    }

    /// Shapley attribution of one text: (tokens, phi, base_value, fx).
    #[pyo3(signature = (text, n_permutations=2000, seed=0))]
    fn explain(
        &self,
        text: &str,
        n_permutations: usize,
        seed: u64,
    ) -> PyResult<(Vec<String>, Vec<f64>, f64, f64)> {
        let tokens = inflacast_core::vectorizer::tokenize_with(text, &self.tfidf.config);
        let value = |mask: &[bool]| -> inflacast_core::Result<f64> {
            match &self.fitted {
                Fitted::LogReg(m) => {
                    tfidf_value(m, &self.tfidf, &tokens, mask, ValueSpace::Probability)
                }
                Fitted::Tree(m) => {
                    tfidf_value(m, &self.tfidf, &tokens, mask, ValueSpace::Probability)
                }
                Fitted::Forest(m) => {
                    tfidf_value(m, &self.tfidf, &tokens, mask, ValueSpace::Probability)
                }
                Fitted::Gbm(m) => {
                    tfidf_value(m, &self.tfidf, &tokens, mask, ValueSpace::Probability)
                }
            }
        };
        let cfg = ExplainConfig {
            n_permutations,
            seed,
            ..ExplainConfig::default()
        };
        let a = if tokens.len() <= cfg.exact_max_tokens {
            shapley_exact(&tokens, value, cfg.exact_max_tokens)
        } else {
            shapley_sampled(&tokens, value, &cfg)
        }
        .map_err(err)?;
        Ok((a.tokens, a.phi, a.base_value, a.fx))
    }
}

/// The subword transformer classifier, trained from scratch.
#[pyclass]
struct Encoder {
    model: EncoderModel,
    tokenizer: SubwordTokenizer,
}

#[pymethods]
impl Encoder {
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (texts, labels, vocab_size=800, max_len=64, d_model=32, n_heads=4,
                        n_layers=2, d_ff=64, dropout=0.1, epochs=5, learning_rate=1e-3,
                        batch_size=32, seed=0))]
    fn fit(
        texts: Vec<String>,
        labels: Vec<u8>,
        vocab_size: usize,
        max_len: usize,
        d_model: usize,
        n_heads: usize,
        n_layers: usize,
        d_ff: usize,
        dropout: f64,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let tokenizer = train_tokenizer(&texts, vocab_size).map_err(err)?;
        let cfg = EncoderConfig {
            vocab_size: tokenizer.vocab_size(),
            max_len,
            d_model,
            n_heads,
            n_layers,
            d_ff,
            dropout,
            allow_custom_max_len: false,
        };
        let mut model = EncoderModel::new(cfg, seed).map_err(err)?;
        let encoded: Vec<(Vec<usize>, Vec<u8>)> =
            texts.iter().map(|t| tokenizer.encode(t, max_len)).collect();
        let tc = TrainConfig {
            batch_size,
            epochs,
            learning_rate,
            seed,
            ..TrainConfig::default()
        };
        train_encoder(&mut model, &encoded, &labels, &encoded, &labels, &tc).map_err(err)?;
        Ok(Encoder { model, tokenizer })
    }

    fn predict_proba(&self, text: &str) -> PyResult<f64> {
        let (ids, mask) = self.tokenizer.encode(text, self.model.config.max_len);
        self.model.predict_proba(&ids, &mask).map_err(err)
    }

    /// Shapley attribution over whole words: (tokens, phi, base_value, fx).
    #[pyo3(signature = (text, n_permutations=2000, seed=0))]
    fn explain(
        &self,
        text: &str,
        n_permutations: usize,
        seed: u64,
    ) -> PyResult<(Vec<String>, Vec<f64>, f64, f64)> {
        let tokens = attribution_words(text);
        let value = |mask: &[bool]| {
            encoder_value(&self.model, &self.tokenizer, &tokens, mask, ValueSpace::Probability)
        };
        let cfg = ExplainConfig {
            n_permutations,
            seed,
            ..ExplainConfig::default()
        };
        let a = if tokens.len() <= cfg.exact_max_tokens {
            shapley_exact(&tokens, value, cfg.exact_max_tokens)
        } else {
            shapley_sampled(&tokens, value, &cfg)
        }
        .map_err(err)?;
        Ok((a.tokens, a.phi, a.base_value, a.fx))
    }
}

#[pymodule]
fn inflacast(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(find_breakpoints, m)?)?;
    m.add_function(wrap_pyfunction!(label_months, m)?)?;
    m.add_function(wrap_pyfunction!(filter_group_ids, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_class::<BaselineModel>()?;
    m.add_class::<Encoder>()?;
    Ok(())
}
