//! Subcommand implementations. Every command is deterministic given the
//! resolved config and seed; timestamps go only to the run log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use inflacast_core::attribution::{
    self, encoder_value, shapley_exact, shapley_sampled, tfidf_value, Attribution, ValueSpace,
};
use inflacast_core::baselines::{
    train_forest, train_gbm, train_logreg, train_tree, Classifier, ForestModel, GbmModel,
    LogRegModel, TreeModel,
};
use inflacast_core::corpus::{
    filter_groups, ingest_posts, read_groups_csv, robustness_sweep, share_histogram,
    write_groups_csv, write_histogram_csv, write_sweep_csv, IngestOptions, PostRecord,
};
use inflacast_core::encoder::{
    train as train_encoder, train_tokenizer, EncoderModel, SubwordTokenizer,
};
use inflacast_core::evalkit::{confusion, metrics, split, MetricsReport};
use inflacast_core::fixtures;
use inflacast_core::labeler::{label_posts, label_series, read_series_csv, write_breakpoints_csv, write_labeling_csv};
use inflacast_core::month::Month;
use inflacast_core::svg;
use inflacast_core::vectorizer::{fit as fit_tfidf, tokenize_with, TfidfModel};

use crate::config::PipelineConfig;
use crate::CliError;

/// Append-only run log; the only output file allowed to carry timestamps.
pub struct RunLog {
    file: std::cell::RefCell<File>,
}

impl RunLog {
    pub fn open(out_dir: &Path) -> Result<RunLog, CliError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(out_dir.join("run.log"))
            .map_err(|e| CliError::runtime(format!("cannot open run log: {e}")))?;
        Ok(RunLog {
            file: std::cell::RefCell::new(file),
        })
    }

    pub fn line(&self, message: &str) {
        let ts = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let _ = writeln!(self.file.borrow_mut(), "[{ts}] {message}");
    }
}

// ---- filter-groups ----

pub fn cmd_filter_groups(cfg: &PipelineConfig, out: &Path, log: &RunLog) -> Result<(), CliError> {
    let groups_path = cfg.require_path("groups")?;
    let groups = read_groups_csv(groups_path)?;
    cfg.filter.validate()?;
    let kept = filter_groups(&groups, &cfg.filter);
    write_groups_csv(&out.join("filtered_groups.csv"), &kept)?;

    let hist = share_histogram(&groups, 100, false);
    write_histogram_csv(&out.join("share_histogram.csv"), &hist)?;
    let counts: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    svg::write_bar_chart(&out.join("share_histogram.svg"), "regional share, %", &counts)?;

    let log_hist = share_histogram(&groups, 100, true);
    write_histogram_csv(&out.join("share_histogram_log.csv"), &log_hist)?;
    svg::write_bar_chart(
        &out.join("share_histogram_log.svg"),
        "regional share, % (log10 counts)",
        &log_hist.log_counts,
    )?;

    let sweep = robustness_sweep(&groups, &cfg.filter, 500, 5000, 10);
    write_sweep_csv(&out.join("threshold_sweep.csv"), &sweep)?;
    let survivors: Vec<f64> = sweep.rows.iter().map(|r| r.surviving_count as f64).collect();
    svg::write_line_chart(
        &out.join("threshold_sweep.svg"),
        "surviving groups vs. member threshold",
        &[("surviving", &survivors)],
    )?;
    log.line(&format!(
        "filter-groups: {} of {} groups kept",
        kept.len(),
        groups.len()
    ));
    println!("kept {} of {} groups", kept.len(), groups.len());
    Ok(())
}

// ---- label ----

/// Labeled corpus line format shared between label/train/evaluate.
#[derive(serde::Serialize, serde::Deserialize)]
struct LabeledPost {
    post_id: String,
    group_id: String,
    text: String,
    month: String,
    label: u8,
}

fn write_labeled_posts(path: &Path, rows: &[(PostRecord, u8)]) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::runtime(e.to_string()))?;
    for (p, y) in rows {
        let line = serde_json::to_string(&LabeledPost {
            post_id: p.post_id.clone(),
            group_id: p.group_id.clone(),
            text: p.text.clone(),
            month: p.month.to_string(),
            label: *y,
        })
        .map_err(|e| CliError::runtime(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| CliError::runtime(e.to_string()))?;
    }
    Ok(())
}

fn read_labeled_posts(path: &Path) -> Result<(Vec<String>, Vec<u8>, Vec<String>), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!(
            "labeled corpus not found: {} (run `label` first)",
            path.display()
        )));
    }
    let reader = BufReader::new(File::open(path).map_err(|e| CliError::runtime(e.to_string()))?);
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| CliError::runtime(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LabeledPost = serde_json::from_str(&line)
            .map_err(|e| CliError::runtime(format!("bad labeled corpus line: {e}")))?;
        texts.push(row.text);
        labels.push(row.label);
        ids.push(row.post_id);
    }
    Ok((texts, labels, ids))
}

pub fn cmd_label(cfg: &PipelineConfig, out: &Path, log: &RunLog) -> Result<(), CliError> {
    let series_path = cfg.require_path("series")?;
    let posts_path = cfg.require_path("posts")?;
    let series = read_series_csv(series_path)?;
    let labeling = label_series(&series, &cfg.extrema)?;
    let posts = ingest_posts(posts_path, &IngestOptions::default())?;
    let labeled = label_posts(&posts, &labeling)?;
    write_labeled_posts(&out.join("labeled_posts.jsonl"), &labeled)?;
    write_labeling_csv(&out.join("month_labels.csv"), &labeling)?;
    write_breakpoints_csv(&out.join("breakpoints.csv"), &labeling.breakpoints)?;
    let n1 = labeled.iter().filter(|(_, y)| *y == 1).count();
    log.line(&format!(
        "label: {} posts, {} breakpoints, class-1 share {:.1}%",
        labeled.len(),
        labeling.breakpoints.len(),
        100.0 * n1 as f64 / labeled.len().max(1) as f64
    ));
    println!(
        "labeled {} posts across {} breakpoints",
        labeled.len(),
        labeling.breakpoints.len()
    );
    Ok(())
}

// ---- train ----

fn write_predictions(
    path: &Path,
    ids: &[String],
    y_true: &[u8],
    proba: &[f64],
) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(f, "post_id,y_true,proba,y_pred").map_err(|e| CliError::runtime(e.to_string()))?;
    for ((id, y), p) in ids.iter().zip(y_true).zip(proba) {
        let pred = u8::from(*p >= 0.5);
        writeln!(f, "{id},{y},{p},{pred}").map_err(|e| CliError::runtime(e.to_string()))?;
    }
    Ok(())
}

fn report_from_proba(y_true: &[u8], proba: &[f64]) -> Result<MetricsReport, CliError> {
    let pred: Vec<u8> = proba.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Ok(metrics(&confusion(y_true, &pred)?))
}

pub const MODEL_NAMES: [&str; 8] = [
    "logreg",
    "tree",
    "forest",
    "gbm",
    "encoder-64",
    "encoder-128",
    "encoder-256",
    "encoder-512",
];

pub fn cmd_train(
    cfg: &PipelineConfig,
    out: &Path,
    model_name: &str,
    log: &RunLog,
) -> Result<(), CliError> {
    if !MODEL_NAMES.contains(&model_name) {
        return Err(CliError::usage(format!(
            "unknown model `{model_name}`; expected one of {}",
            MODEL_NAMES.join(", ")
        )));
    }
    let (texts, labels, ids) = read_labeled_posts(&out.join("labeled_posts.jsonl"))?;
    let sp = split(&labels, cfg.seed)?;
    let started = Instant::now();
    let pick = |idx: &[usize]| -> (Vec<String>, Vec<u8>, Vec<String>) {
        (
            idx.iter().map(|&i| texts[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
            idx.iter().map(|&i| ids[i].clone()).collect(),
        )
    };
    let (train_x, train_y, _) = pick(&sp.train);
    let (val_x, val_y, _) = pick(&sp.validation);
    let (test_x, test_y, test_ids) = pick(&sp.test);

    let model_path = out.join(format!("{model_name}.model"));
    let test_proba: Vec<f64> = if let Some(max_len) = model_name.strip_prefix("encoder-") {
        let max_len: usize = max_len.parse().expect("name list is fixed");
        let tokenizer = train_tokenizer(&train_x, cfg.encoder.vocab_size)?;
        let enc_cfg = inflacast_core::encoder::EncoderConfig {
            vocab_size: tokenizer.vocab_size(),
            max_len,
            allow_custom_max_len: false,
            ..cfg.encoder.clone()
        };
        let encode_all = |xs: &[String]| -> Vec<(Vec<usize>, Vec<u8>)> {
            xs.iter().map(|t| tokenizer.encode(t, max_len)).collect()
        };
        let mut model = EncoderModel::new(enc_cfg, cfg.seed)?;
        let curve = train_encoder(
            &mut model,
            &encode_all(&train_x),
            &train_y,
            &encode_all(&val_x),
            &val_y,
            &cfg.train,
        )?;
        model.save(&model_path)?;
        tokenizer.save(&model_path.with_extension("model.bpe"))?;
        // Fig. 6 analogue: loss curves as data and rendering
        let curve_path = out.join(format!("{model_name}_loss_curve.csv"));
        let mut f = File::create(&curve_path).map_err(|e| CliError::runtime(e.to_string()))?;
        writeln!(f, "epoch,train_loss,val_loss").map_err(|e| CliError::runtime(e.to_string()))?;
        for (i, (t, v)) in curve.train.iter().zip(&curve.val).enumerate() {
            writeln!(f, "{},{},{}", i + 1, t, v).map_err(|e| CliError::runtime(e.to_string()))?;
        }
        svg::write_line_chart(
            &out.join(format!("{model_name}_loss_curve.svg")),
            "cross-entropy per epoch",
            &[("train", &curve.train), ("validation", &curve.val)],
        )?;
        encode_all(&test_x)
            .iter()
            .map(|(ids, mask)| model.predict_proba(ids, mask))
            .collect::<inflacast_core::Result<_>>()?
    } else {
        let tfidf = fit_tfidf(&train_x, &cfg.tfidf)?;
        let to_vec = |xs: &[String]| -> Vec<_> { xs.iter().map(|t| tfidf.transform(t)).collect() };
        let xtr = to_vec(&train_x);
        let xte = to_vec(&test_x);
        let nf = tfidf.vocab_size();
        let proba: Vec<f64> = match model_name {
            "logreg" => {
                let m = train_logreg(&xtr, &train_y, nf, &cfg.logreg)?;
                m.save(&model_path)?;
                xte.iter().map(|x| m.predict_proba(x)).collect::<inflacast_core::Result<_>>()?
            }
            "tree" => {
                let m = train_tree(&xtr, &train_y, nf, &cfg.tree)?;
                m.save(&model_path)?;
                xte.iter().map(|x| m.predict_proba(x)).collect::<inflacast_core::Result<_>>()?
            }
            "forest" => {
                let forest_cfg = inflacast_core::baselines::ForestConfig {
                    seed: cfg.seed,
                    ..cfg.forest
                };
                let m = train_forest(&xtr, &train_y, nf, &forest_cfg)?;
                m.save(&model_path)?;
                xte.iter().map(|x| m.predict_proba(x)).collect::<inflacast_core::Result<_>>()?
            }
            "gbm" => {
                let o = train_gbm(&xtr, &train_y, nf, &cfg.gbm)?;
                o.model.save(&model_path)?;
                let curve_path = out.join("gbm_staged_loss.csv");
                let mut f =
                    File::create(&curve_path).map_err(|e| CliError::runtime(e.to_string()))?;
                writeln!(f, "stage,train_loss").map_err(|e| CliError::runtime(e.to_string()))?;
                for (i, l) in o.staged_loss.iter().enumerate() {
                    writeln!(f, "{i},{l}").map_err(|e| CliError::runtime(e.to_string()))?;
                }
                xte.iter()
                    .map(|x| o.model.predict_proba(x))
                    .collect::<inflacast_core::Result<_>>()?
            }
            _ => unreachable!("names checked above"),
        };
        tfidf.save(&model_path.with_extension("model.tfidf"))?;
        proba
    };

    let report = report_from_proba(&test_y, &test_proba)?;
    write_predictions(
        &out.join(format!("{model_name}_predictions.csv")),
        &test_ids,
        &test_y,
        &test_proba,
    )?;
    inflacast_core::evalkit::write_metrics_csv(
        &out.join(format!("{model_name}_metrics.csv")),
        &[(model_name.to_string(), report)],
    )?;
    log.line(&format!(
        "train {model_name}: {:.3}s wall, test macro-F1 {:.4}",
        started.elapsed().as_secs_f64(),
        report.macro_f1
    ));
    println!(
        "{model_name}: test macro-F1 {:.4} (recall {:.4}, precision {:.4})",
        report.macro_f1, report.macro_recall, report.macro_precision
    );
    Ok(())
}

// ---- evaluate / explain ----

pub enum LoadedModel {
    LogReg(LogRegModel, TfidfModel),
    Tree(TreeModel, TfidfModel),
    Forest(ForestModel, TfidfModel),
    Gbm(GbmModel, TfidfModel),
    Encoder(Box<EncoderModel>, SubwordTokenizer),
}

impl LoadedModel {
    pub fn predict_proba(&self, text: &str) -> Result<f64, CliError> {
        Ok(match self {
            LoadedModel::LogReg(m, v) => m.predict_proba(&v.transform(text))?,
            LoadedModel::Tree(m, v) => m.predict_proba(&v.transform(text))?,
            LoadedModel::Forest(m, v) => m.predict_proba(&v.transform(text))?,
            LoadedModel::Gbm(m, v) => m.predict_proba(&v.transform(text))?,
            LoadedModel::Encoder(m, tok) => {
                let (ids, mask) = tok.encode(text, m.config.max_len);
                m.predict_proba(&ids, &mask)?
            }
        })
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("model file not found: {}", path.display())));
    }
    let magic = {
        let mut reader = BufReader::new(File::open(path).map_err(|e| CliError::runtime(e.to_string()))?);
        let mut line = String::new();
        reader
            .read_line(&mut line)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        line.trim().to_string()
    };
    let tfidf = |p: &Path| -> Result<TfidfModel, CliError> {
        let side = p.with_extension("model.tfidf");
        if !side.exists() {
            return Err(CliError::usage(format!(
                "vectorizer sidecar not found: {}",
                side.display()
            )));
        }
        Ok(TfidfModel::load(&side)?)
    };
    Ok(match magic.as_str() {
        "logreg-v1" => LoadedModel::LogReg(LogRegModel::load(path)?, tfidf(path)?),
        "tree-v1" => LoadedModel::Tree(TreeModel::load(path)?, tfidf(path)?),
        "forest-v1" => LoadedModel::Forest(ForestModel::load(path)?, tfidf(path)?),
        "gbm-v1" => LoadedModel::Gbm(GbmModel::load(path)?, tfidf(path)?),
        "encoder-ckpt-v1" => {
            let side = path.with_extension("model.bpe");
            if !side.exists() {
                return Err(CliError::usage(format!(
                    "tokenizer sidecar not found: {}",
                    side.display()
                )));
            }
            LoadedModel::Encoder(Box::new(EncoderModel::load(path)?), SubwordTokenizer::load(&side)?)
        }
        other => {
            return Err(CliError::usage(format!(
                "unrecognized model file {}: magic `{other}`",
                path.display()
            )))
        }
    })
}

fn model_display_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn cmd_evaluate(
    cfg: &PipelineConfig,
    out: &Path,
    model_paths: &[PathBuf],
    log: &RunLog,
) -> Result<(), CliError> {
    let (texts, labels, _) = read_labeled_posts(&out.join("labeled_posts.jsonl"))?;
    let sp = split(&labels, cfg.seed)?;
    let test_x: Vec<&String> = sp.test.iter().map(|&i| &texts[i]).collect();
    let test_y: Vec<u8> = sp.test.iter().map(|&i| labels[i]).collect();
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for path in model_paths {
        let model = load_model(path)?;
        let proba: Vec<f64> = test_x
            .iter()
            .map(|t| model.predict_proba(t))
            .collect::<Result<_, CliError>>()?;
        rows.push((model_display_name(path), report_from_proba(&test_y, &proba)?));
    }
    // Table 2 ordering: F1 descending; ties keep the argument order
    rows.sort_by(|(_, a), (_, b)| b.macro_f1.partial_cmp(&a.macro_f1).unwrap());
    inflacast_core::evalkit::write_metrics_csv(&out.join("metrics.csv"), &rows)?;
    println!("model,recall,precision,f1");
    for (name, r) in &rows {
        println!(
            "{name},{:.6},{:.6},{:.6}",
            r.macro_recall, r.macro_precision, r.macro_f1
        );
    }
    log.line(&format!("evaluate: {} models", rows.len()));
    Ok(())
}

pub fn cmd_explain(
    cfg: &PipelineConfig,
    out: &Path,
    model_file: &Path,
    text: &str,
    log: &RunLog,
) -> Result<(), CliError> {
    cfg.explain.validate()?;
    let model = load_model(model_file)?;
    let attribution: Attribution = match &model {
        LoadedModel::Encoder(m, tok) => {
            let words = attribution::attribution_words(text);
            if words.is_empty() {
                return Err(CliError::usage("text has no tokens to attribute"));
            }
            let value = |mask: &[bool]| encoder_value(m, tok, &words, mask, ValueSpace::Probability);
            if words.len() <= cfg.explain.exact_max_tokens {
                shapley_exact(&words, value, cfg.explain.exact_max_tokens)?
            } else {
                shapley_sampled(&words, value, &cfg.explain)?
            }
        }
        baseline => {
            let vectorizer = match baseline {
                LoadedModel::LogReg(_, v)
                | LoadedModel::Tree(_, v)
                | LoadedModel::Forest(_, v)
                | LoadedModel::Gbm(_, v) => v,
                LoadedModel::Encoder(..) => unreachable!(),
            };
            let tokens = tokenize_with(text, &vectorizer.config);
            if tokens.is_empty() {
                return Err(CliError::usage("text has no tokens to attribute"));
            }
            let value = |mask: &[bool]| -> inflacast_core::Result<f64> {
                match baseline {
                    LoadedModel::LogReg(m, v) => tfidf_value(m, v, &tokens, mask, ValueSpace::Probability),
                    LoadedModel::Tree(m, v) => tfidf_value(m, v, &tokens, mask, ValueSpace::Probability),
                    LoadedModel::Forest(m, v) => tfidf_value(m, v, &tokens, mask, ValueSpace::Probability),
                    LoadedModel::Gbm(m, v) => tfidf_value(m, v, &tokens, mask, ValueSpace::Probability),
                    LoadedModel::Encoder(..) => unreachable!(),
                }
            };
            if tokens.len() <= cfg.explain.exact_max_tokens {
                shapley_exact(&tokens, value, cfg.explain.exact_max_tokens)?
            } else {
                shapley_sampled(&tokens, value, &cfg.explain)?
            }
        }
    };
    attribution::render_html(&attribution, &out.join("explain.html"))?;
    attribution::write_sidecar_csv(&attribution, &out.join("explain.csv"))?;
    print!("{}", attribution::render_ansi(&attribution));
    log.line(&format!(
        "explain: {} tokens, fx {:.4}, base {:.4}",
        attribution.tokens.len(),
        attribution.fx,
        attribution.base_value
    ));
    Ok(())
}

// ---- make-fixtures ----

pub fn cmd_make_fixtures(cfg: &PipelineConfig, out: &Path, log: &RunLog) -> Result<(), CliError> {
    let (n_groups, n_months, n_extrema, n_posts, n_negation, start) =
        match cfg.fixtures.scale.as_str() {
            "small" => (500usize, 72usize, 5usize, 2000usize, 800usize, Month::new(2015, 1).expect("valid month")),
            "medium" => (10_000, 149, 9, 5000, 2000, Month::new(2010, 1).expect("valid month")),
            other => {
                return Err(CliError::usage(format!(
                    "unknown fixtures.scale `{other}` (small|medium)"
                )))
            }
        };
    let seed = cfg.seed;

    let groups = fixtures::generate_groups(seed, n_groups);
    write_groups_csv(&out.join("groups.csv"), &groups)?;

    let planted = fixtures::generate_series(seed, start, n_months, n_extrema)?;
    fixtures::write_series_csv(&out.join("series.csv"), &planted.series)?;
    write_breakpoints_csv(&out.join("planted_breakpoints.csv"), &planted.breakpoints)?;

    let labeling = label_series(&planted.series, &cfg.extrema)?;
    let posts = fixtures::generate_posts(seed, &labeling, &groups, n_posts)?;
    let records: Vec<PostRecord> = posts.iter().map(|(p, _)| p.clone()).collect();
    fixtures::write_posts_jsonl(&out.join("posts.jsonl"), &records)?;

    let negation =
        fixtures::generate_negation_corpus(seed, n_negation, cfg.fixtures.ambiguous_fraction)?;
    {
        let mut f = File::create(out.join("negation.jsonl"))
            .map_err(|e| CliError::runtime(e.to_string()))?;
        for i in 0..negation.texts.len() {
            let line = serde_json::json!({
                "text": negation.texts[i],
                "label": negation.labels[i],
                "pair_id": negation.pair_id[i],
            });
            writeln!(f, "{line}").map_err(|e| CliError::runtime(e.to_string()))?;
        }
    }

    let omsk = fixtures::omsk_series();
    fixtures::write_series_csv(&out.join("omsk_cpi_2010_2022.csv"), &omsk.series)?;

    let meta = format!(
        "seed = {seed}\nscale = \"{}\"\nn_groups = {n_groups}\nn_posts = {n_posts}\n\
         n_negation = {n_negation}\nnegation_f1_ceiling = {}\nplanted_breakpoints = {:?}\n",
        cfg.fixtures.scale,
        negation.f1_ceiling,
        planted.breakpoints.iter().map(|b| b.index).collect::<Vec<_>>(),
    );
    std::fs::write(out.join("fixture_meta.toml"), meta)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    log.line(&format!(
        "make-fixtures: scale {}, {} groups, {} posts, {} negation docs",
        cfg.fixtures.scale, n_groups, n_posts, n_negation
    ));
    println!(
        "fixtures written: {n_groups} groups, {n_posts} posts, {n_negation} negation docs, ceiling {:.3}",
        negation.f1_ceiling
    );
    Ok(())
}
