//! End-to-end acceptance suite. Each test prints one PASS line with its
//! measured runtime once every assertion in it has held.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use inflacast_core::baselines::{
    train_forest, train_gbm, train_logreg, train_tree, Classifier, ForestConfig, GbmConfig,
    LogRegConfig, TreeConfig,
};
use inflacast_core::corpus::{filter_groups, FilterConfig};
use inflacast_core::encoder::{
    train as train_encoder, train_tokenizer, EncoderConfig, EncoderModel, TrainConfig,
};
use inflacast_core::evalkit::{macro_f1, metrics, split, ConfusionMatrix};
use inflacast_core::fixtures::{generate_groups, generate_negation_corpus};
use inflacast_core::labeler::{find_breakpoints, read_series_csv, ExtremaConfig};
use inflacast_core::vectorizer::{fit as fit_tfidf, SparseVector, TfidfConfig};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_inflacast")
}

fn repo_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn pass(n: u32, what: &str, started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_s,
        "criterion {n} exceeded its {budget_s}s budget: {elapsed:.1}s"
    );
    println!("ACCEPTANCE PASS: criterion {n} — {what} ({elapsed:.2}s)");
}

#[test]
fn criterion_01_omsk_series_breakpoints() {
    let t = Instant::now();
    let series = read_series_csv(&repo_fixture("omsk_cpi_2010_2022.csv")).unwrap();
    assert_eq!(series.values.len(), 149);
    let bps = find_breakpoints(&series, &ExtremaConfig::default()).unwrap();
    let idx: Vec<usize> = bps.iter().map(|b| b.index).collect();
    assert_eq!(idx, vec![5, 16, 26, 40, 48, 62, 101, 113, 126]);
    assert_eq!(bps.len(), 9);
    for w in bps.windows(2) {
        assert_ne!(w[0].kind, w[1].kind, "breakpoints must alternate");
    }
    pass(1, "9 documented breakpoints recovered from the Omsk series fixture", t, 1.0);
}

#[test]
fn criterion_02_split_proportions() {
    let t = Instant::now();
    for n in [100usize, 1000, 4937] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.45))).collect();
        let sp = split(&labels, 11).unwrap();
        assert_eq!(sp, split(&labels, 11).unwrap(), "seed-stable");
        assert_ne!(sp.test, split(&labels, 12).unwrap().test, "seed-sensitive");
        let all: HashSet<usize> = sp
            .train
            .iter()
            .chain(&sp.validation)
            .chain(&sp.test)
            .copied()
            .collect();
        assert_eq!(all.len(), n, "partition covers every index once");
        for class in [0u8, 1u8] {
            let n_c = labels.iter().filter(|&&l| l == class).count() as f64;
            let count = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == class).count() as f64;
            let (tr, va, te) = (count(&sp.train), count(&sp.validation), count(&sp.test));
            assert!((te - 0.2 * n_c).abs() <= 1.0, "test 20% ±1 per class (n={n}, class {class})");
            assert!((va - 0.2 * n_c).abs() <= 1.0, "validation 20% ±1 per class");
            assert!((tr - 0.6 * n_c).abs() <= 2.0, "train 60% ±rounding per class");
        }
    }
    pass(2, "60/20/20 stratified seed-stable splits at N=100/1000/4937", t, 1.0);
}

#[test]
fn criterion_03_metric_identities() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let cm = ConfusionMatrix {
            tp: rng.gen_range(0..500),
            fp: rng.gen_range(0..500),
            fn_: rng.gen_range(0..500),
            tn: rng.gen_range(0..500),
        };
        let m = metrics(&cm).class1;
        if m.degenerate {
            continue;
        }
        if m.precision + m.recall == 0.0 {
            assert_eq!(m.f1, 0.0);
        } else {
            let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            assert!((m.f1 - harmonic).abs() < 1e-12);
            let (lo, hi) = (m.precision.min(m.recall), m.precision.max(m.recall));
            assert!(m.f1 >= lo - 1e-12 && m.f1 <= hi + 1e-12);
        }
    }
    pass(3, "F1 harmonic identity and min/max bound on 10,000 random matrices", t, 5.0);
}

#[test]
fn criterion_04_gradient_check() {
    let t = Instant::now();
    let cfg = EncoderConfig {
        vocab_size: 50,
        max_len: 8,
        d_model: 8,
        n_heads: 2,
        n_layers: 1,
        d_ff: 16,
        dropout: 0.0,
        allow_custom_max_len: true,
    };
    let model = EncoderModel::new(cfg, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut batch = Vec::new();
    for _ in 0..2 {
        let real = rng.gen_range(4..=8usize);
        let mut ids = vec![2usize];
        for _ in 1..real - 1 {
            ids.push(rng.gen_range(4..50));
        }
        ids.push(3);
        ids.resize(8, 0);
        let mut mask = vec![0u8; 8];
        mask[..real].fill(1);
        batch.push((ids, mask));
    }
    let labels = vec![0u8, 1];
    let (_, grad) = model.loss_and_grad(&batch, &labels, None).unwrap();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..model.n_params() {
        let mut plus = model.clone();
        plus.params[i] += h;
        let mut minus = model.clone();
        minus.params[i] -= h;
        let num =
            (plus.loss(&batch, &labels).unwrap() - minus.loss(&batch, &labels).unwrap()) / (2.0 * h);
        let denom = grad[i].abs().max(num.abs()).max(1e-8);
        worst = worst.max((grad[i] - num).abs() / denom);
    }
    assert!(worst < 1e-3, "worst relative gradient error {worst}");
    pass(4, &format!("every analytic gradient matches central differences (worst rel err {worst:.2e})"), t, 60.0);
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("spawn inflacast")
}

fn write_accept_config(dir: &Path) -> PathBuf {
    let cfg_path = dir.join("run.toml");
    let dir_s = dir.display();
    std::fs::write(
        &cfg_path,
        format!(
            r#"seed = 7

[paths]
groups = "{dir_s}/groups.csv"
posts = "{dir_s}/posts.jsonl"
series = "{dir_s}/series.csv"

[encoder]
vocab_size = 800
max_len = 64
d_model = 32
n_heads = 4
n_layers = 2
d_ff = 64
dropout = 0.1
allow_custom_max_len = false

[train]
batch_size = 32
epochs = 5
learning_rate = 0.001
weight_decay = 0.01
beta1 = 0.9
beta2 = 0.999
eps = 1e-8
seed = 7
"#
        ),
    )
    .unwrap();
    cfg_path
}

#[test]
fn criterion_05_training_sanity_loss_curves() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_accept_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    for cmd in ["make-fixtures", "label"] {
        let o = run_cli(&[cmd, "--config", cfg, "--seed", "7", "--out", out]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run_cli(&["train", "--model", "encoder-64", "--config", cfg, "--seed", "7", "--out", out]);
    assert!(o.status.success(), "train: {}", String::from_utf8_lossy(&o.stderr));

    let curve = std::fs::read_to_string(dir.path().join("encoder-64_loss_curve.csv")).unwrap();
    let rows: Vec<(f64, f64)> = curve
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5, "five epochs");
    for w in rows.windows(2) {
        assert!(w[1].0 < w[0].0, "train loss strictly decreasing: {rows:?}");
    }
    assert!(rows[4].1 < rows[0].1, "final val loss below epoch-1 val loss: {rows:?}");
    assert!(dir.path().join("encoder-64_loss_curve.svg").exists());
    pass(5, "5-epoch encoder run on the 2,000-doc corpus: strictly decreasing train loss, val improves, CSV+SVG emitted", t, 600.0);
}

#[test]
fn criterion_06_model_ordering_on_negation_corpus() {
    let t = Instant::now();
    let corpus = generate_negation_corpus(7, 800, 0.5).unwrap();
    let (train_idx, test_idx) = corpus.split_pairwise(7, 0.25);
    let texts = |idx: &[usize]| -> Vec<String> {
        idx.iter().map(|&i| corpus.texts[i].clone()).collect()
    };
    let labels = |idx: &[usize]| -> Vec<u8> { idx.iter().map(|&i| corpus.labels[i]).collect() };
    let (tr_x, tr_y) = (texts(&train_idx), labels(&train_idx));
    let (te_x, te_y) = (texts(&test_idx), labels(&test_idx));

    let tfidf = fit_tfidf(&tr_x, &TfidfConfig::default()).unwrap();
    let xtr: Vec<SparseVector> = tr_x.iter().map(|d| tfidf.transform(d)).collect();
    let xte: Vec<SparseVector> = te_x.iter().map(|d| tfidf.transform(d)).collect();
    let nf = tfidf.vocab_size();
    let score = |proba: Vec<f64>| -> f64 {
        let pred: Vec<u8> = proba.iter().map(|&p| u8::from(p >= 0.5)).collect();
        macro_f1(&te_y, &pred).unwrap()
    };
    let mut baseline_scores = Vec::new();
    let lr = train_logreg(&xtr, &tr_y, nf, &LogRegConfig::default()).unwrap();
    baseline_scores.push(("logreg", score(xte.iter().map(|x| lr.predict_proba(x).unwrap()).collect())));
    let tree = train_tree(&xtr, &tr_y, nf, &TreeConfig::default()).unwrap();
    baseline_scores.push(("tree", score(xte.iter().map(|x| tree.predict_proba(x).unwrap()).collect())));
    let forest = train_forest(&xtr, &tr_y, nf, &ForestConfig { seed: 7, ..ForestConfig::default() }).unwrap();
    baseline_scores.push(("forest", score(xte.iter().map(|x| forest.predict_proba(x).unwrap()).collect())));
    let gbm = train_gbm(&xtr, &tr_y, nf, &GbmConfig::default()).unwrap();
    baseline_scores.push(("gbm", score(xte.iter().map(|x| gbm.model.predict_proba(x).unwrap()).collect())));

    for (name, f1) in &baseline_scores {
        assert!(
            *f1 <= corpus.f1_ceiling + 0.02,
            "{name} macro-F1 {f1:.4} exceeds the bag-of-words ceiling {:.4}+0.02",
            corpus.f1_ceiling
        );
    }
    let best_baseline = baseline_scores.iter().map(|(_, f)| *f).fold(0.0, f64::max);

    let tok = train_tokenizer(&tr_x, 400).unwrap();
    let max_len = 64usize;
    let enc = |xs: &[String]| -> Vec<(Vec<usize>, Vec<u8>)> {
        xs.iter().map(|d| tok.encode(d, max_len)).collect()
    };
    let cfg = EncoderConfig {
        vocab_size: tok.vocab_size(),
        max_len,
        d_model: 32,
        n_heads: 4,
        n_layers: 2,
        d_ff: 64,
        dropout: 0.1,
        allow_custom_max_len: false,
    };
    let mut model = EncoderModel::new(cfg, 7).unwrap();
    let tc = TrainConfig {
        batch_size: 32,
        epochs: 40,
        learning_rate: 1e-3,
        seed: 7,
        ..TrainConfig::default()
    };
    let (xtr_e, xte_e) = (enc(&tr_x), enc(&te_x));
    train_encoder(&mut model, &xtr_e, &tr_y, &xte_e, &te_y, &tc).unwrap();
    let enc_f1 = score(
        xte_e
            .iter()
            .map(|(ids, mask)| model.predict_proba(ids, mask).unwrap())
            .collect(),
    );
    assert!(
        enc_f1 >= best_baseline + 0.05,
        "encoder macro-F1 {enc_f1:.4} does not clear the best baseline {best_baseline:.4} by 0.05"
    );
    pass(
        6,
        &format!(
            "encoder {enc_f1:.3} vs best bag-of-words baseline {best_baseline:.3} (ceiling {:.3})",
            corpus.f1_ceiling
        ),
        t,
        900.0,
    );
}

fn random_sparse_set(seed: u64, n: usize, d: usize) -> (Vec<SparseVector>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        let mut pairs = Vec::new();
        for j in 0..d {
            if rng.gen_bool(0.6) {
                let shift = if y == 1 { 0.6 } else { -0.6 };
                pairs.push((j, rng.gen_range(-1.0..1.0) + shift));
            }
        }
        xs.push(SparseVector(pairs));
        ys.push(y);
    }
    (xs, ys)
}

#[test]
fn criterion_07_baseline_oracles() {
    let t = Instant::now();
    // logreg: default run lands within 1e-3 of a long-run descent oracle
    let (xs, ys) = random_sparse_set(70, 50, 6);
    let loss = |m: &inflacast_core::baselines::LogRegModel| -> f64 {
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let p = m.predict_proba(x).unwrap().clamp(1e-15, 1.0 - 1e-15);
            total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
        }
        let reg: f64 = m.weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * m.c);
        total + reg
    };
    let quick = train_logreg(&xs, &ys, 6, &LogRegConfig::default()).unwrap();
    let oracle = train_logreg(
        &xs,
        &ys,
        6,
        &LogRegConfig { max_iter: 500_000, tol: 1e-10, ..LogRegConfig::default() },
    )
    .unwrap();
    assert!(
        (loss(&quick) - loss(&oracle)).abs() < 1e-3,
        "logreg losses: quick {} oracle {}",
        loss(&quick),
        loss(&oracle)
    );

    // tree: root split equals a brute-force Gini enumeration on 20 points
    let (xs20, ys20) = random_sparse_set(71, 20, 3);
    let tree = train_tree(&xs20, &ys20, 3, &TreeConfig { max_depth: 1, min_leaf: 1 }).unwrap();
    let gini = |idx: &[usize]| -> f64 {
        let n1 = idx.iter().filter(|&&i| ys20[i] == 1).count() as f64;
        let n = idx.len() as f64;
        let p1 = n1 / n;
        1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
    };
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for f in 0..3 {
        let mut vals: Vec<f64> = xs20.iter().map(|x| x.get(f)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let mut cands: Vec<f64> = vals.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        cands.push(0.0);
        for &thr in &cands {
            let left: Vec<usize> = (0..20).filter(|&i| xs20[i].get(f) <= thr).collect();
            let right: Vec<usize> = (0..20).filter(|&i| xs20[i].get(f) > thr).collect();
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let w = (left.len() as f64 * gini(&left) + right.len() as f64 * gini(&right)) / 20.0;
            if w < best.0 - 1e-15 {
                best = (w, f, thr);
            }
        }
    }
    match &tree.root {
        inflacast_core::baselines::Node::Split { feature, threshold, .. } => {
            assert_eq!(*feature, best.1);
            assert!((threshold - best.2).abs() < 1e-12);
        }
        other => panic!("expected a root split, got {other:?}"),
    }

    // gbm: staged training loss never increases
    let (xg, yg) = random_sparse_set(72, 80, 5);
    let out = train_gbm(&xg, &yg, 5, &GbmConfig::default()).unwrap();
    for w in out.staged_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "staged loss increased: {:?}", &out.staged_loss);
    }

    // forest: bit-identical under the same seed
    let (xf, yf) = random_sparse_set(73, 60, 5);
    let cfg = ForestConfig { n_trees: 20, seed: 9, ..ForestConfig::default() };
    let f1 = train_forest(&xf, &yf, 5, &cfg).unwrap();
    let f2 = train_forest(&xf, &yf, 5, &cfg).unwrap();
    for (x, _) in xf.iter().zip(&yf) {
        assert_eq!(f1.predict_proba(x).unwrap(), f2.predict_proba(x).unwrap());
    }
    pass(7, "logreg descent, tree split enumeration, GBM staging, forest determinism oracles", t, 120.0);
}

#[test]
fn criterion_08_shapley_properties() {
    use inflacast_core::attribution::{
        encoder_value, shapley_exact, shapley_sampled, tfidf_value, ExplainConfig, ValueSpace,
    };
    let t = Instant::now();
    let vocab = [
        "цены", "выросли", "упали", "хлеб", "бензин", "молоко", "рост", "спад", "не", "снова",
    ];
    let docs: Vec<String> = (0..40)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            (0..6)
                .map(|_| vocab[rng.gen_range(0..vocab.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let labels: Vec<u8> = docs
        .iter()
        .map(|d| u8::from(d.contains("выросли") || d.contains("рост")))
        .collect();
    if labels.iter().all(|&l| l == labels[0]) {
        panic!("degenerate fixture");
    }
    let tfidf = fit_tfidf(&docs, &TfidfConfig::default()).unwrap();
    let xs: Vec<SparseVector> = docs.iter().map(|d| tfidf.transform(d)).collect();
    let nf = tfidf.vocab_size();
    let lr = train_logreg(&xs, &labels, nf, &LogRegConfig::default()).unwrap();
    let tree = train_tree(&xs, &labels, nf, &TreeConfig::default()).unwrap();
    let forest = train_forest(&xs, &labels, nf, &ForestConfig { seed: 2, n_trees: 20, ..ForestConfig::default() }).unwrap();
    let gbm = train_gbm(&xs, &labels, nf, &GbmConfig { n_estimators: 40, ..GbmConfig::default() }).unwrap().model;

    let tok = train_tokenizer(&docs, 300).unwrap();
    let enc_cfg = EncoderConfig {
        vocab_size: tok.vocab_size(),
        max_len: 32,
        d_model: 16,
        n_heads: 2,
        n_layers: 1,
        d_ff: 32,
        dropout: 0.0,
        allow_custom_max_len: true,
    };
    let enc = EncoderModel::new(enc_cfg, 5).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let families: Vec<(&str, Box<dyn Fn(&[String], &[bool]) -> inflacast_core::Result<f64> + Sync>)> = vec![
        ("logreg", Box::new(|tks, m| tfidf_value(&lr, &tfidf, tks, m, ValueSpace::Probability))),
        ("tree", Box::new(|tks, m| tfidf_value(&tree, &tfidf, tks, m, ValueSpace::Probability))),
        ("forest", Box::new(|tks, m| tfidf_value(&forest, &tfidf, tks, m, ValueSpace::Probability))),
        ("gbm", Box::new(|tks, m| tfidf_value(&gbm, &tfidf, tks, m, ValueSpace::Probability))),
        ("encoder", Box::new(|tks, m| encoder_value(&enc, &tok, tks, m, ValueSpace::Probability))),
    ];
    for (name, value) in &families {
        for _ in 0..100 {
            let n = rng.gen_range(2..=8usize);
            let tokens: Vec<String> = (0..n)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect();
            let a = shapley_exact(&tokens, |m| value(&tokens, m), 12).unwrap();
            let total: f64 = a.phi.iter().sum();
            assert!(
                (total - (a.fx - a.base_value)).abs() < 1e-9,
                "{name}: efficiency violated"
            );
        }
        // sampled mode tracks exact mode token-wise
        let tokens: Vec<String> =
            ["цены", "выросли", "хлеб", "не", "спад"].iter().map(|s| s.to_string()).collect();
        let exact = shapley_exact(&tokens, |m| value(&tokens, m), 12).unwrap();
        let sampled = shapley_sampled(
            &tokens,
            |m| value(&tokens, m),
            &ExplainConfig { n_permutations: 2000, seed: 0, ..ExplainConfig::default() },
        )
        .unwrap();
        for (e, s) in exact.phi.iter().zip(&sampled.phi) {
            assert!((e - s).abs() < 0.02, "{name}: sampled {s} vs exact {e}");
        }
    }
    // symmetry: duplicated token gets equal phi
    let tokens: Vec<String> = ["рост", "рост", "хлеб"].iter().map(|s| s.to_string()).collect();
    let a = shapley_exact(&tokens, |m| tfidf_value(&lr, &tfidf, &tokens, m, ValueSpace::Probability), 12).unwrap();
    assert!((a.phi[0] - a.phi[1]).abs() < 1e-12, "symmetry");
    // null player: out-of-vocabulary token contributes nothing
    let tokens: Vec<String> = ["рост", "ъъъъ"].iter().map(|s| s.to_string()).collect();
    let a = shapley_exact(&tokens, |m| tfidf_value(&lr, &tfidf, &tokens, m, ValueSpace::Probability), 12).unwrap();
    assert_eq!(a.phi[1], 0.0, "null player");
    pass(8, "efficiency on 100 inputs × 5 model families, sampled-vs-exact, symmetry, null player", t, 300.0);
}

#[test]
fn criterion_09_filter_monotonicity_and_boundaries() {
    let t = Instant::now();
    let groups = generate_groups(42, 10_000);
    let survivors = |members: u64, share: f64| -> usize {
        filter_groups(&groups, &FilterConfig { min_members: members, min_share_pct: share }).len()
    };
    let member_grid = [500u64, 1000, 2000, 4000, 8000];
    let share_grid = [5.0f64, 10.0, 20.0, 40.0, 80.0];
    for &s in &share_grid {
        for w in member_grid.windows(2) {
            assert!(survivors(w[1], s) <= survivors(w[0], s), "raising member threshold grew the set");
        }
    }
    for &m in &member_grid {
        for w in share_grid.windows(2) {
            assert!(survivors(m, w[1]) <= survivors(m, w[0]), "raising share threshold grew the set");
        }
    }
    // exact-boundary group passes the inclusive default thresholds
    let kept = filter_groups(&groups, &FilterConfig::default());
    assert!(kept.iter().any(|g| g.total_members == 2000 && g.regional_members == 400));
    pass(9, "filter survivors monotone in both thresholds; 2000-member/20%-share boundary kept", t, 5.0);
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let t = Instant::now();
    let run_pipeline = |dir: &Path| {
        let cfg = write_accept_config(dir);
        let cfg = cfg.to_str().unwrap();
        let out = dir.to_str().unwrap();
        for args in [
            vec!["make-fixtures"],
            vec!["filter-groups"],
            vec!["label"],
            vec!["train", "--model", "logreg"],
        ] {
            let mut full = args.clone();
            full.extend(["--config", cfg, "--seed", "7", "--out", out]);
            let o = run_cli(&full);
            assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let model = dir.join("logreg.model");
        let model = model.to_str().unwrap();
        let o = run_cli(&["evaluate", model, "--config", cfg, "--seed", "7", "--out", out]);
        assert!(o.status.success(), "evaluate: {}", String::from_utf8_lossy(&o.stderr));
        let o = run_cli(&[
            "explain", "--model-file", model, "--text", "цены выросли хлеб не подешевел",
            "--config", cfg, "--seed", "7", "--out", out,
        ]);
        assert!(o.status.success(), "explain: {}", String::from_utf8_lossy(&o.stderr));
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_pipeline(d1.path());
    run_pipeline(d2.path());
    let mut names: Vec<String> = std::fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "run.log" && n != "run.toml" && n != "config_used.toml")
        .collect();
    names.sort();
    assert!(names.len() > 15, "expected a full set of outputs, got {names:?}");
    for name in &names {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "output {name} differs between identical runs");
    }
    pass(10, &format!("two full pipeline runs byte-identical across {} data outputs", names.len()), t, 300.0);
}
