use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use inn_core::centrality::{write_eik_records, AblationMask, Column};
use inn_core::corpus::{
    generate_synthetic, labels, parse_corpus, read_corpus_file, split_dataset, write_corpus, Document, SplitConfig,
};
use inn_core::eval::{
    ablation_table, evaluate, format_table, size_sweep, write_records, write_sweep, MetricsReport, TopicResult,
};
use inn_core::nn::Variant;
use inn_core::pipeline::{
    featurize, fit_vocab, load_model, run_experiment, save_model, sha256_hex, AnalyzedDoc, Preprocessing,
};
use inn_core::{Error, Result};

use crate::config::RunConfig;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Buffer that starts with a `# fingerprint=` line.
fn stamped(fingerprint: &str) -> Vec<u8> {
    format!("# fingerprint={fingerprint}\n").into_bytes()
}

fn labeled_split(cfg: &RunConfig) -> Result<(Vec<Document>, Vec<Document>)> {
    let docs = read_corpus_file(cfg.require_existing(&cfg.corpus, "corpus")?)?;
    labels(&docs)?;
    split_dataset(&docs, &SplitConfig { train_fraction: cfg.train_fraction, seed: cfg.seed })
}

fn read_pretrained(cfg: &RunConfig) -> Result<Option<String>> {
    cfg.embeddings.as_deref().map(|p| fs::read_to_string(p).map_err(io_err(p))).transpose()
}

pub struct FeaturizeSummary {
    pub docs: usize,
    pub keywords: usize,
    pub cache_hit: bool,
    pub eik_path: PathBuf,
    pub vocab_path: PathBuf,
}

/// Knowledge-matrix export and vocabulary, cached under a key made of the
/// preprocessing settings and the corpus bytes.
pub fn featurize_cmd(cfg: &RunConfig) -> Result<FeaturizeSummary> {
    let pre = cfg.preprocessing()?;
    let corpus_path = cfg.require_existing(&cfg.corpus, "corpus")?;
    let bytes = fs::read(corpus_path).map_err(io_err(corpus_path))?;
    let key = sha256_hex(format!("{}:{}", pre.config_fingerprint(), sha256_hex(&bytes)).as_bytes());
    let cache = cfg.output_dir.join("cache");
    let cached_eik = cache.join(format!("eik-{}.tsv", &key[..16]));
    let cached_vocab = cache.join(format!("vocab-{}.txt", &key[..16]));
    let docs = parse_corpus(bytes.as_slice())?;

    let cache_hit = cached_eik.exists() && cached_vocab.exists();
    if !cache_hit {
        let analyzed = pre.analyze_corpus(&docs)?;
        let vocab = fit_vocab(&analyzed, &pre)?;
        let rows: Vec<_> = analyzed.iter().map(|d| (d.id.clone(), d.rows.clone())).collect();
        let mut eik = Vec::new();
        write_eik_records::<_, f64>(&mut eik, &key, &rows)?;
        write_file(&cached_eik, &eik)?;
        let mut v = stamped(&pre.fingerprint(&vocab));
        for w in vocab.words() {
            v.extend_from_slice(w.as_bytes());
            v.push(b'\n');
        }
        write_file(&cached_vocab, &v)?;
    }
    let eik_path = cfg.output_dir.join("eik.tsv");
    let vocab_path = cfg.output_dir.join("vocab.txt");
    fs::copy(&cached_eik, &eik_path).map_err(io_err(&eik_path))?;
    fs::copy(&cached_vocab, &vocab_path).map_err(io_err(&vocab_path))?;
    println!(
        "featurized {} documents x {} keywords ({}), key {}",
        docs.len(),
        pre.spec.len(),
        if cache_hit { "cache hit" } else { "computed" },
        &key[..16]
    );
    Ok(FeaturizeSummary { docs: docs.len(), keywords: pre.spec.len(), cache_hit, eik_path, vocab_path })
}

pub struct TrainSummary {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub validation: Option<MetricsReport>,
    pub test: MetricsReport,
}

pub fn train_cmd(cfg: &RunConfig) -> Result<TrainSummary> {
    let pre = cfg.preprocessing()?;
    let model_path = cfg.require(&cfg.model, "model")?.to_path_buf();
    let (train, test) = labeled_split(cfg)?;
    let train = pre.analyze_corpus(&train)?;
    let test = pre.analyze_corpus(&test)?;
    let pretrained = read_pretrained(cfg)?;
    let exp = cfg.experiment(cfg.variant, cfg.mask.clone());
    let out = run_experiment::<f64>(&pre, &train, &test, &exp, pretrained.as_deref())?;

    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_model(&out.model, &model_path)?;
    let history_path = cfg.output_dir.join("history.csv");
    let mut history = stamped(&out.model.fingerprint());
    out.history.write_csv(&mut history).map_err(io_err(&history_path))?;
    write_file(&history_path, &history)?;

    let validation =
        out.history.records.get(out.history.best_epoch.saturating_sub(1)).and_then(|r| r.val_metrics.clone());
    println!(
        "trained {} for {} epochs (best epoch {}{})",
        cfg.variant,
        out.history.records.len(),
        out.history.best_epoch,
        if out.history.stopped_early { ", stopped early" } else { "" }
    );
    let mut rows = Vec::new();
    if let Some(v) = &validation {
        rows.push(("validation", v));
    }
    rows.push(("test", &out.test_report));
    print!("{}", format_table(rows));
    Ok(TrainSummary { model_path, history_path, validation, test: out.test_report })
}

/// Featurizes with the configured preprocessing and the model's vocabulary;
/// scoring fails if that does not reproduce the model's fingerprint.
fn score_docs(cfg: &RunConfig, model: &inn_core::Model, docs: &[Document]) -> Result<(Preprocessing, Vec<f64>)> {
    let pre = cfg.preprocessing()?;
    let analyzed = pre.analyze_corpus(docs)?;
    let features = featurize::<f64>(&analyzed, &pre, &model.vocab);
    Ok((pre, model.scores(&features)?))
}

pub fn evaluate_cmd(cfg: &RunConfig, input: Option<&Path>) -> Result<MetricsReport> {
    let model: inn_core::Model = load_model(cfg.require_existing(&cfg.model, "model")?)?;
    let (name, docs) = match input {
        Some(path) => (path.display().to_string(), read_corpus_file(path)?),
        None => ("test split".to_string(), labeled_split(cfg)?.1),
    };
    let y = labels(&docs)?;
    let (_, scores) = score_docs(cfg, &model, &docs)?;
    let report = evaluate(&scores, &y, cfg.train.threshold)?;
    print!("{}", format_table([(model.params.variant.name(), &report)]));

    let result = TopicResult {
        topic: name,
        reports: BTreeMap::from([(model.params.variant.name().to_string(), report.clone())]),
    };
    let path = cfg.output_dir.join("metrics.csv");
    let mut buf = stamped(&model.fingerprint());
    write_records(&[result], &mut buf)?;
    write_file(&path, &buf)?;
    Ok(report)
}

/// Masked-column variants of the knowledge-only model, in table order.
pub fn ablation_variants() -> [(&'static str, AblationMask); 5] {
    [
        ("IKOM", AblationMask::none()),
        ("NPREV", AblationMask::zero([Column::Prev])),
        ("NBC", AblationMask::zero([Column::Bc])),
        ("NDC", AblationMask::zero([Column::Dc])),
        ("NKC", AblationMask::zero([Column::Kc])),
    ]
}

pub fn ablate_cmd(cfg: &RunConfig) -> Result<Vec<(String, MetricsReport)>> {
    let pre = cfg.preprocessing()?;
    let (train, test) = labeled_split(cfg)?;
    let train = pre.analyze_corpus(&train)?;
    let test = pre.analyze_corpus(&test)?;
    let mut reports = BTreeMap::new();
    for (name, mask) in ablation_variants() {
        let out = run_experiment::<f64>(&pre, &train, &test, &cfg.experiment(Variant::Ikom, mask), None)?;
        reports.insert(name.to_string(), out.test_report);
    }
    let rows = ablation_table(&reports)?;
    print!("{}", format_table(rows.iter().map(|r| (r.variant.as_str(), &r.report))));

    let path = cfg.output_dir.join("ablation.csv");
    let mut buf = stamped(&pre.config_fingerprint());
    let mut w = Vec::new();
    writeln!(w, "variant,accuracy,precision,recall,f1,ck,auc").map_err(io_err(&path))?;
    for r in &rows {
        let values: Vec<String> = r.report.values().iter().map(f64::to_string).collect();
        writeln!(w, "{},{}", r.variant, values.join(",")).map_err(io_err(&path))?;
    }
    buf.extend_from_slice(&w);
    write_file(&path, &buf)?;
    Ok(rows.into_iter().map(|r| (r.variant, r.report)).collect())
}

pub struct SweepRow {
    pub fraction: f64,
    pub train_docs: usize,
    pub report: MetricsReport,
}

pub fn sweep_cmd(cfg: &RunConfig, fractions: Option<&[f64]>) -> Result<Vec<SweepRow>> {
    let pre = cfg.preprocessing()?;
    let fractions = fractions.unwrap_or(&cfg.fractions);
    let (train, test) = labeled_split(cfg)?;
    let train: Vec<AnalyzedDoc> = pre.analyze_corpus(&train)?;
    let test = pre.analyze_corpus(&test)?;
    let pool_labels: Vec<u8> = train.iter().map(|d| d.label.expect("labeled split")).collect();
    let pretrained = read_pretrained(cfg)?;
    let exp = cfg.experiment(cfg.variant, cfg.mask.clone());
    let points = size_sweep(&pool_labels, fractions, cfg.seed, |idx| {
        let subset: Vec<AnalyzedDoc> = idx.iter().map(|&i| train[i].clone()).collect();
        Ok(run_experiment::<f64>(&pre, &subset, &test, &exp, pretrained.as_deref())?.test_report)
    })?;
    let labels: Vec<String> = points.iter().map(|p| format!("{} ({} docs)", p.fraction, p.train_docs)).collect();
    print!("{}", format_table(labels.iter().map(String::as_str).zip(points.iter().map(|p| &p.report))));

    let path = cfg.output_dir.join("sweep.csv");
    let mut buf = stamped(&pre.config_fingerprint());
    write_sweep(&points, &mut buf)?;
    write_file(&path, &buf)?;
    Ok(points
        .into_iter()
        .map(|p| SweepRow { fraction: p.fraction, train_docs: p.train_docs, report: p.report })
        .collect())
}

pub struct FilterSummary {
    pub ranked: Vec<(String, f64)>,
    pub kept: Option<usize>,
}

/// Ranks documents by descending score. Writes `ranked.tsv`, the documents
/// in ranked order as `ranked.jsonl` for labeling, and with a threshold
/// `kept.jsonl` / `dropped.jsonl`.
pub fn filter_cmd(cfg: &RunConfig, input: &Path, threshold: Option<f64>) -> Result<FilterSummary> {
    let model: inn_core::Model = load_model(cfg.require_existing(&cfg.model, "model")?)?;
    let docs = read_corpus_file(input)?;
    let (_, scores) = score_docs(cfg, &model, &docs)?;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let dir = &cfg.output_dir;
    let mut tsv = stamped(&model.fingerprint());
    tsv.extend_from_slice(b"rank\tid\tscore\n");
    for (rank, &i) in order.iter().enumerate() {
        tsv.extend_from_slice(format!("{}\t{}\t{}\n", rank + 1, docs[i].id, scores[i]).as_bytes());
    }
    write_file(&dir.join("ranked.tsv"), &tsv)?;
    let ranked_docs: Vec<Document> = order.iter().map(|&i| docs[i].clone()).collect();
    let mut jsonl = Vec::new();
    write_corpus(&mut jsonl, &ranked_docs).map_err(io_err(dir))?;
    write_file(&dir.join("ranked.jsonl"), &jsonl)?;

    let kept = match threshold {
        Some(t) => {
            let (keep, drop): (Vec<&Document>, Vec<&Document>) = order
                .iter()
                .map(|&i| (&docs[i], scores[i] >= t))
                .fold((Vec::new(), Vec::new()), |(mut k, mut d), (doc, hit)| {
                    if hit {
                        k.push(doc)
                    } else {
                        d.push(doc)
                    }
                    (k, d)
                });
            for (name, part) in [("kept.jsonl", &keep), ("dropped.jsonl", &drop)] {
                let owned: Vec<Document> = part.iter().map(|&d| d.clone()).collect();
                let mut buf = Vec::new();
                write_corpus(&mut buf, &owned).map_err(io_err(dir))?;
                write_file(&dir.join(name), &buf)?;
            }
            Some(keep.len())
        }
        None => None,
    };
    println!("ranked {} documents{}", docs.len(), kept.map(|k| format!(", {k} above threshold")).unwrap_or_default());
    Ok(FilterSummary { ranked: order.iter().map(|&i| (docs[i].id.clone(), scores[i])).collect(), kept })
}

pub fn synth_cmd(cfg: &RunConfig, output: Option<&Path>) -> Result<Vec<Document>> {
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => cfg.require(&cfg.corpus, "corpus")?.to_path_buf(),
    };
    let docs = generate_synthetic(&cfg.synth_config()?)?;
    let mut buf = Vec::new();
    write_corpus(&mut buf, &docs).map_err(io_err(&path))?;
    write_file(&path, &buf)?;
    let positive = docs.iter().filter(|d| d.label == Some(1)).count();
    println!("wrote {} documents ({positive} relevant) to {}", docs.len(), path.display());
    Ok(docs)
}
