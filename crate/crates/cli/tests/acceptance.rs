//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use inn_core::centrality::{keyword_centrality, AblationMask, Column};
use inn_core::corpus::{
    generate_synthetic, parse_keyword_spec, split_dataset, write_corpus, Document, Rule, SplitConfig, SynthConfig,
};
use inn_core::eval::{auc, evaluate, size_sweep};
use inn_core::graph::CooccurrenceGraph;
use inn_core::nn::{
    backward, bce_loss, forward_with_masks, sample_masks, Architecture, BankSpec, DropoutMasks, DropoutSchedule, Input,
    ModelParams, Variant,
};
use inn_core::pipeline::{load_model, run_experiment, AnalyzedDoc, ExperimentConfig, Preprocessing};
use ndarray::Array2;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:.2?}, limit {limit:?}");
    Ok(took)
}

// ---------------------------------------------------------------- 1

fn network_one() -> Outcome {
    let start = Instant::now();
    let g = ok(CooccurrenceGraph::from_edge_list("blue\torange\norange\tv\nv\tgreen\n"))?;
    let keywords = ["blue", "orange", "green"];
    for (w, want) in [("orange", 2.5), ("blue", 7.0 / 3.0), ("green", 11.0 / 6.0)] {
        let got = ok(keyword_centrality(&g, w, &keywords, 1.0f64))?;
        ensure!((got - want).abs() <= 1e-12, "KC({w}) = {got}, expected {want}");
    }
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("KC orange/blue/green = 2.5, 7/3, 11/6 in {took:.2?}"))
}

// ---------------------------------------------------------------- 2

type Q = Ratio<i64>;

fn random_graph(rng: &mut ChaCha8Rng) -> (CooccurrenceGraph, Vec<Vec<bool>>) {
    let n = rng.random_range(1..=12);
    let p = rng.random_range(0.1..0.6);
    let mut adj = vec![vec![false; n]; n];
    let mut text = String::new();
    for i in 0..n {
        text.push_str(&format!("n{i:02}\n"));
        for j in i + 1..n {
            if rng.random_bool(p) {
                adj[i][j] = true;
                adj[j][i] = true;
                text.push_str(&format!("n{i:02}\tn{j:02}\n"));
            }
        }
    }
    (CooccurrenceGraph::from_edge_list(&text).expect("edge list"), adj)
}

fn floyd_warshall(adj: &[Vec<bool>]) -> Vec<Vec<Option<usize>>> {
    let n = adj.len();
    let mut d: Vec<Vec<Option<usize>>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Some(0) } else { adj[i][j].then_some(1) }).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Every shortest s–t path, written out node by node.
fn shortest_paths(adj: &[Vec<bool>], d: &[Vec<Option<usize>>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn extend(adj: &[Vec<bool>], d: &[Vec<Option<usize>>], t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().expect("non-empty path");
        if v == t {
            out.push(path.clone());
            return;
        }
        let left = d[v][t].expect("reachable");
        for u in 0..adj.len() {
            if adj[v][u] && d[u][t] == Some(left - 1) {
                path.push(u);
                extend(adj, d, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if d[s][t].is_some() {
        extend(adj, d, t, &mut vec![s], &mut out);
    }
    out
}

fn brute_force_betweenness(adj: &[Vec<bool>], d: &[Vec<Option<usize>>]) -> Vec<Q> {
    let n = adj.len();
    let mut bc = vec![Q::from_integer(0); n];
    for s in 0..n {
        for t in s + 1..n {
            let paths = shortest_paths(adj, d, s, t);
            let total = paths.len() as i64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    bc[v] += Q::new(1, total);
                }
            }
        }
    }
    bc
}

fn centrality_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..200 {
        let (g, adj) = random_graph(&mut rng);
        let names: Vec<String> = (0..adj.len()).map(|i| format!("n{i:02}")).collect();
        ensure!(g.nodes() == names.as_slice(), "graph {trial}: node order differs");
        let d = floyd_warshall(&adj);
        for (i, name) in names.iter().enumerate() {
            let bfs = ok(g.bfs_distances(name))?;
            for (j, other) in names.iter().enumerate() {
                ensure!(bfs.get(other) == Some(d[i][j]), "graph {trial}: d({name}, {other}) disagrees");
            }
        }
        let bc = g.betweenness_all::<Q>();
        let oracle = brute_force_betweenness(&adj, &d);
        ensure!(bc == oracle, "graph {trial}: betweenness {bc:?} vs oracle {oracle:?}");

        let mut keywords: Vec<&str> = names.iter().map(String::as_str).filter(|_| rng.random_bool(0.5)).collect();
        keywords.push("absent");
        for (i, name) in names.iter().enumerate().filter(|(_, n)| keywords.contains(&n.as_str())) {
            let mut want = Q::from_integer(1);
            for (j, other) in names.iter().enumerate() {
                if j != i && keywords.contains(&other.as_str()) {
                    if let Some(dist) = d[i][j] {
                        want += Q::new(1, dist as i64);
                    }
                }
            }
            let got = ok(keyword_centrality(&g, name, &keywords, Q::from_integer(1)))?;
            ensure!(got == want, "graph {trial}: KC({name}) = {got}, oracle {want}");
        }
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!("200 random graphs agree exactly with Floyd-Warshall, path enumeration and 1/d sums in {took:.2?}"))
}

// ---------------------------------------------------------------- 3

fn tiny_arch() -> Architecture {
    Architecture {
        text_banks: [3, 4, 5].map(|height| BankSpec { height, filters: 2 }).to_vec(),
        knowledge_bank: BankSpec { height: 3, filters: 2 },
        hidden: 4,
        embedding_dim: 6,
        seq_len: 8,
        keywords: 4,
    }
}

fn gradient_error(variant: Variant, with_masks: bool, y: u8, seed: u64) -> Result<f64, String> {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ok(ModelParams::<f64>::zeros(&tiny_arch(), variant, 10))?;
    for g in params.groups_mut() {
        for v in g.values.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    if variant.uses_text() {
        params.embedding.row_mut(0).fill(0.0);
    }
    params.dense_b.mapv_inplace(|b: f64| if b.abs() < 0.1 { b + 0.3 } else { b });

    let ids = [2usize, 5, 9, 1, 3, 7];
    let eik = Array2::from_shape_fn((4, 4), |_| rng.random_range(0.0..2.0));
    let input =
        Input { text: variant.uses_text().then_some(&ids[..]), eik: variant.uses_knowledge().then(|| eik.view()) };
    let masks: Option<DropoutMasks<f64>> = match with_masks {
        true => {
            let schedule = DropoutSchedule { input: 0.3, text_banks: vec![0.3; 3], knowledge: 0.3, dense: 0.2 };
            Some(ok(sample_masks(&params, ids.len(), &schedule, &mut rng))?)
        }
        false => None,
    };
    let loss = |p: &ModelParams<f64>| bce_loss(forward_with_masks(p, input, masks.as_ref()).expect("forward").prob, y);
    let trace = ok(forward_with_masks(&params, input, masks.as_ref()))?;
    let grad = ok(backward(&params, &trace, y))?;
    let analytic: Vec<Vec<f64>> = grad.groups().iter().map(|g| g.values.to_vec()).collect();

    let mut worst = 0.0f64;
    for (gi, a_group) in analytic.iter().enumerate() {
        for (i, &a) in a_group.iter().enumerate() {
            let mut plus = params.clone();
            plus.groups_mut()[gi].values[i] += STEP;
            let mut minus = params.clone();
            minus.groups_mut()[gi].values[i] -= STEP;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
            let scale = a.abs().max(numeric.abs());
            worst = worst.max(if scale < 1e-7 { (a - numeric).abs() } else { (a - numeric).abs() / scale });
        }
    }
    Ok(worst)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for variant in [Variant::Inn, Variant::Ikom, Variant::TextOnly] {
        for with_masks in [false, true] {
            for (y, seed) in [(1, 1), (0, 2)] {
                let err = gradient_error(variant, with_masks, y, seed)?;
                ensure!(err <= 1e-4, "{variant} masks={with_masks} y={y}: relative error {err:e}");
                worst = worst.max(err);
            }
        }
    }
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("worst relative error {worst:.1e} over all variants in {took:.2?}"))
}

// ---------------------------------------------------------------- 4

fn pair_counting_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (&p, _) in scores.iter().zip(labels).filter(|(_, &l)| l == 1) {
        for (j, &n) in scores.iter().enumerate() {
            if labels[j] == 0 {
                pairs += 1.0;
                wins += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let n = rng.random_range(2..60);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // A coarse grid makes ties common.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64 / 24.0).collect();

        let constant = ok(evaluate(&vec![1.0f64; n], &labels, 0.5))?;
        ensure!(
            constant.ck == 0.0 && constant.auc == 0.5,
            "trial {trial}: constant predictor gave ck {} auc {}",
            constant.ck,
            constant.auc
        );

        let got = ok(auc(&scores, &labels))?.ok_or("both classes present but AUC undefined")?;
        let want = pair_counting_auc(&scores, &labels);
        ensure!((got - want).abs() <= 1e-12, "trial {trial}: AUC {got} vs pair counting {want}");

        for (name, f) in [
            ("exp", f64::exp as fn(f64) -> f64),
            ("cube+shift", |x: f64| x * x * x + 2.0 * x - 7.0),
            ("logistic", |x: f64| 1.0 / (1.0 + (-3.0 * x).exp())),
        ] {
            let mapped: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
            let t = ok(auc(&mapped, &labels))?.ok_or("AUC undefined")?;
            ensure!((t - got).abs() <= 1e-12, "trial {trial}: AUC changed under {name}: {got} -> {t}");
        }
    }
    Ok("constant predictor CK 0 / AUC 0.5; AUC matches pair counting and is invariant on 100 random sets".into())
}

// ---------------------------------------------------------------- 5, 6

const KEYWORDS: &str =
    "[Identity]\naborig*, native, maori, torres strait\n[Remains]\nskull*, bone*, skeleton*, remains\n";

struct Task {
    pre: Preprocessing,
    train: Vec<AnalyzedDoc>,
    test: Vec<AnalyzedDoc>,
}

fn synthetic_task(seed: u64, keywords_per_doc: Option<usize>, min_freq: usize) -> Result<Task, String> {
    let spec = ok(parse_keyword_spec(KEYWORDS))?;
    let mut synth = SynthConfig { seed, max_len: 200, ..SynthConfig::new(spec.clone(), Rule::Proximity { window: 5 }) };
    if let Some(k) = keywords_per_doc {
        synth.min_keywords = k;
        synth.max_keywords = k;
    }
    let docs = ok(generate_synthetic(&synth))?;
    let (train, test) = ok(split_dataset(&docs, &SplitConfig { train_fraction: 0.8, seed }))?;
    let pre = Preprocessing { seq_len: 200, min_freq, ..Preprocessing::new(spec) };
    let train = ok(pre.analyze_corpus(&train))?;
    let test = ok(pre.analyze_corpus(&test))?;
    Ok(Task { pre, train, test })
}

fn experiment(variant: Variant, mask: AblationMask, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(variant);
    cfg.mask = mask;
    cfg.seed = seed;
    cfg.train.seed = seed;
    cfg.train.epochs = 30;
    cfg
}

fn end_to_end() -> Outcome {
    let task = synthetic_task(0, None, 40)?;
    let start = Instant::now();
    let inn = ok(run_experiment::<f64>(
        &task.pre,
        &task.train,
        &task.test,
        &experiment(Variant::Inn, AblationMask::none(), 0),
        None,
    ))?;
    let took = within(Duration::from_secs(300), start)?;
    let ikom = ok(run_experiment::<f64>(
        &task.pre,
        &task.train,
        &task.test,
        &experiment(Variant::Ikom, AblationMask::none(), 0),
        None,
    ))?;
    let (f_inn, f_ikom) = (inn.test_report.f1, ikom.test_report.f1);
    ensure!(f_inn >= 0.90, "INN test F1 {f_inn:.3} < 0.90");
    ensure!(f_ikom >= 0.80, "IKOM test F1 {f_ikom:.3} < 0.80");
    Ok(format!("INN F1 {f_inn:.3} ({} epochs, {took:.1?}), IKOM F1 {f_ikom:.3}", inn.history.records.len()))
}

fn ablation_direction() -> Outcome {
    let mut lines = Vec::new();
    for seed in 0..3 {
        let task = synthetic_task(seed, Some(2), 2)?;
        let run = |mask| {
            run_experiment::<f64>(&task.pre, &task.train, &task.test, &experiment(Variant::Ikom, mask, seed), None)
        };
        let full = ok(run(AblationMask::none()))?.test_report.f1;
        let nkc = ok(run(AblationMask::zero([Column::Kc])))?.test_report.f1;
        ensure!(nkc <= full - 0.05, "seed {seed}: NKC F1 {nkc:.3} not 0.05 below IKOM {full:.3}");
        lines.push(format!("seed {seed}: IKOM {full:.3} NKC {nkc:.3}"));
    }
    Ok(lines.join(", "))
}

// ---------------------------------------------------------------- 7

fn small_data() -> Outcome {
    let spec = ok(parse_keyword_spec(KEYWORDS))?;
    let synth = SynthConfig {
        n_docs: 1400,
        max_len: 200,
        seed: 7,
        ..SynthConfig::new(spec.clone(), Rule::Proximity { window: 5 })
    };
    let docs = ok(generate_synthetic(&synth))?;
    let (pool, test) = ok(split_dataset(&docs, &SplitConfig { train_fraction: 6.0 / 7.0, seed: 7 }))?;
    let pre = Preprocessing { seq_len: 200, ..Preprocessing::new(spec) };
    let pool = ok(pre.analyze_corpus(&pool))?;
    let test = ok(pre.analyze_corpus(&test))?;
    let labels: Vec<u8> = pool.iter().map(|d| d.label.expect("labeled")).collect();
    let mut histories = Vec::new();
    let points = ok(size_sweep(&labels, &[0.01], 7, |idx| {
        let subset: Vec<AnalyzedDoc> = idx.iter().map(|&i| pool[i].clone()).collect();
        let out =
            run_experiment::<f64>(&pre, &subset, &test, &experiment(Variant::Inn, AblationMask::none(), 7), None)?;
        histories.push(out.history);
        Ok(out.test_report)
    }))?;
    let p = &points[0];
    ensure!(p.report.is_finite(), "non-finite metrics {:?}", p.report);
    for r in histories.iter().flat_map(|h| &h.records) {
        ensure!(
            r.train_loss.is_finite() && r.val_loss.is_none_or(f64::is_finite),
            "epoch {}: non-finite loss",
            r.epoch
        );
        ensure!(
            r.val_metrics.as_ref().is_none_or(|m| m.is_finite()),
            "epoch {}: non-finite validation metrics",
            r.epoch
        );
    }
    Ok(format!("{} of {} documents, test F1 {:.3}, all metrics finite", p.train_docs, pool.len(), p.report.f1))
}

// ---------------------------------------------------------------- 8

fn inn(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = ok(Command::new(env!("CARGO_BIN_EXE_inn")).current_dir(dir).args(args).output())?;
    ensure!(out.status.success(), "inn {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn determinism() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let root = dir.path();
    ok(fs::write(root.join("keywords.txt"), KEYWORDS))?;
    ok(fs::write(
        root.join("run.conf"),
        "corpus = corpus.jsonl\nkeywords = keywords.txt\nseq_len = 100\nsynth_docs = 160\nsynth_max_len = 100\nepochs = 4\nseed = 11\n",
    ))?;
    inn(root, &["-c", "run.conf", "synth"])?;
    for run in ["a", "b"] {
        inn(
            root,
            &[
                "-c",
                "run.conf",
                "--set",
                &format!("output_dir=out-{run}"),
                "--set",
                &format!("model=out-{run}/model.inn"),
                "train",
            ],
        )?;
    }
    let read = |p: &str| ok(fs::read(root.join(p)));
    ensure!(read("out-a/history.csv")? == read("out-b/history.csv")?, "history files differ");
    ensure!(read("out-a/model.inn")? == read("out-b/model.inn")?, "model files differ");

    let docs: Vec<Document> =
        ok(inn_core::corpus::read_corpus_file(root.join("corpus.jsonl")))?.into_iter().take(100).collect();
    let mut scores = Vec::new();
    for run in ["a", "b"] {
        let model: inn_core::Model = ok(load_model(root.join(format!("out-{run}/model.inn"))))?;
        let analyzed = ok(model.preprocessing.analyze_corpus(&docs))?;
        let s = ok(model.scores(&model.featurize(&analyzed)))?;
        scores.push(s.iter().map(|x| x.to_bits()).collect::<Vec<u64>>());
    }
    ensure!(scores[0].len() == 100 && scores[0] == scores[1], "predictions differ");

    let mut subset = Vec::new();
    ok(write_corpus(&mut subset, &docs))?;
    ok(fs::write(root.join("hundred.jsonl"), subset))?;
    for run in ["a", "b"] {
        inn(
            root,
            &[
                "-c",
                "run.conf",
                "--set",
                &format!("output_dir=out-{run}"),
                "--set",
                &format!("model=out-{run}/model.inn"),
                "filter",
                "--input",
                "hundred.jsonl",
            ],
        )?;
    }
    ensure!(read("out-a/ranked.tsv")? == read("out-b/ranked.tsv")?, "filter rankings differ");
    Ok("byte-identical history and model files; 100 predictions bit-identical".into())
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("keyword centrality on the three-keyword path fixture", network_one),
        ("centrality oracles on random graphs", centrality_oracles),
        ("gradient check", gradient_check),
        ("metric identities", metric_identities),
        ("end-to-end synthetic run", end_to_end),
        ("NKC ablation direction", ablation_direction),
        ("1% training subsample", small_data),
        ("training determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or("panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
