//! Acceptance suite: one test per criterion, each printing a
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! Criteria 1 and 6 need the public benchmark files. Point `CET_FB15KET_DIR` and
//! `CET_YAGO43KET_DIR` at them (defaults `data/FB15kET`, `data/YAGO43kET` under
//! the workspace root). Criterion 7 is a long reproduction that only runs with
//! `CET_FULL_REPRO=1`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use cet::cli::{cmd_inspect, InspectArgs};
use cet::{config, report, Checkpoint, DataPaths, DatasetStats, RawDataset, RayonExecutor};
use cet_core::dataset::{Assembled, Split};
use cet_core::gradcheck::{default_suite, run_case, DEFAULT_STEP, TOLERANCE};
use cet_core::train::LossChoice;
use cet_core::{evaluate, fit, init_params, pool, rank_one, FitOutcome, MetricsReport, Sequential, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

fn dataset_dir(var: &str, default: &str) -> PathBuf {
    std::env::var_os(var)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(default))
}

fn load_benchmark(var: &str, default: &str) -> Result<RawDataset, String> {
    let dir = dataset_dir(var, default);
    RawDataset::load(&DataPaths::in_dir(&dir)).map_err(|e| format!("dataset not available ({e}); set {var}"))
}

fn train(data: &Assembled, config: &TrainConfig, threads: usize) -> FitOutcome<f32> {
    let graph = data.graph(config.use_tan).unwrap();
    let params = init_params::<f32>(&data.vocab, config.dim, config.seed, config.separate_heads);
    let exec = RayonExecutor::new(threads).unwrap();
    fit(params, &graph, &data.dataset, config, &exec, |_| {}).unwrap()
}

fn test_metrics(data: &Assembled, config: &TrainConfig, out: &FitOutcome<f32>) -> MetricsReport {
    let graph = data.graph(config.use_tan).unwrap();
    evaluate(&out.params, &graph, &data.dataset, Split::Test, &config.score_options(), true, &Sequential).unwrap()
}

#[test]
fn criterion_1_ingestion_counts() {
    let expected: [(&str, &str, [usize; 7]); 2] = [
        ("CET_FB15KET_DIR", "FB15kET", [14951, 1345, 3584, 483142, 136618, 15848, 15847]),
        ("CET_YAGO43KET_DIR", "YAGO43kET", [42334, 37, 45182, 331686, 375853, 43111, 43119]),
    ];
    let mut failures = Vec::new();
    for (var, name, want) in expected {
        let started = Instant::now();
        let got = load_benchmark(var, name).and_then(|raw| raw.assemble().map_err(|e| e.to_string()));
        let elapsed = started.elapsed();
        match got {
            Err(e) => failures.push(format!("{name}: {e}")),
            Ok(a) => {
                let stats = DatasetStats::of(&a);
                if stats.as_array() != want {
                    failures.push(format!("{name}: counts {:?}, expected {want:?}", stats.as_array()));
                }
                if elapsed >= Duration::from_secs(30) {
                    failures.push(format!("{name}: took {elapsed:.1?}"));
                }
                let args = InspectArgs {
                    data: cet::cli::DataArgs {
                        data_dir: Some(dataset_dir(var, name)),
                        triples: None,
                        train_pairs: None,
                        valid_pairs: None,
                        test_pairs: None,
                        subsample: None,
                        subsample_seed: 0,
                    },
                };
                if let Err(e) = cmd_inspect(&args) {
                    failures.push(format!("{name}: inspect failed: {e}"));
                }
            }
        }
    }
    verdict(1, failures.is_empty(), &failures.join("; "));
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_2_gradient_check() {
    let started = Instant::now();
    let suite = default_suite(5);
    let mut worst = (0.0f64, "none", 0u64);
    let mut covered = BTreeSet::new();
    for case in &suite {
        let r = run_case(case, DEFAULT_STEP).unwrap();
        assert!(r.dim <= 5 && r.num_types <= 4 && r.num_sampled <= 3);
        covered.insert((format!("{:?}", case.loss).starts_with("Fna"), case.use_agg2t, case.mask));
        if r.max_rel_err > worst.0 || r.max_rel_err.is_nan() {
            worst = (r.max_rel_err, r.worst_tensor, case.seed);
        }
    }
    let elapsed = started.elapsed();
    let ok = suite.len() >= 100 && covered.len() == 8 && worst.0 < TOLERANCE && elapsed < Duration::from_secs(60);
    verdict(
        2,
        ok,
        &format!("{} cases, max rel err {:e} ({} seed {}), {elapsed:.1?}", suite.len(), worst.0, worst.1, worst.2),
    );
    assert!(ok);
}

#[test]
fn criterion_3_pooling_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = [0.0f64; 5];
    for _ in 0..2000 {
        let n = rng.gen_range(1..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let alpha = [0.5, 0.01, 3.0][rng.gen_range(0..3)];
        let (v, w) = pool(&x, alpha).unwrap();
        worst[0] = worst[0].max((w.iter().sum::<f64>() - 1.0).abs());
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "pooled {v} outside [{lo}, {hi}]");
        let mut shuffled = x.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        worst[1] = worst[1].max((pool(&shuffled, alpha).unwrap().0 - v).abs());
        let c = rng.gen_range(-50.0..50.0);
        let shifted: Vec<f64> = x.iter().map(|y| y + c).collect();
        worst[2] = worst[2].max((pool(&shifted, alpha).unwrap().0 - (v + c)).abs());
        // on a 0.05 grid the runner-up is either tied with the max or at least
        // 0.05 below it, so its weight at alpha = 1e3 is below e^-50
        let grid: Vec<f64> = x.iter().map(|y| (y / 0.05).round() * 0.05).collect();
        let grid_max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst[3] = worst[3].max((pool(&grid, 1e3).unwrap().0 - grid_max).abs());
        let mean = x.iter().sum::<f64>() / n as f64;
        // deviation from the mean grows like alpha * variance; keep values in [-2, 2]
        let small: Vec<f64> = x.iter().map(|y| y / 10.0).collect();
        let small_mean = mean / 10.0;
        worst[4] = worst[4].max((pool(&small, 1e-6).unwrap().0 - small_mean).abs());
    }
    let near_max = pool(&[1.0f64, 0.95, -3.0], 1e3).unwrap().0;
    worst[3] = worst[3].max((near_max - 1.0).abs());
    let ok = worst[0] < 1e-6 && worst[1] < 1e-9 && worst[2] < 1e-9 && worst[3] < 1e-4 && worst[4] < 1e-4;
    verdict(
        3,
        ok,
        &format!(
            "sum {:e}, perm {:e}, shift {:e}, max {:e}, mean {:e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    );
    assert!(ok);
}

/// Mean 1-based position of `gold` over every descending ordering of the
/// candidates, enumerated explicitly.
fn brute_force_rank(scores: &[f64], gold: usize, candidates: &[usize]) -> f64 {
    fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut all = Vec::new();
    permute(&mut candidates.to_vec(), 0, &mut all);
    let (mut total, mut count) = (0.0, 0.0);
    for order in all {
        if order.windows(2).all(|w| scores[w[0]] >= scores[w[1]]) {
            total += (order.iter().position(|&c| c == gold).unwrap() + 1) as f64;
            count += 1.0;
        }
    }
    total / count
}

#[test]
fn criterion_4_ranking_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_diff = 0.0f64;
    let mut ties_seen = 0;
    for _ in 0..3000 {
        let l = rng.gen_range(1..=6);
        let scores: Vec<f64> = (0..l).map(|_| rng.gen_range(0..4) as f64 * 0.5).collect();
        let gold = rng.gen_range(0..l);
        let filter: Vec<u32> = (0..l as u32).filter(|_| rng.gen_bool(0.3)).collect();
        let candidates: Vec<usize> = (0..l).filter(|&t| t == gold || !filter.contains(&(t as u32))).collect();
        ties_seen += usize::from(candidates.iter().any(|&c| c != gold && scores[c] == scores[gold]));
        let fast = rank_one(&scores, gold as u32, &filter).unwrap();
        max_diff = max_diff.max((fast - brute_force_rank(&scores, gold, &candidates)).abs());
    }

    // metrics recomputed from the on-disk dump of a real evaluation
    let data = common::synthetic_kg(4).assemble().unwrap();
    let config = TrainConfig { dim: 16, max_epochs: 5, eval_every: 5, seed: 4, ..TrainConfig::default() };
    let out = train(&data, &config, 1);
    let m = test_metrics(&data, &config, &out);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ranks.tsv");
    std::fs::write(&path, report::rank_dump(&data.vocab, &m.ranks)).unwrap();
    let ranks = report::parse_rank_dump(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let n = ranks.len() as f64;
    let recomputed = [
        ranks.iter().sum::<f64>() / n,
        ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
        ranks.iter().filter(|&&r| r <= 1.0).count() as f64 / n,
        ranks.iter().filter(|&&r| r <= 3.0).count() as f64 / n,
        ranks.iter().filter(|&&r| r <= 10.0).count() as f64 / n,
    ];
    let reported = [m.mr, m.mrr, m.hits1, m.hits3, m.hits10];
    let metric_diff = recomputed.iter().zip(&reported).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let ok = max_diff == 0.0 && ties_seen > 100 && ranks.len() == m.count && metric_diff <= 1e-12;
    verdict(
        4,
        ok,
        &format!("rank diff {max_diff}, {ties_seen} tie cases, metric diff {metric_diff:e} over {} ranks", ranks.len()),
    );
    assert!(ok);
}

fn synthetic_config(loss: LossChoice) -> TrainConfig {
    TrainConfig { max_epochs: 500, loss, seed: 5, ..TrainConfig::default() }
}

#[test]
fn criterion_5_synthetic_convergence() {
    let data = common::synthetic_kg(5).assemble().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for loss in [LossChoice::Fna, LossChoice::Bce] {
        let config = synthetic_config(loss);
        let started = Instant::now();
        let out = train(&data, &config, 0);
        let elapsed = started.elapsed();
        let m = test_metrics(&data, &config, &out);
        let pass = m.mrr >= 0.95 && m.hits1 >= 0.9 && elapsed < Duration::from_secs(120);
        ok &= pass;
        lines.push(format!(
            "{}: mrr {:.4} hits@1 {:.4} best epoch {} in {elapsed:.1?}",
            config::loss_name(loss),
            m.mrr,
            m.hits1,
            out.best_epoch
        ));
    }
    verdict(5, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_6_ablation_directions() {
    let raw = match load_benchmark("CET_FB15KET_DIR", "FB15kET") {
        Ok(r) => r,
        Err(e) => {
            verdict(6, false, &e);
            panic!("{e}");
        }
    };
    let data = raw.subsample_entities(0.05, 6).assemble().unwrap();
    let run = |loss, mask_mode| {
        let config = TrainConfig { max_epochs: 100, loss, mask_mode, seed: 6, ..TrainConfig::default() };
        train(&data, &config, 0).best_valid_mrr.unwrap()
    };
    let fna = run(LossChoice::Fna, false);
    let bce = run(LossChoice::Bce, false);
    let masked = run(LossChoice::Fna, true);
    let ok = fna >= bce && (masked - fna).abs() <= 0.03;
    verdict(6, ok, &format!("valid mrr fna {fna:.4} bce {bce:.4} mask {masked:.4}"));
    assert!(ok);
}

#[test]
fn criterion_7_full_reproduction() {
    if std::env::var_os("CET_FULL_REPRO").is_none() {
        println!("criterion 7: SKIP long reproduction, run with CET_FULL_REPRO=1 (see README)");
        return;
    }
    // (env var, directory, beta, MRR/H@1/H@3/H@10 targets or just MRR)
    type Target = (&'static str, &'static str, f64, Option<[f64; 4]>, f64);
    let targets: [Target; 2] = [
        ("CET_FB15KET_DIR", "FB15kET", 4.0, Some([0.697, 0.613, 0.745, 0.856]), 0.697),
        ("CET_YAGO43KET_DIR", "YAGO43kET", 2.0, None, 0.503),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for (var, name, beta, full, mrr_target) in targets {
        let data = load_benchmark(var, name).and_then(|r| r.assemble().map_err(|e| e.to_string()));
        let data = match data {
            Ok(d) => d,
            Err(e) => {
                ok = false;
                lines.push(format!("{name}: {e}"));
                continue;
            }
        };
        let config = TrainConfig { beta, ..TrainConfig::default() };
        let out = train(&data, &config, 0);
        let m = test_metrics(&data, &config, &out);
        let got = [m.mrr, m.hits1, m.hits3, m.hits10];
        let want = full.unwrap_or([mrr_target, m.hits1, m.hits3, m.hits10]);
        let pass = got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 0.02);
        ok &= pass;
        lines.push(format!("{name}: mrr {:.3} h1 {:.3} h3 {:.3} h10 {:.3}", got[0], got[1], got[2], got[3]));
    }
    verdict(7, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let data = common::synthetic_kg(5).assemble().unwrap();
    let config = synthetic_config(LossChoice::Fna);
    let mut runs = Vec::new();
    for threads in [1, 4] {
        let out = train(&data, &config, threads);
        let log: Vec<String> = out.log.iter().map(report::log_line).collect();
        let ckpt = Checkpoint { vocab: data.vocab.clone(), config: config::to_entries(&config), params: out.params };
        let bytes = ckpt.encode().unwrap();
        let reencoded = Checkpoint::decode(&bytes).unwrap().encode().unwrap();
        assert_eq!(bytes, reencoded);
        runs.push((log, bytes));
    }
    let same_log = runs[0].0 == runs[1].0;
    let same_ckpt = runs[0].1 == runs[1].1;
    let mut differing: BTreeMap<&str, bool> = BTreeMap::new();
    differing.insert("log", !same_log);
    differing.insert("checkpoint", !same_ckpt);
    let ok = same_log && same_ckpt;
    verdict(8, ok, &format!("{} log lines, {} checkpoint bytes, differs {differing:?}", runs[0].0.len(), runs[0].1.len()));
    assert!(ok);
}
