mod common;

use cet_core::dataset::Split;
use cet_core::scorer::infer_scores;
use cet_core::{evaluate, explain, fit, init_params, rank_one, Sequential, TrainConfig};

#[test]
fn explanation_matches_evaluation_scores() {
    let data = common::synthetic_kg(2).assemble().unwrap();
    let config = TrainConfig { dim: 12, max_epochs: 30, eval_every: 10, seed: 2, ..TrainConfig::default() };
    let graph = data.graph(true).unwrap();
    let params = init_params::<f32>(&data.vocab, config.dim, config.seed, false);
    let out = fit(params, &graph, &data.dataset, &config, &Sequential, |_| {}).unwrap();
    let opts = config.score_options();
    let report = evaluate(&out.params, &graph, &data.dataset, Split::Test, &opts, true, &Sequential).unwrap();

    for sample in report.ranks.iter().take(25) {
        let entity = data.vocab.entities.name(sample.entity).unwrap();
        let ty = data.vocab.types.name(sample.ty).unwrap();
        let x = explain(&out.params, &graph, &data.vocab, entity, ty, &opts, usize::MAX).unwrap();
        let scores = infer_scores(&out.params, &graph, sample.entity, &opts).unwrap();
        let score = scores[sample.ty as usize] as f64;
        assert!((x.pooled - score).abs() < 1e-6, "{} vs {score}", x.pooled);
        assert_eq!(rank_one(&scores, sample.ty, data.dataset.filter(sample.entity)).unwrap(), sample.rank);

        assert_eq!(x.rows.len(), x.total_sources);
        assert!(x.rows.windows(2).all(|w| w[0].score >= w[1].score));
        let weight_sum: f64 = x.rows.iter().map(|r| r.weight).sum();
        assert!((weight_sum - 1.0).abs() < 1e-5);
        let weighted: f64 = x.rows.iter().map(|r| r.weight * r.score).sum();
        assert!((weighted - x.pooled).abs() < 1e-4, "{weighted} vs {}", x.pooled);
    }
}
