//! Minibatch training with neighbor sampling (or full neighborhoods plus the
//! label mask), periodic validation, and best-of-validation checkpoint retention.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Split, TypingDataset};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::exec::Executor;
use crate::kg::{AugmentedGraph, Neighbor};
use crate::loss::{backward_into, GradientSet, LossKind};
use crate::optim::{AdamConfig, AdamState};
use crate::params::ParameterSet;
use crate::real::Real;
use crate::scorer::{score_entity, ScoreOptions};

/// Entities per gradient shard. Fixed so the reduction order never depends on
/// the number of worker threads.
const SHARD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossChoice {
    Bce,
    Fna,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub sample_size: usize,
    pub max_epochs: usize,
    pub eval_every: usize,
    pub loss: LossChoice,
    pub use_agg2t: bool,
    /// Types as neighbors: training pairs become `has_type` edges.
    pub use_tan: bool,
    /// Score with every neighbor and mask self-revealing candidates instead of sampling.
    pub mask_mode: bool,
    pub use_activation: bool,
    pub separate_heads: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            alpha: 0.5,
            beta: 4.0,
            lr: 0.001,
            batch_size: 128,
            sample_size: 10,
            max_epochs: 1000,
            eval_every: 25,
            loss: LossChoice::Fna,
            use_agg2t: true,
            use_tan: true,
            mask_mode: false,
            use_activation: true,
            separate_heads: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim > 0),
            ("alpha", self.alpha > 0.0 && self.alpha.is_finite()),
            ("beta", self.beta > 0.0 && self.beta.is_finite()),
            ("lr", self.lr > 0.0 && self.lr.is_finite()),
            ("batch_size", self.batch_size > 0),
            ("sample_size", self.sample_size > 0),
            ("eval_every", self.eval_every > 0),
        ];
        for (name, ok) in positive {
            if !ok {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn loss_kind(&self) -> LossKind {
        match self.loss {
            LossChoice::Bce => LossKind::Bce,
            LossChoice::Fna => LossKind::Fna { beta: self.beta },
        }
    }

    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions { alpha: self.alpha, use_agg2t: self.use_agg2t, use_activation: self.use_activation }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

/// `sample_size` i.i.d. uniform draws with replacement from the entity's neighbors.
pub fn sample_neighbors<R: Rng + ?Sized>(
    graph: &AugmentedGraph,
    entity: u32,
    sample_size: usize,
    rng: &mut R,
) -> Result<Vec<Neighbor>> {
    let all = graph.neighbors(entity)?;
    if all.is_empty() {
        return Err(Error::IsolatedEntity(entity));
    }
    Ok((0..sample_size).map(|_| all[rng.gen_range(0..all.len())]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean per-entity loss.
    pub loss: f64,
    pub entities: usize,
    /// Labeled entities without neighbors; they cannot be scored.
    pub skipped_isolated: usize,
}

/// One shuffled pass over every labeled entity with at least one neighbor.
pub fn train_epoch<F: Real, X: Executor>(
    params: &mut ParameterSet<F>,
    state: &mut AdamState<F>,
    graph: &AugmentedGraph,
    dataset: &TypingDataset,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    exec: &X,
) -> Result<EpochStats> {
    let labeled = dataset.labeled_entities();
    let mut entities: Vec<u32> = labeled.iter().copied().filter(|&e| graph.degree(e) > 0).collect();
    let skipped_isolated = labeled.len() - entities.len();
    entities.shuffle(rng);

    let opts = config.score_options();
    let kind = config.loss_kind();
    let mut total = 0.0f64;
    for batch in entities.chunks(config.batch_size) {
        let inputs: Vec<(u32, Vec<Neighbor>)> = batch
            .iter()
            .map(|&e| {
                let nbs = if config.mask_mode {
                    graph.neighbors(e).map(<[Neighbor]>::to_vec)
                } else {
                    sample_neighbors(graph, e, config.sample_size, rng)
                };
                nbs.map(|n| (e, n))
            })
            .collect::<Result<_>>()?;

        let snapshot: &ParameterSet<F> = params;
        let shards = exec.map(inputs.len().div_ceil(SHARD), |s| -> Result<(GradientSet<F>, Vec<f64>)> {
            let mut grads = GradientSet::zeros_like(snapshot);
            let mut losses = Vec::with_capacity(SHARD);
            for (e, nbs) in &inputs[s * SHARD..((s + 1) * SHARD).min(inputs.len())] {
                let mask = config.mask_mode.then(|| dataset.train_labels(*e));
                let bundle = score_entity(snapshot, *e, nbs, &opts, mask)?;
                let loss = backward_into(snapshot, &bundle, dataset.train_labels(*e), kind, &mut grads);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss(*e));
                }
                losses.push(loss.as_f64());
            }
            Ok((grads, losses))
        });

        let mut reduced: Option<GradientSet<F>> = None;
        for shard in shards {
            let (grads, losses) = shard?;
            total += losses.iter().sum::<f64>();
            match reduced.as_mut() {
                Some(acc) => acc.add_assign(&grads),
                None => reduced = Some(grads),
            }
        }
        if let Some(grads) = reduced {
            state.step(params, &grads)?;
        }
    }
    let count = entities.len();
    Ok(EpochStats { loss: if count == 0 { 0.0 } else { total / count as f64 }, entities: count, skipped_isolated })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub loss: f64,
    pub valid_mrr: Option<f64>,
}

/// Keeps the parameters with the highest validation MRR seen so far.
#[derive(Debug, Clone)]
pub struct BestTracker<F> {
    best: Option<(usize, f64, ParameterSet<F>)>,
}

impl<F: Real> BestTracker<F> {
    pub fn new() -> Self {
        BestTracker { best: None }
    }

    /// Ties keep the earlier snapshot.
    pub fn observe(&mut self, epoch: usize, mrr: f64, params: &ParameterSet<F>) {
        if self.best.as_ref().is_none_or(|(_, m, _)| mrr > *m) {
            self.best = Some((epoch, mrr, params.clone()));
        }
    }

    pub fn into_best(self) -> Option<(usize, f64, ParameterSet<F>)> {
        self.best
    }
}

impl<F: Real> Default for BestTracker<F> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome<F> {
    pub params: ParameterSet<F>,
    /// Epoch of the returned parameters.
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub log: Vec<LogRecord>,
    pub skipped_isolated: usize,
}

/// Trains for `max_epochs`, validating every `eval_every` epochs, and returns the
/// best-validated parameters. Without any validation point the final parameters
/// are returned.
pub fn fit<F: Real, X: Executor>(
    mut params: ParameterSet<F>,
    graph: &AugmentedGraph,
    dataset: &TypingDataset,
    config: &TrainConfig,
    exec: &X,
    mut on_record: impl FnMut(&LogRecord),
) -> Result<FitOutcome<F>> {
    config.validate()?;
    let mut state = AdamState::new(&params, config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let opts = config.score_options();

    let mut tracker = BestTracker::new();
    let mut log = Vec::with_capacity(config.max_epochs);
    let mut skipped_isolated = 0;
    for epoch in 1..=config.max_epochs {
        let stats = train_epoch(&mut params, &mut state, graph, dataset, config, &mut rng, exec)?;
        skipped_isolated = stats.skipped_isolated;
        let valid_mrr = if epoch % config.eval_every == 0 {
            let report = evaluate(&params, graph, dataset, Split::Valid, &opts, true, exec)?;
            tracker.observe(epoch, report.mrr, &params);
            Some(report.mrr)
        } else {
            None
        };
        let record = LogRecord { epoch, loss: stats.loss, valid_mrr };
        on_record(&record);
        log.push(record);
    }

    let (best_epoch, best_valid_mrr, params) = match tracker.into_best() {
        Some((epoch, mrr, best)) => (epoch, Some(mrr), best),
        None => (config.max_epochs, None, params),
    };
    Ok(FitOutcome { params, best_epoch, best_valid_mrr, log, skipped_isolated })
}
