//! Candidate scoring and exponentially weighted pooling.
//!
//! For an entity `u` with neighbors `(r, v)`, each neighbor yields the N2T row
//! `W·act(v - r) + b` (inverse edges use `v + r`), the mean of those
//! representations yields the Agg2T row, and each type column is pooled with
//! weights `softmax(alpha * column)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kg::{AugmentedGraph, Neighbor, NodeRef};
use crate::params::{Matrix, ParameterSet};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    /// Pooling temperature.
    pub alpha: f64,
    pub use_agg2t: bool,
    /// ReLU on neighbor and aggregated representations.
    pub use_activation: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { alpha: 0.5, use_agg2t: true, use_activation: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Aggregation,
    Neighbor(Neighbor),
}

/// Everything computed for one entity: candidate rows, pooling weights, pooled
/// scores, and the intermediates the backward pass reuses.
#[derive(Debug, Clone)]
pub struct ScoreBundle<F> {
    pub entity: u32,
    /// `[Aggregation]` (when enabled) followed by the neighbors, in order.
    pub sources: Vec<Source>,
    /// (1+m)×L, masked entries are `-inf`.
    pub candidate_scores: Matrix<F>,
    pub weights: Matrix<F>,
    pub pooled: Vec<F>,
    /// False for a column whose candidates are all masked; its pooled value is `-inf`.
    pub live: Vec<bool>,
    /// m×k pre-activation neighbor representations.
    pub reps: Matrix<F>,
    /// Mean of `reps` when the aggregated row is present.
    pub aggregate: Option<Vec<F>>,
    pub alpha: F,
    pub use_activation: bool,
}

impl<F: Real> ScoreBundle<F> {
    pub fn num_candidates(&self) -> usize {
        self.sources.len()
    }

    /// Row index of the first neighbor candidate.
    pub fn neighbor_offset(&self) -> usize {
        usize::from(self.aggregate.is_some())
    }
}

#[inline]
pub(crate) fn activate<F: Real>(z: F, use_activation: bool) -> F {
    if use_activation && z <= F::zero() {
        F::zero()
    } else {
        z
    }
}

/// `n_e - n_r` for forward edges, `n_e + n_r` for inverse edges.
pub fn neighbor_rep<F: Real>(params: &ParameterSet<F>, nb: &Neighbor, out: &mut [F]) {
    let target = params.node_embedding(nb.target);
    let rel = params.relation.row(nb.relation as usize);
    if nb.inverted {
        for ((o, &t), &r) in out.iter_mut().zip(target).zip(rel) {
            *o = t + r;
        }
    } else {
        for ((o, &t), &r) in out.iter_mut().zip(target).zip(rel) {
            *o = t - r;
        }
    }
}

/// N2T relevance of one neighbor to every type.
pub fn n2t_scores<F: Real>(params: &ParameterSet<F>, nb: &Neighbor, use_activation: bool) -> Vec<F> {
    let mut rep = vec![F::zero(); params.dim];
    neighbor_rep(params, nb, &mut rep);
    rep.iter_mut().for_each(|z| *z = activate(*z, use_activation));
    let mut out = vec![F::zero(); params.num_types()];
    params.head.apply(&rep, &mut out);
    out
}

/// Mean of the neighbor representations and its Agg2T scores.
pub fn agg2t_scores<F: Real>(
    params: &ParameterSet<F>,
    reps: &Matrix<F>,
    use_activation: bool,
) -> Result<(Vec<F>, Vec<F>)> {
    if reps.rows() == 0 {
        return Err(Error::EmptyNeighbors);
    }
    let mut h = vec![F::zero(); params.dim];
    for j in 0..reps.rows() {
        for (acc, &z) in h.iter_mut().zip(reps.row(j)) {
            *acc += z;
        }
    }
    let inv = F::one() / F::lit(reps.rows() as f64);
    h.iter_mut().for_each(|x| *x *= inv);
    let act: Vec<F> = h.iter().map(|&z| activate(z, use_activation)).collect();
    let mut out = vec![F::zero(); params.num_types()];
    params.aggregation_head().apply(&act, &mut out);
    Ok((h, out))
}

/// Softmax-weighted average with temperature `alpha`. `-inf` entries get weight 0.
pub fn pool<F: Real>(candidates: &[F], alpha: F) -> Result<(F, Vec<F>)> {
    let mut weights = vec![F::zero(); candidates.len()];
    let value = pool_into(candidates.iter().copied(), alpha, &mut weights)?;
    Ok((value, weights))
}

fn pool_into<F: Real>(candidates: impl Iterator<Item = F> + Clone, alpha: F, weights: &mut [F]) -> Result<F> {
    let max = candidates.clone().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return Err(if weights.is_empty() { Error::EmptyNeighbors } else { Error::AllMasked });
    }
    let mut total = F::zero();
    for (w, x) in weights.iter_mut().zip(candidates.clone()) {
        *w = if x == F::neg_infinity() { F::zero() } else { (alpha * (x - max)).exp() };
        total += *w;
    }
    let mut value = F::zero();
    for (w, x) in weights.iter_mut().zip(candidates) {
        *w /= total;
        if *w > F::zero() {
            value += *w * x;
        }
    }
    Ok(value)
}

/// Scores `entity` from the given neighbor multiset.
///
/// With `mask = Some(train_types)`, the `(has_type, t)` candidate is removed from
/// column `t` and the aggregated candidate is removed from every column in
/// `train_types`, so no label can predict itself.
pub fn score_entity<F: Real>(
    params: &ParameterSet<F>,
    entity: u32,
    sampled: &[Neighbor],
    opts: &ScoreOptions,
    mask: Option<&[u32]>,
) -> Result<ScoreBundle<F>> {
    if sampled.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    let (k, num_types, m) = (params.dim, params.num_types(), sampled.len());
    let offset = usize::from(opts.use_agg2t);
    let rows = m + offset;

    let mut reps = Matrix::zeros(m, k);
    for (j, nb) in sampled.iter().enumerate() {
        neighbor_rep(params, nb, reps.row_mut(j));
    }

    let mut scores = Matrix::zeros(rows, num_types);
    let mut act = vec![F::zero(); k];
    for j in 0..m {
        for (a, &z) in act.iter_mut().zip(reps.row(j)) {
            *a = activate(z, opts.use_activation);
        }
        params.head.apply(&act, scores.row_mut(j + offset));
    }
    let aggregate = if opts.use_agg2t {
        let (h, agg) = agg2t_scores(params, &reps, opts.use_activation)?;
        scores.row_mut(0).copy_from_slice(&agg);
        Some(h)
    } else {
        None
    };

    if let Some(labels) = mask {
        for (j, nb) in sampled.iter().enumerate() {
            if let (true, NodeRef::Type(t)) = (nb.is_type_edge(), nb.target) {
                scores.set(j + offset, t as usize, F::neg_infinity());
            }
        }
        if opts.use_agg2t {
            for &t in labels {
                scores.set(0, t as usize, F::neg_infinity());
            }
        }
    }

    let alpha = F::lit(opts.alpha);
    let mut weights = Matrix::zeros(rows, num_types);
    let mut pooled = vec![F::neg_infinity(); num_types];
    let mut live = vec![true; num_types];
    let mut column = vec![F::zero(); rows];
    let mut column_weights = vec![F::zero(); rows];
    for i in 0..num_types {
        for (j, c) in column.iter_mut().enumerate() {
            *c = scores.get(j, i);
        }
        match pool_into(column.iter().copied(), alpha, &mut column_weights) {
            Ok(v) => {
                pooled[i] = v;
                for (j, &w) in column_weights.iter().enumerate() {
                    weights.set(j, i, w);
                }
            }
            Err(_) => live[i] = false,
        }
    }

    let mut sources = Vec::with_capacity(rows);
    if opts.use_agg2t {
        sources.push(Source::Aggregation);
    }
    sources.extend(sampled.iter().map(|&nb| Source::Neighbor(nb)));

    Ok(ScoreBundle {
        entity,
        sources,
        candidate_scores: scores,
        weights,
        pooled,
        live,
        reps,
        aggregate,
        alpha,
        use_activation: opts.use_activation,
    })
}

/// Streaming pooled scores over all neighbors of `entity`, unmasked; keeps only
/// O(L) state. Entities without neighbors fall back to the classifier bias.
pub fn infer_scores<F: Real>(
    params: &ParameterSet<F>,
    graph: &AugmentedGraph,
    entity: u32,
    opts: &ScoreOptions,
) -> Result<Vec<F>> {
    let neighbors = graph.neighbors(entity)?;
    if neighbors.is_empty() {
        return Ok(params.head.bias.clone());
    }
    let (k, num_types) = (params.dim, params.num_types());
    let alpha = F::lit(opts.alpha);
    let mut pool = OnlinePool::new(num_types, alpha);
    let mut rep = vec![F::zero(); k];
    let mut act = vec![F::zero(); k];
    let mut sum = vec![F::zero(); k];
    let mut row = vec![F::zero(); num_types];
    for nb in neighbors {
        neighbor_rep(params, nb, &mut rep);
        for ((a, s), &z) in act.iter_mut().zip(sum.iter_mut()).zip(&rep) {
            *a = activate(z, opts.use_activation);
            *s += z;
        }
        params.head.apply(&act, &mut row);
        pool.push(&row);
    }
    if opts.use_agg2t {
        let inv = F::one() / F::lit(neighbors.len() as f64);
        for (a, &s) in act.iter_mut().zip(&sum) {
            *a = activate(s * inv, opts.use_activation);
        }
        params.aggregation_head().apply(&act, &mut row);
        pool.push(&row);
    }
    Ok(pool.finish())
}

/// Columnwise running softmax-weighted mean.
struct OnlinePool<F> {
    alpha: F,
    max: Vec<F>,
    mass: Vec<F>,
    weighted: Vec<F>,
}

impl<F: Real> OnlinePool<F> {
    fn new(len: usize, alpha: F) -> Self {
        OnlinePool {
            alpha,
            max: vec![F::neg_infinity(); len],
            mass: vec![F::zero(); len],
            weighted: vec![F::zero(); len],
        }
    }

    fn push(&mut self, row: &[F]) {
        for (i, &x) in row.iter().enumerate() {
            let m = self.max[i];
            if x > m {
                let scale = (self.alpha * (m - x)).exp();
                self.mass[i] = self.mass[i] * scale + F::one();
                self.weighted[i] = self.weighted[i] * scale + x;
                self.max[i] = x;
            } else {
                let w = (self.alpha * (x - m)).exp();
                self.mass[i] += w;
                self.weighted[i] += w * x;
            }
        }
    }

    fn finish(self) -> Vec<F> {
        self.weighted.iter().zip(&self.mass).map(|(&t, &s)| t / s).collect()
    }
}
