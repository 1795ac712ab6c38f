//! Which information sources drove a prediction, and which types a single
//! neighbor points to.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kg::{AugmentedGraph, Neighbor, Vocab};
use crate::params::ParameterSet;
use crate::real::Real;
use crate::scorer::{n2t_scores, score_entity, ScoreOptions, Source};

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRow {
    pub source: Source,
    /// `Aggregation` or a rendered `(relation, target)` pair.
    pub label: String,
    pub score: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub entity: String,
    pub ty: String,
    /// Pooled relevance of `(entity, ty)`.
    pub pooled: f64,
    /// Number of candidate sources before truncation.
    pub total_sources: usize,
    /// Descending by score.
    pub rows: Vec<ExplanationRow>,
}

pub const AGGREGATION_LABEL: &str = "Aggregation";

/// Scores the entity with all of its neighbors (no sampling, no mask) and
/// reports the `top_k` candidates of column `ty`.
pub fn explain<F: Real>(
    params: &ParameterSet<F>,
    graph: &AugmentedGraph,
    vocab: &Vocab,
    entity: &str,
    ty: &str,
    opts: &ScoreOptions,
    top_k: usize,
) -> Result<Explanation> {
    let e = vocab.entity_id(entity)?;
    let t = vocab.type_id(ty)? as usize;
    let neighbors = graph.neighbors(e)?;
    if neighbors.is_empty() {
        return Err(Error::IsolatedEntity(e));
    }
    let bundle = score_entity(params, e, neighbors, opts, None)?;
    let mut rows: Vec<ExplanationRow> = bundle
        .sources
        .iter()
        .enumerate()
        .map(|(j, source)| ExplanationRow {
            source: *source,
            label: match source {
                Source::Aggregation => AGGREGATION_LABEL.to_string(),
                Source::Neighbor(nb) => vocab.render_neighbor(nb),
            },
            score: bundle.candidate_scores.get(j, t).as_f64(),
            weight: bundle.weights.get(j, t).as_f64(),
        })
        .collect();
    rows.sort_by(|a, b| b.score.total_cmp(&a.score));
    let total_sources = rows.len();
    rows.truncate(top_k);
    Ok(Explanation {
        entity: entity.to_string(),
        ty: ty.to_string(),
        pooled: bundle.pooled[t].as_f64(),
        total_sources,
        rows,
    })
}

/// The `top_k` types a single neighbor scores highest, descending.
pub fn neighbor_profile<F: Real>(params: &ParameterSet<F>, nb: &Neighbor, use_activation: bool, top_k: usize) -> Vec<(u32, F)> {
    let mut scored: Vec<(u32, F)> =
        n2t_scores(params, nb, use_activation).into_iter().enumerate().map(|(i, s)| (i as u32, s)).collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
    scored.truncate(top_k);
    scored
}
