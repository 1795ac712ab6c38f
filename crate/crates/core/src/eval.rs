//! Filtered ranking metrics: MR, MRR, Hits@1/3/10.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Split, TypingDataset};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::kg::AugmentedGraph;
use crate::params::ParameterSet;
use crate::real::Real;
use crate::scorer::{infer_scores, ScoreOptions};

/// Rank of `gold` among all types after removing the other known types in
/// `filter` (sorted). Ties count half: `1 + #greater + #ties / 2`.
pub fn rank_one<F: Real>(scores: &[F], gold: u32, filter: &[u32]) -> Result<f64> {
    let g = gold as usize;
    if g >= scores.len() {
        return Err(Error::IndexOutOfRange { kind: "type", index: g, len: scores.len() });
    }
    let target = scores[g];
    let mut skip = filter.iter().peekable();
    let (mut greater, mut ties) = (0usize, 0usize);
    for (i, &s) in scores.iter().enumerate() {
        while skip.next_if(|&&t| (t as usize) < i).is_some() {}
        if skip.next_if(|&&t| t as usize == i).is_some() || i == g {
            continue;
        }
        if s > target {
            greater += 1;
        } else if s == target {
            ties += 1;
        }
    }
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedSample {
    pub entity: u32,
    pub ty: u32,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub count: usize,
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    /// One entry per evaluated pair, in split order.
    pub ranks: Vec<RankedSample>,
}

pub fn metrics_from_ranks(ranks: Vec<RankedSample>) -> Result<MetricsReport> {
    if ranks.is_empty() {
        return Err(Error::EmptySplit("ranks"));
    }
    let n = ranks.len() as f64;
    let (mut sum, mut recip, mut h1, mut h3, mut h10) = (0.0, 0.0, 0usize, 0usize, 0usize);
    for r in &ranks {
        sum += r.rank;
        recip += 1.0 / r.rank;
        h1 += usize::from(r.rank <= 1.0);
        h3 += usize::from(r.rank <= 3.0);
        h10 += usize::from(r.rank <= 10.0);
    }
    Ok(MetricsReport {
        count: ranks.len(),
        mr: sum / n,
        mrr: recip / n,
        hits1: h1 as f64 / n,
        hits3: h3 as f64 / n,
        hits10: h10 as f64 / n,
        ranks,
    })
}

/// Scores every entity of the split once with all of its neighbors and ranks
/// each of its pairs. `filtered = false` gives the raw setting (debug only).
pub fn evaluate<F: Real, X: Executor>(
    params: &ParameterSet<F>,
    graph: &AugmentedGraph,
    dataset: &TypingDataset,
    split: Split,
    opts: &ScoreOptions,
    filtered: bool,
    exec: &X,
) -> Result<MetricsReport> {
    let pairs = dataset.pairs(split);
    if pairs.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    let mut slot_of: BTreeMap<u32, usize> = BTreeMap::new();
    let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
    for (idx, &(e, _)) in pairs.iter().enumerate() {
        let slot = *slot_of.entry(e).or_insert_with(|| {
            groups.push((e, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(idx);
    }

    let per_entity = exec.map(groups.len(), |g| -> Result<Vec<(usize, f64)>> {
        let (entity, ref members) = groups[g];
        let scores = infer_scores(params, graph, entity, opts)?;
        let filter = if filtered { dataset.filter(entity) } else { &[] };
        members.iter().map(|&idx| Ok((idx, rank_one(&scores, pairs[idx].1, filter)?))).collect()
    });

    let mut ranks = vec![RankedSample { entity: 0, ty: 0, rank: 0.0 }; pairs.len()];
    for group in per_entity {
        for (idx, rank) in group? {
            let (entity, ty) = pairs[idx];
            ranks[idx] = RankedSample { entity, ty, rank };
        }
    }
    metrics_from_ranks(ranks)
}
