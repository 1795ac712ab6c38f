//! Train/valid/test typing splits and the per-entity filter sets used for ranking.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
pub use crate::kg::{RawPair, RawTriple};
use crate::kg::{build_vocab, AugmentedGraph, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypingDataset {
    pub num_entities: usize,
    pub num_types: usize,
    pub train: Vec<(u32, u32)>,
    pub valid: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
    /// Sorted train types per entity: the positives of the loss and the mask set.
    train_labels: Vec<Vec<u32>>,
    /// Sorted union of every known type per entity over all three splits.
    filter: Vec<Vec<u32>>,
}

impl TypingDataset {
    pub fn from_splits(
        num_entities: usize,
        num_types: usize,
        train: Vec<(u32, u32)>,
        valid: Vec<(u32, u32)>,
        test: Vec<(u32, u32)>,
    ) -> Self {
        let mut train_labels = vec![Vec::new(); num_entities];
        let mut filter = vec![Vec::new(); num_entities];
        for &(e, t) in &train {
            train_labels[e as usize].push(t);
        }
        for &(e, t) in train.iter().chain(&valid).chain(&test) {
            filter[e as usize].push(t);
        }
        for v in train_labels.iter_mut().chain(filter.iter_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        TypingDataset { num_entities, num_types, train, valid, test, train_labels, filter }
    }

    pub fn pairs(&self, split: Split) -> &[(u32, u32)] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train_labels(&self, entity: u32) -> &[u32] {
        &self.train_labels[entity as usize]
    }

    pub fn filter(&self, entity: u32) -> &[u32] {
        &self.filter[entity as usize]
    }

    /// Entities with at least one training type, ascending.
    pub fn labeled_entities(&self) -> Vec<u32> {
        (0..self.num_entities as u32).filter(|&e| !self.train_labels[e as usize].is_empty()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssembleReport {
    pub duplicate_triples: usize,
    pub duplicate_train_pairs: usize,
    pub dropped_valid_unseen: usize,
    pub dropped_test_unseen: usize,
    /// Valid/test pairs already present in an earlier split (or repeated).
    pub dropped_overlap: usize,
    /// Entities that only occur in the valid or test pairs.
    pub eval_only_entities: usize,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub vocab: Vocab,
    pub dataset: TypingDataset,
    /// Deduplicated training triples as ids, file order.
    pub triples: Vec<(u32, u32, u32)>,
    pub report: AssembleReport,
}

impl Assembled {
    pub fn graph(&self, include_type_edges: bool) -> Result<AugmentedGraph> {
        AugmentedGraph::from_ids(
            self.vocab.num_entities(),
            self.vocab.num_types(),
            &self.triples,
            &self.dataset.train,
            include_type_edges,
        )
    }
}

/// Builds the vocabulary from triples and training pairs, then resolves the
/// evaluation splits. Valid/test pairs whose type never occurs in training are dropped.
pub fn assemble(triples: &[RawTriple], train: &[RawPair], valid: &[RawPair], test: &[RawPair]) -> Result<Assembled> {
    let mut vocab = build_vocab(triples, train)?;
    let mut report = AssembleReport::default();

    let mut seen = BTreeSet::new();
    let mut triple_ids = Vec::with_capacity(triples.len());
    for t in triples {
        let ids = vocab.resolve_triple(t)?;
        if seen.insert(ids) {
            triple_ids.push(ids);
        }
    }
    report.duplicate_triples = triples.len() - triple_ids.len();

    let mut known = BTreeSet::new();
    let mut train_ids = Vec::with_capacity(train.len());
    for p in train {
        let ids = vocab.resolve_pair(p)?;
        if known.insert(ids) {
            train_ids.push(ids);
        }
    }
    report.duplicate_train_pairs = train.len() - train_ids.len();

    let entities_before = vocab.num_entities();
    let mut resolve_eval = |pairs: &[RawPair], unseen: &mut usize, overlap: &mut usize| {
        let mut out = Vec::with_capacity(pairs.len());
        for p in pairs {
            let Some(t) = vocab.types.get(&p.ty) else {
                *unseen += 1;
                continue;
            };
            let e = vocab.entities.intern(&p.entity);
            if known.insert((e, t)) {
                out.push((e, t));
            } else {
                *overlap += 1;
            }
        }
        out
    };
    let mut overlap = 0;
    let valid_ids = resolve_eval(valid, &mut report.dropped_valid_unseen, &mut overlap);
    let test_ids = resolve_eval(test, &mut report.dropped_test_unseen, &mut overlap);
    report.dropped_overlap = overlap;
    report.eval_only_entities = vocab.num_entities() - entities_before;

    let dataset =
        TypingDataset::from_splits(vocab.num_entities(), vocab.num_types(), train_ids, valid_ids, test_ids);
    Ok(Assembled { vocab, dataset, triples: triple_ids, report })
}
