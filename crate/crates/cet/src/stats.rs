//! Dataset statistics in the layout of the usual benchmark summary table.

use std::fmt;

use cet_core::dataset::Assembled;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetStats {
    pub entities: usize,
    /// Relations occurring in triples; `has_type` is not counted.
    pub relations: usize,
    pub types: usize,
    pub train_triples: usize,
    pub train_pairs: usize,
    pub valid_pairs: usize,
    pub test_pairs: usize,
}

impl DatasetStats {
    /// Triple and pair counts are taken after deduplication.
    pub fn of(a: &Assembled) -> Self {
        DatasetStats {
            entities: a.vocab.num_entities(),
            relations: a.vocab.num_relations() - 1,
            types: a.vocab.num_types(),
            train_triples: a.triples.len(),
            train_pairs: a.dataset.train.len(),
            valid_pairs: a.dataset.valid.len(),
            test_pairs: a.dataset.test.len(),
        }
    }

    pub fn as_array(&self) -> [usize; 7] {
        [
            self.entities,
            self.relations,
            self.types,
            self.train_triples,
            self.train_pairs,
            self.valid_pairs,
            self.test_pairs,
        ]
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entities\t{}", self.entities)?;
        writeln!(f, "relations\t{}", self.relations)?;
        writeln!(f, "types\t{}", self.types)?;
        writeln!(f, "train_triples\t{}", self.train_triples)?;
        writeln!(f, "train_tuples\t{}", self.train_pairs)?;
        writeln!(f, "valid\t{}", self.valid_pairs)?;
        writeln!(f, "test\t{}", self.test_pairs)
    }
}
