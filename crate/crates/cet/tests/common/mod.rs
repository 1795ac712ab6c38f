//! Synthetic knowledge graph shared by the integration tests.
//!
//! 200 entities, 4 relations, 8 types. The first 8 entities are hubs; every
//! other entity carries one or two types and has the edge `(e, r0, hub_t)` for
//! exactly its types `t`. Relations r1..r3 connect random entities and carry no
//! signal. Pairs are split 70/15/15 into train/valid/test.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use cet::RawDataset;
use cet_core::{RawPair, RawTriple};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ENTITIES: usize = 200;
pub const RELATIONS: usize = 4;
pub const TYPES: usize = 8;

pub fn synthetic_kg(seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("e{i}");
    let mut triples = Vec::new();
    let mut pairs = Vec::new();
    for e in TYPES..ENTITIES {
        let n = rng.gen_range(1..=2);
        let mut types: Vec<usize> = (0..TYPES).collect();
        types.shuffle(&mut rng);
        for &t in &types[..n] {
            triples.push(RawTriple::new(&name(e), "r0", &name(t)));
            pairs.push(RawPair::new(&name(e), &format!("t{t}")));
        }
        for _ in 0..2 {
            let r = rng.gen_range(1..RELATIONS);
            let other = rng.gen_range(TYPES..ENTITIES);
            if other != e {
                triples.push(RawTriple::new(&name(e), &format!("r{r}"), &name(other)));
            }
        }
    }
    pairs.shuffle(&mut rng);
    let n_train = pairs.len() * 70 / 100;
    let n_valid = pairs.len() * 15 / 100;
    let test = pairs.split_off(n_train + n_valid);
    let valid = pairs.split_off(n_train);
    RawDataset { triples, train: pairs, valid, test }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) {
    let body: String = lines.map(|l| l + "\n").collect();
    fs::write(path, body).unwrap();
}

/// Writes the dataset in the on-disk layout read by `DataPaths::in_dir`.
pub fn write_dataset(dir: &Path, raw: &RawDataset) {
    write_lines(&dir.join("train.txt"), raw.triples.iter().map(|t| format!("{}\t{}\t{}", t.head, t.relation, t.tail)));
    for (file, pairs) in [
        ("Entity_Type_train.txt", &raw.train),
        ("Entity_Type_valid.txt", &raw.valid),
        ("Entity_Type_test.txt", &raw.test),
    ] {
        write_lines(&dir.join(file), pairs.iter().map(|p| format!("{}\t{}", p.entity, p.ty)));
    }
}
