//! Context-aware entity typing over knowledge graphs.
//!
//! Every neighbor of an entity scores all types independently (neighbor-to-type),
//! the mean of the neighbor representations scores them once more
//! (aggregate-to-type), and a per-type exponentially weighted pooling fuses the
//! candidates into one relevance vector. Training uses a binary cross-entropy or
//! a false-negative aware loss with hand-derived gradients and lazy sparse Adam.
//!
//! The crate is `no_std` with `alloc`; file formats, checkpoints and the CLI
//! live in the `cet` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod explain;
pub mod gradcheck;
pub mod kg;
pub mod loss;
pub mod optim;
pub mod params;
pub mod real;
pub mod scorer;
pub mod train;

pub use dataset::{assemble, AssembleReport, RawPair, RawTriple, Split, TypingDataset};
pub use error::{Error, Result};
pub use eval::{evaluate, metrics_from_ranks, rank_one, MetricsReport, RankedSample};
pub use exec::{Executor, Sequential};
pub use explain::{explain, neighbor_profile, Explanation, ExplanationRow};
pub use kg::{build_graph, build_vocab, AugmentedGraph, Neighbor, NodeRef, Vocab, HAS_TYPE};
pub use loss::{backward, bce_loss, fna_loss, GradientSet, LossKind};
pub use optim::{init_params, AdamConfig, AdamState};
pub use params::{Head, Matrix, ParameterSet};
pub use real::Real;
pub use scorer::{pool, score_entity, ScoreBundle, ScoreOptions, Source};
pub use train::{fit, sample_neighbors, train_epoch, FitOutcome, LogRecord, TrainConfig};
