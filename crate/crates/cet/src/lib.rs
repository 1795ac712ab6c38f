//! File formats, checkpoints and the command-line front end for `cet-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod exec;
pub mod ingest;
pub mod report;
pub mod stats;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::{ConfigError, ConfigFile};
pub use exec::RayonExecutor;
pub use ingest::{load_pairs, load_triples, DataPaths, IngestError, RawDataset};
pub use stats::DatasetStats;
