use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus: no triples and no entity-type pairs")]
    EmptyCorpus,
    #[error("no types in corpus")]
    NoTypes,
    #[error("unknown {kind} name {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("{kind} index {index} out of range (len {len})")]
    IndexOutOfRange { kind: &'static str, index: usize, len: usize },
    #[error("entity {0} has no neighbors")]
    IsolatedEntity(u32),
    #[error("empty neighbor set")]
    EmptyNeighbors,
    #[error("all pooling candidates are masked")]
    AllMasked,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),
    #[error("non-finite loss at entity {0}")]
    NonFiniteLoss(u32),
    #[error("split {0} is empty")]
    EmptySplit(&'static str),
    #[error("shape mismatch in {0}")]
    ShapeMismatch(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
