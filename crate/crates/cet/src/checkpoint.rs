//! Binary checkpoints: vocabulary, configuration and `f32` parameters.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "CETK1"
//! u32 dim, u32 |E|, u32 |R|, u32 |T|, u8 separate_heads
//! u32 len, config text (`key=value` lines)
//! |E| + |R| + |T| names, each u32 len + UTF-8 bytes
//! f32 tensors E, R, T, W, b [, W_agg, b_agg]
//! u64 FNV-1a of everything above
//! ```

use std::fs;
use std::hash::Hasher;
use std::io;
use std::path::Path;

use cet_core::{Head, Matrix, ParameterSet, Vocab};
use fnv::FnvHasher;

const MAGIC: &[u8; 5] = b"CETK1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocab,
    pub config: Vec<(String, String)>,
    pub params: ParameterSet<f32>,
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) -> Result<(), CheckpointError> {
        let v = u32::try_from(v).map_err(|_| CheckpointError::Inconsistent(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn bytes(&mut self, b: &[u8]) -> Result<(), CheckpointError> {
        self.u32(b.len())?;
        self.0.extend_from_slice(b);
        Ok(())
    }

    fn floats(&mut self, xs: &[f32]) {
        for x in xs {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(CheckpointError::Truncated)?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Inconsistent("non UTF-8 text".into()))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f32>, CheckpointError> {
        let len = n.checked_mul(4).ok_or(CheckpointError::Truncated)?;
        let b = self.take(len)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix<f32>, CheckpointError> {
        let n = rows.checked_mul(cols).ok_or(CheckpointError::Truncated)?;
        Matrix::from_vec(rows, cols, self.floats(n)?).map_err(|e| CheckpointError::Inconsistent(e.to_string()))
    }

    fn head(&mut self, types: usize, dim: usize) -> Result<Head<f32>, CheckpointError> {
        Ok(Head { weight: self.matrix(types, dim)?, bias: self.floats(types)? })
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>, CheckpointError> {
        let p = &self.params;
        let v = &self.vocab;
        if p.num_entities() != v.num_entities() || p.num_relations() != v.num_relations() || p.num_types() != v.num_types()
        {
            return Err(CheckpointError::Inconsistent("parameter shapes do not match the vocabulary".into()));
        }
        let mut w = Writer(MAGIC.to_vec());
        w.u32(p.dim)?;
        w.u32(v.num_entities())?;
        w.u32(v.num_relations())?;
        w.u32(v.num_types())?;
        w.0.push(u8::from(p.agg_head.is_some()));
        let text: String = self.config.iter().map(|(k, val)| format!("{k}={val}\n")).collect();
        w.bytes(text.as_bytes())?;
        for name in v.entities.names().iter().chain(v.relations.names()).chain(v.types.names()) {
            w.bytes(name.as_bytes())?;
        }
        w.floats(p.entity.as_slice());
        w.floats(p.relation.as_slice());
        w.floats(p.types.as_slice());
        w.floats(p.head.weight.as_slice());
        w.floats(&p.head.bias);
        if let Some(h) = &p.agg_head {
            w.floats(h.weight.as_slice());
            w.floats(&h.bias);
        }
        let sum = checksum(&w.0);
        w.0.extend_from_slice(&sum.to_le_bytes());
        Ok(w.0)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < MAGIC.len() + 8 {
            return Err(CheckpointError::Truncated);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if checksum(body) != stored {
            return Err(CheckpointError::Checksum);
        }

        let mut r = Reader { buf: body, pos: MAGIC.len() };
        let dim = r.u32()?;
        let (ne, nr, nt) = (r.u32()?, r.u32()?, r.u32()?);
        let separate = match r.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(CheckpointError::Inconsistent(format!("head flag {b}"))),
        };
        let text = r.string()?;
        let config = text
            .lines()
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| CheckpointError::Inconsistent(format!("config line `{l}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut names = |n: usize| (0..n).map(|_| r.string()).collect::<Result<Vec<_>, _>>();
        let entities = names(ne)?;
        let relations = names(nr)?;
        let types = names(nt)?;
        let vocab = Vocab::from_tables(entities, relations, types)
            .map_err(|e| CheckpointError::Inconsistent(e.to_string()))?;

        let entity = r.matrix(ne, dim)?;
        let relation = r.matrix(nr, dim)?;
        let type_table = r.matrix(nt, dim)?;
        let head = r.head(nt, dim)?;
        let agg_head = if separate { Some(r.head(nt, dim)?) } else { None };
        if r.pos != body.len() {
            return Err(CheckpointError::Inconsistent(format!("{} trailing bytes", body.len() - r.pos)));
        }
        let params = ParameterSet { dim, entity, relation, types: type_table, head, agg_head };
        Ok(Checkpoint { vocab, config, params })
    }

    /// Writes to a temporary sibling first and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let bytes = self.encode()?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::decode(&fs::read(path)?)
    }
}
