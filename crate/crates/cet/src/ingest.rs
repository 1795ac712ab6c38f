//! TSV loaders for triples and (entity, type) pairs.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cet_core::dataset::{assemble, Assembled};
use cet_core::{RawPair, RawTriple};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: file not found", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: expected {expected} tab-separated fields, found {found}", path.display())]
    Malformed { path: PathBuf, line: usize, expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] cet_core::Error),
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => IngestError::NotFound(path.to_path_buf()),
        _ => IngestError::Io { path: path.to_path_buf(), source },
    })
}

fn parse_rows<'a, const N: usize>(path: &Path, text: &'a str) -> Result<Vec<[&'a str; N]>, IngestError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let row: [&str; N] = fields.as_slice().try_into().map_err(|_| IngestError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            expected: N,
            found: fields.len(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// `head\trelation\ttail` per line; blank lines are skipped.
pub fn load_triples(path: impl AsRef<Path>) -> Result<Vec<RawTriple>, IngestError> {
    let path = path.as_ref();
    let text = read(path)?;
    Ok(parse_rows::<3>(path, &text)?.into_iter().map(|[h, r, t]| RawTriple::new(h, r, t)).collect())
}

/// `entity\ttype` per line; blank lines are skipped.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<RawPair>, IngestError> {
    let path = path.as_ref();
    let text = read(path)?;
    Ok(parse_rows::<2>(path, &text)?.into_iter().map(|[e, t]| RawPair::new(e, t)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub triples: PathBuf,
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

impl DataPaths {
    /// `train.txt` and `Entity_Type_{train,valid,test}.txt` under `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DataPaths {
            triples: dir.join("train.txt"),
            train: dir.join("Entity_Type_train.txt"),
            valid: dir.join("Entity_Type_valid.txt"),
            test: dir.join("Entity_Type_test.txt"),
        }
    }
}

/// Unresolved file contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub triples: Vec<RawTriple>,
    pub train: Vec<RawPair>,
    pub valid: Vec<RawPair>,
    pub test: Vec<RawPair>,
}

impl RawDataset {
    pub fn load(paths: &DataPaths) -> Result<Self, IngestError> {
        Ok(RawDataset {
            triples: load_triples(&paths.triples)?,
            train: load_pairs(&paths.train)?,
            valid: load_pairs(&paths.valid)?,
            test: load_pairs(&paths.test)?,
        })
    }

    pub fn assemble(&self) -> Result<Assembled, IngestError> {
        Ok(assemble(&self.triples, &self.train, &self.valid, &self.test)?)
    }

    /// Keeps a seeded `fraction` of the entities: triples with both ends kept,
    /// pairs whose entity is kept.
    pub fn subsample_entities(&self, fraction: f64, seed: u64) -> RawDataset {
        let mut names: Vec<&str> = Vec::new();
        let mut seen = BTreeSet::new();
        let all = self.triples.iter().flat_map(|t| [t.head.as_str(), t.tail.as_str()]).chain(
            self.train.iter().chain(&self.valid).chain(&self.test).map(|p| p.entity.as_str()),
        );
        for name in all {
            if seen.insert(name) {
                names.push(name);
            }
        }
        let keep_n = ((names.len() as f64) * fraction).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kept: BTreeSet<&str> = names.choose_multiple(&mut rng, keep_n).copied().collect();
        let pairs = |v: &[RawPair]| v.iter().filter(|p| kept.contains(p.entity.as_str())).cloned().collect();
        RawDataset {
            triples: self
                .triples
                .iter()
                .filter(|t| kept.contains(t.head.as_str()) && kept.contains(t.tail.as_str()))
                .cloned()
                .collect(),
            train: pairs(&self.train),
            valid: pairs(&self.valid),
            test: pairs(&self.test),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn single_triple_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.txt", "a\tr\tb\n");
        assert_eq!(load_triples(&p).unwrap(), vec![RawTriple::new("a", "r", "b")]);
    }

    #[test]
    fn whitespace_and_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.txt", " a \tr\t b\r\n\n c\tr\td\n");
        assert_eq!(load_triples(&p).unwrap(), vec![RawTriple::new("a", "r", "b"), RawTriple::new("c", "r", "d")]);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.txt", "a\tr\tb\nc\td\n");
        match load_triples(&p) {
            Err(IngestError::Malformed { line, expected, found, .. }) => assert_eq!((line, expected, found), (2, 3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_distinct() {
        assert!(matches!(load_pairs("/nonexistent/pairs.txt"), Err(IngestError::NotFound(_))));
    }

    #[test]
    fn empty_pairs_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "p.txt", "");
        assert!(load_pairs(&p).unwrap().is_empty());
    }

    #[test]
    fn subsample_keeps_closed_triples() {
        let raw = RawDataset {
            triples: (0..100).map(|i| RawTriple::new(&format!("e{i}"), "r", &format!("e{}", (i + 1) % 100))).collect(),
            train: (0..100).map(|i| RawPair::new(&format!("e{i}"), "t")).collect(),
            valid: vec![],
            test: vec![],
        };
        let sub = raw.subsample_entities(0.2, 1);
        assert_eq!(sub.train.len(), 20);
        let kept: BTreeSet<&str> = sub.train.iter().map(|p| p.entity.as_str()).collect();
        assert!(sub.triples.iter().all(|t| kept.contains(t.head.as_str()) && kept.contains(t.tail.as_str())));
        assert_eq!(sub, raw.subsample_entities(0.2, 1));
    }
}
