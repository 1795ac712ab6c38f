//! Text renderings of metrics, rank dumps, training logs and explanations.

use std::fmt::Write as _;

use cet_core::eval::RankedSample;
use cet_core::{Explanation, LogRecord, MetricsReport, Vocab};

/// One `key\tvalue` line per metric.
pub fn metrics_block(split: &str, m: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "split\t{split}");
    let _ = writeln!(s, "count\t{}", m.count);
    let _ = writeln!(s, "mr\t{}", m.mr);
    let _ = writeln!(s, "mrr\t{}", m.mrr);
    let _ = writeln!(s, "hits@1\t{}", m.hits1);
    let _ = writeln!(s, "hits@3\t{}", m.hits3);
    let _ = writeln!(s, "hits@10\t{}", m.hits10);
    s
}

/// `entity\ttype\trank`, names resolved through `vocab`. Ranks use the
/// shortest representation that parses back to the same `f64`.
pub fn rank_dump(vocab: &Vocab, ranks: &[RankedSample]) -> String {
    let mut s = String::new();
    for r in ranks {
        let e = vocab.entities.name(r.entity).unwrap_or("?");
        let t = vocab.types.name(r.ty).unwrap_or("?");
        let _ = writeln!(s, "{e}\t{t}\t{}", r.rank);
    }
    s
}

#[derive(Debug, thiserror::Error)]
#[error("rank dump line {line}: {reason}")]
pub struct DumpError {
    pub line: usize,
    pub reason: &'static str,
}

/// Reads the rank column back from a dump.
pub fn parse_rank_dump(text: &str) -> Result<Vec<f64>, DumpError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rank = l.rsplit('\t').next().ok_or(DumpError { line: i + 1, reason: "missing rank" })?;
            rank.trim().parse().map_err(|_| DumpError { line: i + 1, reason: "rank is not a number" })
        })
        .collect()
}

/// `epoch\tloss\tvalid_mrr`, the last field blank on epochs without validation.
pub fn log_line(r: &LogRecord) -> String {
    match r.valid_mrr {
        Some(m) => format!("{}\t{}\t{}", r.epoch, r.loss, m),
        None => format!("{}\t{}\t", r.epoch, r.loss),
    }
}

pub fn explanation_text(x: &Explanation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} / {}  pooled {:.4}  ({} sources)", x.entity, x.ty, x.pooled, x.total_sources);
    for (i, row) in x.rows.iter().enumerate() {
        let _ = writeln!(s, "{:>3}. {}: {:.2}  (weight {:.4})", i + 1, row.label, row.score, row.weight);
    }
    s
}

/// `rank\tsource\tscore\tweight`.
pub fn explanation_tsv(x: &Explanation) -> String {
    let mut s = String::new();
    for (i, row) in x.rows.iter().enumerate() {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", i + 1, row.label, row.score, row.weight);
    }
    s
}
