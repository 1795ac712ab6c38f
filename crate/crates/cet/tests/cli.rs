mod common;

use std::path::Path;
use std::process::{Command, Output};

use cet::cli::{CHECKPOINT_FILE, LOG_FILE};
use cet::{report, Checkpoint};

fn cet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cet")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}\t"))).unwrap().parse().unwrap()
}

fn dataset(dir: &Path) -> String {
    common::write_dataset(dir, &common::synthetic_kg(7));
    dir.to_str().unwrap().to_string()
}

fn train(data: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data-dir", data, "--out", out.to_str().unwrap(), "--dim", "16"];
    args.extend_from_slice(extra);
    cet(&args)
}

#[test]
fn train_eval_explain_round() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(&tmp.path().join("data").tap_mkdir());
    let out = tmp.path().join("run");
    let t = train(&data, &out, &["--max-epochs", "20", "--eval-every", "10", "--threads", "2"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));

    let log = std::fs::read_to_string(out.join(LOG_FILE)).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 20);
    assert!(lines[0].ends_with('\t') && !lines[9].ends_with('\t'));
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let ckpt_str = ckpt_path.to_str().unwrap();
    assert!(Checkpoint::load(&ckpt_path).is_ok());

    let dump = tmp.path().join("ranks.tsv");
    let e = cet(&["eval", "--checkpoint", ckpt_str, "--data-dir", &data, "--dump", dump.to_str().unwrap()]);
    assert_eq!(code(&e), 0);
    let text = stdout(&e);
    let ranks = report::parse_rank_dump(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(ranks.len() as f64, field(&text, "count"));
    let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64;
    assert!((mrr - field(&text, "mrr")).abs() <= 1e-12);
    let raw = cet(&["eval", "--checkpoint", ckpt_str, "--data-dir", &data, "--raw", "--split", "valid"]);
    assert_eq!(code(&raw), 0);

    let x = cet(&["explain", "--checkpoint", ckpt_str, "--data-dir", &data, "--entity", "e20", "--type", "t0", "--tsv"]);
    assert_eq!(code(&x), 0, "{}", String::from_utf8_lossy(&x.stderr));
    let rows: Vec<Vec<String>> =
        stdout(&x).lines().map(|l| l.split('\t').map(str::to_string).collect()).collect();
    assert!(!rows.is_empty() && rows.len() <= 3);
    assert!(rows.iter().all(|r| r.len() == 4));
    let scores: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    let p = cet(&["explain", "--checkpoint", ckpt_str, "--profile", "--relation", "r0", "--target", "e3"]);
    assert_eq!(code(&p), 0);
    assert_eq!(stdout(&p).lines().count(), 4);
    let unknown = cet(&["explain", "--checkpoint", ckpt_str, "--data-dir", &data, "--entity", "nobody", "--type", "t0"]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn zero_epochs_writes_initialized_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(&tmp.path().join("data").tap_mkdir());
    let out = tmp.path().join("run");
    let t = train(&data, &out, &["--max-epochs", "0", "--seed", "3"]);
    assert_eq!(code(&t), 0);
    let ckpt = Checkpoint::load(out.join(CHECKPOINT_FILE)).unwrap();
    let init = cet_core::init_params::<f32>(&ckpt.vocab, 16, 3, false);
    assert_eq!(ckpt.params, init);
    assert_eq!(std::fs::read_to_string(out.join(LOG_FILE)).unwrap(), "");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(&tmp.path().join("data").tap_mkdir());
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nmax_epochs = 0\nbeta = 2.0\nloss = bce\n").unwrap();
    let out = tmp.path().join("run");
    let t = train(&data, &out, &["--config", cfg.to_str().unwrap(), "--loss", "fna"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let ckpt = Checkpoint::load(out.join(CHECKPOINT_FILE)).unwrap();
    let c = cet::config::from_entries(&ckpt.config).unwrap();
    assert_eq!((c.max_epochs, c.beta, c.loss, c.dim), (0, 2.0, cet_core::train::LossChoice::Fna, 16));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(&tmp.path().join("data").tap_mkdir());
    assert_eq!(code(&cet(&["train", "--bogus"])), 1);
    assert_eq!(code(&cet(&["train", "--data-dir", &data, "--out", "x", "--loss", "hinge"])), 1);
    assert_eq!(code(&cet(&["train", "--data-dir", &data, "--out", "x", "--lr", "-1"])), 1);
    assert_eq!(code(&cet(&["inspect", "--data-dir", "/nonexistent"])), 2);

    let out = tmp.path().join("run");
    assert_eq!(code(&train(&data, &out, &["--max-epochs", "0"])), 0);
    let path = out.join(CHECKPOINT_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = tmp.path().join("bad.cetk");
    std::fs::write(&bad, &bytes).unwrap();
    assert_eq!(code(&cet(&["eval", "--checkpoint", bad.to_str().unwrap(), "--data-dir", &data])), 4);

    let other = tmp.path().join("other").tap_mkdir();
    common::write_dataset(&other, &common::synthetic_kg(8));
    let e = cet(&["eval", "--checkpoint", path.to_str().unwrap(), "--data-dir", other.to_str().unwrap()]);
    assert_eq!(code(&e), 2);
}

#[test]
fn inspect_and_gradcheck() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(&tmp.path().join("data").tap_mkdir());
    let i = cet(&["inspect", "--data-dir", &data]);
    assert_eq!(code(&i), 0);
    let text = stdout(&i);
    assert_eq!(field(&text, "relations"), 4.0);
    assert_eq!(field(&text, "types"), 8.0);
    let g = cet(&["gradcheck", "--seeds-per-combo", "2"]);
    assert_eq!(code(&g), 0);
    assert!(field(&stdout(&g), "max_rel_err") < 1e-4);
    let coarse = cet(&["gradcheck", "--seeds-per-combo", "1", "--step", "0.5"]);
    assert_eq!(code(&coarse), 3);
}

trait TapMkdir {
    fn tap_mkdir(self) -> Self;
}

impl TapMkdir for std::path::PathBuf {
    fn tap_mkdir(self) -> Self {
        std::fs::create_dir_all(&self).unwrap();
        self
    }
}
