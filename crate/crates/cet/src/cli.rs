//! Subcommands behind the `cet` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use cet_core::dataset::{Assembled, Split};
use cet_core::gradcheck::{default_suite, run_case, DEFAULT_STEP, TOLERANCE};
use cet_core::kg::{Neighbor, NodeRef, HAS_TYPE};
use cet_core::{evaluate, explain, fit, init_params, neighbor_profile, TrainConfig};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{self, ConfigError, ConfigFile};
use crate::exec::RayonExecutor;
use crate::ingest::{DataPaths, IngestError, RawDataset};
use crate::report;
use crate::stats::DatasetStats;

pub const CHECKPOINT_FILE: &str = "checkpoint.cetk";
pub const LOG_FILE: &str = "train.log";

#[derive(Debug, Parser)]
#[command(name = "cet", version, about = "Context-aware entity typing over knowledge graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write the best checkpoint and the training log.
    Train(TrainArgs),
    /// Filtered ranking metrics of a checkpoint on one split.
    Eval(EvalArgs),
    /// Most relevant information sources for an (entity, type) query.
    Explain(ExplainArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Print dataset statistics.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory with train.txt and Entity_Type_{train,valid,test}.txt.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub triples: Option<PathBuf>,
    #[arg(long)]
    pub train_pairs: Option<PathBuf>,
    #[arg(long)]
    pub valid_pairs: Option<PathBuf>,
    #[arg(long)]
    pub test_pairs: Option<PathBuf>,
    /// Keep only this fraction of the entities (seeded by --subsample-seed).
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub subsample_seed: u64,
}

impl DataArgs {
    fn paths(&self) -> Result<DataPaths, CliError> {
        let base = self.data_dir.as_ref().map(DataPaths::in_dir);
        let pick = |over: &Option<PathBuf>, f: fn(&DataPaths) -> &PathBuf| -> Result<PathBuf, CliError> {
            over.clone()
                .or_else(|| base.as_ref().map(|b| f(b).clone()))
                .ok_or_else(|| CliError::Usage("--data-dir or explicit file paths are required".into()))
        };
        Ok(DataPaths {
            triples: pick(&self.triples, |p| &p.triples)?,
            train: pick(&self.train_pairs, |p| &p.train)?,
            valid: pick(&self.valid_pairs, |p| &p.valid)?,
            test: pick(&self.test_pairs, |p| &p.test)?,
        })
    }

    pub fn load(&self) -> Result<Assembled, CliError> {
        let mut raw = RawDataset::load(&self.paths()?)?;
        if let Some(fraction) = self.subsample {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(CliError::Usage("--subsample must lie in (0, 1]".into()));
            }
            raw = raw.subsample_entities(fraction, self.subsample_seed);
        }
        let assembled = raw.assemble()?;
        let r = &assembled.report;
        if r.dropped_valid_unseen + r.dropped_test_unseen + r.dropped_overlap > 0 {
            info!(
                "dropped {} valid / {} test pairs with unseen types, {} overlapping pairs",
                r.dropped_valid_unseen, r.dropped_test_unseen, r.dropped_overlap
            );
        }
        Ok(assembled)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for the checkpoint and the log.
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Embedding dimension [default: 100]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Pooling temperature [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Negative weight of the false-negative aware loss [default: 4.0]
    #[arg(long)]
    pub beta: Option<f64>,
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Entities per optimizer step [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Neighbors drawn per entity and step [default: 10]
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// [default: 1000]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Validate every this many epochs [default: 25]
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// bce or fna [default: fna]
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub no_agg2t: bool,
    #[arg(long)]
    pub no_tan: bool,
    /// Use all neighbors with self-revealing candidates masked instead of sampling.
    #[arg(long)]
    pub mask_mode: bool,
    #[arg(long)]
    pub no_activation: bool,
    /// Give the aggregation row its own output layer.
    #[arg(long)]
    pub separate_heads: bool,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl TrainArgs {
    pub fn resolve_config(&self) -> Result<TrainConfig, CliError> {
        let mut c = TrainConfig::default();
        if let Some(path) = &self.config {
            ConfigFile::load(path)?.apply(&mut c)?;
        }
        macro_rules! over {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        over!(dim, alpha, beta, lr, batch_size, sample_size, max_epochs, eval_every, seed);
        if let Some(loss) = &self.loss {
            c.loss = config::parse_loss(loss).ok_or_else(|| CliError::Usage(format!("unknown loss `{loss}`")))?;
        }
        c.use_agg2t &= !self.no_agg2t;
        c.use_tan &= !self.no_tan;
        c.mask_mode |= self.mask_mode;
        c.use_activation &= !self.no_activation;
        c.separate_heads |= self.separate_heads;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// valid or test
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Unfiltered ranking (debugging only).
    #[arg(long)]
    pub raw: bool,
    /// Write `entity\ttype\trank` lines here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub entity: Option<String>,
    #[arg(long = "type")]
    pub ty: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    /// Machine-readable `rank\tsource\tscore\tweight` output.
    #[arg(long)]
    pub tsv: bool,
    /// Rank the types a single neighbor (--relation, --target) points to.
    #[arg(long)]
    pub profile: bool,
    #[arg(long)]
    pub relation: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub inverse: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Seeds for each switch combination (24 combinations).
    #[arg(long, default_value_t = 5)]
    pub seeds_per_combo: u64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] cet_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint does not match the dataset: {0}")]
    Mismatch(&'static str),
    #[error("gradient check failed: max relative error {0:e}")]
    Gradcheck(f64),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric, 4 corrupt checkpoint.
    pub fn exit_code(&self) -> u8 {
        use cet_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Model(E::InvalidConfig(_)) => 1,
            CliError::Model(E::NonFiniteGradient(_) | E::NonFiniteLoss(_)) | CliError::Gradcheck(_) => 3,
            CliError::Checkpoint(CheckpointError::Io(_)) => 2,
            CliError::Checkpoint(_) => 4,
            _ => 2,
        }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Explain(a) => cmd_explain(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Inspect(a) => cmd_inspect(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn executor(threads: usize) -> Result<RayonExecutor, CliError> {
    RayonExecutor::new(threads).map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let config = args.resolve_config()?;
    let data = args.data.load()?;
    let graph = data.graph(config.use_tan)?;
    let exec = executor(args.threads)?;
    fs::create_dir_all(&args.out)?;
    info!(
        "{} entities, {} relations, {} types, {} training pairs, {} threads",
        data.vocab.num_entities(),
        data.vocab.num_relations(),
        data.vocab.num_types(),
        data.dataset.train.len(),
        exec.threads()
    );

    let params = init_params::<f32>(&data.vocab, config.dim, config.seed, config.separate_heads);
    let mut log = BufWriter::new(File::create(args.out.join(LOG_FILE))?);
    let mut log_err = None;
    let started = Instant::now();
    let outcome = fit(params, &graph, &data.dataset, &config, &exec, |r| {
        if let Err(e) = writeln!(log, "{}", report::log_line(r)).and_then(|_| log.flush()) {
            log_err.get_or_insert(e);
        }
        match r.valid_mrr {
            Some(m) => info!("epoch {} loss {:.6} valid mrr {:.4}", r.epoch, r.loss, m),
            None => log::debug!("epoch {} loss {:.6}", r.epoch, r.loss),
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    if outcome.skipped_isolated > 0 {
        warn!("{} labeled entities have no neighbors and were skipped", outcome.skipped_isolated);
    }
    info!("trained in {:.1?}, best epoch {}", started.elapsed(), outcome.best_epoch);

    let ckpt = Checkpoint { vocab: data.vocab.clone(), config: config::to_entries(&config), params: outcome.params };
    let path = args.out.join(CHECKPOINT_FILE);
    ckpt.save(&path)?;
    println!("checkpoint\t{}", path.display());
    println!("best_epoch\t{}", outcome.best_epoch);
    if let Some(m) = outcome.best_valid_mrr {
        println!("best_valid_mrr\t{m}");
    }
    Ok(())
}

/// Checkpoint plus the dataset it was trained on, checked for agreement.
struct Loaded {
    ckpt: Checkpoint,
    config: TrainConfig,
    data: Assembled,
}

fn load_with_data(checkpoint: &Path, data: &DataArgs) -> Result<Loaded, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let config = config::from_entries(&ckpt.config)?;
    let data = data.load()?;
    if data.vocab != ckpt.vocab {
        return Err(CliError::Mismatch("vocabularies differ"));
    }
    Ok(Loaded { ckpt, config, data })
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    match s {
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        "train" => Ok(Split::Train),
        _ => Err(CliError::Usage(format!("unknown split `{s}`"))),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let split = parse_split(&args.split)?;
    let Loaded { ckpt, config, data } = load_with_data(&args.checkpoint, &args.data)?;
    let graph = data.graph(config.use_tan)?;
    let exec = executor(args.threads)?;
    let m = evaluate(&ckpt.params, &graph, &data.dataset, split, &config.score_options(), !args.raw, &exec)?;
    print!("{}", report::metrics_block(split.name(), &m));
    if let Some(path) = &args.dump {
        fs::write(path, report::rank_dump(&ckpt.vocab, &m.ranks))?;
    }
    Ok(())
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<(), CliError> {
    if args.profile {
        return cmd_profile(args);
    }
    let (entity, ty) = match (&args.entity, &args.ty) {
        (Some(e), Some(t)) => (e, t),
        _ => return Err(CliError::Usage("--entity and --type are required".into())),
    };
    let Loaded { ckpt, config, data } = load_with_data(&args.checkpoint, &args.data)?;
    let graph = data.graph(config.use_tan)?;
    let x = explain(&ckpt.params, &graph, &ckpt.vocab, entity, ty, &config.score_options(), args.top_k)?;
    if args.tsv {
        print!("{}", report::explanation_tsv(&x));
    } else {
        print!("{}", report::explanation_text(&x));
    }
    Ok(())
}

fn cmd_profile(args: &ExplainArgs) -> Result<(), CliError> {
    let (relation, target) = match (&args.relation, &args.target) {
        (Some(r), Some(t)) => (r, t),
        _ => return Err(CliError::Usage("--profile needs --relation and --target".into())),
    };
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let config = config::from_entries(&ckpt.config)?;
    let vocab = &ckpt.vocab;
    let rel = vocab.relation_id(relation)?;
    let node = if relation == HAS_TYPE {
        NodeRef::Type(vocab.type_id(target)?)
    } else {
        NodeRef::Entity(vocab.entity_id(target)?)
    };
    let nb = if args.inverse { Neighbor::inverse(rel, node) } else { Neighbor::forward(rel, node) };
    println!("{}", vocab.render_neighbor(&nb));
    for (i, (t, score)) in neighbor_profile(&ckpt.params, &nb, config.use_activation, args.top_k).iter().enumerate() {
        println!("{}\t{}\t{}", i + 1, vocab.types.name(*t).unwrap_or("?"), score);
    }
    Ok(())
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let suite = default_suite(args.seeds_per_combo);
    let mut worst = (0.0f64, "none");
    let mut checked = 0;
    for case in &suite {
        let r = run_case(case, args.step)?;
        checked += r.checked;
        if r.max_rel_err > worst.0 || r.max_rel_err.is_nan() {
            worst = (r.max_rel_err, r.worst_tensor);
        }
    }
    println!("cases\t{}", suite.len());
    println!("entries\t{checked}");
    println!("max_rel_err\t{:e}", worst.0);
    println!("worst_tensor\t{}", worst.1);
    if worst.0 < TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Gradcheck(worst.0))
    }
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<(), CliError> {
    let data = args.data.load()?;
    print!("{}", DatasetStats::of(&data));
    let r = &data.report;
    println!("duplicate_triples\t{}", r.duplicate_triples);
    println!("duplicate_train_tuples\t{}", r.duplicate_train_pairs);
    println!("dropped_valid_unseen\t{}", r.dropped_valid_unseen);
    println!("dropped_test_unseen\t{}", r.dropped_test_unseen);
    println!("dropped_overlap\t{}", r.dropped_overlap);
    println!("eval_only_entities\t{}", r.eval_only_entities);
    Ok(())
}
