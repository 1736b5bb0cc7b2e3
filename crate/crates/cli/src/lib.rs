//! `vrdie` command line. Data goes to stdout (or `--out`), diagnostics to
//! stderr. Settings come from an optional JSON config file; flags win.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use vrdie_core::metrics::{evaluate, EvalReport};
use vrdie_core::synth::{generate, SynthConfig};
use vrdie_core::{load_corpus, write_corpus, AnnotationSet, Document, Task};
use vrdie_dialog::{serve_blocking, KnowledgeIndex, SharedIndex};
use vrdie_neural::{checkpoint_path, extract, finetune, pretrain, Checkpoint, EncoderConfig, Init, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "vrdie", version, about = "Layout-aware information extraction for visually rich documents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    He,
    Se,
    Re,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::He => Task::He,
            TaskArg::Se => Task::Se,
            TaskArg::Re => Task::Re,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSONL corpus and write it back in canonical form.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate an annotated synthetic corpus.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Self-supervised pre-training; writes checkpoints into the run directory.
    Pretrain {
        #[arg(long)]
        corpus: PathBuf,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Supervised fine-tuning for one task.
    Finetune {
        #[arg(long)]
        corpus: PathBuf,
        /// Dev corpus; defaults to the tail of `--corpus` (see `dev_fraction`).
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Pre-trained checkpoint to start from.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Predict one task's annotations. Other annotation fields of the input
    /// are carried over, so runs for several tasks can be chained.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted against gold annotations; prints a JSON report.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Average per-document scores instead of pooling counts.
        #[arg(long = "macro")]
        macro_average: bool,
    },
    /// Serve the dialogue API over a corpus's annotations.
    Serve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub relation_count: usize,
    /// Share of `--corpus` held out as dev when `--dev` is absent.
    pub dev_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            relation_count: SynthConfig::default().relation_count,
            dev_fraction: 0.2,
        }
    }
}

impl RunConfig {
    pub fn load(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.train.seed = seed;
            cfg.synth.seed = seed;
        }
        if !(0.0..1.0).contains(&cfg.dev_fraction) {
            bail!("dev_fraction {} outside [0, 1)", cfg.dev_fraction);
        }
        Ok(cfg)
    }
}

fn write_docs(out: Option<&Path>, docs: &[Document]) -> Result<()> {
    match out {
        Some(path) => vrdie_core::save_corpus(path, docs)?,
        None => write_corpus(std::io::stdout().lock(), docs)?,
    }
    Ok(())
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn load(path: &Path) -> Result<Vec<Document>> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

/// Replace the task's field of `base` with the one from `predicted`.
pub fn merge_task(base: Option<&AnnotationSet>, predicted: AnnotationSet, task: Task) -> AnnotationSet {
    let mut out = base.cloned().unwrap_or_default();
    match task {
        Task::He => out.headings = predicted.headings,
        Task::Se => out.sections = predicted.sections,
        Task::Re => out.relations = predicted.relations,
    }
    out
}

/// Per-document reports, gold order; predictions are matched by id and a
/// missing prediction counts as empty.
pub fn evaluate_corpora(pred: &[Document], gold: &[Document], task: Task) -> Result<Vec<EvalReport>> {
    let by_id: std::collections::HashMap<&str, &Document> = pred.iter().map(|d| (d.id.as_str(), d)).collect();
    for d in pred {
        if !gold.iter().any(|g| g.id == d.id) {
            warn!("prediction for unknown document {} ignored", d.id);
        }
    }
    gold.iter()
        .map(|g| {
            let Some(gold_ann) = g.annotations.as_ref() else {
                bail!("gold document {} has no annotations", g.id);
            };
            let predicted = match by_id.get(g.id.as_str()) {
                Some(p) => p.annotations_or_empty(),
                None => {
                    warn!("no prediction for {}; scored as empty", g.id);
                    AnnotationSet::default()
                }
            };
            Ok(evaluate(g, &predicted, gold_ann, task))
        })
        .collect()
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Ingest { corpus, out, common } => {
            RunConfig::load(&common)?;
            let docs = load(&corpus)?;
            let tokens: usize = docs.iter().map(Document::token_count).sum();
            info!("{} documents, {tokens} tokens", docs.len());
            write_docs(out.as_deref(), &docs)
        }
        Command::Synth { out, common } => {
            let cfg = RunConfig::load(&common)?;
            let docs = generate(&cfg.synth)?;
            info!("generated {} documents (seed {})", docs.len(), cfg.synth.seed);
            write_docs(out.as_deref(), &docs)
        }
        Command::Pretrain { corpus, out, common } => {
            let cfg = RunConfig::load(&common)?;
            let docs = load(&corpus)?;
            let outcome = pretrain(&docs, &cfg.encoder, None, &cfg.train, Some(&out))?;
            print_json(&json!({
                "checkpoint": checkpoint_path(&out, outcome.steps),
                "steps": outcome.steps,
                "final_loss": outcome.loss_history.last(),
            }))
        }
        Command::Finetune {
            corpus,
            dev,
            task,
            ckpt,
            out,
            common,
        } => {
            let cfg = RunConfig::load(&common)?;
            let mut train_docs = load(&corpus)?;
            let dev_docs = match dev {
                Some(path) => load(&path)?,
                None => {
                    let held = (train_docs.len() as f64 * cfg.dev_fraction).round() as usize;
                    let held = held.min(train_docs.len().saturating_sub(1));
                    train_docs.split_off(train_docs.len() - held)
                }
            };
            info!("{} training and {} dev documents", train_docs.len(), dev_docs.len());
            let init = match ckpt {
                Some(path) => Init::Pretrained(Checkpoint::load(&path)?.model),
                None => Init::Random {
                    encoder: cfg.encoder.clone(),
                    vocab: None,
                },
            };
            let outcome = finetune(task.into(), &train_docs, &dev_docs, init, cfg.relation_count, &cfg.train, Some(&out))?;
            print_json(&json!({
                "checkpoint": checkpoint_path(&out, outcome.steps),
                "steps": outcome.steps,
                "best_dev_f1": outcome.best_dev_f1,
                "steps_to_target": outcome.steps_to_target,
            }))
        }
        Command::Extract { corpus, task, ckpt, out } => {
            let task: Task = task.into();
            let model = Checkpoint::load(&ckpt)?.model;
            let docs = load(&corpus)?;
            let mut predicted = Vec::with_capacity(docs.len());
            for doc in docs {
                let ann = extract(&model, &doc, task)?;
                let merged = merge_task(doc.annotations.as_ref(), ann, task);
                predicted.push(Document::new(doc.id, doc.domain, doc.pages, Some(merged))?);
            }
            write_docs(out.as_deref(), &predicted)
        }
        Command::Eval {
            pred,
            gold,
            task,
            macro_average,
        } => {
            let task: Task = task.into();
            let reports = evaluate_corpora(&load(&pred)?, &load(&gold)?, task)?;
            let report = if macro_average {
                EvalReport::macro_average(&reports)
            } else {
                EvalReport::micro(&reports)
            };
            print_json(&json!({
                "task": task.name(),
                "average": if macro_average { "macro" } else { "micro" },
                "documents": reports.len(),
                "report": report,
            }))
        }
        Command::Serve { corpus, port, host } => {
            let docs = load(&corpus)?;
            let index = KnowledgeIndex::build(&docs);
            info!("indexed {} sections from {} documents", index.len(), index.documents.len());
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            serve_blocking(addr, SharedIndex::new(index))?;
            Ok(())
        }
    }
}

/// Parse `argv` and run; returns the process exit code. Usage errors exit 2.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
