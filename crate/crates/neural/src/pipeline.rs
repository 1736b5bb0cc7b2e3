//! Pre-training, task fine-tuning and whole-document extraction.

use std::path::Path;

use log::{debug, info};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vrdie_core::metrics::{evaluate, EvalReport};
use vrdie_core::tagging::{decode, encode};
use vrdie_core::window::{default_stride, window_starts};
use vrdie_core::{AnnotationSet, Document, Span, TagScheme, TagSequence, Task};

use crate::checkpoint::{checkpoint_path, Checkpoint, DevPoint};
use crate::config::EncoderConfig;
use crate::encoder::ModelInput;
use crate::error::{Error, Result};
use crate::heads::LossStats;
use crate::model::Model;
use crate::objective::{accumulate, label_logits, Objective};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::params::EncoderParameters;
use crate::pretraining::{build_mllm_batch, build_phs_batch, select_potential_headings, HeadingHeuristic};
use crate::vocab::{DocFeatures, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Evaluate on dev every this many optimizer steps; 0 means once per
    /// epoch.
    pub eval_every: usize,
    /// Stop after this many evaluations without a dev F1 improvement.
    pub patience: usize,
    pub max_steps: Option<usize>,
    /// Stop as soon as dev F1 reaches this value.
    pub target_dev_f1: Option<f64>,
    /// Window stride; defaults to half the maximum sequence length.
    pub stride: Option<usize>,
    pub mask_rate: f64,
    /// Share of eligible pre-training windows turned into heading-selection
    /// instances.
    pub phs_rate: f64,
    pub heading_heuristic: HeadingHeuristic,
    /// Also write a checkpoint every this many steps when a run directory is
    /// given; the final state is always written.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 1e-5,
            batch_size: 8,
            seed: 0,
            eval_every: 0,
            patience: 5,
            max_steps: None,
            target_dev_f1: None,
            stride: None,
            mask_rate: 0.15,
            phs_rate: 0.15,
            heading_heuristic: HeadingHeuristic::default(),
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Input(format!("train config: {m}")));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return fail("mask_rate must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.phs_rate) {
            return fail("phs_rate must lie in [0, 1]");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    fn stride_for(&self, max_len: usize) -> usize {
        self.stride.unwrap_or_else(|| default_stride(max_len)).clamp(1, max_len)
    }
}

/// Window ranges over `n` tokens.
fn windows(n: usize, max_len: usize, stride: usize) -> Vec<Span> {
    window_starts(n, max_len, stride)
        .into_iter()
        .map(|s| Span::new(s, (s + max_len).min(n) - 1))
        .collect()
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final model for pre-training, best-on-dev model for fine-tuning.
    pub model: Model,
    pub optimizer: AdamState,
    pub steps: usize,
    pub loss_history: Vec<f64>,
    pub dev_history: Vec<DevPoint>,
    pub best_dev_f1: Option<f64>,
    /// First evaluated step at which dev F1 reached the configured target.
    pub steps_to_target: Option<usize>,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            optimizer: Some(self.optimizer.clone()),
            step: self.steps,
            loss_history: self.loss_history.clone(),
            dev_history: self.dev_history.clone(),
            ..Checkpoint::new(self.model.clone())
        }
    }
}

struct Trainer<'a> {
    model: Model,
    optimizer: AdamState,
    adam: AdamConfig,
    rng: ChaCha8Rng,
    step: usize,
    loss_history: Vec<f64>,
    run_dir: Option<&'a Path>,
    checkpoint_every: Option<usize>,
}

impl Trainer<'_> {
    /// One optimizer step over a batch of (input, objective) pairs, each
    /// weighted equally. Returns `None` when the batch was empty.
    fn step<I>(&mut self, items: &[I], objective: impl Fn(&I) -> (&ModelInput, Objective<'_>)) -> Result<Option<f64>> {
        if items.is_empty() {
            return Ok(None);
        }
        let mut grads: EncoderParameters = self.model.params.zeros_like();
        let weight = 1.0 / items.len() as f64;
        let mut total = 0.0;
        for item in items {
            let (input, obj) = objective(item);
            let stats: LossStats = accumulate(
                &self.model.config,
                &self.model.params,
                input,
                obj,
                weight,
                &mut grads,
                Some(&mut self.rng),
            )?;
            total += stats.loss * weight;
        }
        adam_step(&mut self.model.params, &grads, &mut self.optimizer, &self.adam)?;
        self.step += 1;
        self.loss_history.push(total);
        if let (Some(dir), Some(every)) = (self.run_dir, self.checkpoint_every) {
            if every > 0 && self.step.is_multiple_of(every) {
                self.save(dir, &[])?;
            }
        }
        Ok(Some(total))
    }

    fn save(&self, dir: &Path, dev_history: &[DevPoint]) -> Result<()> {
        let ckpt = Checkpoint {
            optimizer: Some(self.optimizer.clone()),
            step: self.step,
            loss_history: self.loss_history.clone(),
            dev_history: dev_history.to_vec(),
            ..Checkpoint::new(self.model.clone())
        };
        ckpt.save(&checkpoint_path(dir, self.step))
    }
}

enum PretrainItem {
    Masked(ModelInput, Vec<Option<u32>>),
    Slots(crate::pretraining::PhsBatch),
}

/// Self-supervised pre-training: every window becomes a heading-selection
/// instance when it is eligible and drawn, a masked-token instance
/// otherwise. The vocabulary is built from `corpus` unless given.
pub fn pretrain(
    corpus: &[Document],
    encoder: &EncoderConfig,
    vocab: Option<Vocab>,
    train: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    train.validate()?;
    if corpus.iter().all(|d| d.token_count() == 0) {
        return Err(Error::Input("pre-training corpus is empty".into()));
    }
    let vocab = vocab.unwrap_or_else(|| Vocab::build(corpus, None));
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let model = Model::random(encoder.clone(), vocab, None, &mut rng)?;
    let max_len = model.config.max_seq_len;
    let stride = train.stride_for(max_len);

    let mut windows_in: Vec<(ModelInput, Vec<Span>)> = Vec::new();
    for doc in corpus {
        let feats = DocFeatures::new(doc, &model.vocab);
        let candidates = select_potential_headings(doc, &train.heading_heuristic);
        for range in windows(doc.token_count(), max_len, stride) {
            let local = candidates
                .iter()
                .filter(|c| range.contains(c))
                .map(|c| c.shift_down(range.start))
                .collect();
            windows_in.push((feats.input(range), local));
        }
    }
    info!("pre-training on {} windows", windows_in.len());

    let mut trainer = Trainer {
        optimizer: AdamState::new(&model.params),
        model,
        adam: train.adam(),
        rng,
        step: 0,
        loss_history: Vec::new(),
        run_dir,
        checkpoint_every: train.checkpoint_every,
    };
    let vocab_size = trainer.model.vocab.len();
    let mut order: Vec<usize> = (0..windows_in.len()).collect();
    'epochs: for epoch in 0..train.epochs {
        order.shuffle(&mut trainer.rng);
        for chunk in order.chunks(train.batch_size) {
            let mut items = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (input, candidates) = &windows_in[i];
                let phs = build_phs_batch(input, candidates, &mut trainer.rng, train.phs_rate, max_len)?;
                match phs {
                    Some(batch) => items.push(PretrainItem::Slots(batch)),
                    None => {
                        if let Some(b) = build_mllm_batch(input, train.mask_rate, vocab_size, &mut trainer.rng)? {
                            items.push(PretrainItem::Masked(b.input, b.targets));
                        }
                    }
                }
            }
            trainer.step(&items, |item| match item {
                PretrainItem::Masked(input, targets) => (input, Objective::MaskedTokens(targets)),
                PretrainItem::Slots(b) => (&b.input, Objective::HeadingSlots(&b.targets)),
            })?;
            if train.max_steps.is_some_and(|m| trainer.step >= m) {
                break 'epochs;
            }
        }
        debug!(
            "pretrain epoch {epoch}: step {} loss {:.4}",
            trainer.step,
            trainer.loss_history.last().copied().unwrap_or(f64::NAN)
        );
    }
    if let Some(dir) = run_dir {
        trainer.save(dir, &[])?;
    }
    Ok(TrainOutcome {
        model: trainer.model,
        optimizer: trainer.optimizer,
        steps: trainer.step,
        loss_history: trainer.loss_history,
        dev_history: Vec::new(),
        best_dev_f1: None,
        steps_to_target: None,
    })
}

/// Starting point for fine-tuning.
#[derive(Debug, Clone)]
pub enum Init {
    /// Random parameters; the vocabulary is built from the training corpus
    /// unless given.
    Random { encoder: EncoderConfig, vocab: Option<Vocab> },
    Pretrained(Model),
}

fn task_field_empty(ann: &AnnotationSet, task: Task) -> bool {
    match task {
        Task::He => ann.headings.is_empty(),
        Task::Se => ann.sections.is_empty(),
        Task::Re => ann.relations.is_empty(),
    }
}

/// Per-window inputs and tag targets. Positions covered by a gold span that
/// crosses the window edge get no target.
fn labeled_windows(
    doc: &Document,
    vocab: &Vocab,
    scheme: &TagScheme,
    max_len: usize,
    stride: usize,
) -> Result<Vec<(ModelInput, Vec<Option<u32>>)>> {
    let gold = doc.annotations_or_empty();
    let n = doc.token_count();
    let tags = encode(scheme, n, &gold)?;
    let spans = scheme.spans_of(&gold);
    let feats = DocFeatures::new(doc, vocab);
    let mut out = Vec::new();
    for range in windows(n, max_len, stride) {
        let mut targets: Vec<Option<u32>> = tags.tags[range.start..=range.end].iter().map(|&t| Some(t)).collect();
        for s in spans.iter().filter(|s| s.span.overlaps(&range) && !range.contains(&s.span)) {
            for i in s.span.start.max(range.start)..=s.span.end.min(range.end) {
                targets[i - range.start] = None;
            }
        }
        if targets.iter().any(Option::is_some) {
            out.push((feats.input(range), targets));
        }
    }
    Ok(out)
}

/// Corpus-level (micro) report of `model` against gold annotations.
pub fn evaluate_corpus(model: &Model, docs: &[Document], task: Task) -> Result<EvalReport> {
    let mut reports = Vec::with_capacity(docs.len());
    for doc in docs {
        let predicted = extract(model, doc, task)?;
        reports.push(evaluate(doc, &predicted, &doc.annotations_or_empty(), task));
    }
    Ok(EvalReport::micro(&reports))
}

/// Supervised sequence-labeling fine-tuning with best-on-dev selection and
/// early stopping.
pub fn finetune(
    task: Task,
    train_docs: &[Document],
    dev_docs: &[Document],
    init: Init,
    relation_count: usize,
    train: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    train.validate()?;
    if train_docs.is_empty() {
        return Err(Error::Input("training corpus is empty".into()));
    }
    if let Some(d) = train_docs.iter().find(|d| d.annotations.is_none()) {
        return Err(Error::Input(format!("training document {} has no annotations", d.id)));
    }
    if train_docs.iter().all(|d| task_field_empty(&d.annotations_or_empty(), task)) {
        return Err(Error::Input(format!("training corpus carries no {task} annotations")));
    }
    let scheme = TagScheme::for_task(task, relation_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let model = match init {
        Init::Random { encoder, vocab } => {
            let vocab = vocab.unwrap_or_else(|| Vocab::build(train_docs, None));
            Model::random(encoder, vocab, Some(scheme.clone()), &mut rng)?
        }
        Init::Pretrained(model) => {
            model.validate()?;
            model.for_scheme(scheme.clone(), &mut rng)
        }
    };
    let max_len = model.config.max_seq_len;
    let stride = train.stride_for(max_len);
    let mut instances = Vec::new();
    for doc in train_docs {
        instances.extend(labeled_windows(doc, &model.vocab, &scheme, max_len, stride)?);
    }
    info!("fine-tuning {task} on {} windows", instances.len());

    let mut trainer = Trainer {
        optimizer: AdamState::new(&model.params),
        model,
        adam: train.adam(),
        rng,
        step: 0,
        loss_history: Vec::new(),
        run_dir,
        checkpoint_every: train.checkpoint_every,
    };
    let mut dev_history: Vec<DevPoint> = Vec::new();
    let mut best: Option<(f64, Model)> = None;
    let mut stale = 0usize;
    let mut steps_to_target = None;

    // returns true when training should stop
    let mut evaluate_now = |trainer: &Trainer, dev_history: &mut Vec<DevPoint>| -> Result<bool> {
        if dev_docs.is_empty() {
            return Ok(false);
        }
        let f1 = evaluate_corpus(&trainer.model, dev_docs, task)?.f1;
        debug!("step {}: dev f1 {f1:.4}", trainer.step);
        dev_history.push(DevPoint { step: trainer.step, f1 });
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            best = Some((f1, trainer.model.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if let Some(target) = train.target_dev_f1 {
            if f1 >= target {
                steps_to_target.get_or_insert(trainer.step);
                return Ok(true);
            }
        }
        Ok(stale >= train.patience.max(1))
    };

    let mut order: Vec<usize> = (0..instances.len()).collect();
    'epochs: for _ in 0..train.epochs {
        order.shuffle(&mut trainer.rng);
        for chunk in order.chunks(train.batch_size) {
            let items: Vec<&(ModelInput, Vec<Option<u32>>)> = chunk.iter().map(|&i| &instances[i]).collect();
            trainer.step(&items, |item| (&item.0, Objective::Tags(&item.1)))?;
            if train.eval_every > 0 && trainer.step.is_multiple_of(train.eval_every) && evaluate_now(&trainer, &mut dev_history)? {
                break 'epochs;
            }
            if train.max_steps.is_some_and(|m| trainer.step >= m) {
                break 'epochs;
            }
        }
        if train.eval_every == 0 && evaluate_now(&trainer, &mut dev_history)? {
            break;
        }
    }
    let last_evaluated = dev_history.last().is_some_and(|p| p.step == trainer.step);
    if !dev_docs.is_empty() && !last_evaluated {
        evaluate_now(&trainer, &mut dev_history)?;
    }
    let best_dev_f1 = best.as_ref().map(|(f, _)| *f);
    if let Some((_, model)) = best {
        trainer.model = model;
    }
    if let Some(dir) = run_dir {
        trainer.save(dir, &dev_history)?;
    }
    Ok(TrainOutcome {
        model: trainer.model,
        optimizer: trainer.optimizer,
        steps: trainer.step,
        loss_history: trainer.loss_history,
        dev_history,
        best_dev_f1,
        steps_to_target,
    })
}

/// Tag logits for a whole document, averaged over overlapping windows.
pub fn document_logits(model: &Model, doc: &Document, stride: Option<usize>) -> Result<Array2<f64>> {
    let n = doc.token_count();
    let max_len = model.config.max_seq_len;
    let stride = stride.unwrap_or_else(|| default_stride(max_len)).clamp(1, max_len);
    let feats = DocFeatures::new(doc, &model.vocab);
    let mut sum = Array2::<f64>::zeros((n, model.config.tag_count));
    let mut count = vec![0usize; n];
    for range in windows(n, max_len, stride) {
        let logits = label_logits(&model.config, &model.params, &feats.input(range))?;
        let mut slot = sum.slice_mut(ndarray::s![range.start..=range.end, ..]);
        slot += &logits;
        for c in &mut count[range.start..=range.end] {
            *c += 1;
        }
    }
    for (mut row, &c) in sum.rows_mut().into_iter().zip(&count) {
        row /= c as f64;
    }
    Ok(sum)
}

/// Predict `task` annotations for a whole document. Only the task's own
/// field of the returned set is populated.
pub fn extract(model: &Model, doc: &Document, task: Task) -> Result<AnnotationSet> {
    let scheme = model
        .scheme
        .as_ref()
        .ok_or_else(|| Error::Input("model has no labeling head".into()))?;
    if scheme.task != task {
        return Err(Error::Input(format!(
            "model is trained for {}, not {task}",
            scheme.task
        )));
    }
    if doc.token_count() == 0 {
        return Ok(AnnotationSet::default());
    }
    let logits = document_logits(model, doc, None)?;
    let tags = logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect();
    Ok(decode(scheme, &TagSequence { tags }))
}

/// Share of masked positions whose original token is the argmax
/// prediction, over freshly masked copies of every window.
pub fn masked_accuracy(model: &Model, docs: &[Document], mask_rate: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_len = model.config.max_seq_len;
    let (mut hit, mut total) = (0usize, 0usize);
    for doc in docs {
        let feats = DocFeatures::new(doc, &model.vocab);
        for range in windows(doc.token_count(), max_len, max_len) {
            let Some(batch) = build_mllm_batch(&feats.input(range), mask_rate, model.vocab.len(), &mut rng)? else {
                continue;
            };
            let stats = crate::objective::loss(
                &model.config,
                &model.params,
                &batch.input,
                Objective::MaskedTokens(&batch.targets),
            )?;
            hit += stats.correct;
            total += stats.count;
        }
    }
    if total == 0 {
        return Err(Error::UndefinedLoss("no masked positions".into()));
    }
    Ok(hit as f64 / total as f64)
}
