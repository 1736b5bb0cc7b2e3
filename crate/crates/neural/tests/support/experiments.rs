//! Fixtures for the gradient check and the synthetic training experiments.
//! Shared with the acceptance suite in the cli crate.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrdie_core::synth::{generate, generate_bucketed, BucketConfig, CueMode, SynthConfig};
use vrdie_core::{Document, GridBBox, Span, Task};
use vrdie_neural::gradcheck::{check_gradients, GradCheckReport};
use vrdie_neural::{
    evaluate_corpus, finetune, masked_accuracy, pretrain, EncoderConfig, EncoderParameters, Init, Model, ModelInput,
    Objective, PhsTargets, TrainConfig, Vocab,
};

pub const GRAD_EPS: f64 = 1e-4;
pub const GRAD_FLOOR: f64 = 1e-6;

/// Hidden 8, two layers, two heads.
pub fn grad_config() -> EncoderConfig {
    EncoderConfig {
        vocab_size: 12,
        max_seq_len: 8,
        hidden_size: 8,
        layer_count: 2,
        head_count: 2,
        ffn_size: 16,
        tag_count: 5,
        dropout: 0.0,
        layer_norm_eps: 1e-5,
        ..EncoderConfig::default()
    }
}

/// Parameters drawn at init scale and then blown up, so that attention is
/// far from uniform and every path carries a measurable gradient.
pub fn grad_params(config: &EncoderConfig, seed: u64) -> EncoderParameters {
    let mut p = EncoderParameters::init(config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    p.for_each_mut(|name, t| {
        if !name.contains("norm") {
            t.mapv_inplace(|v| v * 20.0);
        }
    });
    p
}

fn grad_input() -> ModelInput {
    let bb = |x: u16, y: u16| GridBBox {
        x0: x,
        y0: y,
        x1: x + 40,
        y1: y + 12,
    };
    let mut input = ModelInput::new(
        vec![4, 7, 1, 9, 4, 11],
        vec![bb(10, 10), bb(60, 10), bb(110, 10), bb(10, 40), bb(500, 900), bb(960, 988)],
    );
    input.segments = vec![0, 0, 0, 1, 1, 1];
    input
}

/// Max relative gradient error for the tagging, masked-token and
/// heading-selection losses, in that order.
pub fn grad_check_all() -> Vec<(&'static str, GradCheckReport)> {
    let config = grad_config();
    let params = grad_params(&config, 3);
    let input = grad_input();

    let tags = [Some(0), Some(3), Some(1), None, Some(4), Some(2)];
    let masked = [None, Some(7), None, Some(9), None, Some(2)];
    // body 0..=2 with two slots, separator at 3, fragments at 4 and 5
    let slots = PhsTargets {
        slots: vec![Span::new(0, 0), Span::new(1, 2)],
        fragments: vec![Span::new(4, 4), Span::new(5, 5)],
        alignment: vec![1, 0],
    };
    let run = |objective| check_gradients(&config, &params, &input, objective, GRAD_EPS, GRAD_FLOOR).unwrap();
    vec![
        ("tags", run(Objective::Tags(&tags))),
        ("masked tokens", run(Objective::MaskedTokens(&masked))),
        ("heading slots", run(Objective::HeadingSlots(&slots))),
    ]
}

pub fn tiny_encoder() -> EncoderConfig {
    EncoderConfig::tiny(0, 0)
}

/// Desk-scale fine-tuning defaults shared by the experiments.
pub fn desk_train(seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 3e-3,
        batch_size: 8,
        seed,
        ..TrainConfig::default()
    }
}

/// Test F1 on the layout-only heading task.
pub struct AblationRun {
    pub train_docs: usize,
    pub test_f1: f64,
}

pub fn layout_ablation(use_layout: bool, train_docs: usize, epochs: usize) -> AblationRun {
    let docs = generate(&SynthConfig {
        doc_count: train_docs + 100,
        cue_mode: CueMode::LayoutOnly,
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap();
    let (train, rest) = docs.split_at(train_docs);
    let (dev, test) = rest.split_at(50);
    let encoder = EncoderConfig {
        use_layout,
        ..tiny_encoder()
    };
    let config = TrainConfig {
        epochs,
        patience: epochs,
        ..desk_train(1)
    };
    let out = finetune(Task::He, train, dev, Init::Random { encoder, vocab: None }, 4, &config, None).unwrap();
    AblationRun {
        train_docs,
        test_f1: evaluate_corpus(&out.model, test, Task::He).unwrap().f1,
    }
}

/// Corpora for the convergence comparison: unlabeled pre-training
/// documents, then labeled train and dev documents.
pub struct ConvergenceData {
    pub pretrain: Vec<Document>,
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub vocab: Vocab,
}

pub fn convergence_data() -> ConvergenceData {
    let mut pre = generate(&SynthConfig {
        doc_count: 400,
        seed: 100,
        ..SynthConfig::default()
    })
    .unwrap();
    for d in &mut pre {
        d.annotations = None;
    }
    let mut labeled = generate(&SynthConfig {
        doc_count: 130,
        seed: 200,
        ..SynthConfig::default()
    })
    .unwrap();
    let dev = labeled.split_off(100);
    let mut all = pre.clone();
    all.extend_from_slice(&labeled);
    let vocab = Vocab::build(&all, None);
    ConvergenceData {
        pretrain: pre,
        train: labeled,
        dev,
        vocab,
    }
}

/// MLLM-only pre-training of the tiny encoder.
pub fn mllm_pretrain(docs: &[Document], vocab: Option<Vocab>, steps: usize) -> (Model, Vec<f64>) {
    let config = TrainConfig {
        epochs: usize::MAX,
        max_steps: Some(steps),
        phs_rate: 0.0,
        ..desk_train(5)
    };
    let out = pretrain(docs, &tiny_encoder(), vocab, &config, None).unwrap();
    (out.model, out.loss_history)
}

pub const CONVERGENCE_TARGET: f64 = 0.8;
pub const CONVERGENCE_BUDGET: usize = 3000;

/// Optimizer steps until dev F1 first reaches the target, `None` when the
/// budget ran out first.
pub fn steps_to_target(data: &ConvergenceData, init: Init, seed: u64) -> Option<usize> {
    let config = TrainConfig {
        epochs: 100,
        eval_every: 5,
        patience: usize::MAX,
        target_dev_f1: Some(CONVERGENCE_TARGET),
        max_steps: Some(CONVERGENCE_BUDGET),
        ..desk_train(seed)
    };
    finetune(Task::He, &data.train, &data.dev, init, 4, &config, None)
        .unwrap()
        .steps_to_target
}

/// Masked-token accuracy on held-out documents whose words are a function
/// of their grid bucket.
pub fn mllm_learnability(steps: usize) -> f64 {
    let train = generate_bucketed(&BucketConfig {
        doc_count: 100,
        seed: 1,
        ..BucketConfig::default()
    })
    .unwrap();
    let dev = generate_bucketed(&BucketConfig {
        doc_count: 20,
        seed: 2,
        ..BucketConfig::default()
    })
    .unwrap();
    let (model, _) = mllm_pretrain(&train, None, steps);
    masked_accuracy(&model, &dev, 0.15, 1).unwrap()
}
