//! Frozen outputs of a fixed tiny model. A change here means the forward
//! pass changed numerically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrdie_core::GridBBox;
use vrdie_neural::{forward, label_logits, EncoderConfig, EncoderParameters, ModelInput};

fn fixture() -> (EncoderConfig, EncoderParameters, ModelInput) {
    let config = EncoderConfig {
        vocab_size: 20,
        max_seq_len: 16,
        hidden_size: 16,
        layer_count: 2,
        head_count: 4,
        ffn_size: 32,
        tag_count: 7,
        dropout: 0.0,
        layer_norm_eps: 1e-5,
        ..EncoderConfig::default()
    };
    let params = EncoderParameters::init(&config, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
    let ids: Vec<u32> = vec![3, 17, 5, 5, 11, 0, 19, 8];
    let boxes = (0..ids.len() as u16)
        .map(|i| GridBBox { x0: 100 * i, y0: 50 + 7 * i, x1: 100 * i + 90, y1: 70 + 7 * i })
        .collect();
    let mut input = ModelInput::new(ids, boxes);
    input.mask[7] = false;
    (config, params, input)
}

/// Plain and position-weighted sums, so that permutations show up too.
/// The plain sum of the hidden states is zero because of the closing norm.
fn checksum(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.enumerate().fold((0.0, 0.0), |(s, w), (i, v)| (s + v, w + v * (i % 13 + 1) as f64))
}

#[test]
fn encoder_output_checksum() {
    let (config, params, input) = fixture();
    let hidden = forward(&config, &params, &input, None).unwrap().hidden;
    let got = checksum(hidden.iter().copied());
    assert!((got.0 - HIDDEN.0).abs() < 1e-9 && (got.1 - HIDDEN.1).abs() < 1e-9, "{got:?}");
}

#[test]
fn label_logits_checksum() {
    let (config, params, input) = fixture();
    let logits = label_logits(&config, &params, &input).unwrap();
    let got = checksum(logits.iter().copied());
    assert!((got.0 - LOGITS.0).abs() < 1e-9 && (got.1 - LOGITS.1).abs() < 1e-9, "{got:?}");
}

const HIDDEN: (f64, f64) = (0.0, 27.07881765125429);
const LOGITS: (f64, f64) = (0.1570962673743922, 2.208022028467541);
