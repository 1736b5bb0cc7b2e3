use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows in each layout embedding table: grid coordinates 0..=1000.
pub const COORD_VOCAB: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub hidden_size: usize,
    pub layer_count: usize,
    pub head_count: usize,
    pub ffn_size: usize,
    pub coord_vocab: usize,
    pub segment_count: usize,
    pub tag_count: usize,
    pub dropout: f64,
    /// Add the x/y layout embeddings. Off reproduces a text-only encoder.
    pub use_layout: bool,
    pub layer_norm_eps: f64,
}

impl Default for EncoderConfig {
    /// BERT-base-sized layout encoder.
    fn default() -> Self {
        Self {
            vocab_size: 21128,
            max_seq_len: 512,
            hidden_size: 768,
            layer_count: 12,
            head_count: 12,
            ffn_size: 3072,
            coord_vocab: COORD_VOCAB,
            segment_count: 2,
            tag_count: 9,
            dropout: 0.1,
            use_layout: true,
            layer_norm_eps: 1e-12,
        }
    }
}

impl EncoderConfig {
    /// Desk-scale encoder for CPU experiments.
    pub fn tiny(vocab_size: usize, tag_count: usize) -> Self {
        Self {
            vocab_size,
            max_seq_len: 64,
            hidden_size: 32,
            layer_count: 2,
            head_count: 2,
            ffn_size: 64,
            tag_count,
            dropout: 0.0,
            layer_norm_eps: 1e-5,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.head_count
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Input(format!("encoder config: {m}")));
        if self.coord_vocab != COORD_VOCAB {
            return fail("coord_vocab must be 1001");
        }
        if self.max_seq_len == 0 {
            return fail("max_seq_len must be at least 1");
        }
        if self.head_count == 0 || !self.hidden_size.is_multiple_of(self.head_count) {
            return fail("hidden_size must be divisible by head_count");
        }
        if self.vocab_size == 0 || self.segment_count == 0 || self.tag_count == 0 || self.ffn_size == 0 {
            return fail("table sizes must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}
