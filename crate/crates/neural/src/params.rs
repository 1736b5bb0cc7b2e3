//! Parameter storage. Every tensor is a row-major `Array2<f64>`; biases and
//! norm scales are `1 x n` rows so they broadcast over sequence rows.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::EncoderConfig;
use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub attn_norm_g: Matrix,
    pub attn_norm_b: Matrix,
    pub wq: Matrix,
    pub bq: Matrix,
    pub wk: Matrix,
    pub bk: Matrix,
    pub wv: Matrix,
    pub bv: Matrix,
    pub wo: Matrix,
    pub bo: Matrix,
    pub ffn_norm_g: Matrix,
    pub ffn_norm_b: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParameters {
    pub token: Matrix,
    pub position: Matrix,
    pub segment: Matrix,
    pub x_layout: Matrix,
    pub y_layout: Matrix,
    pub layers: Vec<LayerParams>,
    /// Closing norm of a non-empty stack.
    pub final_norm_g: Matrix,
    pub final_norm_b: Matrix,
    /// Per-token labeling projection `[hidden x tag_count]`.
    pub label_w: Matrix,
    pub label_b: Matrix,
    /// Masked-token prediction projection `[hidden x vocab_size]`.
    pub mlm_w: Matrix,
    pub mlm_b: Matrix,
}

fn normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let dist = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn ones(n: usize) -> Matrix {
    Array2::ones((1, n))
}

fn zeros(n: usize) -> Matrix {
    Array2::zeros((1, n))
}

impl EncoderParameters {
    /// Normal(0, 0.02) tables and weights, zero biases, unit norm scales.
    pub fn init<R: Rng>(config: &EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let f = config.ffn_size;
        let layers = (0..config.layer_count)
            .map(|_| LayerParams {
                attn_norm_g: ones(h),
                attn_norm_b: zeros(h),
                wq: normal(h, h, rng),
                bq: zeros(h),
                wk: normal(h, h, rng),
                bk: zeros(h),
                wv: normal(h, h, rng),
                bv: zeros(h),
                wo: normal(h, h, rng),
                bo: zeros(h),
                ffn_norm_g: ones(h),
                ffn_norm_b: zeros(h),
                w1: normal(h, f, rng),
                b1: zeros(f),
                w2: normal(f, h, rng),
                b2: zeros(h),
            })
            .collect();
        Ok(Self {
            token: normal(config.vocab_size, h, rng),
            position: normal(config.max_seq_len, h, rng),
            segment: normal(config.segment_count, h, rng),
            x_layout: normal(config.coord_vocab, h, rng),
            y_layout: normal(config.coord_vocab, h, rng),
            layers,
            final_norm_g: ones(h),
            final_norm_b: zeros(h),
            label_w: normal(h, config.tag_count, rng),
            label_b: zeros(config.tag_count),
            mlm_w: normal(h, config.vocab_size, rng),
            mlm_b: zeros(config.vocab_size),
        })
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_mut(|_, t| t.fill(0.0));
        out
    }

    /// Fresh labeling head for a new tag set.
    pub fn reset_label_head<R: Rng>(&mut self, tag_count: usize, rng: &mut R) {
        let h = self.label_w.nrows();
        self.label_w = normal(h, tag_count, rng);
        self.label_b = zeros(tag_count);
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> = vec![
            ("token".into(), &self.token),
            ("position".into(), &self.position),
            ("segment".into(), &self.segment),
            ("x_layout".into(), &self.x_layout),
            ("y_layout".into(), &self.y_layout),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let p = |n: &str| format!("layers.{i}.{n}");
            out.extend([
                (p("attn_norm_g"), &l.attn_norm_g),
                (p("attn_norm_b"), &l.attn_norm_b),
                (p("wq"), &l.wq),
                (p("bq"), &l.bq),
                (p("wk"), &l.wk),
                (p("bk"), &l.bk),
                (p("wv"), &l.wv),
                (p("bv"), &l.bv),
                (p("wo"), &l.wo),
                (p("bo"), &l.bo),
                (p("ffn_norm_g"), &l.ffn_norm_g),
                (p("ffn_norm_b"), &l.ffn_norm_b),
                (p("w1"), &l.w1),
                (p("b1"), &l.b1),
                (p("w2"), &l.w2),
                (p("b2"), &l.b2),
            ]);
        }
        out.extend([
            ("final_norm_g".into(), &self.final_norm_g),
            ("final_norm_b".into(), &self.final_norm_b),
            ("label_w".into(), &self.label_w),
            ("label_b".into(), &self.label_b),
            ("mlm_w".into(), &self.mlm_w),
            ("mlm_b".into(), &self.mlm_b),
        ]);
        out
    }

    /// Visit tensors mutably in the same order as [`tensors`].
    ///
    /// [`tensors`]: EncoderParameters::tensors
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Matrix)) {
        f("token", &mut self.token);
        f("position", &mut self.position);
        f("segment", &mut self.segment);
        f("x_layout", &mut self.x_layout);
        f("y_layout", &mut self.y_layout);
        for l in self.layers.iter_mut() {
            f("attn_norm_g", &mut l.attn_norm_g);
            f("attn_norm_b", &mut l.attn_norm_b);
            f("wq", &mut l.wq);
            f("bq", &mut l.bq);
            f("wk", &mut l.wk);
            f("bk", &mut l.bk);
            f("wv", &mut l.wv);
            f("bv", &mut l.bv);
            f("wo", &mut l.wo);
            f("bo", &mut l.bo);
            f("ffn_norm_g", &mut l.ffn_norm_g);
            f("ffn_norm_b", &mut l.ffn_norm_b);
            f("w1", &mut l.w1);
            f("b1", &mut l.b1);
            f("w2", &mut l.w2);
            f("b2", &mut l.b2);
        }
        f("final_norm_g", &mut self.final_norm_g);
        f("final_norm_b", &mut self.final_norm_b);
        f("label_w", &mut self.label_w);
        f("label_b", &mut self.label_b);
        f("mlm_w", &mut self.mlm_w);
        f("mlm_b", &mut self.mlm_b);
    }

    /// Apply `f(self_tensor, other_tensor)` pairwise over matching tensors.
    pub fn zip_mut(&mut self, other: &EncoderParameters, mut f: impl FnMut(&mut Matrix, &Matrix)) {
        let others: Vec<&Matrix> = other.tensors().into_iter().map(|(_, t)| t).collect();
        let mut i = 0;
        self.for_each_mut(|_, t| {
            f(t, others[i]);
            i += 1;
        });
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &EncoderParameters, scale: f64) {
        self.zip_mut(other, |a, b| a.scaled_add(scale, b));
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_mut(|_, t| t.mapv_inplace(|v| v * factor));
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// First tensor holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }

    /// Check every tensor's shape against `config`.
    pub fn check_shapes(&self, config: &EncoderConfig) -> Result<()> {
        let h = config.hidden_size;
        let f = config.ffn_size;
        let mut expected: Vec<(usize, usize)> = vec![
            (config.vocab_size, h),
            (config.max_seq_len, h),
            (config.segment_count, h),
            (config.coord_vocab, h),
            (config.coord_vocab, h),
        ];
        for _ in 0..config.layer_count {
            expected.extend([
                (1, h),
                (1, h),
                (h, h),
                (1, h),
                (h, h),
                (1, h),
                (h, h),
                (1, h),
                (h, h),
                (1, h),
                (1, h),
                (1, h),
                (h, f),
                (1, f),
                (f, h),
                (1, h),
            ]);
        }
        expected.extend([
            (1, h),
            (1, h),
            (h, config.tag_count),
            (1, config.tag_count),
            (h, config.vocab_size),
            (1, config.vocab_size),
        ]);
        let tensors = self.tensors();
        if tensors.len() != expected.len() {
            return Err(Error::Input(format!(
                "expected {} tensors for {} layers, found {}",
                expected.len(),
                config.layer_count,
                tensors.len()
            )));
        }
        for ((name, t), want) in tensors.iter().zip(expected) {
            if t.dim() != want {
                return Err(Error::Input(format!(
                    "tensor {name} has shape {:?}, config expects {want:?}",
                    t.dim()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_shapes_and_stats() {
        let cfg = EncoderConfig::tiny(50, 9);
        let p = EncoderParameters::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        p.check_shapes(&cfg).unwrap();
        assert_eq!(p.layers[0].bq.sum(), 0.0);
        assert_eq!(p.layers[1].ffn_norm_g.sum(), 32.0);
        let t = &p.x_layout;
        let mean = t.mean().unwrap();
        let std = (t.mapv(|v| (v - mean).powi(2)).mean().unwrap()).sqrt();
        assert!(mean.abs() < 1e-3);
        assert!((std - 0.02).abs() < 1e-3);
    }

    #[test]
    fn visit_orders_agree() {
        let cfg = EncoderConfig::tiny(20, 5);
        let mut p = EncoderParameters::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let names: Vec<String> = p
            .tensors()
            .into_iter()
            .map(|(n, _)| n.rsplit('.').next().unwrap().to_string())
            .collect();
        let mut visited = Vec::new();
        p.for_each_mut(|n, _| visited.push(n.to_string()));
        assert_eq!(names, visited);
    }

    #[test]
    fn shape_mismatch_detected() {
        let cfg = EncoderConfig::tiny(20, 5);
        let p = EncoderParameters::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let other = EncoderConfig::tiny(21, 5);
        assert!(p.check_shapes(&other).is_err());
    }
}
