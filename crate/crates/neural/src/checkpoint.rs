//! Versioned JSON checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::optim::AdamState;

pub const FORMAT_VERSION: u32 = 1;

/// One dev-set evaluation during fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevPoint {
    pub step: usize,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Model,
    pub optimizer: Option<AdamState>,
    pub step: usize,
    /// Mean training loss per optimizer step.
    pub loss_history: Vec<f64>,
    #[serde(default)]
    pub dev_history: Vec<DevPoint>,
}

/// `<run_dir>/ckpt-<step>`
pub fn checkpoint_path(run_dir: &Path, step: usize) -> PathBuf {
    run_dir.join(format!("ckpt-{step}"))
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Self {
            version: FORMAT_VERSION,
            model,
            optimizer: None,
            step: 0,
            loss_history: Vec::new(),
            dev_history: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let fail = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| fail(e.to_string()))?;
        }
        let json = serde_json::to_vec(self).map_err(|e| fail(e.to_string()))?;
        fs::write(path, json).map_err(|e| fail(e.to_string()))
    }

    /// Read and validate shapes against the stored config.
    pub fn load(path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let bytes = fs::read(path).map_err(|e| fail(e.to_string()))?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| fail(e.to_string()))?;
        if ckpt.version != FORMAT_VERSION {
            return Err(fail(format!(
                "format version {} unsupported (expected {FORMAT_VERSION})",
                ckpt.version
            )));
        }
        ckpt.model.validate().map_err(|e| fail(e.to_string()))?;
        if let Some(opt) = &ckpt.optimizer {
            for state in [&opt.m, &opt.v] {
                state
                    .check_shapes(&ckpt.model.config)
                    .map_err(|e| fail(format!("optimizer state: {e}")))?;
            }
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EncoderConfig;
    use crate::vocab::Vocab;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use vrdie_core::TagScheme;

    fn model() -> Model {
        let vocab: Vocab = ["[PAD]", "[UNK]", "[MASK]", "[SEP]", "a", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .into();
        let mut cfg = EncoderConfig::tiny(0, 0);
        cfg.hidden_size = 8;
        cfg.ffn_size = 8;
        Model::random(cfg, vocab, Some(TagScheme::hierarchy()), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut ckpt = Checkpoint::new(model());
        ckpt.optimizer = Some(AdamState::new(&ckpt.model.params));
        ckpt.loss_history = vec![2.5, 1.0 / 3.0];
        let path = checkpoint_path(&dir.path().join("runs/x"), 7);
        assert!(path.ends_with("runs/x/ckpt-7"));
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ckpt = Checkpoint::new(model());
        ckpt.model.config.hidden_size = 16;
        ckpt.model.config.head_count = 2;
        let path = dir.path().join("bad");
        ckpt.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint { .. })));
    }

    #[test]
    fn version_and_garbage_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ckpt = Checkpoint::new(model());
        ckpt.version = 99;
        let path = dir.path().join("v");
        ckpt.save(&path).unwrap();
        assert!(Checkpoint::load(&path).is_err());
        fs::write(&path, b"{not json").unwrap();
        assert!(Checkpoint::load(&path).is_err());
        assert!(Checkpoint::load(&dir.path().join("missing")).is_err());
    }
}
