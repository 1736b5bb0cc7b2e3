//! A trained or initialised model: encoder configuration, vocabulary,
//! optional task tag scheme and parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};
use vrdie_core::TagScheme;

use crate::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::params::EncoderParameters;
use crate::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: EncoderConfig,
    pub vocab: Vocab,
    /// Tag scheme of the labeling head; `None` for a pre-trained encoder.
    pub scheme: Option<TagScheme>,
    pub params: EncoderParameters,
}

impl Model {
    /// Fresh parameters. Table sizes follow `vocab` and `scheme`.
    pub fn random<R: Rng>(
        mut config: EncoderConfig,
        vocab: Vocab,
        scheme: Option<TagScheme>,
        rng: &mut R,
    ) -> Result<Self> {
        config.vocab_size = vocab.len();
        config.tag_count = scheme.as_ref().map_or(1, TagScheme::size);
        let params = EncoderParameters::init(&config, rng)?;
        Ok(Self {
            config,
            vocab,
            scheme,
            params,
        })
    }

    /// Attach a labeling head for `scheme`, re-initialising it unless the
    /// model already carries that exact scheme.
    pub fn for_scheme<R: Rng>(mut self, scheme: TagScheme, rng: &mut R) -> Self {
        if self.scheme.as_ref() != Some(&scheme) {
            self.config.tag_count = scheme.size();
            self.params.reset_label_head(scheme.size(), rng);
            self.scheme = Some(scheme);
        }
        self
    }

    /// Consistency between config, vocabulary, scheme and tensors.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.vocab.len() != self.config.vocab_size {
            return Err(Error::Input(format!(
                "vocabulary has {} entries, config expects {}",
                self.vocab.len(),
                self.config.vocab_size
            )));
        }
        let tags = self.scheme.as_ref().map_or(1, TagScheme::size);
        if tags != self.config.tag_count {
            return Err(Error::Input(format!(
                "tag scheme has {tags} tags, config expects {}",
                self.config.tag_count
            )));
        }
        self.params.check_shapes(&self.config)?;
        if let Some(name) = self.params.first_non_finite() {
            return Err(Error::Input(format!("tensor {name} holds non-finite values")));
        }
        Ok(())
    }
}
