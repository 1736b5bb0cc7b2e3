//! Token vocabulary and per-document model features.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use vrdie_core::{Document, GridBBox, Span};

use crate::encoder::ModelInput;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const MASK: u32 = 2;
pub const SEP: u32 = 3;
pub const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[MASK]", "[SEP]"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Specials first, then corpus tokens by descending frequency (ties in
    /// lexical order), truncated to `max_size` entries in total.
    pub fn build(docs: &[Document], max_size: Option<usize>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for text in doc.texts() {
                *counts.entry(text).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, _)| !SPECIALS.contains(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        if let Some(max) = max_size {
            tokens.truncate(max.max(SPECIALS.len()));
        }
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(SPECIALS[UNK as usize])
    }
}

/// Token ids and grid boxes of a whole document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocFeatures {
    pub ids: Vec<u32>,
    pub bboxes: Vec<GridBBox>,
}

impl DocFeatures {
    pub fn new(doc: &Document, vocab: &Vocab) -> Self {
        Self {
            ids: doc.texts().into_iter().map(|t| vocab.id(t)).collect(),
            bboxes: doc.grid_bboxes(),
        }
    }

    /// Model input for the tokens of `range`, positioned from 0.
    pub fn input(&self, range: Span) -> ModelInput {
        ModelInput::new(
            self.ids[range.start..=range.end].to_vec(),
            self.bboxes[range.start..=range.end].to_vec(),
        )
    }
}
