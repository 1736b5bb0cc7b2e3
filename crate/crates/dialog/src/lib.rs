//! Document-grounded dialogue: index extracted structure and answer
//! utterances with a section, its TOC path and an optional highlighted span.

pub mod index;
pub mod service;
pub mod text;

pub use index::{Answer, DialogueResponse, Highlight, KnowledgeIndex, TocNode};
pub use service::{router, serve, serve_blocking, ChatRequest, SharedIndex};
