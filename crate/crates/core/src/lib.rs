//! Core data model and algorithms for layout-aware information extraction
//! from visually rich documents: corpus I/O, windowing, tagging schemes,
//! TOC numbering, nearest-principle pairing, metrics and synthetic corpora.

pub mod corpus;
pub mod doc;
pub mod error;
pub mod metrics;
pub mod pairing;
pub mod synth;
pub mod tagging;
pub mod toc;
pub mod window;

pub use corpus::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use doc::{
    normalize_bbox, AnnotationSet, Document, Domain, GridBBox, Heading, Page, RawBBox, Relation,
    SectionAnnotation, Span, Token,
};
pub use error::{Error, Result};
pub use tagging::{decode, encode, TagScheme, TagSequence, Task};
pub use toc::{build_toc, TocEntry};
pub use window::{window, WindowedSequence};
