//! JSON-lines corpus format, one document per line.
//!
//! ```text
//! {"id": "...", "domain": "product", "pages": [{"width": 612, "height": 792,
//!   "tokens": [{"t": "word", "bbox": [x0, y0, x1, y1], "font_size": 10.0}]}],
//!  "annotations": {"headings": [...], "sections": [...], "relations": [...]}}
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc::{AnnotationSet, Document, Domain, Page, RawBBox, Token};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct WireToken {
    t: String,
    bbox: RawBBox,
    #[serde(default)]
    font_size: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WirePage {
    width: f64,
    height: f64,
    tokens: Vec<WireToken>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireDocument {
    id: String,
    domain: Domain,
    pages: Vec<WirePage>,
    #[serde(default)]
    annotations: Option<AnnotationSet>,
}

impl WireDocument {
    fn into_document(self) -> Result<Document> {
        let pages = self
            .pages
            .into_iter()
            .map(|p| Page {
                width: p.width,
                height: p.height,
                tokens: p
                    .tokens
                    .into_iter()
                    .map(|t| Token {
                        text: t.t,
                        bbox: t.bbox,
                        font_size: t.font_size,
                        global_index: 0,
                    })
                    .collect(),
            })
            .collect();
        Document::new(self.id, self.domain, pages, self.annotations)
    }

    fn from_document(doc: &Document) -> Self {
        WireDocument {
            id: doc.id.clone(),
            domain: doc.domain,
            pages: doc
                .pages
                .iter()
                .map(|p| WirePage {
                    width: p.width,
                    height: p.height,
                    tokens: p
                        .tokens
                        .iter()
                        .map(|t| WireToken {
                            t: t.text.clone(),
                            bbox: t.bbox,
                            font_size: t.font_size,
                        })
                        .collect(),
                })
                .collect(),
            annotations: doc.annotations.clone(),
        }
    }
}

/// Parse one JSONL line into a validated document.
pub fn parse_document(line: &str) -> Result<Document> {
    let wire: WireDocument = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    wire.into_document()
}

pub fn document_to_json(doc: &Document) -> String {
    serde_json::to_string(&WireDocument::from_document(doc)).expect("document serializes")
}

/// Read a whole corpus. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn read_corpus<R: Read>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let doc = wire.into_document()?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::Invalid {
                doc: doc.id,
                field: "id".into(),
                reason: format!("duplicate id (line {line_no})"),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_corpus(file)
}

pub fn write_corpus<W: Write>(writer: W, docs: &[Document]) -> std::io::Result<()> {
    let mut writer = BufWriter::new(writer);
    for doc in docs {
        writeln!(writer, "{}", document_to_json(doc))?;
    }
    writer.flush()
}

pub fn save_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file = File::create(path).map_err(io_err)?;
    write_corpus(file, docs).map_err(io_err)
}
