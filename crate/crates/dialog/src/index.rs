//! Knowledge index over extracted document structure, and lexical answer
//! retrieval.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};
use vrdie_core::toc::ancestor_chain;
use vrdie_core::{build_toc, Document, Span, TocEntry};

use crate::text::terms;

const HEADING_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TocNode {
    pub number: String,
    pub title: String,
    pub level: u8,
    pub span: Span,
    pub children: Vec<TocNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedDocument {
    pub id: String,
    pub toc: Vec<TocEntry>,
    /// Heading text per TOC entry.
    pub titles: Vec<String>,
}

impl IndexedDocument {
    /// TOC entries as a forest following parent links.
    pub fn toc_tree(&self) -> Vec<TocNode> {
        fn build(doc: &IndexedDocument, parent: Option<usize>) -> Vec<TocNode> {
            doc.toc
                .iter()
                .enumerate()
                .filter(|(_, e)| e.parent == parent)
                .map(|(i, e)| TocNode {
                    number: e.number.clone(),
                    title: doc.titles[i].clone(),
                    level: e.level,
                    span: e.span,
                    children: build(doc, Some(i)),
                })
                .collect()
        }
        build(self, None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub subject: Span,
    pub object: Span,
    pub rel: usize,
    pub subject_text: String,
    pub object_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedSection {
    /// Position of the owning document in [`KnowledgeIndex::documents`].
    pub doc: usize,
    /// Order of the section within its document.
    pub order: usize,
    pub heading: String,
    pub body: String,
    pub heading_span: Span,
    pub body_span: Span,
    /// Index of the section's heading in the document TOC.
    pub toc_entry: Option<usize>,
    /// Heading texts from the TOC root down to this section.
    pub path: Vec<String>,
    /// Triples whose object lies inside the body.
    pub triples: Vec<Triple>,
    /// Char offset of each body token inside `body`.
    token_offsets: Vec<usize>,
}

/// Sparse TF-IDF vector, sorted by term id.
type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeIndex {
    pub documents: Vec<IndexedDocument>,
    pub sections: Vec<IndexedSection>,
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    vectors: Vec<SparseVec>,
}

/// Character range inside a returned body, tagged with the relation whose
/// object it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    /// Inclusive start, exclusive end, in unicode scalar values.
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueResponse {
    pub document_id: String,
    pub section_heading: String,
    pub section_body: String,
    pub supporting_path: Vec<String>,
    pub highlight: Option<Highlight>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub responses: Vec<DialogueResponse>,
    /// Why nothing was returned, when `responses` is empty.
    pub no_answer: Option<String>,
}

fn term_counts(text: &str) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for t in terms(text) {
        *counts.entry(t).or_insert(0.0) += 1.0;
    }
    counts
}

fn norm(v: &SparseVec) -> f64 {
    v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
}

fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot / (na * nb)
}

fn relation_label(rel: usize) -> String {
    format!("r{rel}")
}

impl KnowledgeIndex {
    /// Index the annotations carried by each document (gold or extracted).
    /// Documents are ordered by id.
    pub fn build(docs: &[Document]) -> Self {
        let mut sorted: Vec<&Document> = docs.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = KnowledgeIndex::default();
        let mut counts: Vec<BTreeMap<String, f64>> = Vec::new();

        for (doc_idx, doc) in sorted.into_iter().enumerate() {
            let ann = doc.annotations_or_empty();
            let toc = build_toc(&ann.headings);
            if toc.is_empty() {
                warn!("document {} has no headings; sections carry no supporting path", doc.id);
            }
            let titles: Vec<String> = toc.iter().map(|e| doc.span_text(e.span)).collect();
            let mut sections = ann.sections.clone();
            sections.sort_by_key(|s| (s.heading, s.body));
            for (order, s) in sections.iter().enumerate() {
                let toc_entry = toc.iter().position(|e| e.span == s.heading);
                let path = match toc_entry {
                    Some(i) => ancestor_chain(&toc, i).into_iter().map(|j| titles[j].clone()).collect(),
                    None => {
                        if !toc.is_empty() {
                            warn!("section heading {} of {} is not in the TOC", s.heading, doc.id);
                        }
                        Vec::new()
                    }
                };
                let texts = doc.texts();
                let mut token_offsets = Vec::with_capacity(s.body.len());
                let mut at = 0;
                for t in &texts[s.body.start..=s.body.end] {
                    token_offsets.push(at);
                    at += t.chars().count() + 1;
                }
                let triples = ann
                    .relations
                    .iter()
                    .filter(|r| s.body.contains(&r.object))
                    .map(|r| Triple {
                        subject: r.subject,
                        object: r.object,
                        rel: r.rel,
                        subject_text: doc.span_text(r.subject),
                        object_text: doc.span_text(r.object),
                    })
                    .collect();
                let heading = doc.span_text(s.heading);
                let body = doc.span_text(s.body);
                let mut c = term_counts(&body);
                for (t, n) in term_counts(&heading) {
                    *c.entry(t).or_insert(0.0) += HEADING_WEIGHT * n;
                }
                counts.push(c);
                index.sections.push(IndexedSection {
                    doc: doc_idx,
                    order,
                    heading,
                    body,
                    heading_span: s.heading,
                    body_span: s.body,
                    toc_entry,
                    path,
                    triples,
                    token_offsets,
                });
            }
            index.documents.push(IndexedDocument {
                id: doc.id.clone(),
                toc,
                titles,
            });
        }

        let mut df: Vec<f64> = Vec::new();
        for c in &counts {
            for t in c.keys() {
                let next = index.vocabulary.len();
                let id = *index.vocabulary.entry(t.clone()).or_insert(next);
                if id == df.len() {
                    df.push(0.0);
                }
                df[id] += 1.0;
            }
        }
        let n = counts.len() as f64;
        index.idf = df.iter().map(|d| ((1.0 + n) / (1.0 + d)).ln() + 1.0).collect();
        index.vectors = counts.iter().map(|c| index.vectorize(c)).collect();
        index
    }

    fn vectorize(&self, counts: &BTreeMap<String, f64>) -> SparseVec {
        let mut v: SparseVec = counts
            .iter()
            .filter_map(|(t, &n)| self.vocabulary.get(t).map(|&id| (id, n * self.idf[id])))
            .collect();
        v.sort_by_key(|(id, _)| *id);
        v
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn document(&self, id: &str) -> Option<&IndexedDocument> {
        self.documents
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.documents[i])
    }

    /// Cosine similarity of the utterance with every section.
    pub fn scores(&self, utterance: &str) -> Vec<f64> {
        let q = self.vectorize(&term_counts(utterance));
        self.vectors.iter().map(|v| cosine(&q, v)).collect()
    }

    /// Best `top_k` sections for an utterance. Ties go to the smaller
    /// (document id, section order).
    pub fn answer(&self, utterance: &str, top_k: usize) -> Answer {
        let no = |reason: &str| Answer {
            responses: Vec::new(),
            no_answer: Some(reason.to_string()),
        };
        if utterance.trim().is_empty() {
            return no("the utterance is empty");
        }
        if self.is_empty() {
            return no("no documents are indexed");
        }
        let scores = self.scores(utterance);
        let mut ranked: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
        if ranked.is_empty() {
            return no("no indexed section shares vocabulary with the utterance");
        }
        // sections are stored in (document id, order) order already
        ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let query: Vec<String> = terms(utterance);
        let responses = ranked
            .into_iter()
            .take(top_k.max(1))
            .map(|i| {
                let s = &self.sections[i];
                DialogueResponse {
                    document_id: self.documents[s.doc].id.clone(),
                    section_heading: s.heading.clone(),
                    section_body: s.body.clone(),
                    supporting_path: s.path.clone(),
                    highlight: self.highlight(s, &query),
                    score: scores[i],
                }
            })
            .collect();
        Answer {
            responses,
            no_answer: None,
        }
    }

    /// Object span of the first triple in the section whose subject or
    /// object shares a term with the query.
    fn highlight(&self, section: &IndexedSection, query: &[String]) -> Option<Highlight> {
        let mut triples: Vec<&Triple> = section.triples.iter().collect();
        triples.sort_by_key(|t| (t.object, t.subject, t.rel));
        let t = triples.into_iter().find(|t| {
            terms(&t.subject_text)
                .iter()
                .chain(terms(&t.object_text).iter())
                .any(|w| query.contains(w))
        })?;
        let first = t.object.start - section.body_span.start;
        let last = t.object.end - section.body_span.start;
        let start = section.token_offsets[first];
        let end = start + t.object_text.chars().count();
        debug_assert!(section.token_offsets[last] < end);
        Some(Highlight {
            start,
            end,
            text: t.object_text.clone(),
            relation: relation_label(t.rel),
        })
    }
}
