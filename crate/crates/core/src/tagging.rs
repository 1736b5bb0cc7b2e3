//! Tag schemes for the three extraction tasks and the span <-> tag codec.
//!
//! Every scheme is a B/E/O scheme: the first token of a span gets its `B-`
//! tag, the last token its `E-` tag, everything else `O`. A single-token span
//! carries only the `B-` tag.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::doc::{AnnotationSet, Heading, Span, LEVEL_COUNT};
use crate::error::{Error, Result};
use crate::pairing::{pair_relations, pair_sections, sections_to_annotations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    He,
    Se,
    Re,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::He, Task::Se, Task::Re];

    pub fn name(&self) -> &'static str {
        match self {
            Task::He => "he",
            Task::Se => "se",
            Task::Re => "re",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "he" | "hierarchy" => Ok(Task::He),
            "se" | "section" => Ok(Task::Se),
            "re" | "relation" => Ok(Task::Re),
            other => Err(Error::Input(format!("unknown task {other:?} (expected he, se or re)"))),
        }
    }
}

/// What a labeled span denotes. Each kind owns one `B-` and one `E-` tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpanKind {
    Heading(u8),
    SectionHeading,
    SectionBody,
    Subject,
    Object(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSpan {
    pub span: Span,
    pub kind: SpanKind,
}

pub type TagId = u32;

pub const OUTSIDE: TagId = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagScheme {
    pub task: Task,
    /// Relation schema size, 0 for non-relation tasks.
    pub relation_count: usize,
    names: Vec<String>,
}

impl TagScheme {
    pub fn hierarchy() -> Self {
        let mut names = vec!["O".to_string()];
        for level in 0..LEVEL_COUNT {
            names.push(format!("B-L{level}"));
            names.push(format!("E-L{level}"));
        }
        Self {
            task: Task::He,
            relation_count: 0,
            names,
        }
    }

    pub fn section() -> Self {
        let names = ["O", "B-H", "E-H", "B-B", "E-B"].map(String::from).to_vec();
        Self {
            task: Task::Se,
            relation_count: 0,
            names,
        }
    }

    pub fn relation(relation_count: usize) -> Result<Self> {
        if relation_count == 0 {
            return Err(Error::Input("relation schema must be non-empty".into()));
        }
        let mut names = ["O", "B-S", "E-S"].map(String::from).to_vec();
        for r in 0..relation_count {
            names.push(format!("B-O-{r}"));
            names.push(format!("E-O-{r}"));
        }
        Ok(Self {
            task: Task::Re,
            relation_count,
            names,
        })
    }

    pub fn for_task(task: Task, relation_count: usize) -> Result<Self> {
        match task {
            Task::He => Ok(Self::hierarchy()),
            Task::Se => Ok(Self::section()),
            Task::Re => Self::relation(relation_count),
        }
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, id: TagId) -> &str {
        &self.names[id as usize]
    }

    pub fn id(&self, name: &str) -> Option<TagId> {
        self.names.iter().position(|n| n == name).map(|i| i as TagId)
    }

    /// Tag vocabulary as a name -> id map.
    pub fn vocabulary(&self) -> BTreeMap<String, TagId> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as TagId))
            .collect()
    }

    pub fn vocabulary_json(&self) -> String {
        serde_json::to_string_pretty(&self.vocabulary()).expect("map serializes")
    }

    /// `(begin, end)` tag ids for a span kind, if the kind belongs to this
    /// scheme.
    pub fn boundary_tags(&self, kind: SpanKind) -> Option<(TagId, TagId)> {
        let base = match (self.task, kind) {
            (Task::He, SpanKind::Heading(level)) if level < LEVEL_COUNT => 1 + 2 * level as TagId,
            (Task::Se, SpanKind::SectionHeading) => 1,
            (Task::Se, SpanKind::SectionBody) => 3,
            (Task::Re, SpanKind::Subject) => 1,
            (Task::Re, SpanKind::Object(r)) if r < self.relation_count => 3 + 2 * r as TagId,
            _ => return None,
        };
        Some((base, base + 1))
    }

    /// Inverse of [`boundary_tags`]: the kind a tag belongs to and whether
    /// it is a begin tag.
    ///
    /// [`boundary_tags`]: TagScheme::boundary_tags
    pub fn tag_kind(&self, id: TagId) -> Option<(SpanKind, bool)> {
        if id == OUTSIDE || id as usize >= self.size() {
            return None;
        }
        let is_begin = id % 2 == 1;
        let pair = (id - 1) / 2;
        let kind = match self.task {
            Task::He => SpanKind::Heading(pair as u8),
            Task::Se if pair == 0 => SpanKind::SectionHeading,
            Task::Se => SpanKind::SectionBody,
            Task::Re if pair == 0 => SpanKind::Subject,
            Task::Re => SpanKind::Object(pair as usize - 1),
        };
        Some((kind, is_begin))
    }

    /// The task-relevant spans of an annotation set.
    pub fn spans_of(&self, ann: &AnnotationSet) -> Vec<LabeledSpan> {
        let mut spans: Vec<LabeledSpan> = match self.task {
            Task::He => ann
                .headings
                .iter()
                .map(|h| LabeledSpan {
                    span: h.span,
                    kind: SpanKind::Heading(h.level),
                })
                .collect(),
            Task::Se => ann
                .sections
                .iter()
                .flat_map(|s| {
                    [
                        LabeledSpan {
                            span: s.heading,
                            kind: SpanKind::SectionHeading,
                        },
                        LabeledSpan {
                            span: s.body,
                            kind: SpanKind::SectionBody,
                        },
                    ]
                })
                .collect(),
            Task::Re => ann
                .relations
                .iter()
                .flat_map(|r| {
                    [
                        LabeledSpan {
                            span: r.subject,
                            kind: SpanKind::Subject,
                        },
                        LabeledSpan {
                            span: r.object,
                            kind: SpanKind::Object(r.rel),
                        },
                    ]
                })
                .collect(),
        };
        spans.sort();
        spans.dedup();
        spans
    }
}

/// Per-token tag ids for one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub tags: Vec<TagId>,
}

impl TagSequence {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn names<'a>(&'a self, scheme: &'a TagScheme) -> Vec<&'a str> {
        self.tags.iter().map(|&t| scheme.name(t)).collect()
    }
}

/// Tag `len` positions from labeled spans.
pub fn encode_spans(scheme: &TagScheme, len: usize, spans: &[LabeledSpan]) -> Result<TagSequence> {
    let mut tags = vec![OUTSIDE; len];
    // positions owned by some span, including interior O positions
    let mut owner: Vec<Option<LabeledSpan>> = vec![None; len];
    for ls in spans {
        let (begin, end) = scheme.boundary_tags(ls.kind).ok_or_else(|| {
            Error::Input(format!("span kind {:?} not in {} scheme", ls.kind, scheme.task))
        })?;
        if ls.span.start > ls.span.end || ls.span.end >= len {
            return Err(Error::Input(format!(
                "span {} outside window of {len} tokens",
                ls.span
            )));
        }
        for pos in ls.span.start..=ls.span.end {
            if let Some(prev) = owner[pos] {
                if prev != *ls {
                    return Err(Error::EncodingConflict {
                        position: pos,
                        existing: format!("{:?}{}", prev.kind, prev.span),
                        incoming: format!("{:?}{}", ls.kind, ls.span),
                    });
                }
            }
            owner[pos] = Some(*ls);
        }
        tags[ls.span.start] = begin;
        if ls.span.end > ls.span.start {
            tags[ls.span.end] = end;
        }
    }
    Ok(TagSequence { tags })
}

/// Tag a window from its (window-local) annotations.
pub fn encode(scheme: &TagScheme, len: usize, ann: &AnnotationSet) -> Result<TagSequence> {
    encode_spans(scheme, len, &scheme.spans_of(ann))
}

/// Boundary nearest matching: each `B` tag closes at the nearest following
/// `E` tag of its kind, provided no other `B` of that kind comes first.
/// Otherwise the span is the single `B` token. Unmatched `E` tags are
/// dropped.
pub fn decode_spans(scheme: &TagScheme, tags: &TagSequence) -> Vec<LabeledSpan> {
    let tags = &tags.tags;
    let mut spans = Vec::new();
    for (i, &tag) in tags.iter().enumerate() {
        let Some((kind, true)) = scheme.tag_kind(tag) else {
            continue;
        };
        let mut end = i;
        for (j, &later) in tags.iter().enumerate().skip(i + 1) {
            match scheme.tag_kind(later) {
                Some((k, true)) if k == kind => break,
                Some((k, false)) if k == kind => {
                    end = j;
                    break;
                }
                _ => {}
            }
        }
        spans.push(LabeledSpan {
            span: Span::new(i, end),
            kind,
        });
    }
    spans
}

/// Decode a tag sequence into task-level structures: headings for HE,
/// paired sections for SE, paired triples for RE.
pub fn decode(scheme: &TagScheme, tags: &TagSequence) -> AnnotationSet {
    assemble(scheme.task, &decode_spans(scheme, tags))
}

/// Drop spans overlapping an already kept one. Earlier starts win; on equal
/// starts the longer span, then the smaller kind.
fn drop_overlaps(mut spans: Vec<LabeledSpan>) -> Vec<LabeledSpan> {
    spans.sort_by(|a, b| {
        (a.span.start, std::cmp::Reverse(a.span.end), a.kind).cmp(&(b.span.start, std::cmp::Reverse(b.span.end), b.kind))
    });
    let mut kept: Vec<LabeledSpan> = Vec::with_capacity(spans.len());
    for s in spans {
        if kept.last().is_none_or(|k| !k.span.overlaps(&s.span)) {
            kept.push(s);
        }
    }
    kept
}

/// Turn decoded spans into an annotation set for `task`. Headings of
/// different levels, and objects of different relations, may come out of
/// decoding overlapped; only one of each overlapping group is kept.
pub fn assemble(task: Task, spans: &[LabeledSpan]) -> AnnotationSet {
    let mut out = AnnotationSet::default();
    match task {
        Task::He => {
            let headings: Vec<LabeledSpan> = spans
                .iter()
                .filter(|ls| matches!(ls.kind, SpanKind::Heading(_)))
                .copied()
                .collect();
            out.headings = drop_overlaps(headings)
                .iter()
                .filter_map(|ls| match ls.kind {
                    SpanKind::Heading(level) => Some(Heading {
                        span: ls.span,
                        level,
                    }),
                    _ => None,
                })
                .collect();
        }
        Task::Se => {
            let pick = |want: SpanKind| -> Vec<Span> {
                let mut v: Vec<Span> = spans
                    .iter()
                    .filter(|ls| ls.kind == want)
                    .map(|ls| ls.span)
                    .collect();
                v.sort();
                v
            };
            let sections = pair_sections(&pick(SpanKind::SectionHeading), &pick(SpanKind::SectionBody));
            out.sections = sections_to_annotations(&sections);
        }
        Task::Re => {
            let mut subjects: Vec<Span> = spans
                .iter()
                .filter(|ls| ls.kind == SpanKind::Subject)
                .map(|ls| ls.span)
                .collect();
            subjects.sort();
            let objects: Vec<LabeledSpan> = spans
                .iter()
                .filter(|ls| matches!(ls.kind, SpanKind::Object(_)))
                .copied()
                .collect();
            let mut objects: Vec<(Span, usize)> = drop_overlaps(objects)
                .iter()
                .filter_map(|ls| match ls.kind {
                    SpanKind::Object(r) => Some((ls.span, r)),
                    _ => None,
                })
                .collect();
            objects.sort();
            out.relations = pair_relations(&subjects, &objects);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{Relation, SectionAnnotation};

    fn tags(scheme: &TagScheme, names: &[&str]) -> TagSequence {
        TagSequence {
            tags: names.iter().map(|n| scheme.id(n).unwrap()).collect(),
        }
    }

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(TagScheme::hierarchy().size(), 9);
        assert_eq!(TagScheme::section().size(), 5);
        assert_eq!(TagScheme::relation(18).unwrap().size(), 39);
        for r in 1..30 {
            assert_eq!(TagScheme::relation(r).unwrap().size(), 2 * r + 3);
        }
        assert!(TagScheme::relation(0).is_err());
    }

    #[test]
    fn section_vocabulary_names() {
        let v = TagScheme::section().vocabulary();
        let names: Vec<&str> = v.keys().map(String::as_str).collect();
        assert_eq!(names, vec!["B-B", "B-H", "E-B", "E-H", "O"]);
    }

    #[test]
    fn tag_kind_inverts_boundary_tags() {
        let schemes = [
            TagScheme::hierarchy(),
            TagScheme::section(),
            TagScheme::relation(5).unwrap(),
        ];
        for scheme in schemes {
            for id in 1..scheme.size() as TagId {
                let (kind, begin) = scheme.tag_kind(id).unwrap();
                let (b, e) = scheme.boundary_tags(kind).unwrap();
                assert_eq!(if begin { b } else { e }, id);
            }
            assert_eq!(scheme.tag_kind(OUTSIDE), None);
        }
    }

    #[test]
    fn encode_hierarchy_example() {
        let s = TagScheme::hierarchy();
        let ann = AnnotationSet {
            headings: vec![Heading {
                span: Span::new(2, 4),
                level: 1,
            }],
            ..Default::default()
        };
        let seq = encode(&s, 6, &ann).unwrap();
        assert_eq!(seq.names(&s), vec!["O", "O", "B-L1", "O", "E-L1", "O"]);
    }

    #[test]
    fn encode_section_example() {
        let s = TagScheme::section();
        let ann = AnnotationSet {
            sections: vec![SectionAnnotation {
                heading: Span::new(0, 1),
                body: Span::new(2, 5),
            }],
            ..Default::default()
        };
        let seq = encode(&s, 6, &ann).unwrap();
        assert_eq!(seq.names(&s), vec!["B-H", "E-H", "B-B", "O", "O", "E-B"]);
    }

    #[test]
    fn single_token_span_gets_begin_only() {
        let s = TagScheme::hierarchy();
        let ann = AnnotationSet {
            headings: vec![Heading {
                span: Span::single(1),
                level: 3,
            }],
            ..Default::default()
        };
        let seq = encode(&s, 3, &ann).unwrap();
        assert_eq!(seq.names(&s), vec!["O", "B-L3", "O"]);
        assert_eq!(decode(&s, &seq), ann);
    }

    #[test]
    fn conflicting_spans_rejected() {
        let s = TagScheme::relation(2).unwrap();
        let ann = AnnotationSet {
            relations: vec![Relation {
                subject: Span::new(0, 2),
                object: Span::new(2, 3),
                rel: 1,
            }],
            ..Default::default()
        };
        assert!(matches!(
            encode(&s, 5, &ann),
            Err(Error::EncodingConflict { position: 2, .. })
        ));
    }

    #[test]
    fn relation_outside_schema_rejected() {
        let s = TagScheme::relation(2).unwrap();
        let ann = AnnotationSet {
            relations: vec![Relation {
                subject: Span::new(0, 0),
                object: Span::new(2, 3),
                rel: 2,
            }],
            ..Default::default()
        };
        assert!(matches!(encode(&s, 5, &ann), Err(Error::Input(_))));
    }

    #[test]
    fn decode_examples() {
        let s = TagScheme::hierarchy();
        let h = |a, b, level| Heading {
            span: Span::new(a, b),
            level,
        };
        assert_eq!(
            decode(&s, &tags(&s, &["O", "B-L1", "O", "E-L1", "O"])).headings,
            vec![h(1, 3, 1)]
        );
        assert_eq!(
            decode(&s, &tags(&s, &["B-L1", "B-L1", "E-L1"])).headings,
            vec![h(0, 0, 1), h(1, 2, 1)]
        );
        assert!(decode(&s, &tags(&s, &["E-L2", "O", "O"])).headings.is_empty());
    }

    #[test]
    fn decode_ignores_other_kinds_between_boundaries() {
        let s = TagScheme::hierarchy();
        let got = decode_spans(&s, &tags(&s, &["B-L1", "B-L2", "E-L1", "E-L2"]));
        assert_eq!(
            got,
            vec![
                LabeledSpan { span: Span::new(0, 2), kind: SpanKind::Heading(1) },
                LabeledSpan { span: Span::new(1, 3), kind: SpanKind::Heading(2) },
            ]
        );
    }

    #[test]
    fn decode_relation_sequence() {
        let s = TagScheme::relation(3).unwrap();
        let seq = tags(&s, &["B-S", "E-S", "O", "B-O-2", "E-O-2", "O", "B-O-0"]);
        let rels = decode(&s, &seq).relations;
        assert_eq!(
            rels,
            vec![
                Relation { subject: Span::new(0, 1), object: Span::new(3, 4), rel: 2 },
                Relation { subject: Span::new(0, 1), object: Span::single(6), rel: 0 },
            ]
        );
    }

    #[test]
    fn task_parsing() {
        assert_eq!("SE".parse::<Task>().unwrap(), Task::Se);
        assert!("xx".parse::<Task>().is_err());
    }

    #[test]
    fn cross_level_overlap_keeps_earliest() {
        let scheme = TagScheme::hierarchy();
        let ann = decode(&scheme, &tags(&scheme, &["B-L0", "B-L1", "E-L0", "E-L1"]));
        assert_eq!(
            ann.headings,
            vec![Heading {
                span: Span::new(0, 2),
                level: 0
            }]
        );
        assert!(ann.check(4).is_ok());
    }
}
