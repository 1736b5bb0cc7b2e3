//! Document data model: tokens with page-space bounding boxes, pages,
//! documents and their span annotations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound of the discretized layout grid.
pub const GRID_MAX: u16 = 1000;

/// Number of distinct heading levels (`L0` article headline to `L3`).
pub const LEVEL_COUNT: u8 = 4;

/// Bounding box in page units, top-left origin, y grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct RawBBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl RawBBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.coords().iter().any(|c| !c.is_finite()) {
            return Err(format!("non-finite coordinate in {:?}", self.coords()));
        }
        if self.coords().iter().any(|&c| c < 0.0) {
            return Err(format!("negative coordinate in {:?}", self.coords()));
        }
        if self.x0 > self.x1 || self.y0 > self.y1 {
            return Err(format!("inverted box {:?}", self.coords()));
        }
        Ok(())
    }

    fn clamped(&self, width: f64, height: f64) -> Self {
        Self {
            x0: self.x0.min(width),
            y0: self.y0.min(height),
            x1: self.x1.min(width),
            y1: self.y1.min(height),
        }
    }
}

impl From<[f64; 4]> for RawBBox {
    fn from(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<RawBBox> for [f64; 4] {
    fn from(b: RawBBox) -> Self {
        b.coords()
    }
}

/// Bounding box on the integer `[0, 1000]` layout grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GridBBox {
    pub x0: u16,
    pub y0: u16,
    pub x1: u16,
    pub y1: u16,
}

impl GridBBox {
    pub const ZERO: GridBBox = GridBBox {
        x0: 0,
        y0: 0,
        x1: 0,
        y1: 0,
    };

    pub fn new(x0: u16, y0: u16, x1: u16, y1: u16) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn is_valid(&self) -> bool {
        self.x1 <= GRID_MAX && self.y1 <= GRID_MAX && self.x0 <= self.x1 && self.y0 <= self.y1
    }
}

/// Discretize a page-space box onto the layout grid.
///
/// Each coordinate becomes `clamp(floor(c / dim * 1000), 0, 1000)`, with x
/// scaled by the page width and y by the page height.
pub fn normalize_bbox(raw: &RawBBox, page_width: f64, page_height: f64) -> Result<GridBBox> {
    if !(page_width.is_finite() && page_width > 0.0 && page_height.is_finite() && page_height > 0.0)
    {
        return Err(Error::Input(format!(
            "page dimensions must be positive, got {page_width}x{page_height}"
        )));
    }
    for c in raw.coords() {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::Input(format!("bad coordinate {c} in {:?}", raw.coords())));
        }
    }
    let scale = |c: f64, dim: f64| -> u16 {
        let g = (c / dim * f64::from(GRID_MAX)).floor();
        g.clamp(0.0, f64::from(GRID_MAX)) as u16
    };
    let mut grid = GridBBox {
        x0: scale(raw.x0, page_width),
        y0: scale(raw.y0, page_height),
        x1: scale(raw.x1, page_width),
        y1: scale(raw.y1, page_height),
    };
    // floor is monotone, so only an inverted input box can produce this
    grid.x1 = grid.x1.max(grid.x0);
    grid.y1 = grid.y1.max(grid.y0);
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    pub bbox: RawBBox,
    pub font_size: Option<f64>,
    /// Reading-order position across the whole document.
    pub global_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub width: f64,
    pub height: f64,
    pub tokens: Vec<Token>,
}

impl Page {
    pub fn grid_bbox(&self, token: &Token) -> GridBBox {
        // bboxes are validated and clamped on construction
        normalize_bbox(&token.bbox, self.width, self.height).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Product,
    Official,
}

/// Inclusive `[start, end]` range of global token indices.
#[allow(clippy::len_without_is_empty)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn single(at: usize) -> Self {
        Self { start: at, end: at }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shift_down(&self, offset: usize) -> Span {
        Span::new(self.start - offset, self.end - offset)
    }

    pub fn shift_up(&self, offset: usize) -> Span {
        Span::new(self.start + offset, self.end + offset)
    }
}

impl From<[usize; 2]> for Span {
    fn from(s: [usize; 2]) -> Self {
        Span::new(s[0], s[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Heading {
    pub span: Span,
    pub level: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectionAnnotation {
    pub heading: Span,
    pub body: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub subject: Span,
    pub object: Span,
    pub rel: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    #[serde(default)]
    pub headings: Vec<Heading>,
    #[serde(default)]
    pub sections: Vec<SectionAnnotation>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

impl AnnotationSet {
    pub fn is_empty(&self) -> bool {
        self.headings.is_empty() && self.sections.is_empty() && self.relations.is_empty()
    }

    /// Check span bounds, levels and same-kind overlap against a document
    /// of `token_count` tokens. Returns `(field, reason)` on failure.
    pub fn check(&self, token_count: usize) -> std::result::Result<(), (String, String)> {
        let in_range = |span: &Span, field: &str| {
            if span.start > span.end {
                Err((field.to_string(), format!("span {span} has start > end")))
            } else if span.end >= token_count {
                Err((
                    field.to_string(),
                    format!("span {span} outside token range 0..{token_count}"),
                ))
            } else {
                Ok(())
            }
        };
        for h in &self.headings {
            in_range(&h.span, "headings")?;
            if h.level >= LEVEL_COUNT {
                return Err(("headings".into(), format!("level {} not in 0..=3", h.level)));
            }
        }
        for s in &self.sections {
            in_range(&s.heading, "sections.heading")?;
            in_range(&s.body, "sections.body")?;
        }
        for r in &self.relations {
            in_range(&r.subject, "relations.subject")?;
            in_range(&r.object, "relations.object")?;
        }
        check_disjoint(self.headings.iter().map(|h| h.span), "headings")?;
        check_disjoint(self.sections.iter().map(|s| s.heading), "sections.heading")?;
        check_disjoint(self.sections.iter().map(|s| s.body), "sections.body")?;
        check_disjoint(self.relations.iter().map(|r| r.subject), "relations.subject")?;
        check_disjoint(self.relations.iter().map(|r| r.object), "relations.object")?;
        Ok(())
    }

    /// Keep only annotations fully inside `window`, re-based to window-local
    /// indices.
    pub fn project(&self, window: Span) -> AnnotationSet {
        let local = |s: &Span| s.shift_down(window.start);
        AnnotationSet {
            headings: self
                .headings
                .iter()
                .filter(|h| window.contains(&h.span))
                .map(|h| Heading {
                    span: local(&h.span),
                    level: h.level,
                })
                .collect(),
            sections: self
                .sections
                .iter()
                .filter(|s| window.contains(&s.heading) && window.contains(&s.body))
                .map(|s| SectionAnnotation {
                    heading: local(&s.heading),
                    body: local(&s.body),
                })
                .collect(),
            relations: self
                .relations
                .iter()
                .filter(|r| window.contains(&r.subject) && window.contains(&r.object))
                .map(|r| Relation {
                    subject: local(&r.subject),
                    object: local(&r.object),
                    rel: r.rel,
                })
                .collect(),
        }
    }

    /// Map window-local annotations back to document indices.
    pub fn lift(&self, offset: usize) -> AnnotationSet {
        AnnotationSet {
            headings: self
                .headings
                .iter()
                .map(|h| Heading {
                    span: h.span.shift_up(offset),
                    level: h.level,
                })
                .collect(),
            sections: self
                .sections
                .iter()
                .map(|s| SectionAnnotation {
                    heading: s.heading.shift_up(offset),
                    body: s.body.shift_up(offset),
                })
                .collect(),
            relations: self
                .relations
                .iter()
                .map(|r| Relation {
                    subject: r.subject.shift_up(offset),
                    object: r.object.shift_up(offset),
                    rel: r.rel,
                })
                .collect(),
        }
    }
}

/// Distinct spans of one kind must not overlap. Identical repeats are fine:
/// one subject may take part in several relations.
fn check_disjoint(
    spans: impl Iterator<Item = Span>,
    field: &str,
) -> std::result::Result<(), (String, String)> {
    let mut spans: Vec<Span> = spans.collect();
    spans.sort();
    spans.dedup();
    for pair in spans.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err((
                field.to_string(),
                format!("overlapping spans {} and {}", pair[0], pair[1]),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub domain: Domain,
    pub pages: Vec<Page>,
    pub annotations: Option<AnnotationSet>,
}

impl Document {
    /// Build a document from pages whose token `global_index` fields may be
    /// stale; indices are reassigned, boxes validated and clamped to the page
    /// and annotations checked.
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        mut pages: Vec<Page>,
        annotations: Option<AnnotationSet>,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |field: String, reason: String| Error::Invalid {
            doc: id.clone(),
            field,
            reason,
        };
        if id.is_empty() {
            return Err(invalid("id".into(), "empty document id".into()));
        }
        let mut next = 0;
        for (p, page) in pages.iter_mut().enumerate() {
            if !(page.width.is_finite() && page.width > 0.0) {
                return Err(invalid(format!("pages[{p}].width"), format!("{}", page.width)));
            }
            if !(page.height.is_finite() && page.height > 0.0) {
                return Err(invalid(format!("pages[{p}].height"), format!("{}", page.height)));
            }
            for (t, token) in page.tokens.iter_mut().enumerate() {
                let field = format!("pages[{p}].tokens[{t}]");
                if token.text.is_empty() {
                    return Err(invalid(field, "empty token text".into()));
                }
                token.bbox.check().map_err(|r| invalid(field.clone() + ".bbox", r))?;
                token.bbox = token.bbox.clamped(page.width, page.height);
                if let Some(fs) = token.font_size {
                    if !(fs.is_finite() && fs > 0.0) {
                        return Err(invalid(field + ".font_size", format!("{fs}")));
                    }
                }
                token.global_index = next;
                next += 1;
            }
        }
        if let Some(ann) = &annotations {
            ann.check(next)
                .map_err(|(f, r)| invalid(format!("annotations.{f}"), r))?;
        }
        Ok(Self {
            id,
            domain,
            pages,
            annotations,
        })
    }

    pub fn token_count(&self) -> usize {
        self.pages.iter().map(|p| p.tokens.len()).sum()
    }

    /// Tokens in reading order, each with its page.
    pub fn tokens(&self) -> impl Iterator<Item = (&Page, &Token)> + '_ {
        self.pages
            .iter()
            .flat_map(|page| page.tokens.iter().map(move |t| (page, t)))
    }

    pub fn grid_bboxes(&self) -> Vec<GridBBox> {
        self.tokens().map(|(page, t)| page.grid_bbox(t)).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens().map(|(_, t)| t.text.as_str()).collect()
    }

    /// Surface text of a span, tokens joined by single spaces.
    pub fn span_text(&self, span: Span) -> String {
        self.tokens()
            .skip(span.start)
            .take(span.len())
            .map(|(_, t)| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn annotations_or_empty(&self) -> AnnotationSet {
        self.annotations.clone().unwrap_or_default()
    }
}
