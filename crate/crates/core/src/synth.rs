//! Synthetic visually rich documents with planted heading hierarchies,
//! sections and relation triples.
//!
//! Pages are US-letter sized. Headings sit on their own line, set at 1.3x
//! the body font and indented 40 grid units per level (layout cue). In the
//! text-cued modes heading and entity words come from dedicated word bands.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doc::{
    normalize_bbox, AnnotationSet, Document, Domain, Heading, Page, RawBBox, Relation, SectionAnnotation, Span,
    Token, GRID_MAX,
};
use crate::error::{Error, Result};

pub const PAGE_WIDTH: f64 = 612.0;
pub const PAGE_HEIGHT: f64 = 792.0;
pub const BODY_FONT: f64 = 10.0;
pub const HEADING_FONT: f64 = 13.0;
/// Heading indentation per level, in grid units.
pub const INDENT_STEP: u16 = 40;

const LEFT_MARGIN: f64 = 72.0;
const RIGHT_MARGIN: f64 = 540.0;
const TOP_MARGIN: f64 = 72.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CueMode {
    /// Headings differ from bodies only by position and font size.
    LayoutOnly,
    /// Headings differ only by wording; they run inline with body text.
    TextOnly,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub doc_count: usize,
    /// Inclusive page-count range per document.
    pub pages: (usize, usize),
    /// Inclusive section-count range per page.
    pub sections_per_page: (usize, usize),
    /// Words per word band.
    pub vocab_size: usize,
    pub relation_count: usize,
    pub cue_mode: CueMode,
    /// Add one unique keyword to every section body.
    pub plant_keywords: bool,
    /// Text-cued modes only: chance that a word continues its predecessor's
    /// sequence (`w7` after `w6`) when both share a role. Ignored in
    /// layout-only mode so heading and body text stay identically drawn.
    pub continuation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            doc_count: 100,
            pages: (1, 2),
            sections_per_page: (3, 5),
            vocab_size: 200,
            relation_count: 4,
            cue_mode: CueMode::Both,
            plant_keywords: false,
            continuation: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        if self.pages.0 == 0 || self.pages.0 > self.pages.1 {
            return bad(format!("page range {:?} is empty or zero", self.pages));
        }
        let (lo, hi) = self.sections_per_page;
        if lo == 0 || lo > hi || hi > 8 {
            return bad(format!("sections per page {:?} must lie in 1..=8", self.sections_per_page));
        }
        if !(0.0..=1.0).contains(&self.continuation) {
            return bad(format!("continuation {} outside [0, 1]", self.continuation));
        }
        if self.vocab_size < 8 {
            return bad(format!("vocab_size {} below 8", self.vocab_size));
        }
        Ok(())
    }
}

/// Generate `doc_count` annotated documents. Output depends only on the
/// config.
pub fn generate(config: &SynthConfig) -> Result<Vec<Document>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.doc_count)
        .map(|i| {
            let doc_seed: u64 = rng.random();
            DocBuilder::new(config, i, doc_seed).build()
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Heading(u8),
    Filler,
    Subject,
    Object(usize),
}

struct DocBuilder<'a> {
    config: &'a SynthConfig,
    index: usize,
    rng: ChaCha8Rng,
    pages: Vec<Page>,
    next_index: usize,
    cursor_x: f64,
    cursor_y: f64,
    ann: AnnotationSet,
    last: Option<(Role, usize)>,
}

impl<'a> DocBuilder<'a> {
    fn new(config: &'a SynthConfig, index: usize, seed: u64) -> Self {
        Self {
            config,
            index,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pages: Vec::new(),
            next_index: 0,
            cursor_x: LEFT_MARGIN,
            cursor_y: TOP_MARGIN,
            ann: AnnotationSet::default(),
            last: None,
        }
    }

    fn layout_cued(&self) -> bool {
        self.config.cue_mode != CueMode::TextOnly
    }

    fn text_cued(&self) -> bool {
        self.config.cue_mode != CueMode::LayoutOnly
    }

    fn word(&mut self, role: Role) -> String {
        let v = self.config.vocab_size;
        if !self.text_cued() {
            return format!("w{}", self.rng.random_range(0..v));
        }
        let band = if role == Role::Filler { v } else { (v / 8).max(4) };
        let i = match self.last {
            Some((r, prev)) if r == role && self.rng.random_bool(self.config.continuation) => (prev + 1) % band,
            _ => self.rng.random_range(0..band),
        };
        self.last = Some((role, i));
        match role {
            Role::Heading(level) => format!("h{level}w{i}"),
            Role::Subject => format!("sub{i}"),
            Role::Object(rel) => format!("r{rel}o{i}"),
            Role::Filler => format!("w{i}"),
        }
    }

    fn new_page(&mut self) {
        self.pages.push(Page {
            width: PAGE_WIDTH,
            height: PAGE_HEIGHT,
            tokens: Vec::new(),
        });
        self.cursor_x = LEFT_MARGIN;
        self.cursor_y = TOP_MARGIN;
    }

    fn newline(&mut self, font: f64) {
        self.cursor_x = LEFT_MARGIN;
        self.cursor_y += font * 1.5;
    }

    fn place(&mut self, text: String, font: f64) -> usize {
        let width = text.chars().count() as f64 * font * 0.5;
        if self.cursor_x + width > RIGHT_MARGIN && self.cursor_x > LEFT_MARGIN {
            self.newline(font);
        }
        let bbox = RawBBox::new(self.cursor_x, self.cursor_y, self.cursor_x + width, self.cursor_y + font);
        self.cursor_x += width + font * 0.3;
        let page = self.pages.last_mut().expect("page open");
        page.tokens.push(Token {
            text,
            bbox,
            font_size: Some(font),
            global_index: self.next_index,
        });
        self.next_index += 1;
        self.next_index - 1
    }

    fn heading(&mut self, level: u8) -> Span {
        let len = self.rng.random_range(1..=4);
        let font = if self.layout_cued() {
            if self.cursor_x > LEFT_MARGIN {
                self.newline(BODY_FONT);
            }
            self.cursor_y += 4.0;
            let indent = f64::from(INDENT_STEP * u16::from(level)) / f64::from(GRID_MAX) * PAGE_WIDTH;
            self.cursor_x = LEFT_MARGIN + indent;
            HEADING_FONT
        } else {
            BODY_FONT
        };
        let mut span = None;
        for _ in 0..len {
            let w = self.word(Role::Heading(level));
            let at = self.place(w, font);
            span = Some(span.map_or(Span::single(at), |s: Span| Span::new(s.start, at)));
        }
        if self.layout_cued() {
            self.newline(HEADING_FONT);
        }
        let span = span.expect("heading has tokens");
        self.ann.headings.push(Heading { span, level });
        span
    }

    fn run(&mut self, role: Role, len: usize) -> Span {
        debug_assert!(len > 0);
        let start = self.next_index;
        for _ in 0..len {
            let w = self.word(role);
            self.place(w, BODY_FONT);
        }
        Span::new(start, self.next_index - 1)
    }

    fn filler(&mut self, len: usize) {
        for _ in 0..len {
            let w = self.word(Role::Filler);
            self.place(w, BODY_FONT);
        }
    }

    fn body(&mut self, section: usize) -> Span {
        let start = self.next_index;
        let mut cluster_len = 0;
        if self.config.plant_keywords {
            let kw = format!("kw{}x{}", self.index, section);
            self.place(kw, BODY_FONT);
        }
        if self.config.relation_count > 0 && self.rng.random_bool(0.5) {
            let cluster_start = self.next_index;
            let subject_len = self.rng.random_range(1..=2);
            let subject = self.run(Role::Subject, subject_len);
            let objects = self.rng.random_range(1..=2);
            for _ in 0..objects {
                let gap = self.rng.random_range(0..=2);
                self.filler(gap);
                let rel = self.rng.random_range(0..self.config.relation_count);
                let object_len = self.rng.random_range(1..=2);
                let object = self.run(Role::Object(rel), object_len);
                self.ann.relations.push(Relation { subject, object, rel });
            }
            cluster_len = self.next_index - cluster_start;
        }
        // trailing filler keeps objects closer to their own subject than to
        // the next section's subject
        let filler = self.rng.random_range(cluster_len.max(4)..=cluster_len.max(4) + 16);
        self.filler(filler);
        if self.layout_cued() {
            self.newline(BODY_FONT);
        }
        Span::new(start, self.next_index - 1)
    }

    fn build(mut self) -> Result<Document> {
        let config = self.config;
        let page_count = self.rng.random_range(config.pages.0..=config.pages.1);
        let mut level = 0u8;
        let mut section = 0usize;
        for p in 0..page_count {
            self.new_page();
            if p == 0 {
                self.heading(0);
            }
            let sections = self.rng.random_range(config.sections_per_page.0..=config.sections_per_page.1);
            for _ in 0..sections {
                // levels walk within 1..=3, deepening by at most one step
                level = self.rng.random_range(1..=(level + 1).min(3));
                let heading = self.heading(level);
                let body = self.body(section);
                self.ann.sections.push(SectionAnnotation { heading, body });
                section += 1;
            }
        }
        let domain = *[Domain::Product, Domain::Official]
            .choose(&mut self.rng)
            .expect("non-empty");
        let id = format!("synth-{}-{}", config.seed, self.index);
        Document::new(id, domain, self.pages, Some(self.ann))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketConfig {
    pub doc_count: usize,
    pub tokens_per_doc: usize,
    /// Grid buckets along x and y.
    pub buckets: (u16, u16),
    pub seed: u64,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self {
            doc_count: 50,
            tokens_per_doc: 64,
            buckets: (4, 4),
            seed: 0,
        }
    }
}

/// Word for a grid box in a bucketed corpus.
pub fn bucket_word(grid_x0: u16, grid_y0: u16, buckets: (u16, u16)) -> String {
    let bx = (u32::from(grid_x0) * u32::from(buckets.0) / 1001).min(u32::from(buckets.0) - 1);
    let by = (u32::from(grid_y0) * u32::from(buckets.1) / 1001).min(u32::from(buckets.1) - 1);
    format!("b{bx}x{by}")
}

/// Unannotated documents whose token text is a deterministic function of
/// the token's grid bucket. Tokens are scattered at random positions.
pub fn generate_bucketed(config: &BucketConfig) -> Result<Vec<Document>> {
    if config.buckets.0 == 0 || config.buckets.1 == 0 {
        return Err(Error::Input("bucket counts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.doc_count)
        .map(|i| {
            let mut tokens: Vec<Token> = (0..config.tokens_per_doc)
                .map(|_| {
                    let x0 = rng.random_range(0.0..PAGE_WIDTH - 30.0);
                    let y0 = rng.random_range(0.0..PAGE_HEIGHT - 10.0);
                    let bbox = RawBBox::new(x0, y0, x0 + 25.0, y0 + BODY_FONT);
                    let grid = normalize_bbox(&bbox, PAGE_WIDTH, PAGE_HEIGHT)?;
                    Ok(Token {
                        text: bucket_word(grid.x0, grid.y0, config.buckets),
                        bbox,
                        font_size: Some(BODY_FONT),
                        global_index: 0,
                    })
                })
                .collect::<Result<_>>()?;
            // reading order: top to bottom, then left to right
            tokens.sort_by(|a, b| {
                (a.bbox.y0, a.bbox.x0)
                    .partial_cmp(&(b.bbox.y0, b.bbox.x0))
                    .expect("finite")
            });
            let page = Page {
                width: PAGE_WIDTH,
                height: PAGE_HEIGHT,
                tokens,
            };
            Document::new(format!("bucket-{}-{i}", config.seed), Domain::Product, vec![page], None)
        })
        .collect()
}
