//! Sliding windows over a document's reading-order token sequence.

use crate::doc::{AnnotationSet, Document, Span};

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSequence {
    /// Global index of the first token in the window.
    pub offset: usize,
    pub len: usize,
    /// Gold annotations fully inside the window, in window-local indices.
    pub annotations: AnnotationSet,
    /// Window-local clips of gold spans that cross a window edge. They carry
    /// no usable label in this window.
    pub partial: Vec<Span>,
}

impl WindowedSequence {
    pub fn range(&self) -> Span {
        Span::new(self.offset, self.offset + self.len - 1)
    }
}

/// Start offsets for windows of `max_len` tokens stepping by `stride` over
/// `n` tokens. The final window is clipped at the document end.
pub fn window_starts(n: usize, max_len: usize, stride: usize) -> Vec<usize> {
    assert!(max_len >= 1 && stride >= 1 && stride <= max_len);
    let mut starts = Vec::new();
    if n == 0 {
        return starts;
    }
    let mut start = 0;
    loop {
        starts.push(start);
        if start + max_len >= n {
            break;
        }
        start += stride;
    }
    starts
}

pub fn default_stride(max_len: usize) -> usize {
    (max_len / 2).max(1)
}

pub fn window(doc: &Document, max_len: usize, stride: usize) -> Vec<WindowedSequence> {
    let n = doc.token_count();
    let gold = doc.annotations_or_empty();
    let spans = all_spans(&gold);
    window_starts(n, max_len, stride)
        .into_iter()
        .map(|offset| {
            let len = max_len.min(n - offset);
            let range = Span::new(offset, offset + len - 1);
            let partial = spans
                .iter()
                .filter(|s| s.overlaps(&range) && !range.contains(s))
                .map(|s| {
                    Span::new(s.start.max(range.start), s.end.min(range.end)).shift_down(offset)
                })
                .collect();
            WindowedSequence {
                offset,
                len,
                annotations: gold.project(range),
                partial,
            }
        })
        .collect()
}

fn all_spans(ann: &AnnotationSet) -> Vec<Span> {
    let mut spans: Vec<Span> = ann
        .headings
        .iter()
        .map(|h| h.span)
        .chain(ann.sections.iter().flat_map(|s| [s.heading, s.body]))
        .chain(ann.relations.iter().flat_map(|r| [r.subject, r.object]))
        .collect();
    spans.sort();
    spans.dedup();
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{Domain, Heading, Page, RawBBox, Token};

    fn doc_with(n: usize, ann: AnnotationSet) -> Document {
        let tokens = (0..n)
            .map(|i| Token {
                text: format!("w{i}"),
                bbox: RawBBox::new(10.0, 10.0, 20.0, 20.0),
                font_size: None,
                global_index: i,
            })
            .collect();
        let page = Page {
            width: 100.0,
            height: 100.0,
            tokens,
        };
        Document::new("d", Domain::Product, vec![page], Some(ann)).unwrap()
    }

    #[test]
    fn single_window_when_document_fits() {
        let w = window(&doc_with(10, AnnotationSet::default()), 10, 10);
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].offset, w[0].len), (0, 10));
    }

    #[test]
    fn long_document_starts() {
        assert_eq!(window_starts(700, 512, 256), vec![0, 256]);
        let w = window(&doc_with(700, AnnotationSet::default()), 512, 256);
        assert_eq!(w[1].range(), Span::new(256, 699));
    }

    #[test]
    fn crossing_span_goes_only_to_containing_window() {
        let ann = AnnotationSet {
            headings: vec![Heading {
                span: Span::new(510, 514),
                level: 2,
            }],
            ..Default::default()
        };
        let w = window(&doc_with(700, ann), 512, 256);
        assert!(w[0].annotations.headings.is_empty());
        assert_eq!(w[0].partial, vec![Span::new(510, 511)]);
        assert_eq!(
            w[1].annotations.headings,
            vec![Heading {
                span: Span::new(254, 258),
                level: 2
            }]
        );
        assert!(w[1].partial.is_empty());
    }

    #[test]
    fn empty_document_has_no_windows() {
        assert!(window(&doc_with(0, AnnotationSet::default()), 8, 4).is_empty());
    }

    #[test]
    fn coverage_over_grid_of_sizes() {
        for n in 1..60 {
            for max_len in 1..12 {
                for stride in 1..=max_len {
                    let starts = window_starts(n, max_len, stride);
                    let mut covered = vec![false; n];
                    for s in starts {
                        for c in covered.iter_mut().skip(s).take(max_len) {
                            *c = true;
                        }
                    }
                    assert!(covered.iter().all(|&c| c), "n={n} len={max_len} stride={stride}");
                }
            }
        }
    }
}
