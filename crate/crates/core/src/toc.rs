//! Table-of-contents numbering from leveled headings.

use serde::{Deserialize, Serialize};

use crate::doc::{Heading, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocEntry {
    pub span: Span,
    pub level: u8,
    /// Dotted number such as `1.1`.
    pub number: String,
    /// Index of the enclosing entry, if any.
    pub parent: Option<usize>,
}

impl TocEntry {
    pub fn depth(&self) -> usize {
        self.number.split('.').count()
    }
}

/// Number headings given in document order.
///
/// A heading's parent is the nearest preceding heading with a strictly
/// shallower level; its number is the parent's number extended with its
/// ordinal among the parent's children. Levels missing on the current path
/// are therefore collapsed (`L1, L3` numbers as `1, 1.1`).
pub fn build_toc(headings: &[Heading]) -> Vec<TocEntry> {
    let mut entries: Vec<TocEntry> = Vec::with_capacity(headings.len());
    // open path from the root: entry indices with strictly increasing levels
    let mut path: Vec<usize> = Vec::new();
    // child counts per entry, plus one slot for the root
    let mut children: Vec<usize> = Vec::with_capacity(headings.len());
    let mut root_children = 0usize;

    for heading in headings {
        while let Some(&top) = path.last() {
            if entries[top].level >= heading.level {
                path.pop();
            } else {
                break;
            }
        }
        let parent = path.last().copied();
        let number = match parent {
            Some(p) => {
                children[p] += 1;
                format!("{}.{}", entries[p].number, children[p])
            }
            None => {
                root_children += 1;
                root_children.to_string()
            }
        };
        entries.push(TocEntry {
            span: heading.span,
            level: heading.level,
            number,
            parent,
        });
        children.push(0);
        path.push(entries.len() - 1);
    }
    entries
}

/// Root-to-entry chain of indices ending at `index`.
pub fn ancestor_chain(entries: &[TocEntry], index: usize) -> Vec<usize> {
    let mut chain = vec![index];
    let mut cur = entries[index].parent;
    while let Some(p) = cur {
        chain.push(p);
        cur = entries[p].parent;
    }
    chain.reverse();
    chain
}
