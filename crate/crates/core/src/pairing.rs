//! Nearest-principle pairing of decoded spans.

use log::warn;

use crate::doc::{Relation, SectionAnnotation, Span};

/// A heading with the bodies attached to it, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub heading: Span,
    pub bodies: Vec<Span>,
}

impl Section {
    /// Covering span of all attached bodies.
    pub fn body_span(&self) -> Span {
        Span::new(self.bodies[0].start, self.bodies[self.bodies.len() - 1].end)
    }
}

/// Attach each body to the nearest heading starting before it. Headings
/// without any body are not sections; bodies without a preceding heading
/// are dropped.
pub fn pair_sections(headings: &[Span], bodies: &[Span]) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    for body in bodies {
        let owner = headings
            .iter()
            .filter(|h| h.start < body.start)
            .max_by_key(|h| h.start);
        let Some(owner) = owner else {
            warn!("dropping body {body} with no preceding heading");
            continue;
        };
        match sections.iter_mut().find(|s| s.heading == *owner) {
            Some(section) => section.bodies.push(*body),
            None => sections.push(Section {
                heading: *owner,
                bodies: vec![*body],
            }),
        }
    }
    sections.sort_by_key(|s| s.heading);
    sections
}

pub fn sections_to_annotations(sections: &[Section]) -> Vec<SectionAnnotation> {
    sections
        .iter()
        .map(|s| SectionAnnotation {
            heading: s.heading,
            body: s.body_span(),
        })
        .collect()
}

/// Pair each object with the subject whose start is closest to the object's
/// start; ties go to the preceding subject.
pub fn pair_relations(subjects: &[Span], objects: &[(Span, usize)]) -> Vec<Relation> {
    objects
        .iter()
        .filter_map(|&(object, rel)| {
            let subject = subjects.iter().min_by_key(|s| {
                let distance = s.start.abs_diff(object.start);
                // false sorts first: preceding subjects win ties
                (distance, s.start > object.start)
            })?;
            Some(Relation {
                subject: *subject,
                object,
                rel,
            })
        })
        .collect()
}
