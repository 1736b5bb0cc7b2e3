//! Extraction metrics: strict and assignment-based `S_m`, P/R/F1.

pub mod assignment;
pub mod eval;
pub mod gestalt;

pub use assignment::{optimal_assignment, Assignment};
pub use eval::{
    evaluate, evaluate_sections, evaluate_strict, section_score, section_texts, strict_score,
    EvalReport,
};
pub use gestalt::{gestalt_similarity, matched_chars, section_similarity};
