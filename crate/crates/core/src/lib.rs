//! Ontology-aware similarity, structured cell descriptions, evaluation metrics,
//! AUCell pathway scoring and diversity-aware cohort sampling for single-cell
//! text-description corpora.

pub mod cohort;
pub mod description;
pub mod error;
pub mod generation_metrics;
pub mod label_metrics;
pub mod ontology;
pub mod pathway;
pub mod similarity;

pub use error::{Error, Result};
