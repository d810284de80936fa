pub mod common;
pub mod describe;
pub mod evaluate;
pub mod ontology;
pub mod pathways;
pub mod pipeline;
pub mod sample;
pub mod similarity;
pub mod split;
