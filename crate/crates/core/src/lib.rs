//! Structured UI specifications: extraction from reference screenshots,
//! targeted editing, retrieval-augmented code generation and fidelity scoring.

pub mod client;
pub mod codegen;
pub mod edit;
pub mod extraction;
pub mod metrics;
pub mod retrieval;
pub mod spec;
pub mod validate;
