//! Dependency extraction and analysis for micro-article corpora.
//!
//! The pipeline: parse a corpus ([`corpus`]), normalize it so that every
//! dependency is individually removable ([`normalize`]), extract per-item
//! dependencies by tracing the checker or by minimizing environments
//! ([`extract`]), then analyze the resulting graphs ([`graph`],
//! [`rebuild`]) and learn premise relevance from them ([`learn`]).

pub mod cli;
pub mod corpus;
pub mod extract;
pub mod generate;
pub mod graph;
pub mod io;
pub mod learn;
pub mod normalize;
pub mod pool;
pub mod rebuild;
