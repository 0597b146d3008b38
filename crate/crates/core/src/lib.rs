//! Field-standardized citation impact indicators over a publication corpus.
//!
//! The pipeline runs ingest ([`corpus`]), affiliation reconciliation
//! ([`reconcile`]), world benchmarks ([`benchmarks`]), per-slice indicators
//! ([`indicators`]), yearly trends ([`trends`]) and ranked reports
//! ([`reporting`]). [`synth`] generates seeded corpora for validation.

pub mod benchmarks;
pub mod cli;
pub mod corpus;
pub mod indicators;
pub mod numeric;
pub mod pipeline;
pub mod reconcile;
pub mod reporting;
pub mod synth;
pub mod trends;
