//! Building and maintaining a DBLP-derived research corpus: streaming dump
//! ingestion, polite full-text harvesting, author-affiliation alignment,
//! citation graphs and reports.

pub mod harvest;
pub mod ingest;
pub mod stages;
pub mod store;
pub mod xml;
pub mod reports;
pub mod synth;
