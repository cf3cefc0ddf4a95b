//! File formats, labels, LLM-backed corpus generation and the `winovis`
//! command-line tool built on `winovis-core`.

pub mod bundle_io;
pub mod cli;
pub mod config;
pub mod cycle;
pub mod instances;
pub mod labels;
pub mod llm;
pub mod report_io;
