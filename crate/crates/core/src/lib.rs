//! Core engine for lifecycle-staged code generation: artifact model, SCXML
//! engine, prompt registry, model gateway, pipeline, metrics, dataset
//! construction and evaluation reports.

pub mod artifact;
pub mod dataset;
pub mod eval;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod pylang;
pub mod scxml;
