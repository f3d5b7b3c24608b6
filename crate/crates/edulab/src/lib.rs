//! Desk-scale learning-analytics pipeline: ingest student marks and free-text
//! feedback, store them in an append-only raw store and columnar frame files,
//! score the feedback with a lexicon model, and train random-forest models to
//! quantify how much the feedback signal improves performance prediction.

pub mod catalog;
pub mod dataflow;
pub mod evalx;
pub mod experiment;
pub mod forest;
pub mod hash;
pub mod ingest;
pub mod rng;
pub mod sentiment;
pub mod storage;
