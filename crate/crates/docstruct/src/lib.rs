//! File formats, predictors and the run harness around `docstruct-core`.
//!
//! - [`format`]: line-delimited JSON corpora (segments, actions, trees,
//!   training examples), the nested tree JSON and tokenizer profile files.
//! - [`heuristic`]: numbering-pattern predictor that needs no model.
//! - [`remote`]: HTTP client for a text generation service.
//! - [`synthetic`]: seeded generator of annotated trees.
//! - [`runner`]: timed, parallel structuring and evaluation over corpora.
//! - [`selfcheck`]: the property suite behind `docstruct selfcheck`.

pub mod format;
pub mod heuristic;
pub mod remote;
pub mod report;
pub mod runner;
pub mod selfcheck;
pub mod synthetic;
