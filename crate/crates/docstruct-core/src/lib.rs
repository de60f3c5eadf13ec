//! Core of the document structuring engine.
//!
//! A document arrives as an ordered list of text segments (one extracted
//! line each). A predictor assigns one [`Action`] per segment and the
//! [`engine`] executes those actions against a [`LogicalTree`] while
//! maintaining a [`ContextStack`], the root-to-last-node path that is shown
//! back to the predictor on every step.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the command line
//! front end and network predictors live in the `docstruct` crate.

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod action;
pub mod config;
pub mod constraint;
pub mod datagen;
pub mod engine;
pub mod eval;
pub mod predict;
pub mod prompt;
pub mod stack;
pub mod tracer;
pub mod tree;

pub use action::{Action, ParseActionError, MAX_HEADING_LEVEL};
pub use config::{ConfigError, StructuringConfig};
pub use constraint::{
    allowed_next_tokens, clamp_heading_level, validate_and_repair, ConstraintMode,
    ConstraintPolicy, ConstraintViolation, DecoderState, Token, TokenizerProfile,
};
pub use datagen::{emit_training_examples, tree_to_actions, TrainingExample};
pub use engine::{apply_action, structure_document, EngineError, EngineState, RunReport};
pub use eval::{doc_acc, heading_detection_f1, node_f1, teds, Category, MatchMode, Scores};
pub use predict::{
    ActionPredictor, ConstraintHints, OraclePredictor, PredictionRequest, PredictionResponse,
    PredictorError, PredictorErrorKind,
};
pub use prompt::{parse_action_block, render_prompt, MismatchError};
pub use stack::{update_stack, ContextStack, InvalidTransition, StackEntry};
pub use tree::{LogicalTree, Node, NodeId, NodeKind, TextSegment, TreeError};
