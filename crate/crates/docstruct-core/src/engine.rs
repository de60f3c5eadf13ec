//! Action execution and the windowed structuring loop.

use alloc::string::String;
use alloc::vec::Vec;

use crate::action::Action;
use crate::config::{ConfigError, StructuringConfig};
use crate::constraint::{
    allowed_next_tokens, check_masked_output, validate_and_repair, ConstraintMode,
    ConstraintPolicy, ConstraintViolation, DecoderState,
};
use crate::predict::{ActionPredictor, ConstraintHints, PredictionRequest, PredictorError};
use crate::prompt::{parse_action_block, render_prompt};
use crate::stack::{ContextStack, InvalidTransition};
use crate::tree::{LogicalTree, TextSegment};

/// Tree and stack of a run in progress.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub tree: LogicalTree,
    pub stack: ContextStack,
    /// Segments consumed, committed or skipped.
    pub consumed: usize,
    pub skipped: Vec<usize>,
}

impl Default for EngineState {
    fn default() -> Self {
        Self::new()
    }
}

impl EngineState {
    pub fn new() -> Self {
        let tree = LogicalTree::new();
        let stack = ContextStack::new(&tree);
        EngineState {
            tree,
            stack,
            consumed: 0,
            skipped: Vec::new(),
        }
    }

    /// Executes one action for the segment text `text`.
    ///
    /// The action must already satisfy the constraints; violations are
    /// reported as [`InvalidTransition`] and leave the state unchanged.
    pub fn apply(&mut self, action: Action, text: &str) -> Result<(), InvalidTransition> {
        let new_node = match action {
            Action::Concatenation => {
                self.stack.check(action)?;
                let top = self.stack.top().node;
                self.tree
                    .append_content(top, text.into())
                    .map_err(|_| InvalidTransition::ConcatenationAtRoot)?;
                None
            }
            Action::NewHeading(level) => {
                let parent = self.stack.parent_for(action)?;
                let id = self
                    .tree
                    .push_heading(parent, level, alloc::vec![String::from(text)])
                    .expect("parent found on the stack has the right level");
                Some(id)
            }
            Action::NewParagraph => {
                let parent = self.stack.parent_for(action)?;
                let id = self
                    .tree
                    .push_paragraph(parent, alloc::vec![String::from(text)])
                    .expect("paragraph parent is a heading");
                Some(id)
            }
        };
        self.stack
            .apply(action, new_node)
            .expect("stack was checked before the tree changed");
        self.consumed += 1;
        debug_assert!(self.stack.is_consistent_with(&self.tree));
        Ok(())
    }

    fn skip(&mut self, indices: core::ops::Range<usize>) {
        self.consumed += indices.len();
        self.skipped.extend(indices);
    }
}

/// Value-style form of [`EngineState::apply`].
pub fn apply_action(
    state: &EngineState,
    action: Action,
    segment: &TextSegment,
) -> Result<EngineState, InvalidTransition> {
    let mut next = state.clone();
    next.apply(action, &segment.text)?;
    Ok(next)
}

/// Outcome summary of one structuring run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunReport {
    pub doc_id: String,
    /// Prediction steps taken.
    pub steps: usize,
    pub committed_actions: usize,
    pub skipped_segment_indices: Vec<usize>,
    /// Steps whose output could not be used.
    pub failed_steps: Vec<usize>,
    /// Wall-clock time; filled in by callers that own a clock.
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("predictor failed at step {step}: {source}")]
    Predictor { step: usize, source: PredictorError },
    #[error("constraint violated at step {step}: {source}")]
    Constraint {
        step: usize,
        source: ConstraintViolation,
    },
    #[error("invalid transition at step {step}: {source}")]
    Transition {
        step: usize,
        source: InvalidTransition,
    },
}

/// Turns an ordered list of segments into a logical tree.
///
/// Step `i` shows the predictor the segments starting at `i * w_O` (at most
/// `w_I` of them, clipped to the document end) and commits the first
/// `min(w_O, remaining)` returned actions. Output with the wrong number of
/// actions, or rejected by the token mask in [`ConstraintMode::Mask`], makes
/// the step fail: its committed segments are skipped and recorded, and the
/// stack stays as it was.
pub fn structure_document<P: ActionPredictor + ?Sized>(
    segments: &[TextSegment],
    predictor: &mut P,
    config: &StructuringConfig,
    policy: &ConstraintPolicy,
) -> Result<(LogicalTree, RunReport), EngineError> {
    config.validate()?;
    let n = segments.len();
    let mut state = EngineState::new();
    let mut report = RunReport {
        doc_id: segments
            .first()
            .map(|s| s.doc_id.clone())
            .unwrap_or_default(),
        ..Default::default()
    };

    for step in 0..config.step_count(n) {
        let start = step * config.output_window;
        let window = &segments[start..n.min(start + config.input_window)];
        let commit = config.output_window.min(n - start);

        let decoder = DecoderState::start(window.len(), &state.stack);
        let request = PredictionRequest {
            prompt: render_prompt(&state.stack, &state.tree, window, config),
            expected_actions: window.len(),
            commit_count: commit,
            hints: ConstraintHints {
                first_tokens: allowed_next_tokens(&decoder, &policy.profile)
                    .into_iter()
                    .collect(),
                profile: policy.profile.name().into(),
            },
        };
        let response = predictor
            .predict(&request)
            .map_err(|source| EngineError::Predictor { step, source })?;
        report.steps += 1;

        let decoded = match policy.mode {
            ConstraintMode::Mask => check_masked_output(
                &response.action_lines,
                &policy.profile,
                window.len(),
                &state.stack,
            )
            .ok(),
            ConstraintMode::Repair | ConstraintMode::Strict => {
                parse_action_block(&response.action_lines, window.len()).ok()
            }
        };
        let Some(actions) = decoded else {
            report.failed_steps.push(step);
            state.skip(start..start + commit);
            continue;
        };

        let committed = validate_and_repair(&actions[..commit], &state.stack, policy.mode)
            .map_err(|source| EngineError::Constraint { step, source })?;
        for (offset, action) in committed.into_iter().enumerate() {
            state
                .apply(action, &window[offset].text)
                .map_err(|source| EngineError::Transition { step, source })?;
            report.committed_actions += 1;
        }
    }

    report.skipped_segment_indices = core::mem::take(&mut state.skipped);
    Ok((state.tree, report))
}
