//! The predictor contract and the gold-replay oracle.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::action::Action;
use crate::constraint::Token;
use crate::prompt::format_action_block;

/// Hints a backend may use to mask its first token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintHints {
    pub first_tokens: Vec<Token>,
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRequest {
    /// Rendered prompt, ending with the action header.
    pub prompt: String,
    /// Number of action lines wanted (the clipped input window).
    pub expected_actions: usize,
    /// How many of those actions the engine will commit this step.
    pub commit_count: usize,
    pub hints: ConstraintHints,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionResponse {
    /// Raw text generated after the action header.
    pub action_lines: String,
    pub latency_ms: u64,
}

impl PredictionResponse {
    pub fn new(action_lines: impl Into<String>) -> Self {
        PredictionResponse {
            action_lines: action_lines.into(),
            latency_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorErrorKind {
    Transport,
    Timeout,
    Backend,
    CursorExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorError {
    pub kind: PredictorErrorKind,
    pub message: String,
    /// Attempts made before giving up (remote backends).
    pub attempts: u32,
    /// Last HTTP status, when there was one.
    pub status: Option<u16>,
}

impl PredictorError {
    pub fn new(kind: PredictorErrorKind, message: impl Into<String>) -> Self {
        PredictorError {
            kind,
            message: message.into(),
            attempts: 1,
            status: None,
        }
    }
}

impl fmt::Display for PredictorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}: {} (attempts={}",
            self.kind, self.message, self.attempts
        )?;
        if let Some(status) = self.status {
            write!(f, ", status={status}")?;
        }
        f.write_str(")")
    }
}

impl core::error::Error for PredictorError {}

/// Anything that turns a rendered prompt into action lines.
///
/// Implementations must be deterministic: the same request sequence yields
/// the same responses. Output may be malformed; the engine validates it.
pub trait ActionPredictor {
    fn predict(
        &mut self,
        request: &PredictionRequest,
    ) -> Result<PredictionResponse, PredictorError>;
}

impl<P: ActionPredictor + ?Sized> ActionPredictor for &mut P {
    fn predict(
        &mut self,
        request: &PredictionRequest,
    ) -> Result<PredictionResponse, PredictorError> {
        (**self).predict(request)
    }
}

impl<P: ActionPredictor + ?Sized> ActionPredictor for alloc::boxed::Box<P> {
    fn predict(
        &mut self,
        request: &PredictionRequest,
    ) -> Result<PredictionResponse, PredictorError> {
        (**self).predict(request)
    }
}

/// Replays a gold action sequence, one window per call.
///
/// The cursor advances by the request's commit count, so look-ahead actions
/// are replayed again on the next step.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    gold: Vec<Action>,
    cursor: usize,
}

impl OraclePredictor {
    pub fn new(gold: Vec<Action>) -> Self {
        OraclePredictor { gold, cursor: 0 }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }
}

impl ActionPredictor for OraclePredictor {
    fn predict(
        &mut self,
        request: &PredictionRequest,
    ) -> Result<PredictionResponse, PredictorError> {
        let end = self.cursor + request.expected_actions;
        if end > self.gold.len() {
            return Err(PredictorError::new(
                PredictorErrorKind::CursorExhausted,
                alloc::format!(
                    "asked for actions {}..{} of {}",
                    self.cursor,
                    end,
                    self.gold.len()
                ),
            ));
        }
        let text = format_action_block(&self.gold[self.cursor..end]);
        self.cursor += request.commit_count;
        Ok(PredictionResponse::new(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn request(expected: usize, commit: usize) -> PredictionRequest {
        PredictionRequest {
            prompt: String::new(),
            expected_actions: expected,
            commit_count: commit,
            hints: ConstraintHints {
                first_tokens: Vec::new(),
                profile: String::new(),
            },
        }
    }

    #[test]
    fn replays_windows() {
        let gold = vec![
            Action::NewHeading(1),
            Action::NewParagraph,
            Action::Concatenation,
        ];
        let mut oracle = OraclePredictor::new(gold);
        assert_eq!(
            oracle.predict(&request(2, 2)).unwrap().action_lines,
            "+\n*\n"
        );
        assert_eq!(oracle.predict(&request(1, 1)).unwrap().action_lines, "=\n");
        let err = oracle.predict(&request(1, 1)).unwrap_err();
        assert_eq!(err.kind, PredictorErrorKind::CursorExhausted);
    }

    #[test]
    fn look_ahead_is_replayed() {
        let gold = vec![
            Action::NewParagraph,
            Action::Concatenation,
            Action::Concatenation,
        ];
        let mut oracle = OraclePredictor::new(gold);
        assert_eq!(
            oracle.predict(&request(2, 1)).unwrap().action_lines,
            "*\n=\n"
        );
        assert_eq!(
            oracle.predict(&request(2, 1)).unwrap().action_lines,
            "=\n=\n"
        );
    }

    #[test]
    fn deterministic() {
        let gold = vec![Action::NewParagraph];
        let a = OraclePredictor::new(gold.clone())
            .predict(&request(1, 1))
            .unwrap();
        let b = OraclePredictor::new(gold).predict(&request(1, 1)).unwrap();
        assert_eq!(a, b);
    }
}
