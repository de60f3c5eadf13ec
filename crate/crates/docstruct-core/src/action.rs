//! Structuring actions and their one-line textual form.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

/// Deepest heading level an action may request. Level 0 is the root.
pub const MAX_HEADING_LEVEL: u32 = 64;

/// One structuring decision, taken for exactly one text segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Start a heading at `level` (written as `level` plus signs).
    NewHeading(u32),
    /// Start a paragraph under the closest heading (`*`).
    NewParagraph,
    /// Append the segment to the last added node (`=`).
    Concatenation,
}

impl Action {
    /// Heading level, if this is a heading action.
    pub fn heading_level(self) -> Option<u32> {
        match self {
            Action::NewHeading(level) => Some(level),
            _ => None,
        }
    }

    pub fn is_concatenation(self) -> bool {
        matches!(self, Action::Concatenation)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Action::NewHeading(level) => {
                for _ in 0..level {
                    f.write_str("+")?;
                }
                Ok(())
            }
            Action::NewParagraph => f.write_str("*"),
            Action::Concatenation => f.write_str("="),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed action {text:?}: {reason}")]
pub struct ParseActionError {
    pub text: String,
    pub reason: &'static str,
}

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = |reason| ParseActionError {
            text: s.into(),
            reason,
        };
        match s {
            "" => Err(malformed("empty")),
            "*" => Ok(Action::NewParagraph),
            "=" => Ok(Action::Concatenation),
            _ if s.bytes().all(|b| b == b'+') => {
                if s.len() > MAX_HEADING_LEVEL as usize {
                    Err(malformed("heading level exceeds 64"))
                } else {
                    Ok(Action::NewHeading(s.len() as u32))
                }
            }
            _ => Err(malformed("expected a run of '+', '*' or '='")),
        }
    }
}

/// Canonical string form of `action`.
pub fn action_to_string(action: Action) -> String {
    use alloc::string::ToString;
    action.to_string()
}

/// Parses the canonical string form back into an [`Action`].
pub fn string_to_action(s: &str) -> Result<Action, ParseActionError> {
    s.parse()
}
