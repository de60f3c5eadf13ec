//! Text format exchanged with action predictors.
//!
//! A prompt has three sections separated by blank lines:
//!
//! ```text
//! ### STACK:
//! + Government Bonds Credit Rating Report
//! ++ Credit Quality Analysis for this Series
//! * The funds raised ...
//!
//! ### SEGMENT:
//! forestry, water resources and social services.
//! Payment Security Analysis
//!
//! ### ACTION:
//! ```
//!
//! The root is never rendered, so an empty stack section means the stack
//! holds only the root. The predictor continues after the action header
//! with one action per line.

use alloc::string::String;
use alloc::vec::Vec;

use crate::action::{Action, ParseActionError};
use crate::config::StructuringConfig;
use crate::stack::ContextStack;
use crate::tree::{LogicalTree, NodeKind, TextSegment};

pub const STACK_HEADER: &str = "### STACK:";
pub const SEGMENT_HEADER: &str = "### SEGMENT:";
pub const ACTION_HEADER: &str = "### ACTION:";

impl AsRef<str> for TextSegment {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

/// Appends `text` to `out`, keeping at most `max_chars` characters.
fn push_truncated(out: &mut String, text: &str, max_chars: Option<usize>) {
    match max_chars {
        Some(n) => match text.char_indices().nth(n) {
            Some((cut, _)) => out.push_str(&text[..cut]),
            None => out.push_str(text),
        },
        None => out.push_str(text),
    }
}

/// Symbol prefix of a stack line: `+` per heading level, `*` for paragraphs.
pub fn stack_symbol(kind: NodeKind) -> String {
    match kind {
        NodeKind::Heading { level } => "+".repeat(level as usize),
        NodeKind::Paragraph => String::from("*"),
    }
}

/// Renders one prediction step. Pure: equal inputs give identical bytes.
pub fn render_prompt<S: AsRef<str>>(
    stack: &ContextStack,
    tree: &LogicalTree,
    segments: &[S],
    config: &StructuringConfig,
) -> String {
    let mut out = String::new();
    out.push_str(STACK_HEADER);
    out.push('\n');
    for entry in &stack.entries()[1..] {
        let node = tree.node(entry.node);
        out.push_str(&stack_symbol(entry.kind));
        out.push(' ');
        let joined = node.joined_text(&config.join_separator);
        push_truncated(&mut out, &joined, config.stack_entry_truncation);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(SEGMENT_HEADER);
    out.push('\n');
    for segment in segments {
        out.push_str(segment.as_ref());
        out.push('\n');
    }
    out.push('\n');
    out.push_str(ACTION_HEADER);
    out.push('\n');
    out
}

/// One action per line, each line terminated by a line break.
pub fn format_action_block(actions: &[Action]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for a in actions {
        let _ = writeln!(out, "{a}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected {expected} actions, found {found}{}", .malformed.as_ref().map(|(line, e)| alloc::format!(" (line {line}: {e})")).unwrap_or_default())]
pub struct MismatchError {
    pub expected: usize,
    pub found: usize,
    /// Actions parsed before the problem was detected.
    pub parsed: Vec<Action>,
    /// 0-based line number and cause of the first unparseable line.
    pub malformed: Option<(usize, ParseActionError)>,
}

/// Parses generated text into exactly `expected_count` actions.
///
/// Lines are trimmed and trailing empty lines dropped; an empty line before
/// the last action is malformed.
pub fn parse_action_block(s: &str, expected_count: usize) -> Result<Vec<Action>, MismatchError> {
    let mut lines: Vec<&str> = s.split('\n').map(str::trim).collect();
    while lines.last() == Some(&"") {
        lines.pop();
    }
    let mut parsed = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match line.parse::<Action>() {
            Ok(a) => parsed.push(a),
            Err(e) => {
                return Err(MismatchError {
                    expected: expected_count,
                    found: lines.len(),
                    parsed,
                    malformed: Some((i, e)),
                })
            }
        }
    }
    if parsed.len() != expected_count {
        return Err(MismatchError {
            expected: expected_count,
            found: parsed.len(),
            parsed,
            malformed: None,
        });
    }
    Ok(parsed)
}

/// A stack line recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackLine {
    pub kind: NodeKind,
    pub text: String,
}

/// Structured view of a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromptView {
    pub stack: Vec<StackLine>,
    pub segments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptParseError {
    #[error("missing section header {0}")]
    MissingHeader(&'static str),
    #[error("malformed stack line {0:?}")]
    StackLine(String),
}

/// Inverse of [`render_prompt`] for predictors that only see the text.
/// `segment_count` disambiguates empty segment lines.
pub fn parse_prompt(prompt: &str, segment_count: usize) -> Result<PromptView, PromptParseError> {
    let body = prompt
        .strip_prefix(STACK_HEADER)
        .and_then(|r| r.strip_prefix('\n'))
        .ok_or(PromptParseError::MissingHeader(STACK_HEADER))?;
    let seg_marker = "\n### SEGMENT:\n";
    let act_marker = "\n### ACTION:\n";
    let seg_at = body
        .find(seg_marker)
        .ok_or(PromptParseError::MissingHeader(SEGMENT_HEADER))?;
    let act_at = body
        .rfind(act_marker)
        .ok_or(PromptParseError::MissingHeader(ACTION_HEADER))?;
    if act_at < seg_at {
        return Err(PromptParseError::MissingHeader(ACTION_HEADER));
    }

    let stack_part = &body[..seg_at];
    let mut stack = Vec::new();
    for line in stack_part.split('\n').filter(|l| !l.is_empty()) {
        let (symbol, text) = line
            .split_once(' ')
            .ok_or_else(|| PromptParseError::StackLine(line.into()))?;
        let kind = if symbol == "*" {
            NodeKind::Paragraph
        } else if !symbol.is_empty() && symbol.bytes().all(|b| b == b'+') {
            NodeKind::Heading {
                level: symbol.len() as u32,
            }
        } else {
            return Err(PromptParseError::StackLine(line.into()));
        };
        stack.push(StackLine {
            kind,
            text: text.into(),
        });
    }

    let segment_part = &body[seg_at + seg_marker.len()..act_at];
    let segments = segment_part
        .split('\n')
        .take(segment_count)
        .map(String::from)
        .collect();
    Ok(PromptView { stack, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn root_only_prompt() {
        let tree = LogicalTree::new();
        let stack = ContextStack::new(&tree);
        let config = StructuringConfig::default();
        let p = render_prompt(&stack, &tree, &["Hello"], &config);
        assert_eq!(p, "### STACK:\n\n### SEGMENT:\nHello\n\n### ACTION:\n");
    }

    #[test]
    fn joins_content_entries() {
        let mut tree = LogicalTree::new();
        let h = tree
            .push_heading(
                tree.root(),
                1,
                vec!["Chapter 1".into(), "Introduction".into()],
            )
            .unwrap();
        let mut stack = ContextStack::new(&tree);
        stack.apply(Action::NewHeading(1), Some(h)).unwrap();
        let config = StructuringConfig::default();
        let p = render_prompt(&stack, &tree, &["x"], &config);
        let expected_line = alloc::format!("+ {}\n", tree.node(h).joined_text(" "));
        assert_eq!(expected_line, "+ Chapter 1 Introduction\n");
        assert!(p.contains(&expected_line));

        let cjk = config.clone().with_separator("");
        assert!(render_prompt(&stack, &tree, &["x"], &cjk).contains("+ Chapter 1Introduction\n"));
    }

    #[test]
    fn truncation_keeps_head() {
        let mut tree = LogicalTree::new();
        let p = tree
            .push_paragraph(tree.root(), vec!["héllo world".into()])
            .unwrap();
        let mut stack = ContextStack::new(&tree);
        stack.apply(Action::NewParagraph, Some(p)).unwrap();
        let config = StructuringConfig::default().with_truncation(Some(5));
        let out = render_prompt(&stack, &tree, &["x"], &config);
        assert!(out.starts_with("### STACK:\n* héllo\n\n"));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_action_block("=\n+++\n*\n", 3),
            Ok(vec![
                Action::Concatenation,
                Action::NewHeading(3),
                Action::NewParagraph
            ])
        );
        assert_eq!(parse_action_block("*\n", 1), Ok(vec![Action::NewParagraph]));
        let err = parse_action_block("*\n=\n", 3).unwrap_err();
        assert_eq!(err.found, 2);
        assert_eq!(
            err.parsed,
            vec![Action::NewParagraph, Action::Concatenation]
        );
        let err = parse_action_block("*\n\n=\n", 2).unwrap_err();
        assert_eq!(err.malformed.as_ref().map(|m| m.0), Some(1));
        assert!(parse_action_block(" + \r\n", 1).is_ok());
    }

    #[test]
    fn prompt_round_trip() {
        let mut tree = LogicalTree::new();
        let h = tree.push_heading(tree.root(), 1, vec!["T".into()]).unwrap();
        let p = tree.push_paragraph(h, vec!["a b".into()]).unwrap();
        let mut stack = ContextStack::new(&tree);
        stack.apply(Action::NewHeading(1), Some(h)).unwrap();
        stack.apply(Action::NewParagraph, Some(p)).unwrap();
        let segs = ["one", "", "three"];
        let text = render_prompt(&stack, &tree, &segs, &StructuringConfig::default());
        let view = parse_prompt(&text, 3).unwrap();
        assert_eq!(view.segments, ["one", "", "three"]);
        assert_eq!(view.stack.len(), 2);
        assert_eq!(view.stack[1].text, "a b".to_string());
        assert_eq!(view.stack[0].kind, NodeKind::Heading { level: 1 });
    }
}
