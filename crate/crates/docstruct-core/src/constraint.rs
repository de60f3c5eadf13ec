//! Validity rules for generated actions.
//!
//! Two layers enforce the same rules. [`allowed_next_tokens`] is the
//! token-level mask a generation backend applies while decoding, given the
//! set of plus-run tokens its tokenizer can emit atomically.
//! [`validate_and_repair`] is the sequence-level check applied to action
//! lists that were produced without a mask.
//!
//! The rules:
//! - only `+` runs, `*`, `=` and line breaks may be generated;
//! - nothing may be concatenated to the bare root, so the first action of a
//!   document is a level-1 heading or a paragraph;
//! - a heading may not skip levels. A heading deeper than the current
//!   maximum stack level plus one is lowered to exactly that level.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::action::{Action, MAX_HEADING_LEVEL};
use crate::stack::ContextStack;

/// Decoder vocabulary relevant to action generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    LineBreak,
    /// An atomic run of this many plus signs.
    Plus(u32),
    Star,
    Equal,
    EndOfSequence,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Token::LineBreak => f.write_str("\\n"),
            Token::Plus(n) => {
                for _ in 0..n {
                    f.write_str("+")?;
                }
                Ok(())
            }
            Token::Star => f.write_str("*"),
            Token::Equal => f.write_str("="),
            Token::EndOfSequence => f.write_str("</s>"),
        }
    }
}

impl Token {
    /// Parses the display form (`\n`, a plus run, `*`, `=`, `</s>`).
    pub fn parse(s: &str) -> Option<Token> {
        match s {
            "\\n" | "\n" => Some(Token::LineBreak),
            "*" => Some(Token::Star),
            "=" => Some(Token::Equal),
            "</s>" => Some(Token::EndOfSequence),
            _ if !s.is_empty() && s.bytes().all(|b| b == b'+') => Some(Token::Plus(s.len() as u32)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("plus token {0:?} is not a run of '+'")]
    NotAPlusRun(String),
    #[error("profile {0:?} must contain the single '+' token")]
    MissingSinglePlus(String),
}

/// Which plus runs a tokenizer can emit as single tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerProfile {
    name: String,
    plus_runs: Vec<u32>,
}

impl TokenizerProfile {
    pub fn new(
        name: impl Into<String>,
        plus_runs: impl IntoIterator<Item = u32>,
    ) -> Result<Self, ProfileError> {
        let name = name.into();
        let mut plus_runs: Vec<u32> = plus_runs.into_iter().filter(|&n| n > 0).collect();
        plus_runs.sort_unstable();
        plus_runs.dedup();
        if plus_runs.first() != Some(&1) {
            return Err(ProfileError::MissingSinglePlus(name));
        }
        Ok(TokenizerProfile { name, plus_runs })
    }

    /// Builds a profile from token strings such as `["+", "++"]`.
    pub fn from_tokens<'a>(
        name: impl Into<String>,
        tokens: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, ProfileError> {
        let mut runs = Vec::new();
        for t in tokens {
            if t.is_empty() || !t.bytes().all(|b| b == b'+') {
                return Err(ProfileError::NotAPlusRun(t.into()));
            }
            runs.push(t.len() as u32);
        }
        Self::new(name, runs)
    }

    /// GPT-2 style vocabulary: `+`, `++` and `++++` are single tokens.
    pub fn gpt2_medium() -> Self {
        Self::new("gpt2-medium", [1, 2, 4]).expect("valid builtin")
    }

    /// Baichuan style vocabulary: `+` and `++` are single tokens.
    pub fn baichuan_7b() -> Self {
        Self::new("baichuan-7b", [1, 2]).expect("valid builtin")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "gpt2-medium" => Some(Self::gpt2_medium()),
            "baichuan-7b" => Some(Self::baichuan_7b()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Plus-run lengths, ascending.
    pub fn plus_runs(&self) -> &[u32] {
        &self.plus_runs
    }

    pub fn plus_tokens(&self) -> impl Iterator<Item = Token> + '_ {
        self.plus_runs.iter().map(|&n| Token::Plus(n))
    }

    /// Every token this profile can emit.
    pub fn vocabulary(&self) -> Vec<Token> {
        let mut v = vec![Token::LineBreak];
        v.extend(self.plus_tokens());
        v.extend([Token::Star, Token::Equal, Token::EndOfSequence]);
        v
    }

    /// Splits `text` into tokens, matching plus runs greedily (longest
    /// first). Returns the byte offset of the first character outside the
    /// action vocabulary on failure.
    pub fn tokenize(&self, text: &str) -> Result<Vec<Token>, usize> {
        let bytes = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'\n' => {
                    out.push(Token::LineBreak);
                    i += 1;
                }
                b'*' => {
                    out.push(Token::Star);
                    i += 1;
                }
                b'=' => {
                    out.push(Token::Equal);
                    i += 1;
                }
                b'+' => {
                    let mut run = bytes[i..].iter().take_while(|&&b| b == b'+').count() as u32;
                    i += run as usize;
                    while run > 0 {
                        let take = *self
                            .plus_runs
                            .iter()
                            .rev()
                            .find(|&&n| n <= run)
                            .expect("profile contains the single plus");
                        out.push(Token::Plus(take));
                        run -= take;
                    }
                }
                _ => return Err(i),
            }
        }
        Ok(out)
    }
}

/// State of a constrained decoder within one prediction step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderState {
    /// `None` at the start of the output.
    pub last_token: Option<Token>,
    pub actions_emitted: usize,
    /// Number of actions the step asks for.
    pub window_size: usize,
    pub stack_is_root_only: bool,
    /// Top heading level of the simulated stack.
    pub current_max_level: u32,
    /// Plus signs seen on the current, unfinished line.
    pub pending_plus: u32,
}

impl DecoderState {
    /// Start-of-output state for a step over `window_size` segments.
    pub fn start(window_size: usize, stack: &ContextStack) -> Self {
        DecoderState {
            last_token: None,
            actions_emitted: 0,
            window_size,
            stack_is_root_only: stack.is_root_only(),
            current_max_level: stack.max_heading_level(),
            pending_plus: 0,
        }
    }

    /// Records `token` as generated. Completed lines update the simulated
    /// stack: headings are clamped the same way [`clamp_heading_level`]
    /// clamps them.
    pub fn advance(&mut self, token: Token) {
        match token {
            Token::Plus(n) => self.pending_plus += n,
            Token::Star => {}
            Token::Equal => {}
            Token::LineBreak => {
                match self.last_token {
                    Some(Token::Plus(_)) => {
                        let level = self.pending_plus.min(self.current_max_level + 1);
                        self.current_max_level = level;
                        self.stack_is_root_only = false;
                    }
                    Some(Token::Star) => self.stack_is_root_only = false,
                    _ => {}
                }
                self.pending_plus = 0;
                self.actions_emitted += 1;
            }
            Token::EndOfSequence => {}
        }
        self.last_token = Some(token);
    }
}

/// Tokens a constrained decoder may emit next.
///
/// Rows follow the last generated token: after a line break any action
/// token may start the next line; after a plus run more plus runs or a line
/// break; after `*` or `=` only a line break. On top of that the first token
/// of a step over a root-only stack is `+` or `*`, and end-of-sequence
/// requires a preceding line break with the whole window already emitted.
pub fn allowed_next_tokens(state: &DecoderState, profile: &TokenizerProfile) -> BTreeSet<Token> {
    let mut allowed = BTreeSet::new();
    let line_start = |allowed: &mut BTreeSet<Token>| {
        allowed.extend(profile.plus_tokens());
        allowed.insert(Token::Star);
        allowed.insert(Token::Equal);
    };
    match state.last_token {
        None if state.stack_is_root_only => {
            allowed.insert(Token::Plus(1));
            allowed.insert(Token::Star);
        }
        None => line_start(&mut allowed),
        Some(Token::LineBreak) => {
            line_start(&mut allowed);
            if state.actions_emitted == state.window_size {
                allowed.insert(Token::EndOfSequence);
            }
        }
        Some(Token::Plus(_)) => {
            allowed.insert(Token::LineBreak);
            allowed.extend(profile.plus_tokens());
        }
        Some(Token::Star) | Some(Token::Equal) => {
            allowed.insert(Token::LineBreak);
        }
        Some(Token::EndOfSequence) => {}
    }
    allowed
}

/// A token the mask would have rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenViolation {
    #[error("character at byte {0} is outside the action vocabulary")]
    Vocabulary(usize),
    #[error("token {token} not allowed at position {position}")]
    Masked { position: usize, token: Token },
    #[error("output ended after {emitted} of {expected} actions")]
    EarlyEnd { emitted: usize, expected: usize },
    #[error("output holds more than {expected} actions")]
    ExtraAction { expected: usize },
}

/// Replays generated `text` through the token mask and returns the raw
/// actions it encodes (levels not yet clamped). A missing final line break
/// is supplied before the implicit end-of-sequence.
pub fn check_masked_output(
    text: &str,
    profile: &TokenizerProfile,
    window_size: usize,
    stack: &ContextStack,
) -> Result<Vec<Action>, TokenViolation> {
    let mut tokens = profile.tokenize(text).map_err(TokenViolation::Vocabulary)?;
    if tokens.last().is_some_and(|t| *t != Token::LineBreak) {
        tokens.push(Token::LineBreak);
    }
    tokens.push(Token::EndOfSequence);

    let mut state = DecoderState::start(window_size, stack);
    let mut actions = Vec::with_capacity(window_size);
    for (position, &token) in tokens.iter().enumerate() {
        if token == Token::EndOfSequence && state.actions_emitted != window_size {
            return Err(TokenViolation::EarlyEnd {
                emitted: state.actions_emitted,
                expected: window_size,
            });
        }
        if !allowed_next_tokens(&state, profile).contains(&token) {
            return Err(TokenViolation::Masked { position, token });
        }
        if token == Token::LineBreak {
            if state.actions_emitted == window_size {
                return Err(TokenViolation::ExtraAction {
                    expected: window_size,
                });
            }
            let action = match state.last_token {
                Some(Token::Plus(_)) if state.pending_plus <= MAX_HEADING_LEVEL => {
                    Action::NewHeading(state.pending_plus)
                }
                Some(Token::Star) => Action::NewParagraph,
                Some(Token::Equal) => Action::Concatenation,
                _ => return Err(TokenViolation::Masked { position, token }),
            };
            actions.push(action);
        }
        state.advance(token);
    }
    Ok(actions)
}

/// Lowers a heading that skips levels to the stack's maximum level plus one.
/// Other actions pass through.
pub fn clamp_heading_level(action: Action, stack: &ContextStack) -> Action {
    clamp_to(action, stack.max_heading_level())
}

fn clamp_to(action: Action, max_level: u32) -> Action {
    match action {
        Action::NewHeading(level) => Action::NewHeading(level.clamp(1, max_level + 1)),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ConstraintMode {
    /// Token-level mask replayed over the generated text, then level clamp.
    Mask,
    /// Rewrite illegal actions into legal ones.
    #[default]
    Repair,
    /// Reject any violation.
    Strict,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::Mask => "mask",
            ConstraintMode::Repair => "repair",
            ConstraintMode::Strict => "strict",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mask" => Some(ConstraintMode::Mask),
            "repair" => Some(ConstraintMode::Repair),
            "strict" => Some(ConstraintMode::Strict),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintPolicy {
    pub mode: ConstraintMode,
    pub profile: TokenizerProfile,
}

impl Default for ConstraintPolicy {
    fn default() -> Self {
        ConstraintPolicy {
            mode: ConstraintMode::Repair,
            profile: TokenizerProfile::gpt2_medium(),
        }
    }
}

impl ConstraintPolicy {
    pub fn new(mode: ConstraintMode, profile: TokenizerProfile) -> Self {
        ConstraintPolicy { mode, profile }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    ConcatenationAtRoot,
    LevelSkip { requested: u32, max_allowed: u32 },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::ConcatenationAtRoot => f.write_str("concatenation on a root-only stack"),
            Rule::LevelSkip {
                requested,
                max_allowed,
            } => write!(
                f,
                "heading level {requested} skips levels (max {max_allowed})"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("action {index}: {rule}")]
pub struct ConstraintViolation {
    pub index: usize,
    pub rule: Rule,
}

/// Checks `actions` against `stack`, simulating how the stack evolves as
/// each action is applied. In repair and mask modes illegal actions are
/// rewritten: root-level concatenation becomes a new paragraph and
/// level-skipping headings are clamped. In strict mode the first violation
/// is returned.
pub fn validate_and_repair(
    actions: &[Action],
    stack: &ContextStack,
    mode: ConstraintMode,
) -> Result<Vec<Action>, ConstraintViolation> {
    let mut root_only = stack.is_root_only();
    let mut max_level = stack.max_heading_level();
    let mut out = Vec::with_capacity(actions.len());
    for (index, &action) in actions.iter().enumerate() {
        let fixed = match action {
            Action::Concatenation if root_only => {
                if mode == ConstraintMode::Strict {
                    return Err(ConstraintViolation {
                        index,
                        rule: Rule::ConcatenationAtRoot,
                    });
                }
                Action::NewParagraph
            }
            Action::NewHeading(level) if level == 0 || level > max_level + 1 => {
                if mode == ConstraintMode::Strict {
                    return Err(ConstraintViolation {
                        index,
                        rule: Rule::LevelSkip {
                            requested: level,
                            max_allowed: max_level + 1,
                        },
                    });
                }
                clamp_to(action, max_level)
            }
            other => other,
        };
        match fixed {
            Action::NewHeading(level) => {
                max_level = level;
                root_only = false;
            }
            Action::NewParagraph => root_only = false,
            Action::Concatenation => {}
        }
        out.push(fixed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{LogicalTree, NodeId};

    fn set(tokens: &[Token]) -> BTreeSet<Token> {
        tokens.iter().copied().collect()
    }

    fn stack_with_levels(max: u32) -> ContextStack {
        let tree = LogicalTree::new();
        let mut s = ContextStack::new(&tree);
        for level in 1..=max {
            s.apply(Action::NewHeading(level), Some(NodeId(level as usize)))
                .unwrap();
        }
        s
    }

    fn after(last: Token) -> DecoderState {
        DecoderState {
            last_token: Some(last),
            actions_emitted: 1,
            window_size: 1,
            stack_is_root_only: false,
            current_max_level: 1,
            pending_plus: 0,
        }
    }

    #[test]
    fn first_token_on_root_only_stack() {
        let state = DecoderState::start(2, &stack_with_levels(0));
        let allowed = allowed_next_tokens(&state, &TokenizerProfile::baichuan_7b());
        assert_eq!(allowed, set(&[Token::Plus(1), Token::Star]));
    }

    #[test]
    fn first_token_elsewhere_allows_any_action() {
        let state = DecoderState::start(1, &stack_with_levels(2));
        let allowed = allowed_next_tokens(&state, &TokenizerProfile::baichuan_7b());
        assert_eq!(
            allowed,
            set(&[Token::Plus(1), Token::Plus(2), Token::Star, Token::Equal])
        );
    }

    #[test]
    fn star_row() {
        let p = TokenizerProfile::baichuan_7b();
        assert_eq!(
            allowed_next_tokens(&after(Token::Star), &p),
            set(&[Token::LineBreak])
        );
    }

    #[test]
    fn plus_row_gpt2() {
        let p = TokenizerProfile::gpt2_medium();
        assert_eq!(
            allowed_next_tokens(&after(Token::Plus(1)), &p),
            set(&[
                Token::LineBreak,
                Token::Plus(1),
                Token::Plus(2),
                Token::Plus(4)
            ])
        );
    }

    #[test]
    fn end_of_sequence_needs_full_window() {
        let p = TokenizerProfile::gpt2_medium();
        let mut state = after(Token::LineBreak);
        state.window_size = 2;
        assert!(!allowed_next_tokens(&state, &p).contains(&Token::EndOfSequence));
        state.actions_emitted = 2;
        assert!(allowed_next_tokens(&state, &p).contains(&Token::EndOfSequence));
    }

    #[test]
    fn tokenizer_is_greedy() {
        let p = TokenizerProfile::gpt2_medium();
        assert_eq!(
            p.tokenize("+++++++\n").unwrap(),
            [
                Token::Plus(4),
                Token::Plus(2),
                Token::Plus(1),
                Token::LineBreak
            ]
        );
        assert_eq!(p.tokenize("+ \n"), Err(1));
    }

    #[test]
    fn profiles_need_single_plus() {
        assert!(TokenizerProfile::from_tokens("x", ["++"]).is_err());
        assert!(TokenizerProfile::from_tokens("x", ["+", "+*"]).is_err());
        let p = TokenizerProfile::from_tokens("x", ["++", "+"]).unwrap();
        assert_eq!(p.plus_runs(), &[1, 2]);
    }

    #[test]
    fn masked_output_merges_plus_tokens() {
        let p = TokenizerProfile::baichuan_7b();
        let s = stack_with_levels(2);
        assert_eq!(
            check_masked_output("++\n+=", &p, 2, &s).map_err(|_| ()),
            Err(())
        );
        assert_eq!(
            check_masked_output("+++\n=\n", &p, 2, &s),
            Ok(vec![Action::NewHeading(3), Action::Concatenation])
        );
        assert!(matches!(
            check_masked_output("=\n", &p, 1, &stack_with_levels(0)),
            Err(TokenViolation::Masked { position: 0, .. })
        ));
        assert!(matches!(
            check_masked_output("*\n", &p, 2, &s),
            Err(TokenViolation::EarlyEnd {
                emitted: 1,
                expected: 2
            })
        ));
        assert!(matches!(
            check_masked_output("*\n*\n*\n", &p, 2, &s),
            Err(TokenViolation::ExtraAction { .. })
        ));
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(
            clamp_heading_level(Action::NewHeading(4), &stack_with_levels(2)),
            Action::NewHeading(3)
        );
        assert_eq!(
            clamp_heading_level(Action::NewHeading(1), &stack_with_levels(5)),
            Action::NewHeading(1)
        );
        assert_eq!(
            clamp_heading_level(Action::NewHeading(2), &stack_with_levels(0)),
            Action::NewHeading(1)
        );
    }

    #[test]
    fn clamp_matches_enumeration() {
        // every stack depth up to 5 against every requested level up to 8:
        // the clamped level is the largest level that does not skip
        for depth in 0..=5u32 {
            let stack = stack_with_levels(depth);
            for level in 1..=8u32 {
                let legal: Vec<u32> = (1..=level).filter(|l| *l <= depth + 1).collect();
                let expected = *legal.last().unwrap();
                let got = clamp_heading_level(Action::NewHeading(level), &stack);
                assert_eq!(got, Action::NewHeading(expected));
                assert_eq!(clamp_heading_level(got, &stack), got);
            }
        }
    }

    #[test]
    fn repair_examples() {
        let root = stack_with_levels(0);
        assert_eq!(
            validate_and_repair(&[Action::Concatenation], &root, ConstraintMode::Repair),
            Ok(vec![Action::NewParagraph])
        );
        let climb = [
            Action::NewHeading(1),
            Action::NewHeading(2),
            Action::NewHeading(3),
        ];
        assert_eq!(
            validate_and_repair(&climb, &root, ConstraintMode::Strict),
            Ok(climb.to_vec())
        );
        assert_eq!(
            validate_and_repair(
                &[Action::NewHeading(1), Action::NewHeading(4)],
                &root,
                ConstraintMode::Strict
            ),
            Err(ConstraintViolation {
                index: 1,
                rule: Rule::LevelSkip {
                    requested: 4,
                    max_allowed: 2
                }
            })
        );
        assert_eq!(
            validate_and_repair(
                &[Action::NewHeading(1), Action::NewHeading(4)],
                &root,
                ConstraintMode::Repair
            ),
            Ok(vec![Action::NewHeading(1), Action::NewHeading(2)])
        );
    }
}
