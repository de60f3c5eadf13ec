//! Shift-reduce baseline transition system.
//!
//! Each segment is compared against the top of a stack of open nodes.
//! `SubHeading` and `SubText` attach the segment as a child of the top and
//! push it, `Concat` extends the top, and `Reduce` pops the top and keeps
//! the segment pending so it is compared against the new top. A segment can
//! therefore take several predictions, one per `Reduce` plus the final
//! consuming action.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::action::MAX_HEADING_LEVEL;
use crate::predict::PredictorError;
use crate::prompt::{stack_symbol, ACTION_HEADER, SEGMENT_HEADER, STACK_HEADER};
use crate::tree::{LogicalTree, NodeId, NodeKind, TextSegment, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TracerAction {
    SubHeading,
    /// Also called "sub-paragraph".
    SubText,
    Reduce,
    Concat,
}

impl TracerAction {
    pub const ALL: [TracerAction; 4] = [
        TracerAction::SubHeading,
        TracerAction::SubText,
        TracerAction::Reduce,
        TracerAction::Concat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TracerAction::SubHeading => "sub-heading",
            TracerAction::SubText => "sub-text",
            TracerAction::Reduce => "reduce",
            TracerAction::Concat => "concat",
        }
    }

    /// Whether the action consumes the pending segment.
    pub fn consumes(self) -> bool {
        !matches!(self, TracerAction::Reduce)
    }
}

impl fmt::Display for TracerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tracer action {0:?}")]
pub struct ParseTracerActionError(pub String);

impl FromStr for TracerAction {
    type Err = ParseTracerActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sub-heading" => Ok(TracerAction::SubHeading),
            "sub-text" | "sub-paragraph" => Ok(TracerAction::SubText),
            "reduce" => Ok(TracerAction::Reduce),
            "concat" => Ok(TracerAction::Concat),
            _ => Err(ParseTracerActionError(s.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TracerError {
    #[error("{action} is not allowed in the current state")]
    Illegal { action: TracerAction },
    #[error("{action} needs a pending segment")]
    NoPendingSegment { action: TracerAction },
    #[error("predictor failed at transition {transition}: {source}")]
    Predictor {
        transition: usize,
        source: PredictorError,
    },
    #[error("unparseable prediction at transition {transition}: {text:?}")]
    Malformed { transition: usize, text: String },
    #[error("more than {limit} transitions for {segments} segments")]
    Livelock { limit: usize, segments: usize },
}

/// Tree under construction, the open-node stack and the pending segment.
#[derive(Debug, Clone)]
pub struct TracerState {
    pub tree: LogicalTree,
    pub stack: Vec<NodeId>,
    pub pending: Option<String>,
}

impl Default for TracerState {
    fn default() -> Self {
        Self::new()
    }
}

impl TracerState {
    pub fn new() -> Self {
        let tree = LogicalTree::new();
        let stack = vec![tree.root()];
        TracerState {
            tree,
            stack,
            pending: None,
        }
    }

    pub fn top(&self) -> NodeId {
        *self.stack.last().expect("root stays on the stack")
    }

    fn top_kind(&self) -> NodeKind {
        self.tree.node(self.top()).kind
    }

    /// Actions permitted by the baseline's constraints.
    pub fn allowed_actions(&self) -> Vec<TracerAction> {
        use TracerAction::*;
        if self.stack.len() == 1 {
            // the root can be neither popped nor extended
            return vec![SubHeading, SubText];
        }
        match self.top_kind() {
            NodeKind::Paragraph => vec![Reduce, Concat],
            NodeKind::Heading { level } if level >= MAX_HEADING_LEVEL => {
                vec![SubText, Reduce, Concat]
            }
            NodeKind::Heading { .. } => TracerAction::ALL.to_vec(),
        }
    }

    /// Executes `action`. Returns whether the pending segment was consumed.
    pub fn step(&mut self, action: TracerAction) -> Result<bool, TracerError> {
        if !self.allowed_actions().contains(&action) {
            return Err(TracerError::Illegal { action });
        }
        if action == TracerAction::Reduce {
            self.stack.pop();
            return Ok(false);
        }
        let text = self
            .pending
            .take()
            .ok_or(TracerError::NoPendingSegment { action })?;
        let top = self.top();
        match action {
            TracerAction::SubHeading => {
                let level = self.top_kind().heading_level().expect("top is a heading") + 1;
                let id = self
                    .tree
                    .push_heading(top, level, vec![text])
                    .expect("heading level follows its parent");
                self.stack.push(id);
            }
            TracerAction::SubText => {
                let id = self
                    .tree
                    .push_paragraph(top, vec![text])
                    .expect("top is a heading");
                self.stack.push(id);
            }
            TracerAction::Concat => {
                self.tree
                    .append_content(top, text)
                    .expect("root is never extended");
            }
            TracerAction::Reduce => unreachable!(),
        }
        Ok(true)
    }
}

/// Value-style transition.
pub fn tracer_step(state: &TracerState, action: TracerAction) -> Result<TracerState, TracerError> {
    let mut next = state.clone();
    next.step(action)?;
    Ok(next)
}

pub fn tracer_allowed_actions(state: &TracerState) -> Vec<TracerAction> {
    state.allowed_actions()
}

/// Transition sequence that rebuilds `tree` under the baseline system.
pub fn tracer_gold_actions(
    tree: &LogicalTree,
) -> Result<(Vec<String>, Vec<TracerAction>), TreeError> {
    tree.validate()?;
    let mut segments = Vec::with_capacity(tree.segment_count());
    let mut actions = Vec::new();
    let mut stack = vec![tree.root()];
    for id in tree.preorder().into_iter().skip(1) {
        let node = tree.node(id);
        let parent = node.parent.expect("non-root node");
        while *stack.last().expect("parent is on the stack") != parent {
            stack.pop();
            actions.push(TracerAction::Reduce);
        }
        actions.push(match node.kind {
            NodeKind::Heading { .. } => TracerAction::SubHeading,
            NodeKind::Paragraph => TracerAction::SubText,
        });
        stack.push(id);
        actions.extend(core::iter::repeat_n(
            TracerAction::Concat,
            node.content.len() - 1,
        ));
        segments.extend(node.content.iter().cloned());
    }
    Ok((segments, actions))
}

/// Predicts one transition from a pairwise prompt.
pub trait TracerPredictor {
    fn predict(&mut self, prompt: &str, allowed: &[TracerAction])
        -> Result<String, PredictorError>;
}

impl<P: TracerPredictor + ?Sized> TracerPredictor for &mut P {
    fn predict(
        &mut self,
        prompt: &str,
        allowed: &[TracerAction],
    ) -> Result<String, PredictorError> {
        (**self).predict(prompt, allowed)
    }
}

/// Replays a gold transition sequence.
#[derive(Debug, Clone)]
pub struct TracerOracle {
    gold: Vec<TracerAction>,
    cursor: usize,
}

impl TracerOracle {
    pub fn new(gold: Vec<TracerAction>) -> Self {
        TracerOracle { gold, cursor: 0 }
    }
}

impl TracerPredictor for TracerOracle {
    fn predict(
        &mut self,
        _prompt: &str,
        _allowed: &[TracerAction],
    ) -> Result<String, PredictorError> {
        let action = self.gold.get(self.cursor).ok_or_else(|| {
            PredictorError::new(
                crate::predict::PredictorErrorKind::CursorExhausted,
                alloc::format!("gold sequence has {} transitions", self.gold.len()),
            )
        })?;
        self.cursor += 1;
        Ok(String::from(action.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracerConfig {
    /// Render the whole open-node stack (the global context variant) rather
    /// than only the stack top.
    pub global_context: bool,
    pub join_separator: String,
    /// Transition budget per segment before the run is declared livelocked.
    pub depth_bound: usize,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig {
            global_context: false,
            join_separator: String::from(" "),
            depth_bound: MAX_HEADING_LEVEL as usize + 2,
        }
    }
}

/// Transition counts of a baseline run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TracerReport {
    pub doc_id: String,
    pub transitions: usize,
    pub reduces: usize,
    pub sub_headings: usize,
    pub sub_texts: usize,
    pub concats: usize,
    /// Predictions outside the allowed set that were replaced.
    pub coerced: usize,
    pub wall_ms: u64,
}

impl TracerReport {
    pub fn consuming(&self) -> usize {
        self.sub_headings + self.sub_texts + self.concats
    }
}

/// Pairwise prompt for the current state.
pub fn render_tracer_prompt(state: &TracerState, config: &TracerConfig) -> String {
    let pending = state.pending.as_deref().unwrap_or("");
    let mut out = String::new();
    if config.global_context {
        out.push_str(STACK_HEADER);
        out.push('\n');
        for &id in &state.stack[1..] {
            let node = state.tree.node(id);
            out.push_str(&stack_symbol(node.kind));
            out.push(' ');
            out.push_str(&node.joined_text(&config.join_separator));
            out.push('\n');
        }
    } else {
        out.push_str("### TOP:\n");
        let top = state.tree.node(state.top());
        out.push_str(&top.joined_text(&config.join_separator));
        out.push('\n');
    }
    out.push('\n');
    out.push_str(SEGMENT_HEADER);
    out.push('\n');
    out.push_str(pending);
    out.push_str("\n\n");
    out.push_str(ACTION_HEADER);
    out.push('\n');
    out
}

/// Replacement for a prediction the constraints forbid: attach as a
/// paragraph at the root, pop when the top is a paragraph.
fn coerce(action: TracerAction, allowed: &[TracerAction]) -> TracerAction {
    if allowed.contains(&action) {
        action
    } else if allowed.contains(&TracerAction::SubText) && !allowed.contains(&TracerAction::Reduce) {
        TracerAction::SubText
    } else if allowed.contains(&TracerAction::Reduce) {
        TracerAction::Reduce
    } else {
        allowed[0]
    }
}

/// Runs the baseline over a document, querying the predictor until each
/// segment is consumed.
pub fn tracer_structure_document<P: TracerPredictor + ?Sized>(
    segments: &[TextSegment],
    predictor: &mut P,
    config: &TracerConfig,
) -> Result<(LogicalTree, TracerReport), TracerError> {
    let limit = config.depth_bound.max(2) * segments.len();
    let mut state = TracerState::new();
    let mut report = TracerReport {
        doc_id: segments
            .first()
            .map(|s| s.doc_id.clone())
            .unwrap_or_default(),
        ..Default::default()
    };
    for segment in segments {
        state.pending = Some(segment.text.clone());
        loop {
            if report.transitions >= limit {
                return Err(TracerError::Livelock {
                    limit,
                    segments: segments.len(),
                });
            }
            let transition = report.transitions;
            let allowed = state.allowed_actions();
            let prompt = render_tracer_prompt(&state, config);
            let text = predictor
                .predict(&prompt, &allowed)
                .map_err(|source| TracerError::Predictor { transition, source })?;
            let predicted: TracerAction =
                text.trim().parse().map_err(|_| TracerError::Malformed {
                    transition,
                    text: text.clone(),
                })?;
            let action = coerce(predicted, &allowed);
            if action != predicted {
                report.coerced += 1;
            }
            report.transitions += 1;
            match action {
                TracerAction::SubHeading => report.sub_headings += 1,
                TracerAction::SubText => report.sub_texts += 1,
                TracerAction::Reduce => report.reduces += 1,
                TracerAction::Concat => report.concats += 1,
            }
            if state.step(action)? {
                break;
            }
        }
    }
    Ok((state.tree, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TracerAction::*;

    fn with_pending(mut s: TracerState, text: &str) -> TracerState {
        s.pending = Some(text.into());
        s
    }

    fn h1_p_state() -> TracerState {
        let mut s = with_pending(TracerState::new(), "Title");
        s.step(SubHeading).unwrap();
        s.pending = Some("body".into());
        s.step(SubText).unwrap();
        s
    }

    #[test]
    fn first_heading() {
        let s = with_pending(TracerState::new(), "Title");
        let next = tracer_step(&s, SubHeading).unwrap();
        assert_eq!(next.stack.len(), 2);
        assert_eq!(
            next.tree.node(next.top()).kind,
            NodeKind::Heading { level: 1 }
        );
        assert!(next.pending.is_none());
    }

    #[test]
    fn reduce_twice_then_attach_at_root() {
        let s = with_pending(h1_p_state(), "Chapter 3 Basis and Scope");
        let s = tracer_step(&s, Reduce).unwrap();
        assert!(s.pending.is_some());
        let s = tracer_step(&s, Reduce).unwrap();
        let s = tracer_step(&s, SubHeading).unwrap();
        let root_children = s.tree.children(s.tree.root());
        assert_eq!(root_children.len(), 2);
        assert_eq!(
            s.tree.node(root_children[1]).kind,
            NodeKind::Heading { level: 1 }
        );
    }

    #[test]
    fn concat_extends_paragraph() {
        let s = with_pending(h1_p_state(), "continuation text");
        let s = tracer_step(&s, Concat).unwrap();
        assert_eq!(s.tree.node(s.top()).content, ["body", "continuation text"]);
    }

    #[test]
    fn allowed_sets() {
        let fresh = TracerState::new();
        assert_eq!(tracer_allowed_actions(&fresh), [SubHeading, SubText]);
        assert_eq!(tracer_allowed_actions(&h1_p_state()), [Reduce, Concat]);
        let mut mid = h1_p_state();
        mid.step(Reduce).unwrap();
        assert_eq!(tracer_allowed_actions(&mid), TracerAction::ALL);
        assert_eq!(
            tracer_step(&with_pending(h1_p_state(), "x"), SubText).unwrap_err(),
            TracerError::Illegal { action: SubText }
        );
    }

    #[test]
    fn parses_names() {
        for a in TracerAction::ALL {
            assert_eq!(a.as_str().parse::<TracerAction>(), Ok(a));
        }
        assert_eq!("sub-paragraph".parse::<TracerAction>(), Ok(SubText));
        assert!("shift".parse::<TracerAction>().is_err());
    }

    #[test]
    fn flat_document_needs_no_reduce() {
        let segs = TextSegment::from_lines("d", ["a.", "b.", "c."]);
        let mut flat = LogicalTree::new();
        flat.push_paragraph(flat.root(), vec!["a.".into(), "b.".into(), "c.".into()])
            .unwrap();
        let (_, gold) = tracer_gold_actions(&flat).unwrap();
        assert_eq!(gold, [SubText, Concat, Concat]);
        let (tree, report) = tracer_structure_document(
            &segs,
            &mut TracerOracle::new(gold),
            &TracerConfig::default(),
        )
        .unwrap();
        assert_eq!(tree, flat);
        assert_eq!(report.transitions, 3);
        assert_eq!(report.reduces, 0);
    }

    #[test]
    fn single_segment() {
        let segs = TextSegment::from_lines("d", ["only"]);
        let mut oracle = TracerOracle::new(vec![SubText]);
        let (_, report) =
            tracer_structure_document(&segs, &mut oracle, &TracerConfig::default()).unwrap();
        assert_eq!(report.transitions, 1);
    }

    #[test]
    fn gold_round_trip() {
        let mut t = LogicalTree::new();
        let h1 = t.push_heading(t.root(), 1, vec!["A".into()]).unwrap();
        let h2 = t
            .push_heading(h1, 2, vec!["A.1".into(), "cont".into()])
            .unwrap();
        t.push_paragraph(h2, vec!["p".into(), "q".into()]).unwrap();
        t.push_heading(h1, 2, vec!["A.2".into()]).unwrap();
        t.push_heading(t.root(), 1, vec!["B".into()]).unwrap();
        let (segs, gold) = tracer_gold_actions(&t).unwrap();
        let reduces = gold.iter().filter(|a| **a == Reduce).count();
        // p, A.1 popped before A.2; A.2, A popped before B
        assert_eq!(reduces, 4);
        let segs = TextSegment::from_lines("d", segs);
        let (tree, report) = tracer_structure_document(
            &segs,
            &mut TracerOracle::new(gold),
            &TracerConfig::default(),
        )
        .unwrap();
        assert_eq!(tree, t);
        assert_eq!(report.consuming(), segs.len());
        assert_eq!(report.transitions, segs.len() + reduces);
    }

    #[test]
    fn prompts() {
        let s = with_pending(h1_p_state(), "next");
        let plain = render_tracer_prompt(&s, &TracerConfig::default());
        assert_eq!(
            plain,
            "### TOP:\nbody\n\n### SEGMENT:\nnext\n\n### ACTION:\n"
        );
        let global = TracerConfig {
            global_context: true,
            ..Default::default()
        };
        assert_eq!(
            render_tracer_prompt(&s, &global),
            "### STACK:\n+ Title\n* body\n\n### SEGMENT:\nnext\n\n### ACTION:\n"
        );
    }

    struct Always(TracerAction);

    impl TracerPredictor for Always {
        fn predict(&mut self, _: &str, _: &[TracerAction]) -> Result<String, PredictorError> {
            Ok(self.0.as_str().into())
        }
    }

    #[test]
    fn illegal_predictions_are_coerced() {
        let segs = TextSegment::from_lines("d", ["a", "b", "c"]);
        let (tree, report) =
            tracer_structure_document(&segs, &mut Always(Concat), &TracerConfig::default())
                .unwrap();
        assert_eq!(report.coerced, 1);
        assert_eq!(tree.len(), 2);
        // always reducing pops back to the root, where only attaching is legal
        let (tree, report) =
            tracer_structure_document(&segs, &mut Always(Reduce), &TracerConfig::default())
                .unwrap();
        assert_eq!(tree.children(tree.root()).len(), 3);
        assert_eq!(report.reduces, 2);
    }
}
