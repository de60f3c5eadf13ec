//! Gold action sequences and training examples from annotated trees.

use alloc::string::String;
use alloc::vec::Vec;

use crate::action::Action;
use crate::config::StructuringConfig;
use crate::engine::EngineState;
use crate::prompt::{format_action_block, render_prompt};
use crate::tree::{LogicalTree, NodeKind, TreeError};

/// Linearizes a tree into its segments and the one-action-per-segment
/// sequence that rebuilds it.
///
/// Nodes are visited in preorder. A node's first content entry gets a
/// heading action at the node's depth (or a paragraph action); every
/// further entry gets a concatenation.
pub fn tree_to_actions(tree: &LogicalTree) -> Result<(Vec<String>, Vec<Action>), TreeError> {
    tree.validate()?;
    let n = tree.segment_count();
    let mut segments = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for id in tree.preorder().into_iter().skip(1) {
        let node = tree.node(id);
        segments.extend(node.content.iter().cloned());
        actions.push(match node.kind {
            NodeKind::Heading { .. } => Action::NewHeading(tree.depth(id) as u32),
            NodeKind::Paragraph => Action::NewParagraph,
        });
        actions.extend(core::iter::repeat_n(
            Action::Concatenation,
            node.content.len() - 1,
        ));
    }
    Ok((segments, actions))
}

/// One prompt/target pair at a step boundary of a gold replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub doc_id: String,
    pub step_index: usize,
    pub prompt: String,
    /// Gold action lines for the window, each terminated by a line break.
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatagenError {
    #[error("invalid tree: {0}")]
    InvalidTree(#[from] TreeError),
    #[error("training windows need w_I = w_O (got {input}/{output})")]
    WindowMismatch { input: usize, output: usize },
}

/// Replays the gold actions of `tree` and captures one example per step of
/// `w_I` segments. The last window holds whatever remains.
pub fn emit_training_examples(
    doc_id: &str,
    tree: &LogicalTree,
    config: &StructuringConfig,
) -> Result<Vec<TrainingExample>, DatagenError> {
    if config.input_window != config.output_window || config.input_window == 0 {
        return Err(DatagenError::WindowMismatch {
            input: config.input_window,
            output: config.output_window,
        });
    }
    let (segments, actions) = tree_to_actions(tree)?;
    let window = config.input_window;
    let mut state = EngineState::new();
    let mut examples = Vec::with_capacity(config.step_count(segments.len()));
    for (step_index, (segs, acts)) in segments
        .chunks(window)
        .zip(actions.chunks(window))
        .enumerate()
    {
        examples.push(TrainingExample {
            doc_id: doc_id.into(),
            step_index,
            prompt: render_prompt(&state.stack, &state.tree, segs, config),
            target: format_action_block(acts),
        });
        for (action, text) in acts.iter().zip(segs) {
            state
                .apply(*action, text)
                .expect("gold actions of a valid tree are executable");
        }
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::parse_action_block;
    use alloc::string::ToString;
    use alloc::vec;

    fn sample() -> LogicalTree {
        let mut t = LogicalTree::new();
        let h = t.push_heading(t.root(), 1, vec!["Title".into()]).unwrap();
        t.push_paragraph(h, vec!["Para line 1".into(), "line 2".into()])
            .unwrap();
        t
    }

    #[test]
    fn linearizes_in_preorder() {
        let (segs, acts) = tree_to_actions(&sample()).unwrap();
        assert_eq!(segs, ["Title", "Para line 1", "line 2"]);
        assert_eq!(
            acts,
            [
                Action::NewHeading(1),
                Action::NewParagraph,
                Action::Concatenation
            ]
        );
    }

    #[test]
    fn single_paragraph() {
        let mut t = LogicalTree::new();
        t.push_paragraph(t.root(), vec!["only text".into()])
            .unwrap();
        let (segs, acts) = tree_to_actions(&t).unwrap();
        assert_eq!(segs, ["only text"]);
        assert_eq!(acts, [Action::NewParagraph]);
    }

    fn seven_segment_tree() -> LogicalTree {
        let mut t = LogicalTree::new();
        let h1 = t.push_heading(t.root(), 1, vec!["1".into()]).unwrap();
        t.push_paragraph(h1, vec!["2".into(), "3".into()]).unwrap();
        let h2 = t.push_heading(h1, 2, vec!["4".into()]).unwrap();
        t.push_paragraph(h2, vec!["5".into()]).unwrap();
        t.push_heading(t.root(), 1, vec!["6".into()]).unwrap();
        t
    }

    #[test]
    fn example_counts() {
        let mut t = seven_segment_tree();
        let config = StructuringConfig::one_pass(3).unwrap();
        // 6 segments
        assert_eq!(t.segment_count(), 6);
        assert_eq!(emit_training_examples("d", &t, &config).unwrap().len(), 2);
        // 7 segments: last window carries 1 action
        let last = t.insertion_order().last().unwrap();
        t.push_paragraph(last, vec!["7".into()]).unwrap();
        let ex = emit_training_examples("d", &t, &config).unwrap();
        assert_eq!(ex.len(), 3);
        assert_eq!(parse_action_block(&ex[2].target, 1).unwrap().len(), 1);
        assert_eq!(ex[2].step_index, 2);
    }

    #[test]
    fn targets_concatenate_to_gold() {
        let t = seven_segment_tree();
        let (_, gold) = tree_to_actions(&t).unwrap();
        for w in 1..=4 {
            let config = StructuringConfig::one_pass(w).unwrap();
            let joined: String = emit_training_examples("d", &t, &config)
                .unwrap()
                .iter()
                .map(|e| e.target.clone())
                .collect();
            assert_eq!(joined, format_action_block(&gold));
        }
    }

    #[test]
    fn rejects_unequal_windows() {
        let config = StructuringConfig::new(3, 1).unwrap();
        assert!(matches!(
            emit_training_examples("d", &sample(), &config),
            Err(DatagenError::WindowMismatch { .. })
        ));
    }

    #[test]
    fn first_prompt_has_empty_stack() {
        let config = StructuringConfig::one_pass(2).unwrap();
        let ex = emit_training_examples("d", &sample(), &config).unwrap();
        assert_eq!(
            ex[0].prompt,
            "### STACK:\n\n### SEGMENT:\nTitle\nPara line 1\n\n### ACTION:\n".to_string()
        );
        assert_eq!(ex[0].target, "+\n*\n");
        assert!(ex[1]
            .prompt
            .starts_with("### STACK:\n+ Title\n* Para line 1\n\n"));
    }
}
