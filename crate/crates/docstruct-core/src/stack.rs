//! The global context stack: the path from the root to the last added node.

use alloc::vec;
use alloc::vec::Vec;

use crate::action::Action;
use crate::tree::{LogicalTree, NodeId, NodeKind};

/// A stack entry remembers the node kind so the stack can be updated and
/// inspected without the tree at hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StackEntry {
    pub node: NodeId,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidTransition {
    #[error("no level-{parent_level} heading on the stack for a level-{level} heading")]
    MissingParent { level: u32, parent_level: u32 },
    #[error("concatenation needs a node other than the root on the stack")]
    ConcatenationAtRoot,
    #[error("heading level 0 is reserved for the root")]
    LevelZero,
    #[error("a new node id is required for {0}")]
    MissingNode(Action),
    #[error("concatenation does not create a node")]
    UnexpectedNode,
    #[error("segment index {0} is out of range")]
    SegmentOutOfRange(usize),
}

/// Bottom-to-top sequence of nodes. The bottom is always the root; headings
/// have levels 0, 1, .., m without gaps; a paragraph may only sit on top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextStack {
    entries: Vec<StackEntry>,
}

impl ContextStack {
    /// The initial stack of `tree`, holding only its root.
    pub fn new(tree: &LogicalTree) -> Self {
        ContextStack {
            entries: vec![StackEntry {
                node: tree.root(),
                kind: NodeKind::Heading { level: 0 },
            }],
        }
    }

    pub fn entries(&self) -> &[StackEntry] {
        &self.entries
    }

    pub fn top(&self) -> StackEntry {
        *self.entries.last().expect("stack always holds the root")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false: the root cannot be popped.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_root_only(&self) -> bool {
        self.entries.len() == 1
    }

    /// Level of the highest heading on the stack (0 when only the root).
    pub fn max_heading_level(&self) -> u32 {
        self.entries
            .iter()
            .rev()
            .find_map(|e| e.kind.heading_level())
            .unwrap_or(0)
    }

    /// Checks whether `action` could be executed on this stack.
    pub fn check(&self, action: Action) -> Result<(), InvalidTransition> {
        match action {
            Action::NewHeading(0) => Err(InvalidTransition::LevelZero),
            Action::NewHeading(level) => {
                if level - 1 > self.max_heading_level() {
                    Err(InvalidTransition::MissingParent {
                        level,
                        parent_level: level - 1,
                    })
                } else {
                    Ok(())
                }
            }
            Action::NewParagraph => Ok(()),
            Action::Concatenation if self.is_root_only() => {
                Err(InvalidTransition::ConcatenationAtRoot)
            }
            Action::Concatenation => Ok(()),
        }
    }

    /// Node that will parent the node created by `action`.
    pub fn parent_for(&self, action: Action) -> Result<NodeId, InvalidTransition> {
        self.check(action)?;
        match action {
            // heading at level j sits at index j
            Action::NewHeading(level) => Ok(self.entries[level as usize - 1].node),
            Action::NewParagraph => Ok(self.top_heading().node),
            Action::Concatenation => Err(InvalidTransition::UnexpectedNode),
        }
    }

    fn top_heading(&self) -> StackEntry {
        *self
            .entries
            .iter()
            .rev()
            .find(|e| e.kind.is_heading())
            .expect("root is a heading")
    }

    /// Applies the stack half of `action`. `new_node` is the node created
    /// for a heading or paragraph action and must be `None` for
    /// concatenation.
    pub fn apply(
        &mut self,
        action: Action,
        new_node: Option<NodeId>,
    ) -> Result<(), InvalidTransition> {
        self.check(action)?;
        match (action, new_node) {
            (Action::Concatenation, None) => Ok(()),
            (Action::Concatenation, Some(_)) => Err(InvalidTransition::UnexpectedNode),
            (_, None) => Err(InvalidTransition::MissingNode(action)),
            (Action::NewHeading(level), Some(node)) => {
                self.entries.truncate(level as usize);
                self.entries.push(StackEntry {
                    node,
                    kind: NodeKind::Heading { level },
                });
                Ok(())
            }
            (Action::NewParagraph, Some(node)) => {
                if self.top().kind.is_paragraph() {
                    self.entries.pop();
                }
                self.entries.push(StackEntry {
                    node,
                    kind: NodeKind::Paragraph,
                });
                Ok(())
            }
        }
    }

    /// True when the stack is exactly the root-to-top path of `tree` and
    /// its heading levels are gap-free.
    pub fn is_consistent_with(&self, tree: &LogicalTree) -> bool {
        let top = self.top().node;
        if tree.get(top).is_none() {
            return false;
        }
        let path = tree.path_from_root(top);
        path.len() == self.entries.len()
            && path
                .iter()
                .zip(&self.entries)
                .enumerate()
                .all(|(i, (&id, e))| {
                    let kind_ok = tree.node(id).kind == e.kind;
                    let level_ok = match e.kind {
                        NodeKind::Heading { level } => level as usize == i,
                        NodeKind::Paragraph => i + 1 == self.entries.len(),
                    };
                    id == e.node && kind_ok && level_ok
                })
    }
}

/// Value-style wrapper over [`ContextStack::apply`].
pub fn update_stack(
    stack: &ContextStack,
    action: Action,
    new_node: Option<NodeId>,
) -> Result<ContextStack, InvalidTransition> {
    let mut next = stack.clone();
    next.apply(action, new_node)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels(stack: &ContextStack) -> Vec<Option<u32>> {
        stack
            .entries()
            .iter()
            .map(|e| e.kind.heading_level())
            .collect()
    }

    fn fake(n: usize) -> Option<NodeId> {
        Some(NodeId(n))
    }

    #[test]
    fn heading_on_root() {
        let tree = LogicalTree::new();
        let s = ContextStack::new(&tree);
        let s = update_stack(&s, Action::NewHeading(1), fake(1)).unwrap();
        assert_eq!(levels(&s), [Some(0), Some(1)]);
    }

    #[test]
    fn heading_pops_paragraph_and_sibling() {
        let tree = LogicalTree::new();
        let mut s = ContextStack::new(&tree);
        s.apply(Action::NewHeading(1), fake(1)).unwrap();
        s.apply(Action::NewHeading(2), fake(2)).unwrap();
        s.apply(Action::NewHeading(3), fake(3)).unwrap();
        s.apply(Action::NewParagraph, fake(4)).unwrap();
        let s = update_stack(&s, Action::NewHeading(3), fake(5)).unwrap();
        assert_eq!(levels(&s), [Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(s.top().node, NodeId(5));
        assert_eq!(s.entries()[2].node, NodeId(2));
    }

    #[test]
    fn paragraph_replaces_paragraph() {
        let tree = LogicalTree::new();
        let mut s = ContextStack::new(&tree);
        s.apply(Action::NewHeading(1), fake(1)).unwrap();
        s.apply(Action::NewParagraph, fake(2)).unwrap();
        let s = update_stack(&s, Action::NewParagraph, fake(3)).unwrap();
        assert_eq!(levels(&s), [Some(0), Some(1), None]);
        assert_eq!(s.top().node, NodeId(3));
    }

    #[test]
    fn invalid_transitions() {
        let tree = LogicalTree::new();
        let s = ContextStack::new(&tree);
        assert_eq!(
            update_stack(&s, Action::Concatenation, None),
            Err(InvalidTransition::ConcatenationAtRoot)
        );
        assert!(matches!(
            update_stack(&s, Action::NewHeading(2), fake(1)),
            Err(InvalidTransition::MissingParent { .. })
        ));
        assert_eq!(
            update_stack(&s, Action::NewParagraph, None),
            Err(InvalidTransition::MissingNode(Action::NewParagraph))
        );
    }

    #[test]
    fn concatenation_leaves_stack_alone() {
        let tree = LogicalTree::new();
        let mut s = ContextStack::new(&tree);
        s.apply(Action::NewParagraph, fake(1)).unwrap();
        let before = s.clone();
        s.apply(Action::Concatenation, None).unwrap();
        assert_eq!(s, before);
    }
}
