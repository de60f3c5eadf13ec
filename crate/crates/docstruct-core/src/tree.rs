//! Arena-backed logical tree of heading and paragraph nodes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// One extracted line of a document.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TextSegment {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
}

impl TextSegment {
    pub fn new(doc_id: impl Into<String>, index: usize, text: impl Into<String>) -> Self {
        TextSegment {
            doc_id: doc_id.into(),
            index,
            text: text.into(),
        }
    }

    /// Builds the segments of a document from its lines, indexed from 0.
    pub fn from_lines<I, S>(doc_id: &str, lines: I) -> Vec<TextSegment>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        lines
            .into_iter()
            .enumerate()
            .map(|(index, text)| TextSegment::new(doc_id, index, text))
            .collect()
    }
}

/// Index of a node inside its [`LogicalTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Heading { level: u32 },
    Paragraph,
}

impl NodeKind {
    pub fn is_heading(self) -> bool {
        matches!(self, NodeKind::Heading { .. })
    }

    pub fn is_paragraph(self) -> bool {
        matches!(self, NodeKind::Paragraph)
    }

    pub fn heading_level(self) -> Option<u32> {
        match self {
            NodeKind::Heading { level } => Some(level),
            NodeKind::Paragraph => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    /// Segment texts in document order. Concatenation appends here.
    pub content: Vec<String>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

impl Node {
    /// Content entries joined with `separator`.
    pub fn joined_text(&self, separator: &str) -> String {
        self.content.join(separator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("root must be a level-0 heading with empty content")]
    InvalidRoot,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("heading {node} at level {level} has parent at level {parent_level:?}")]
    LevelGap {
        node: NodeId,
        level: u32,
        parent_level: Option<u32>,
    },
    #[error("heading level {0} is outside 1..=64")]
    LevelOutOfRange(u32),
    #[error("node {0} is attached under a paragraph")]
    ChildOfParagraph(NodeId),
    #[error("node {0} has empty content")]
    EmptyContent(NodeId),
    #[error("node {0} contains a line break")]
    LineBreakInContent(NodeId),
    #[error("parent/children links are inconsistent at node {0}")]
    InconsistentLinks(NodeId),
    #[error("insertion order is not a preorder traversal")]
    NotPreorder,
    /// No action sequence can place a paragraph after a sibling heading:
    /// it would attach under that heading instead.
    #[error("paragraph {0} follows a sibling heading")]
    ParagraphAfterHeading(NodeId),
}

/// Hierarchical document structure rooted at a contentless level-0 heading.
///
/// Nodes live in an arena and are never removed, so [`NodeId`]s stay valid
/// for the lifetime of the tree. Arena order is creation order.
#[derive(Debug, Clone)]
pub struct LogicalTree {
    nodes: Vec<Node>,
}

impl Default for LogicalTree {
    fn default() -> Self {
        Self::new()
    }
}

impl LogicalTree {
    /// A tree holding only the root.
    pub fn new() -> Self {
        LogicalTree {
            nodes: vec![Node {
                kind: NodeKind::Heading { level: 0 },
                content: Vec::new(),
                children: Vec::new(),
                parent: None,
            }],
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Number of nodes, root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the tree holds only the root.
    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn get(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.0)
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    /// Node ids in creation order.
    pub fn insertion_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Adds a heading under `parent`, which must be a heading one level up.
    pub fn push_heading(
        &mut self,
        parent: NodeId,
        level: u32,
        content: Vec<String>,
    ) -> Result<NodeId, TreeError> {
        if level == 0 || level > crate::MAX_HEADING_LEVEL {
            return Err(TreeError::LevelOutOfRange(level));
        }
        let parent_kind = self.get(parent).ok_or(TreeError::UnknownNode(parent))?.kind;
        let id = NodeId(self.nodes.len());
        if parent_kind.heading_level() != Some(level - 1) {
            return Err(TreeError::LevelGap {
                node: id,
                level,
                parent_level: parent_kind.heading_level(),
            });
        }
        self.push(parent, NodeKind::Heading { level }, content)
    }

    /// Adds a paragraph under the heading `parent`.
    pub fn push_paragraph(
        &mut self,
        parent: NodeId,
        content: Vec<String>,
    ) -> Result<NodeId, TreeError> {
        let parent_kind = self.get(parent).ok_or(TreeError::UnknownNode(parent))?.kind;
        if parent_kind.is_paragraph() {
            return Err(TreeError::ChildOfParagraph(NodeId(self.nodes.len())));
        }
        if self.has_heading_child(parent) {
            return Err(TreeError::ParagraphAfterHeading(NodeId(self.nodes.len())));
        }
        self.push(parent, NodeKind::Paragraph, content)
    }

    fn has_heading_child(&self, id: NodeId) -> bool {
        self.nodes[id.0]
            .children
            .iter()
            .any(|c| self.nodes[c.0].kind.is_heading())
    }

    fn push(
        &mut self,
        parent: NodeId,
        kind: NodeKind,
        content: Vec<String>,
    ) -> Result<NodeId, TreeError> {
        let id = NodeId(self.nodes.len());
        if content.is_empty() {
            return Err(TreeError::EmptyContent(id));
        }
        self.nodes.push(Node {
            kind,
            content,
            children: Vec::new(),
            parent: Some(parent),
        });
        self.nodes[parent.0].children.push(id);
        Ok(id)
    }

    /// Appends one more segment text to a non-root node.
    pub fn append_content(&mut self, id: NodeId, text: String) -> Result<(), TreeError> {
        if id == self.root() {
            return Err(TreeError::InvalidRoot);
        }
        let node = self.nodes.get_mut(id.0).ok_or(TreeError::UnknownNode(id))?;
        node.content.push(text);
        Ok(())
    }

    /// Depth of `id`; the root has depth 0.
    pub fn depth(&self, id: NodeId) -> usize {
        let mut depth = 0;
        let mut cur = self.nodes[id.0].parent;
        while let Some(p) = cur {
            depth += 1;
            cur = self.nodes[p.0].parent;
        }
        depth
    }

    /// Ids from the root down to `id`, both included.
    pub fn path_from_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = self.nodes[id.0].parent;
        while let Some(p) = cur {
            path.push(p);
            cur = self.nodes[p.0].parent;
        }
        path.reverse();
        path
    }

    /// Preorder traversal starting at the root.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut pending = vec![self.root()];
        while let Some(id) = pending.pop() {
            out.push(id);
            pending.extend(self.children(id).iter().rev());
        }
        out
    }

    /// Deepest node depth (0 for a root-only tree).
    pub fn max_depth(&self) -> usize {
        let mut depths = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for id in self.preorder() {
            if let Some(p) = self.nodes[id.0].parent {
                depths[id.0] = depths[p.0] + 1;
                max = max.max(depths[id.0]);
            }
        }
        max
    }

    /// Total number of content entries, i.e. the number of segments the
    /// tree was built from.
    pub fn segment_count(&self) -> usize {
        self.nodes.iter().map(|n| n.content.len()).sum()
    }

    /// Copy of this tree without paragraph nodes (table-of-contents view).
    pub fn prune_paragraphs(&self) -> LogicalTree {
        let mut out = LogicalTree::new();
        let mut pending = Vec::new();
        for &child in self.children(self.root()).iter().rev() {
            pending.push((child, out.root()));
        }
        while let Some((id, new_parent)) = pending.pop() {
            let node = self.node(id);
            if node.kind.is_paragraph() {
                continue;
            }
            let new_id = out
                .push(new_parent, node.kind, node.content.clone())
                .expect("pruning preserves heading structure");
            for &child in node.children.iter().rev() {
                pending.push((child, new_id));
            }
        }
        out
    }

    /// Checks every structural invariant of the tree.
    pub fn validate(&self) -> Result<(), TreeError> {
        let root = &self.nodes[0];
        if root.kind != (NodeKind::Heading { level: 0 })
            || !root.content.is_empty()
            || root.parent.is_some()
        {
            return Err(TreeError::InvalidRoot);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let id = NodeId(i);
            for &child in &node.children {
                let c = self.get(child).ok_or(TreeError::UnknownNode(child))?;
                if c.parent != Some(id) || child.0 <= i {
                    return Err(TreeError::InconsistentLinks(child));
                }
            }
            if i == 0 {
                continue;
            }
            let parent_id = node.parent.ok_or(TreeError::InconsistentLinks(id))?;
            let parent = self
                .get(parent_id)
                .ok_or(TreeError::UnknownNode(parent_id))?;
            if !parent.children.contains(&id) {
                return Err(TreeError::InconsistentLinks(id));
            }
            if node.content.is_empty() {
                return Err(TreeError::EmptyContent(id));
            }
            if node.content.iter().any(|t| t.contains(['\n', '\r'])) {
                return Err(TreeError::LineBreakInContent(id));
            }
            match node.kind {
                NodeKind::Heading { level } => {
                    if level == 0 || level > crate::MAX_HEADING_LEVEL {
                        return Err(TreeError::LevelOutOfRange(level));
                    }
                    if parent.kind.heading_level() != Some(level - 1) {
                        return Err(TreeError::LevelGap {
                            node: id,
                            level,
                            parent_level: parent.kind.heading_level(),
                        });
                    }
                }
                NodeKind::Paragraph => {
                    if !node.children.is_empty() {
                        return Err(TreeError::ChildOfParagraph(node.children[0]));
                    }
                    if parent.kind.is_paragraph() {
                        return Err(TreeError::ChildOfParagraph(id));
                    }
                    let before = parent.children.iter().take_while(|&&c| c != id);
                    if before.clone().any(|c| self.nodes[c.0].kind.is_heading()) {
                        return Err(TreeError::ParagraphAfterHeading(id));
                    }
                }
            }
        }
        let preorder = self.preorder();
        if preorder.len() != self.nodes.len()
            || preorder.iter().enumerate().any(|(i, id)| id.0 != i)
        {
            return Err(TreeError::NotPreorder);
        }
        Ok(())
    }

    fn subtree_eq(&self, a: NodeId, other: &LogicalTree, b: NodeId) -> bool {
        let (x, y) = (self.node(a), other.node(b));
        x.kind == y.kind
            && x.content == y.content
            && x.children.len() == y.children.len()
            && x.children
                .iter()
                .zip(&y.children)
                .all(|(&ca, &cb)| self.subtree_eq(ca, other, cb))
    }
}

/// Structural equality: kinds, levels, content lists and child order.
/// Arena layout is not compared.
impl PartialEq for LogicalTree {
    fn eq(&self, other: &Self) -> bool {
        self.subtree_eq(self.root(), other, other.root())
    }
}

impl Eq for LogicalTree {}

impl fmt::Display for LogicalTree {
    /// Indented outline, one node per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut pending: Vec<(NodeId, usize)> = self
            .children(self.root())
            .iter()
            .rev()
            .map(|&c| (c, 0))
            .collect();
        while let Some((id, indent)) = pending.pop() {
            let node = self.node(id);
            for _ in 0..indent {
                f.write_str("  ")?;
            }
            match node.kind {
                NodeKind::Heading { level } => {
                    for _ in 0..level {
                        f.write_str("+")?;
                    }
                }
                NodeKind::Paragraph => f.write_str("*")?,
            }
            writeln!(f, " {}", node.content.join(" "))?;
            pending.extend(node.children.iter().rev().map(|&c| (c, indent + 1)));
        }
        Ok(())
    }
}
