//! Seeded generator of annotated document trees.
//!
//! Headings carry conventional numbering ("Chapter 2", "2.3", "2.3.1",
//! "2.3.1.4", "(5)") so that numbering-based predictors have something to
//! find; paragraph lines start with a word and only the last line of a
//! paragraph ends a sentence.

use docstruct_core::{LogicalTree, NodeId, MAX_HEADING_LEVEL};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::format::TreeDoc;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    /// Deepest tree depth; 1 means paragraphs directly under the root.
    pub max_depth: u32,
    /// Most heading children under one heading.
    pub max_children: usize,
    pub max_paragraph_lines: usize,
    /// Upper bound on segments per document.
    pub max_segments: usize,
    /// Chance that a heading spans two lines.
    pub heading_continuation: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            max_depth: 5,
            max_children: 3,
            max_paragraph_lines: 4,
            max_segments: 60,
            heading_continuation: 0.05,
        }
    }
}

const WORDS: &[&str] = &[
    "account",
    "analysis",
    "annual",
    "asset",
    "balance",
    "bond",
    "capital",
    "cash",
    "committee",
    "credit",
    "debt",
    "disclosure",
    "equity",
    "fund",
    "growth",
    "income",
    "interest",
    "issuer",
    "liability",
    "market",
    "operating",
    "payment",
    "policy",
    "rating",
    "reserve",
    "revenue",
    "risk",
    "security",
    "statement",
    "tax",
    "term",
    "value",
    "water",
    "forestry",
    "project",
    "public",
    "region",
    "service",
    "support",
    "the",
    "of",
    "and",
    "for",
    "with",
    "under",
    "from",
];

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    params: &'a SyntheticParams,
    tree: LogicalTree,
    budget: usize,
}

impl Builder<'_> {
    fn words(&mut self, lo: usize, hi: usize) -> Vec<&'static str> {
        let n = self.rng.random_range(lo..=hi);
        (0..n).map(|_| *WORDS.choose(self.rng).unwrap()).collect()
    }

    fn title(&mut self) -> String {
        self.words(1, 4)
            .iter()
            .map(|w| {
                let mut c = w.chars();
                let first = c.next().unwrap().to_ascii_uppercase();
                std::iter::once(first).chain(c).collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn paragraph_lines(&mut self) -> Vec<String> {
        let n = self
            .rng
            .random_range(1..=self.params.max_paragraph_lines.max(1))
            .min(self.budget);
        (0..n)
            .map(|i| {
                let mut line = self.words(3, 9).join(" ");
                if i == 0 {
                    line[..1].make_ascii_uppercase();
                }
                if i + 1 == n {
                    line.push('.');
                }
                line
            })
            .collect()
    }

    fn heading_lines(&mut self, numbering: &[usize]) -> Vec<String> {
        let level = numbering.len();
        let label = match level {
            1 => format!("Chapter {}", numbering[0]),
            2..=4 => numbering
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("."),
            _ => format!("({})", numbering[level - 1]),
        };
        let mut lines = vec![format!("{label} {}", self.title())];
        if self.budget > 1 && self.rng.random_bool(self.params.heading_continuation) {
            lines.push(self.words(2, 4).join(" "));
        }
        lines
    }

    /// Fills the children of `parent`: paragraphs first, then subsections.
    fn section(&mut self, parent: NodeId, numbering: &mut Vec<usize>) {
        let level = numbering.len() as u32;
        let can_nest = level + 1 < self.params.max_depth.min(MAX_HEADING_LEVEL + 1);
        let paragraphs = match (level, can_nest) {
            (_, false) => self.rng.random_range(1..=3),
            (0, true) => self.rng.random_range(0..=1),
            _ => self.rng.random_range(0..=2),
        };
        for _ in 0..paragraphs {
            if self.budget == 0 {
                return;
            }
            let lines = self.paragraph_lines();
            self.budget -= lines.len();
            self.tree
                .push_paragraph(parent, lines)
                .expect("paragraphs precede subsections");
        }
        if !can_nest {
            return;
        }
        let hi = self.params.max_children.max(1);
        let lo = usize::from(level == 0);
        let children = self.rng.random_range(lo..=hi);
        for i in 1..=children {
            if self.budget == 0 {
                return;
            }
            numbering.push(i);
            let lines = self.heading_lines(numbering);
            self.budget -= lines.len();
            let id = self
                .tree
                .push_heading(parent, level + 1, lines)
                .expect("levels follow depth");
            self.section(id, numbering);
            numbering.pop();
        }
    }
}

/// One tree drawn from `rng`.
pub fn generate_tree(rng: &mut ChaCha8Rng, params: &SyntheticParams) -> LogicalTree {
    let mut b = Builder {
        rng,
        params,
        tree: LogicalTree::new(),
        budget: params.max_segments.max(1),
    };
    let root = b.tree.root();
    b.section(root, &mut Vec::new());
    b.tree
}

/// `count` documents. Document `i` depends only on `(seed, i)`.
pub fn generate_synthetic_corpus(
    count: usize,
    seed: u64,
    params: &SyntheticParams,
) -> Vec<TreeDoc> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            TreeDoc {
                doc_id: format!("syn-{i:06}"),
                tree: generate_tree(&mut rng, params),
            }
        })
        .collect()
}
