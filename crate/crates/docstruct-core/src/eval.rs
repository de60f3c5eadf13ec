//! Node-level F1, heading detection F1, tree-edit-distance similarity and
//! document accuracy.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::tree::{LogicalTree, NodeId, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MatchMode {
    /// Kind, depth, text and the texts of all ancestor headings.
    #[default]
    Strict,
    /// Kind, depth and text.
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Heading,
    Paragraph,
    Total,
}

/// Matching identity of a node within its tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeKey {
    pub is_heading: bool,
    pub depth: usize,
    pub text: String,
    /// Joined texts of ancestor headings, outermost first (root excluded).
    /// Empty in loose mode.
    pub ancestor_path: Vec<String>,
}

/// Keys of all non-root nodes of `tree`.
pub fn node_keys(tree: &LogicalTree, mode: MatchMode, separator: &str) -> Vec<NodeKey> {
    let mut keys = Vec::with_capacity(tree.len().saturating_sub(1));
    let mut pending: Vec<(NodeId, usize, Vec<String>)> = tree
        .children(tree.root())
        .iter()
        .rev()
        .map(|&c| (c, 1, Vec::new()))
        .collect();
    while let Some((id, depth, path)) = pending.pop() {
        let node = tree.node(id);
        let text = node.joined_text(separator);
        if !node.children.is_empty() {
            let mut child_path = path.clone();
            if mode == MatchMode::Strict {
                child_path.push(text.clone());
            }
            for &c in node.children.iter().rev() {
                pending.push((c, depth + 1, child_path.clone()));
            }
        }
        keys.push(NodeKey {
            is_heading: node.kind.is_heading(),
            depth,
            text,
            ancestor_path: path,
        });
    }
    keys
}

/// Matched / predicted / gold counts for one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl core::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            matched: self.matched + o.matched,
            predicted: self.predicted + o.predicted,
            gold: self.gold + o.gold,
        }
    }
}

impl core::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Counts {
    /// Both sides empty scores 1.0; one side empty scores 0.0.
    pub fn scores(self) -> Scores {
        if self.predicted == 0 && self.gold == 0 {
            return Scores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.matched, self.predicted);
        let recall = ratio(self.matched, self.gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores {
            precision,
            recall,
            f1,
        }
    }
}

fn multiset<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

fn intersect<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> usize {
    a.iter()
        .map(|(k, &n)| b.get(k).map_or(0, |&m| n.min(m)))
        .sum()
}

fn counts_where(pred: &[NodeKey], gold: &[NodeKey], keep: impl Fn(&NodeKey) -> bool) -> Counts {
    let p = multiset(pred.iter().filter(|k| keep(k)));
    let g = multiset(gold.iter().filter(|k| keep(k)));
    Counts {
        matched: intersect(&p, &g),
        predicted: p.values().sum(),
        gold: g.values().sum(),
    }
}

/// Heading and paragraph counts of one tree pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeCounts {
    pub heading: Counts,
    pub paragraph: Counts,
}

impl NodeCounts {
    pub fn total(&self) -> Counts {
        self.heading + self.paragraph
    }

    pub fn get(&self, category: Category) -> Counts {
        match category {
            Category::Heading => self.heading,
            Category::Paragraph => self.paragraph,
            Category::Total => self.total(),
        }
    }
}

pub fn node_counts(
    pred: &LogicalTree,
    gold: &LogicalTree,
    mode: MatchMode,
    separator: &str,
) -> NodeCounts {
    let pk = node_keys(pred, mode, separator);
    let gk = node_keys(gold, mode, separator);
    NodeCounts {
        heading: counts_where(&pk, &gk, |k| k.is_heading),
        paragraph: counts_where(&pk, &gk, |k| !k.is_heading),
    }
}

/// Multiset precision/recall/F1 of node keys in `category`.
pub fn node_f1(
    pred: &LogicalTree,
    gold: &LogicalTree,
    category: Category,
    mode: MatchMode,
    separator: &str,
) -> Scores {
    node_counts(pred, gold, mode, separator)
        .get(category)
        .scores()
}

fn heading_texts(tree: &LogicalTree, separator: &str) -> BTreeMap<String, usize> {
    multiset(
        tree.insertion_order()
            .skip(1)
            .map(|id| tree.node(id))
            .filter(|n| n.kind.is_heading())
            .map(|n| n.joined_text(separator)),
    )
}

pub fn heading_detection_counts(pred: &LogicalTree, gold: &LogicalTree, separator: &str) -> Counts {
    let p = heading_texts(pred, separator);
    let g = heading_texts(gold, separator);
    Counts {
        matched: intersect(&p, &g),
        predicted: p.values().sum(),
        gold: g.values().sum(),
    }
}

/// Flat heading detection: heading texts only, depth and position ignored.
pub fn heading_detection_f1(pred: &LogicalTree, gold: &LogicalTree, separator: &str) -> Scores {
    heading_detection_counts(pred, gold, separator).scores()
}

/// Postorder arrays used by the Zhang-Shasha recursion.
struct Postorder {
    labels: Vec<(bool, String)>,
    /// Leftmost leaf descendant of each node, in postorder numbering.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl Postorder {
    fn new(tree: &LogicalTree, separator: &str) -> Self {
        let n = tree.len();
        let mut labels = Vec::with_capacity(n);
        let mut leftmost = Vec::with_capacity(n);
        // (node, next child index, postorder index of its first leaf)
        let mut stack: Vec<(NodeId, usize, Option<usize>)> = vec![(tree.root(), 0, None)];
        while let Some(frame) = stack.last_mut() {
            let (id, next, _) = *frame;
            let children = tree.children(id);
            if next < children.len() {
                frame.1 += 1;
                stack.push((children[next], 0, None));
                continue;
            }
            let (_, _, first_leaf) = stack.pop().expect("frame exists");
            let index = labels.len();
            let node = tree.node(id);
            labels.push((node.kind.is_heading(), node.joined_text(separator)));
            let lml = first_leaf.unwrap_or(index);
            leftmost.push(lml);
            if let Some(parent) = stack.last_mut() {
                if parent.2.is_none() {
                    parent.2 = Some(lml);
                }
            }
        }
        let mut seen = BTreeMap::new();
        for (i, &l) in leftmost.iter().enumerate() {
            seen.insert(l, i);
        }
        let mut keyroots: Vec<usize> = seen.into_values().collect();
        keyroots.sort_unstable();
        Postorder {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Ordered tree edit distance with unit insert/delete cost and unit relabel
/// cost when the (kind, joined text) labels differ. Roots count as nodes.
pub fn tree_edit_distance(a: &LogicalTree, b: &LogicalTree, separator: &str) -> usize {
    let a = Postorder::new(a, separator);
    let b = Postorder::new(b, separator);
    let (n, m) = (a.labels.len(), b.labels.len());
    let mut td = vec![0usize; n * m];
    let mut fd = vec![0usize; (n + 1) * (m + 1)];
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let (li, lj) = (a.leftmost[i], b.leftmost[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let at = |r: usize, c: usize| r * cols + c;
            fd[at(0, 0)] = 0;
            for r in 1..rows {
                fd[at(r, 0)] = fd[at(r - 1, 0)] + 1;
            }
            for c in 1..cols {
                fd[at(0, c)] = fd[at(0, c - 1)] + 1;
            }
            for r in 1..rows {
                let x = li + r - 1;
                for c in 1..cols {
                    let y = lj + c - 1;
                    let del = fd[at(r - 1, c)] + 1;
                    let ins = fd[at(r, c - 1)] + 1;
                    if a.leftmost[x] == li && b.leftmost[y] == lj {
                        let relabel = usize::from(a.labels[x] != b.labels[y]);
                        let v = del.min(ins).min(fd[at(r - 1, c - 1)] + relabel);
                        fd[at(r, c)] = v;
                        td[x * m + y] = v;
                    } else {
                        let p = a.leftmost[x] - li;
                        let q = b.leftmost[y] - lj;
                        fd[at(r, c)] = del.min(ins).min(fd[at(p, q)] + td[x * m + y]);
                    }
                }
            }
        }
    }
    td[n * m - 1]
}

/// Tree-edit-distance similarity `1 - TED / max(|pred|, |gold|)`, node
/// counts including the root. With `toc_only` paragraphs are pruned from
/// both trees first.
pub fn teds(pred: &LogicalTree, gold: &LogicalTree, toc_only: bool, separator: &str) -> f64 {
    let (pred, gold) = if toc_only {
        (pred.prune_paragraphs(), gold.prune_paragraphs())
    } else {
        (pred.clone(), gold.clone())
    };
    let distance = tree_edit_distance(&pred, &gold, separator);
    1.0 - distance as f64 / pred.len().max(gold.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
}

/// Fraction of pairs whose trees are structurally identical (kinds,
/// levels, content lists, child order).
pub fn doc_acc(pairs: &[(&LogicalTree, &LogicalTree)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let exact = pairs.iter().filter(|(p, g)| p == g).count();
    Ok(exact as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalOptions {
    /// Prune paragraphs from both trees before every metric.
    pub toc_only: bool,
    pub match_mode: MatchMode,
    pub join_separator: String,
}

impl EvalOptions {
    pub fn new() -> Self {
        EvalOptions {
            join_separator: String::from(" "),
            ..Default::default()
        }
    }
}

/// Metrics of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEval {
    pub doc_id: String,
    pub nodes: NodeCounts,
    pub heading_detection: Counts,
    pub teds: f64,
    pub exact: bool,
}

pub fn evaluate_document(
    doc_id: &str,
    pred: &LogicalTree,
    gold: &LogicalTree,
    options: &EvalOptions,
) -> DocEval {
    let pruned;
    let (pred, gold) = if options.toc_only {
        pruned = (pred.prune_paragraphs(), gold.prune_paragraphs());
        (&pruned.0, &pruned.1)
    } else {
        (pred, gold)
    };
    let sep = options.join_separator.as_str();
    DocEval {
        doc_id: doc_id.into(),
        nodes: node_counts(pred, gold, options.match_mode, sep),
        heading_detection: heading_detection_counts(pred, gold, sep),
        teds: teds(pred, gold, false, sep),
        exact: pred == gold,
    }
}

/// Corpus-level scores. F1 values are micro-averaged over node counts;
/// TEDS is the mean of per-document values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub heading: Scores,
    /// Absent in table-of-contents mode.
    pub paragraph: Option<Scores>,
    pub total: Scores,
    pub heading_detection: Scores,
    pub teds_mean: f64,
    pub doc_acc: f64,
    pub documents: usize,
    pub per_document: Vec<DocEval>,
    pub toc_only: bool,
    pub match_mode: MatchMode,
}

/// Folds per-document results into a report. Independent of document
/// order.
pub fn aggregate(
    per_document: Vec<DocEval>,
    options: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    if per_document.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut nodes = NodeCounts::default();
    let mut hd = Counts::default();
    let mut exact = 0usize;
    for d in &per_document {
        nodes.heading += d.nodes.heading;
        nodes.paragraph += d.nodes.paragraph;
        hd += d.heading_detection;
        exact += usize::from(d.exact);
    }
    let mut teds_values: Vec<f64> = per_document.iter().map(|d| d.teds).collect();
    teds_values.sort_by(f64::total_cmp);
    let n = per_document.len();
    Ok(EvalReport {
        heading: nodes.heading.scores(),
        paragraph: (!options.toc_only).then(|| nodes.paragraph.scores()),
        total: nodes.total().scores(),
        heading_detection: hd.scores(),
        teds_mean: teds_values.iter().sum::<f64>() / n as f64,
        doc_acc: exact as f64 / n as f64,
        documents: n,
        per_document,
        toc_only: options.toc_only,
        match_mode: options.match_mode,
    })
}

/// Evaluates `(doc_id, pred, gold)` triples.
pub fn evaluate_corpus<'a, I>(pairs: I, options: &EvalOptions) -> Result<EvalReport, EvalError>
where
    I: IntoIterator<Item = (&'a str, &'a LogicalTree, &'a LogicalTree)>,
{
    let docs = pairs
        .into_iter()
        .map(|(id, p, g)| evaluate_document(id, p, g, options))
        .collect();
    aggregate(docs, options)
}

/// Kind of a node for display in reports.
pub fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Heading { .. } => "heading",
        NodeKind::Paragraph => "paragraph",
    }
}
