//! Corpus file formats.
//!
//! Every corpus file is UTF-8, line-delimited JSON with one document per
//! line:
//!
//! - segments: `{"doc_id": .., "segments": ["line", ..]}`
//! - actions:  `{"doc_id": .., "actions": ["+", "*", "=", ..]}`
//! - trees:    `{"doc_id": .., "tree": <tree>}`
//! - training: `{"doc_id": .., "step": 0, "prompt": .., "target": ..}`
//!
//! A tree is a nested object
//! `{"kind": "heading"|"paragraph", "level": 1, "content": [..], "children": [..]}`
//! where `level` appears on headings only and the outermost object is the
//! root (`"level": 0`, `"content": []`).
//!
//! Readers reject malformed lines, duplicate doc ids and trees that break a
//! structural invariant, reporting the 1-based line number.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use docstruct_core::tracer::TracerAction;
use docstruct_core::{
    Action, LogicalTree, NodeId, NodeKind, TextSegment, TokenizerProfile, TrainingExample,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {cause}")]
    Line { line: usize, cause: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Write(#[from] io::Error),
}

impl FormatError {
    fn at(line: usize, cause: impl ToString) -> Self {
        FormatError::Line {
            line,
            cause: cause.to_string(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Line { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Nested tree object as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default)]
    pub content: Vec<String>,
    #[serde(default)]
    pub children: Vec<TreeJson>,
}

impl TreeJson {
    pub fn from_tree(tree: &LogicalTree) -> Self {
        fn convert(tree: &LogicalTree, id: NodeId) -> TreeJson {
            let node = tree.node(id);
            let (kind, level) = match node.kind {
                NodeKind::Heading { level } => ("heading", Some(level)),
                NodeKind::Paragraph => ("paragraph", None),
            };
            TreeJson {
                kind: kind.into(),
                level,
                content: node.content.clone(),
                children: node.children.iter().map(|&c| convert(tree, c)).collect(),
            }
        }
        convert(tree, tree.root())
    }

    /// Builds and validates the tree this object describes.
    pub fn to_tree(&self) -> Result<LogicalTree, String> {
        if self.kind != "heading" || self.level != Some(0) || !self.content.is_empty() {
            return Err("root must be a heading with \"level\": 0 and empty content".into());
        }
        let mut tree = LogicalTree::new();
        let mut pending: Vec<(&TreeJson, NodeId)> = self
            .children
            .iter()
            .rev()
            .map(|c| (c, tree.root()))
            .collect();
        while let Some((obj, parent)) = pending.pop() {
            let id = match (obj.kind.as_str(), obj.level) {
                ("heading", Some(level)) => tree.push_heading(parent, level, obj.content.clone()),
                ("heading", None) => return Err("heading without \"level\"".into()),
                ("paragraph", None) => tree.push_paragraph(parent, obj.content.clone()),
                ("paragraph", Some(_)) => return Err("paragraph carries a \"level\"".into()),
                (other, _) => return Err(format!("unknown node kind {other:?}")),
            }
            .map_err(|e| e.to_string())?;
            pending.extend(obj.children.iter().rev().map(|c| (c, id)));
        }
        tree.validate().map_err(|e| e.to_string())?;
        Ok(tree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SegmentsRecord {
    doc_id: String,
    segments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActionsRecord {
    doc_id: String,
    actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TreeRecord {
    doc_id: String,
    tree: TreeJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub doc_id: String,
    pub step: usize,
    pub prompt: String,
    pub target: String,
}

impl From<&TrainingExample> for TrainingRecord {
    fn from(e: &TrainingExample) -> Self {
        TrainingRecord {
            doc_id: e.doc_id.clone(),
            step: e.step_index,
            prompt: e.prompt.clone(),
            target: e.target.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentsDoc {
    pub doc_id: String,
    pub segments: Vec<TextSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionsDoc<A> {
    pub doc_id: String,
    pub actions: Vec<A>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDoc {
    pub doc_id: String,
    pub tree: LogicalTree,
}

/// Deepest bracket nesting allowed on one line: a level-64 heading nested
/// inside the record.
const MAX_NESTING: usize = 2 * (docstruct_core::MAX_HEADING_LEVEL as usize + 2) + 4;

fn nesting_depth(line: &str) -> usize {
    let (mut depth, mut max) = (0usize, 0usize);
    let (mut in_string, mut escaped) = (false, false);
    for b in line.bytes() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => {
                depth += 1;
                max = max.max(depth);
            }
            b'}' | b']' => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    max
}

fn parse_line<T: DeserializeOwned>(line: &str) -> Result<T, String> {
    if nesting_depth(line) > MAX_NESTING {
        return Err(format!("nesting deeper than {MAX_NESTING}"));
    }
    let mut de = serde_json::Deserializer::from_str(line);
    de.disable_recursion_limit();
    let value = T::deserialize(&mut de).map_err(|e| e.to_string())?;
    de.end().map_err(|e| e.to_string())?;
    Ok(value)
}

/// Reads one record per non-empty line, converting each with `convert` and
/// rejecting repeated doc ids.
fn read_records<R, T, U>(
    reader: R,
    convert: impl Fn(T) -> Result<U, String>,
    doc_id: impl Fn(&U) -> &str,
) -> Result<Vec<U>, FormatError>
where
    R: BufRead,
    T: DeserializeOwned,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FormatError::at(line_no, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = parse_line(&line).map_err(|e| FormatError::at(line_no, e))?;
        let value = convert(record).map_err(|e| FormatError::at(line_no, e))?;
        let id = doc_id(&value).to_string();
        if !seen.insert(id.clone()) {
            return Err(FormatError::at(line_no, format!("duplicate doc_id {id:?}")));
        }
        out.push(value);
    }
    Ok(out)
}

fn write_records<W: Write, T: Serialize>(
    mut writer: W,
    records: impl IntoIterator<Item = T>,
) -> Result<(), FormatError> {
    for r in records {
        serde_json::to_writer(&mut writer, &r).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_segments<R: BufRead>(reader: R) -> Result<Vec<SegmentsDoc>, FormatError> {
    read_records(
        reader,
        |r: SegmentsRecord| {
            if let Some(i) = r.segments.iter().position(|s| s.contains(['\n', '\r'])) {
                return Err(format!("segment {i} contains a line break"));
            }
            Ok(SegmentsDoc {
                segments: TextSegment::from_lines(&r.doc_id, r.segments),
                doc_id: r.doc_id,
            })
        },
        |d| &d.doc_id,
    )
}

pub fn write_segments<W: Write>(writer: W, docs: &[SegmentsDoc]) -> Result<(), FormatError> {
    write_records(
        writer,
        docs.iter().map(|d| SegmentsRecord {
            doc_id: d.doc_id.clone(),
            segments: d.segments.iter().map(|s| s.text.clone()).collect(),
        }),
    )
}

/// Reads action files; `A` is [`Action`] or [`TracerAction`].
pub fn read_actions<R, A>(reader: R) -> Result<Vec<ActionsDoc<A>>, FormatError>
where
    R: BufRead,
    A: std::str::FromStr,
    A::Err: std::fmt::Display,
{
    read_records(
        reader,
        |r: ActionsRecord| {
            let actions = r
                .actions
                .iter()
                .enumerate()
                .map(|(i, s)| s.parse::<A>().map_err(|e| format!("action {i}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ActionsDoc {
                doc_id: r.doc_id,
                actions,
            })
        },
        |d| &d.doc_id,
    )
}

pub fn write_actions<W, A>(writer: W, docs: &[ActionsDoc<A>]) -> Result<(), FormatError>
where
    W: Write,
    A: std::fmt::Display,
{
    write_records(
        writer,
        docs.iter().map(|d| ActionsRecord {
            doc_id: d.doc_id.clone(),
            actions: d.actions.iter().map(ToString::to_string).collect(),
        }),
    )
}

pub fn read_trees<R: BufRead>(reader: R) -> Result<Vec<TreeDoc>, FormatError> {
    read_records(
        reader,
        |r: TreeRecord| {
            Ok(TreeDoc {
                tree: r.tree.to_tree()?,
                doc_id: r.doc_id,
            })
        },
        |d| &d.doc_id,
    )
}

pub fn write_trees<W: Write>(writer: W, docs: &[TreeDoc]) -> Result<(), FormatError> {
    write_records(
        writer,
        docs.iter().map(|d| TreeRecord {
            doc_id: d.doc_id.clone(),
            tree: TreeJson::from_tree(&d.tree),
        }),
    )
}

pub fn write_training<W: Write>(
    writer: W,
    examples: &[TrainingExample],
) -> Result<(), FormatError> {
    write_records(writer, examples.iter().map(TrainingRecord::from))
}

pub fn read_training<R: BufRead>(reader: R) -> Result<Vec<TrainingRecord>, FormatError> {
    // doc ids repeat across steps, so duplicates are keyed by (doc, step)
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| FormatError::at(i + 1, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TrainingRecord = parse_line(&line).map_err(|e| FormatError::at(i + 1, e))?;
        if !seen.insert((r.doc_id.clone(), r.step)) {
            return Err(FormatError::at(i + 1, "duplicate (doc_id, step)"));
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileFile {
    name: String,
    plus_tokens: Vec<String>,
}

/// Parses `{"name": .., "plus_tokens": ["+", "++"]}`.
pub fn parse_profile(json: &str) -> Result<TokenizerProfile, String> {
    let p: ProfileFile = serde_json::from_str(json).map_err(|e| e.to_string())?;
    TokenizerProfile::from_tokens(p.name, p.plus_tokens.iter().map(String::as_str))
        .map_err(|e| e.to_string())
}

pub fn profile_to_json(profile: &TokenizerProfile) -> String {
    let file = ProfileFile {
        name: profile.name().into(),
        plus_tokens: profile
            .plus_runs()
            .iter()
            .map(|&n| "+".repeat(n as usize))
            .collect(),
    };
    serde_json::to_string(&file).expect("plain struct serializes")
}

/// A built-in profile name or a path to a profile file.
pub fn load_profile(name_or_path: &str) -> Result<TokenizerProfile, String> {
    if let Some(p) = TokenizerProfile::builtin(name_or_path) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|e| format!("{name_or_path}: not a built-in profile and unreadable ({e})"))?;
    parse_profile(&text)
}

pub fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Gold actions for a tree corpus.
pub fn gold_action_docs(trees: &[TreeDoc]) -> Vec<ActionsDoc<Action>> {
    trees
        .iter()
        .map(|d| ActionsDoc {
            doc_id: d.doc_id.clone(),
            actions: docstruct_core::tree_to_actions(&d.tree)
                .expect("loaded trees are valid")
                .1,
        })
        .collect()
}

/// Segments of a tree corpus in reading order.
pub fn segment_docs(trees: &[TreeDoc]) -> Vec<SegmentsDoc> {
    trees
        .iter()
        .map(|d| {
            let (segments, _) =
                docstruct_core::tree_to_actions(&d.tree).expect("loaded trees are valid");
            SegmentsDoc {
                segments: TextSegment::from_lines(&d.doc_id, segments),
                doc_id: d.doc_id.clone(),
            }
        })
        .collect()
}

/// Gold baseline transitions for a tree corpus.
pub fn gold_tracer_docs(trees: &[TreeDoc]) -> Vec<ActionsDoc<TracerAction>> {
    trees
        .iter()
        .map(|d| ActionsDoc {
            doc_id: d.doc_id.clone(),
            actions: docstruct_core::tracer::tracer_gold_actions(&d.tree)
                .expect("loaded trees are valid")
                .1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tree() -> LogicalTree {
        let mut t = LogicalTree::new();
        let h = t.push_heading(t.root(), 1, vec!["Title".into()]).unwrap();
        t.push_paragraph(h, vec!["a".into(), "b".into()]).unwrap();
        t
    }

    #[test]
    fn tree_json_shape() {
        let json = serde_json::to_string(&TreeJson::from_tree(&sample_tree())).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"heading","level":0,"content":[],"children":[{"kind":"heading","level":1,"content":["Title"],"children":[{"kind":"paragraph","content":["a","b"],"children":[]}]}]}"#
        );
    }

    #[test]
    fn missing_doc_id_reports_line() {
        let input = "{\"doc_id\":\"a\",\"segments\":[\"x\"]}\n{\"segments\":[\"y\"]}\n";
        let err = read_segments(input.as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(2));
    }

    #[test]
    fn duplicate_doc_id() {
        let input = "{\"doc_id\":\"a\",\"segments\":[]}\n\n{\"doc_id\":\"a\",\"segments\":[]}\n";
        let err = read_segments(input.as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(3));
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn root_level_must_be_zero() {
        let input =
            r#"{"doc_id":"a","tree":{"kind":"heading","level":1,"content":[],"children":[]}}"#;
        let err = read_trees(input.as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(1));
        assert!(err.to_string().contains("level"), "{err}");
    }

    #[test]
    fn tree_invariants_checked_on_load() {
        let skip = r#"{"doc_id":"a","tree":{"kind":"heading","level":0,"content":[],"children":[{"kind":"heading","level":2,"content":["x"],"children":[]}]}}"#;
        assert!(read_trees(skip.as_bytes()).is_err());
        let under_para = r#"{"doc_id":"a","tree":{"kind":"heading","level":0,"content":[],"children":[{"kind":"paragraph","content":["x"],"children":[{"kind":"paragraph","content":["y"]}]}]}}"#;
        assert!(read_trees(under_para.as_bytes()).is_err());
        let empty = r#"{"doc_id":"a","tree":{"kind":"heading","level":0,"content":[],"children":[{"kind":"paragraph","content":[]}]}}"#;
        assert!(read_trees(empty.as_bytes()).is_err());
    }

    #[test]
    fn deep_tree_loads() {
        let mut t = LogicalTree::new();
        let mut parent = t.root();
        for level in 1..=64 {
            parent = t
                .push_heading(parent, level, vec![format!("h{level}")])
                .unwrap();
        }
        t.push_paragraph(parent, vec!["leaf".into()]).unwrap();
        let docs = vec![TreeDoc {
            doc_id: "deep".into(),
            tree: t,
        }];
        let mut buf = Vec::new();
        write_trees(&mut buf, &docs).unwrap();
        assert_eq!(read_trees(buf.as_slice()).unwrap(), docs);
        let hostile = format!("{}{}", "[".repeat(10_000), "]".repeat(10_000));
        assert!(read_trees(hostile.as_bytes()).is_err());
    }

    #[test]
    fn actions_round_trip() {
        let docs = vec![ActionsDoc {
            doc_id: "a".into(),
            actions: vec![
                Action::NewHeading(2),
                Action::NewParagraph,
                Action::Concatenation,
            ],
        }];
        let mut buf = Vec::new();
        write_actions(&mut buf, &docs).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"doc_id\":\"a\",\"actions\":[\"++\",\"*\",\"=\"]}\n"
        );
        assert_eq!(read_actions::<_, Action>(buf.as_slice()).unwrap(), docs);
        let bad = "{\"doc_id\":\"a\",\"actions\":[\"+*\"]}";
        assert!(read_actions::<_, Action>(bad.as_bytes()).is_err());
        let tracer = "{\"doc_id\":\"a\",\"actions\":[\"sub-heading\",\"reduce\"]}";
        assert_eq!(
            read_actions::<_, TracerAction>(tracer.as_bytes()).unwrap()[0]
                .actions
                .len(),
            2
        );
    }

    #[test]
    fn segments_reject_line_breaks() {
        let input = "{\"doc_id\":\"a\",\"segments\":[\"x\\ny\"]}";
        assert!(read_segments(input.as_bytes()).is_err());
    }

    #[test]
    fn profiles() {
        let p = parse_profile(r#"{"name":"custom","plus_tokens":["+","++","+++"]}"#).unwrap();
        assert_eq!(p.plus_runs(), &[1, 2, 3]);
        assert!(parse_profile(r#"{"name":"bad","plus_tokens":["++"]}"#).is_err());
        assert_eq!(
            profile_to_json(&TokenizerProfile::gpt2_medium()),
            r#"{"name":"gpt2-medium","plus_tokens":["+","++","++++"]}"#
        );
        assert_eq!(
            load_profile("baichuan-7b").unwrap(),
            TokenizerProfile::baichuan_7b()
        );
        assert!(load_profile("/nonexistent/profile.json").is_err());
    }
}
