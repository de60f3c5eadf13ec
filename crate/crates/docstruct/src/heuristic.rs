//! A model-free predictor driven by section numbering.
//!
//! Lines that look like numbered headings ("Chapter 3", "2.1", "2.1.4",
//! "(a)"-style items) open headings; everything else opens a paragraph,
//! unless the previous paragraph line did not end a sentence, in which case
//! it continues that paragraph.

use docstruct_core::prompt::{format_action_block, parse_prompt};
use docstruct_core::{
    Action, ActionPredictor, NodeKind, PredictionRequest, PredictionResponse, PredictorError,
    PredictorErrorKind,
};
use regex::Regex;

const SENTENCE_END: &[char] = &['.', '!', '?', ':', ';', '。', '！', '？'];

#[derive(Debug, Clone)]
pub struct HeadingRule {
    pub pattern: Regex,
    pub level: u32,
}

#[derive(Debug, Clone)]
pub struct HeuristicPredictor {
    rules: Vec<HeadingRule>,
}

impl Default for HeuristicPredictor {
    fn default() -> Self {
        let rules = [
            (r"^Chapter\s+\d+\b", 1),
            (r"^\d+\.\d+\.\d+\.\d+(\s|$)", 4),
            (r"^\d+\.\d+\.\d+(\s|$)", 3),
            (r"^\d+\.\d+(\s|$)", 2),
            (r"^\d+\.(\s|$)", 2),
            (r"^\(\d+\)(\s|$)", 5),
        ];
        HeuristicPredictor::new(
            rules
                .into_iter()
                .map(|(p, level)| HeadingRule {
                    pattern: Regex::new(p).expect("built-in pattern"),
                    level,
                })
                .collect(),
        )
    }
}

impl HeuristicPredictor {
    /// Rules are tried in order; the first match decides the level.
    pub fn new(rules: Vec<HeadingRule>) -> Self {
        HeuristicPredictor { rules }
    }

    fn heading_level(&self, line: &str) -> Option<u32> {
        let line = line.trim_start();
        self.rules
            .iter()
            .find(|r| r.pattern.is_match(line))
            .map(|r| r.level)
    }

    /// Decides one action per segment given the current stack (as
    /// `(kind, text)` from bottom to top, root excluded).
    pub fn decide(&self, stack: &[(NodeKind, String)], segments: &[String]) -> Vec<Action> {
        let mut max_level = stack
            .iter()
            .filter_map(|(k, _)| k.heading_level())
            .max()
            .unwrap_or(0);
        // (is paragraph, last line text) of the node the next `=` would extend
        let mut top: Option<(bool, String)> =
            stack.last().map(|(k, t)| (k.is_paragraph(), t.clone()));
        let mut out = Vec::with_capacity(segments.len());
        for seg in segments {
            let action = if let Some(level) = self.heading_level(seg) {
                let level = level.clamp(1, max_level + 1);
                max_level = level;
                Action::NewHeading(level)
            } else {
                match &top {
                    Some((true, prev)) if !prev.trim_end().ends_with(SENTENCE_END) => {
                        Action::Concatenation
                    }
                    _ => Action::NewParagraph,
                }
            };
            top = Some((!matches!(action, Action::NewHeading(_)), seg.clone()));
            out.push(action);
        }
        out
    }
}

impl ActionPredictor for HeuristicPredictor {
    fn predict(
        &mut self,
        request: &PredictionRequest,
    ) -> Result<PredictionResponse, PredictorError> {
        let view = parse_prompt(&request.prompt, request.expected_actions)
            .map_err(|e| PredictorError::new(PredictorErrorKind::Backend, e.to_string()))?;
        let stack: Vec<(NodeKind, String)> =
            view.stack.into_iter().map(|l| (l.kind, l.text)).collect();
        let actions = self.decide(&stack, &view.segments);
        Ok(PredictionResponse::new(format_action_block(&actions)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use docstruct_core::{structure_document, ConstraintPolicy, StructuringConfig, TextSegment};

    fn decide(lines: &[&str]) -> Vec<String> {
        let segs: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        HeuristicPredictor::default()
            .decide(&[], &segs)
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[test]
    fn numbering_levels() {
        assert_eq!(
            decide(&[
                "Chapter 1 Intro",
                "1.1 Scope",
                "1.1.1 Terms",
                "(1) item",
                "Text."
            ]),
            ["+", "++", "+++", "++++", "*"]
        );
    }

    #[test]
    fn skipped_levels_are_clamped() {
        assert_eq!(decide(&["1.2.3 Deep", "Chapter 2"]), ["+", "+"]);
    }

    #[test]
    fn unfinished_sentences_continue() {
        assert_eq!(
            decide(&["The first line", "goes on here.", "New paragraph."]),
            ["*", "=", "*"]
        );
    }

    #[test]
    fn concatenation_uses_stack_top() {
        let h = HeuristicPredictor::default();
        let stack = vec![(NodeKind::Paragraph, "open clause".to_string())];
        assert_eq!(
            h.decide(&stack, &["continues.".into()]),
            [Action::Concatenation]
        );
        let stack = vec![(NodeKind::Heading { level: 1 }, "Chapter 1".to_string())];
        assert_eq!(h.decide(&stack, &["body".into()]), [Action::NewParagraph]);
    }

    #[test]
    fn runs_through_engine() {
        let lines = ["Chapter 1", "Some text", "ends here.", "1.1 Part", "More."];
        let segments = TextSegment::from_lines("d", lines);
        let config = StructuringConfig::new(3, 2).unwrap();
        let (tree, report) = structure_document(
            &segments,
            &mut HeuristicPredictor::default(),
            &config,
            &ConstraintPolicy::default(),
        )
        .unwrap();
        assert!(report.failed_steps.is_empty());
        assert_eq!(
            tree.to_string(),
            "+ Chapter 1\n  * Some text ends here.\n  ++ 1.1 Part\n    * More.\n"
        );
    }
}
