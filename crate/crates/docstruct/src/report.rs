//! JSON shapes of run and evaluation reports.

use docstruct_core::eval::{Counts, EvalReport, MatchMode, Scores};
use docstruct_core::tracer::TracerReport;
use docstruct_core::RunReport;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReportJson {
    pub doc_id: String,
    pub steps: usize,
    pub committed_actions: usize,
    pub skipped_segment_indices: Vec<usize>,
    pub failed_steps: Vec<usize>,
    pub wall_ms: u64,
}

impl From<&RunReport> for RunReportJson {
    fn from(r: &RunReport) -> Self {
        RunReportJson {
            doc_id: r.doc_id.clone(),
            steps: r.steps,
            committed_actions: r.committed_actions,
            skipped_segment_indices: r.skipped_segment_indices.clone(),
            failed_steps: r.failed_steps.clone(),
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracerReportJson {
    pub doc_id: String,
    pub transitions: usize,
    pub reduces: usize,
    pub sub_headings: usize,
    pub sub_texts: usize,
    pub concats: usize,
    pub coerced: usize,
    pub wall_ms: u64,
}

impl From<&TracerReport> for TracerReportJson {
    fn from(r: &TracerReport) -> Self {
        TracerReportJson {
            doc_id: r.doc_id.clone(),
            transitions: r.transitions,
            reduces: r.reduces,
            sub_headings: r.sub_headings,
            sub_texts: r.sub_texts,
            concats: r.concats,
            coerced: r.coerced,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoresJson {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Scores> for ScoresJson {
    fn from(s: Scores) -> Self {
        ScoresJson {
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountsJson {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl From<Counts> for CountsJson {
    fn from(c: Counts) -> Self {
        CountsJson {
            matched: c.matched,
            predicted: c.predicted,
            gold: c.gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocEvalJson {
    pub doc_id: String,
    pub heading: CountsJson,
    pub paragraph: CountsJson,
    pub heading_detection: CountsJson,
    pub teds: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReportJson {
    pub documents: usize,
    pub toc_only: bool,
    pub match_mode: &'static str,
    pub heading: ScoresJson,
    /// `null` in table-of-contents mode.
    pub paragraph: Option<ScoresJson>,
    pub total: ScoresJson,
    pub heading_detection: ScoresJson,
    pub teds: f64,
    pub doc_acc: f64,
    pub per_document: Vec<DocEvalJson>,
}

impl From<&EvalReport> for EvalReportJson {
    fn from(r: &EvalReport) -> Self {
        EvalReportJson {
            documents: r.documents,
            toc_only: r.toc_only,
            match_mode: match r.match_mode {
                MatchMode::Strict => "strict",
                MatchMode::Loose => "loose",
            },
            heading: r.heading.into(),
            paragraph: r.paragraph.map(Into::into),
            total: r.total.into(),
            heading_detection: r.heading_detection.into(),
            teds: r.teds_mean,
            doc_acc: r.doc_acc,
            per_document: r
                .per_document
                .iter()
                .map(|d| DocEvalJson {
                    doc_id: d.doc_id.clone(),
                    heading: d.nodes.heading.into(),
                    paragraph: d.nodes.paragraph.into(),
                    heading_detection: d.heading_detection.into(),
                    teds: d.teds,
                    exact: d.exact,
                })
                .collect(),
        }
    }
}

/// An input file a run read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub path: String,
    pub bytes: u64,
}

/// Machine-readable record of one command invocation. Two runs with the
/// same inputs and flags differ only in `wall_ms` fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    /// Effective configuration after defaults.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// Per-document reports, in input order.
    pub documents: Vec<serde_json::Value>,
    /// Documents that could not be processed.
    pub errors: Vec<DocError>,
    pub wall_ms: u64,
}

impl Manifest {
    pub fn new(command: &'static str, config: serde_json::Value) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            seed: None,
            documents: Vec::new(),
            errors: Vec::new(),
            wall_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocError {
    pub doc_id: String,
    pub error: String,
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use docstruct_core::eval::{evaluate_corpus, EvalOptions};
    use docstruct_core::LogicalTree;

    #[test]
    fn toc_report_has_null_paragraph() {
        let mut g = LogicalTree::new();
        let h = g.push_heading(g.root(), 1, vec!["H".into()]).unwrap();
        g.push_paragraph(h, vec!["p".into()]).unwrap();
        let options = EvalOptions {
            toc_only: true,
            ..EvalOptions::new()
        };
        let report = evaluate_corpus([("d", &g, &g)], &options).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&to_pretty_json(&EvalReportJson::from(&report))).unwrap();
        assert!(json["paragraph"].is_null());
        assert_eq!(json["total"]["f1"], 1.0);
        assert_eq!(json["match_mode"], "strict");
        assert_eq!(json["per_document"][0]["doc_id"], "d");
    }
}
