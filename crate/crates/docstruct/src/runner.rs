//! Timed, parallel runs over whole corpora.
//!
//! Documents are independent, so each one gets its own predictor from a
//! factory and runs on a bounded worker pool. Output order always follows
//! input order.

use std::collections::HashMap;
use std::time::Instant;

use docstruct_core::eval::{evaluate_corpus, EvalError, EvalOptions, EvalReport};
use docstruct_core::tracer::{
    tracer_structure_document, TracerConfig, TracerError, TracerPredictor, TracerReport,
};
use docstruct_core::{
    structure_document, ActionPredictor, ConstraintPolicy, EngineError, LogicalTree, RunReport,
    StructuringConfig,
};
use rayon::prelude::*;

use crate::format::{SegmentsDoc, TreeDoc};

/// Outcome of one document.
pub type DocResult<R, E> = Result<(LogicalTree, R), E>;

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

/// Structures every document with a predictor from `make_predictor`.
pub fn structure_corpus<F, P>(
    docs: &[SegmentsDoc],
    make_predictor: F,
    config: &StructuringConfig,
    policy: &ConstraintPolicy,
    workers: usize,
) -> Vec<DocResult<RunReport, EngineError>>
where
    F: Fn(&SegmentsDoc) -> P + Sync,
    P: ActionPredictor,
{
    pool(workers).install(|| {
        docs.par_iter()
            .map(|doc| {
                let start = Instant::now();
                let mut predictor = make_predictor(doc);
                let (tree, mut report) =
                    structure_document(&doc.segments, &mut predictor, config, policy)?;
                report.doc_id.clone_from(&doc.doc_id);
                report.wall_ms = elapsed_ms(start);
                Ok((tree, report))
            })
            .collect()
    })
}

/// Baseline counterpart of [`structure_corpus`].
pub fn tracer_corpus<F, P>(
    docs: &[SegmentsDoc],
    make_predictor: F,
    config: &TracerConfig,
    workers: usize,
) -> Vec<DocResult<TracerReport, TracerError>>
where
    F: Fn(&SegmentsDoc) -> P + Sync,
    P: TracerPredictor,
{
    pool(workers).install(|| {
        docs.par_iter()
            .map(|doc| {
                let start = Instant::now();
                let mut predictor = make_predictor(doc);
                let (tree, mut report) =
                    tracer_structure_document(&doc.segments, &mut predictor, config)?;
                report.doc_id.clone_from(&doc.doc_id);
                report.wall_ms = elapsed_ms(start);
                Ok((tree, report))
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JoinError {
    #[error("document {0:?} has a prediction but no gold tree")]
    MissingGold(String),
    #[error("document {0:?} has a gold tree but no prediction")]
    MissingPrediction(String),
}

/// Pairs predictions with gold trees by doc id, in gold order.
pub fn join_by_doc_id<'a>(
    pred: &'a [TreeDoc],
    gold: &'a [TreeDoc],
) -> Result<Vec<(&'a str, &'a LogicalTree, &'a LogicalTree)>, JoinError> {
    let by_id: HashMap<&str, &LogicalTree> =
        pred.iter().map(|d| (d.doc_id.as_str(), &d.tree)).collect();
    let gold_ids: std::collections::HashSet<&str> =
        gold.iter().map(|d| d.doc_id.as_str()).collect();
    if let Some(extra) = pred.iter().find(|d| !gold_ids.contains(d.doc_id.as_str())) {
        return Err(JoinError::MissingGold(extra.doc_id.clone()));
    }
    gold.iter()
        .map(|g| {
            by_id
                .get(g.doc_id.as_str())
                .map(|p| (g.doc_id.as_str(), *p, &g.tree))
                .ok_or_else(|| JoinError::MissingPrediction(g.doc_id.clone()))
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum EvalRunError {
    #[error(transparent)]
    Join(#[from] JoinError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub fn evaluate_files(
    pred: &[TreeDoc],
    gold: &[TreeDoc],
    options: &EvalOptions,
) -> Result<EvalReport, EvalRunError> {
    Ok(evaluate_corpus(join_by_doc_id(pred, gold)?, options)?)
}
