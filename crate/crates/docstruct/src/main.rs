use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use docstruct::format::{self, ActionsDoc, FormatError, SegmentsDoc, TreeDoc};
use docstruct::heuristic::HeuristicPredictor;
use docstruct::remote::{RemoteConfig, RemotePredictor};
use docstruct::report::{
    to_pretty_json, DocError, EvalReportJson, InputFile, Manifest, RunReportJson, TracerReportJson,
};
use docstruct::runner;
use docstruct::selfcheck::{self, Fault, SelfcheckOptions};
use docstruct::synthetic::{generate_synthetic_corpus, SyntheticParams};
use docstruct_core::eval::{EvalOptions, MatchMode};
use docstruct_core::tracer::{TracerAction, TracerConfig, TracerOracle};
use docstruct_core::{
    emit_training_examples, parse_action_block, Action, ActionPredictor, ConstraintMode,
    ConstraintPolicy, OraclePredictor, PredictionRequest, PredictionResponse, PredictorError,
    StructuringConfig,
};
use serde_json::json;

/// Exit statuses.
const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;
const PROPERTY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "docstruct",
    version,
    about = "Recover heading/paragraph trees from text lines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structure segment corpora into trees.
    Structure(StructureArgs),
    /// Run the shift-reduce baseline with gold transitions.
    Baseline(BaselineArgs),
    /// Emit training examples from trees, or generate a synthetic corpus.
    Dataset(DatasetArgs),
    /// Score predicted trees against gold trees.
    Eval(EvalArgs),
    /// Run the randomized property suite.
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorKind {
    Oracle,
    Heuristic,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mask,
    Repair,
    Strict,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchArg {
    Strict,
    Loose,
}

#[derive(Args)]
struct StructureArgs {
    /// Segments corpus (JSONL).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    predictor: PredictorKind,
    /// Input window w_I.
    #[arg(long, default_value_t = 1)]
    wi: usize,
    /// Output window w_O; defaults to w_I.
    #[arg(long)]
    wo: Option<usize>,
    /// Output trees (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Gold actions (JSONL), required by the oracle predictor.
    #[arg(long)]
    gold_actions: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "repair")]
    constraint_mode: ModeArg,
    /// Built-in tokenizer profile name or a profile JSON file.
    #[arg(long, default_value = "gpt2-medium")]
    profile: String,
    /// Separator between the lines of a node when rendered in prompts.
    #[arg(long, default_value = " ")]
    separator: String,
    /// Keep at most this many characters of each stack entry in prompts.
    #[arg(long)]
    truncate: Option<usize>,
    #[arg(long)]
    remote_url: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    remote_timeout_ms: u64,
    /// Total attempts per step.
    #[arg(long, default_value_t = 3)]
    remote_attempts: u32,
    #[arg(long, default_value_t = 200)]
    remote_backoff_ms: u64,
    #[arg(long)]
    max_new_tokens: Option<usize>,
    /// Run manifest; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Print each tree as an indented outline.
    #[arg(long)]
    print_tree: bool,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    input: PathBuf,
    /// Gold baseline transitions (JSONL).
    #[arg(long)]
    gold_actions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Show the whole open-node stack in prompts.
    #[arg(long)]
    global_context: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["trees", "synthetic"]))]
struct DatasetArgs {
    /// Gold trees (JSONL) to turn into training examples.
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Generate a synthetic tree corpus instead.
    #[arg(long)]
    synthetic: bool,
    /// Window for training examples (w_I = w_O).
    #[arg(long, requires = "trees")]
    wi: Option<usize>,
    #[arg(long, requires = "synthetic")]
    docs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_depth: u32,
    #[arg(long, default_value_t = 3)]
    max_children: usize,
    #[arg(long, default_value_t = 4)]
    max_paragraph_lines: usize,
    #[arg(long, default_value_t = 60)]
    max_segments: usize,
    /// Training examples (with --trees) or trees (with --synthetic).
    #[arg(long)]
    out: PathBuf,
    /// Also write the segments of every tree.
    #[arg(long)]
    segments_out: Option<PathBuf>,
    /// Also write gold actions.
    #[arg(long)]
    actions_out: Option<PathBuf>,
    /// Also write gold baseline transitions.
    #[arg(long)]
    tracer_actions_out: Option<PathBuf>,
    #[arg(long, default_value = " ")]
    separator: String,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Headings only: prune paragraphs before scoring.
    #[arg(long)]
    toc_only: bool,
    #[arg(long = "match", value_enum, default_value = "strict")]
    match_mode: MatchArg,
    #[arg(long, default_value = " ")]
    separator: String,
    /// Report (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the baseline comparison properties.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: Option<Fault>,
}

/// A failed command: message plus exit status.
struct Failure(u8, String);

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure(RUNTIME, e.to_string())
    }
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure(VALIDATION, msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Structure(a) => structure(a),
        Command::Baseline(a) => baseline(a),
        Command::Dataset(a) => dataset(a),
        Command::Eval(a) => eval(a),
        Command::Selfcheck(a) => run_selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn workers(flag: Option<usize>) -> Result<usize, Failure> {
    match flag {
        Some(0) => Err(validation("--workers must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn default_manifest(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn input_file(path: &Path) -> InputFile {
    InputFile {
        path: path.display().to_string(),
        bytes: std::fs::metadata(path).map_or(0, |m| m.len()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(RUNTIME, format!("{}: {e}", path.display())))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), Failure>
where
    F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<(), FormatError>,
{
    f(format::create(path)?)?;
    Ok(())
}

fn gold_by_id<A: Clone>(docs: Vec<ActionsDoc<A>>) -> HashMap<String, Vec<A>> {
    docs.into_iter().map(|d| (d.doc_id, d.actions)).collect()
}

/// Missing gold for a document shows up as an engine error for that
/// document rather than aborting the whole corpus.
struct MissingGold(String);

impl ActionPredictor for MissingGold {
    fn predict(&mut self, _: &PredictionRequest) -> Result<PredictionResponse, PredictorError> {
        Err(PredictorError::new(
            docstruct_core::PredictorErrorKind::CursorExhausted,
            format!("no gold actions for document {:?}", self.0),
        ))
    }
}

fn structure(a: StructureArgs) -> Result<(), Failure> {
    let wo = a.wo.unwrap_or(a.wi);
    let config = StructuringConfig::new(a.wi, wo)
        .map_err(|e| validation(e.to_string()))?
        .with_separator(a.separator.clone())
        .with_truncation(a.truncate);
    let mode = match a.constraint_mode {
        ModeArg::Mask => ConstraintMode::Mask,
        ModeArg::Repair => ConstraintMode::Repair,
        ModeArg::Strict => ConstraintMode::Strict,
    };
    match a.predictor {
        PredictorKind::Oracle if a.gold_actions.is_none() => {
            return Err(validation("--predictor oracle requires --gold-actions"))
        }
        PredictorKind::Remote if a.remote_url.is_none() => {
            return Err(validation("--predictor remote requires --remote-url"))
        }
        _ => {}
    }
    if a.remote_attempts == 0 {
        return Err(validation("--remote-attempts must be at least 1"));
    }
    let workers = workers(a.workers)?;
    let profile = format::load_profile(&a.profile).map_err(validation)?;
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest(&a.out));

    let started = Instant::now();
    let docs = format::read_segments(format::open(&a.input)?)?;
    let mut inputs = vec![input_file(&a.input)];
    let policy = ConstraintPolicy::new(mode, profile.clone());

    let results = match a.predictor {
        PredictorKind::Oracle => {
            let path = a.gold_actions.as_deref().expect("checked above");
            inputs.push(input_file(path));
            let gold = gold_by_id(format::read_actions::<_, Action>(format::open(path)?)?);
            let make = |doc: &SegmentsDoc| -> Box<dyn ActionPredictor> {
                match gold.get(&doc.doc_id) {
                    Some(actions) => Box::new(OraclePredictor::new(actions.clone())),
                    None => Box::new(MissingGold(doc.doc_id.clone())),
                }
            };
            runner::structure_corpus(&docs, make, &config, &policy, workers)
        }
        PredictorKind::Heuristic => {
            let heuristic = HeuristicPredictor::default();
            runner::structure_corpus(&docs, |_| heuristic.clone(), &config, &policy, workers)
        }
        PredictorKind::Remote => {
            let mut remote = RemoteConfig::new(a.remote_url.clone().expect("checked above"));
            remote.timeout = Duration::from_millis(a.remote_timeout_ms);
            remote.max_attempts = a.remote_attempts;
            remote.backoff = Duration::from_millis(a.remote_backoff_ms);
            remote.max_new_tokens = a.max_new_tokens;
            runner::structure_corpus(
                &docs,
                |_| RemotePredictor::new(remote.clone()),
                &config,
                &policy,
                workers,
            )
        }
    };

    let mut manifest = Manifest::new(
        "structure",
        json!({
            "predictor": match a.predictor {
                PredictorKind::Oracle => "oracle",
                PredictorKind::Heuristic => "heuristic",
                PredictorKind::Remote => "remote",
            },
            "input_window": config.input_window,
            "output_window": config.output_window,
            "constraint_mode": mode.as_str(),
            "tokenizer_profile": profile.name(),
            "plus_tokens": profile.plus_runs().iter().map(|&n| "+".repeat(n as usize)).collect::<Vec<_>>(),
            "join_separator": config.join_separator,
            "stack_entry_truncation": config.stack_entry_truncation,
            "remote_url": a.remote_url,
            "remote_timeout_ms": a.remote_timeout_ms,
            "remote_attempts": a.remote_attempts,
            "max_new_tokens": a.max_new_tokens,
            "workers": workers,
        }),
    );
    manifest.inputs = inputs;
    manifest.outputs = vec![a.out.display().to_string()];

    let mut trees = Vec::with_capacity(docs.len());
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok((tree, report)) => {
                manifest
                    .documents
                    .push(serde_json::to_value(RunReportJson::from(&report)).expect("plain data"));
                if a.print_tree {
                    println!("# {}\n{tree}", doc.doc_id);
                }
                trees.push(TreeDoc {
                    doc_id: doc.doc_id.clone(),
                    tree,
                });
            }
            Err(e) => manifest.errors.push(DocError {
                doc_id: doc.doc_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    write_with(&a.out, |w| format::write_trees(w, &trees))?;
    manifest.wall_ms = started.elapsed().as_millis() as u64;
    write_text(&manifest_path, &to_pretty_json(&manifest))?;
    finish_documents(&manifest.errors, docs.len())
}

fn finish_documents(errors: &[DocError], total: usize) -> Result<(), Failure> {
    if errors.is_empty() {
        return Ok(());
    }
    for e in errors {
        eprintln!("{}: {}", e.doc_id, e.error);
    }
    Err(Failure(
        RUNTIME,
        format!("{} of {total} documents aborted", errors.len()),
    ))
}

fn baseline(a: BaselineArgs) -> Result<(), Failure> {
    let workers = workers(a.workers)?;
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest(&a.out));
    let started = Instant::now();
    let docs = format::read_segments(format::open(&a.input)?)?;
    let gold = gold_by_id(format::read_actions::<_, TracerAction>(format::open(
        &a.gold_actions,
    )?)?);
    let config = TracerConfig {
        global_context: a.global_context,
        ..TracerConfig::default()
    };
    let results = runner::tracer_corpus(
        &docs,
        |doc| TracerOracle::new(gold.get(&doc.doc_id).cloned().unwrap_or_default()),
        &config,
        workers,
    );
    let mut manifest = Manifest::new(
        "baseline",
        json!({
            "predictor": "oracle",
            "global_context": config.global_context,
            "depth_bound": config.depth_bound,
            "workers": workers,
        }),
    );
    manifest.inputs = vec![input_file(&a.input), input_file(&a.gold_actions)];
    manifest.outputs = vec![a.out.display().to_string()];
    let mut trees = Vec::new();
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok((tree, report)) => {
                manifest.documents.push(
                    serde_json::to_value(TracerReportJson::from(&report)).expect("plain data"),
                );
                trees.push(TreeDoc {
                    doc_id: doc.doc_id.clone(),
                    tree,
                });
            }
            Err(e) => manifest.errors.push(DocError {
                doc_id: doc.doc_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    write_with(&a.out, |w| format::write_trees(w, &trees))?;
    manifest.wall_ms = started.elapsed().as_millis() as u64;
    write_text(&manifest_path, &to_pretty_json(&manifest))?;
    finish_documents(&manifest.errors, docs.len())
}

fn dataset(a: DatasetArgs) -> Result<(), Failure> {
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest(&a.out));
    let started = Instant::now();
    let (trees, mut manifest) = if let Some(path) = &a.trees {
        let wi = a.wi.ok_or_else(|| validation("--trees requires --wi"))?;
        let config = StructuringConfig::one_pass(wi)
            .map_err(|e| validation(e.to_string()))?
            .with_separator(a.separator.clone());
        let trees = format::read_trees(format::open(path)?)?;
        let mut examples = Vec::new();
        for doc in &trees {
            let emitted = emit_training_examples(&doc.doc_id, &doc.tree, &config)
                .map_err(|e| Failure(RUNTIME, format!("{}: {e}", doc.doc_id)))?;
            check_targets(&doc.doc_id, doc.tree.segment_count(), wi, &emitted)?;
            examples.extend(emitted);
        }
        write_with(&a.out, |w| format::write_training(w, &examples))?;
        let mut m = Manifest::new(
            "dataset",
            json!({ "source": "trees", "window": wi, "join_separator": a.separator, "examples": examples.len() }),
        );
        m.inputs = vec![input_file(path)];
        (trees, m)
    } else {
        let docs = a
            .docs
            .ok_or_else(|| validation("--synthetic requires --docs"))?;
        if a.max_depth == 0 || a.max_depth > docstruct_core::MAX_HEADING_LEVEL + 1 {
            return Err(validation("--max-depth must be in 1..=65"));
        }
        if a.max_segments == 0 || a.max_paragraph_lines == 0 {
            return Err(validation(
                "--max-segments and --max-paragraph-lines must be positive",
            ));
        }
        let params = SyntheticParams {
            max_depth: a.max_depth,
            max_children: a.max_children,
            max_paragraph_lines: a.max_paragraph_lines,
            max_segments: a.max_segments,
            ..SyntheticParams::default()
        };
        let trees = generate_synthetic_corpus(docs, a.seed, &params);
        write_with(&a.out, |w| format::write_trees(w, &trees))?;
        let mut m = Manifest::new(
            "dataset",
            json!({
                "source": "synthetic",
                "docs": docs,
                "max_depth": params.max_depth,
                "max_children": params.max_children,
                "max_paragraph_lines": params.max_paragraph_lines,
                "max_segments": params.max_segments,
                "heading_continuation": params.heading_continuation,
            }),
        );
        m.seed = Some(a.seed);
        (trees, m)
    };
    manifest.outputs.push(a.out.display().to_string());
    if let Some(p) = &a.segments_out {
        write_with(p, |w| {
            format::write_segments(w, &format::segment_docs(&trees))
        })?;
        manifest.outputs.push(p.display().to_string());
    }
    if let Some(p) = &a.actions_out {
        write_with(p, |w| {
            format::write_actions(w, &format::gold_action_docs(&trees))
        })?;
        manifest.outputs.push(p.display().to_string());
    }
    if let Some(p) = &a.tracer_actions_out {
        write_with(p, |w| {
            format::write_actions(w, &format::gold_tracer_docs(&trees))
        })?;
        manifest.outputs.push(p.display().to_string());
    }
    manifest.wall_ms = started.elapsed().as_millis() as u64;
    write_text(&manifest_path, &to_pretty_json(&manifest))
}

/// Every target must parse back to the number of actions its window covers.
fn check_targets(
    doc_id: &str,
    segments: usize,
    window: usize,
    examples: &[docstruct_core::TrainingExample],
) -> Result<(), Failure> {
    for ex in examples {
        let declared = (segments - ex.step_index * window).min(window);
        parse_action_block(&ex.target, declared).map_err(|e| {
            Failure(
                RUNTIME,
                format!(
                    "{doc_id} step {}: target does not re-parse: {e}",
                    ex.step_index
                ),
            )
        })?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest(&a.out));
    let options = EvalOptions {
        toc_only: a.toc_only,
        match_mode: match a.match_mode {
            MatchArg::Strict => MatchMode::Strict,
            MatchArg::Loose => MatchMode::Loose,
        },
        join_separator: a.separator.clone(),
    };
    let started = Instant::now();
    let pred = format::read_trees(format::open(&a.pred)?)?;
    let gold = format::read_trees(format::open(&a.gold)?)?;
    let report = runner::evaluate_files(&pred, &gold, &options)
        .map_err(|e| Failure(RUNTIME, e.to_string()))?;
    let json_report = EvalReportJson::from(&report);
    write_text(&a.out, &to_pretty_json(&json_report))?;
    print!("{}", summary_table(&json_report));

    let mut manifest = Manifest::new(
        "eval",
        json!({
            "toc_only": a.toc_only,
            "match_mode": json_report.match_mode,
            "join_separator": a.separator,
        }),
    );
    manifest.inputs = vec![input_file(&a.pred), input_file(&a.gold)];
    manifest.outputs = vec![a.out.display().to_string()];
    manifest.wall_ms = started.elapsed().as_millis() as u64;
    write_text(&manifest_path, &to_pretty_json(&manifest))
}

fn summary_table(r: &EvalReportJson) -> String {
    let pct = |x: f64| format!("{:6.2}", 100.0 * x);
    let paragraph = r
        .paragraph
        .map_or_else(|| "     -".to_string(), |s| pct(s.f1));
    format!(
        "documents  {}\n\
         Heading F1  Paragraph F1  Total F1  DocAcc  HD F1  TEDS\n\
         {:>10}  {:>12}  {:>8}  {:>6}  {:>5}  {:>4}\n",
        r.documents,
        pct(r.heading.f1),
        paragraph,
        pct(r.total.f1),
        pct(r.doc_acc),
        pct(r.heading_detection.f1),
        pct(r.teds),
    )
}

fn run_selfcheck(a: SelfcheckArgs) -> Result<(), Failure> {
    if a.trials == 0 {
        return Err(validation("--trials must be at least 1"));
    }
    let started = Instant::now();
    let options = SelfcheckOptions {
        trials: a.trials,
        seed: a.seed,
        baseline: a.baseline,
        fault: a.inject_fault,
    };
    let results = selfcheck::run(&options);
    print!("{}", selfcheck::render(&results));
    if let Some(path) = &a.manifest {
        let mut manifest = Manifest::new(
            "selfcheck",
            json!({ "trials": a.trials, "baseline": a.baseline }),
        );
        manifest.seed = Some(a.seed);
        manifest.documents = results
            .iter()
            .map(|r| json!({ "property": r.name, "passed": r.passed(), "counterexample": r.counterexample }))
            .collect();
        manifest.wall_ms = started.elapsed().as_millis() as u64;
        write_text(path, &to_pretty_json(&manifest))?;
    }
    match results.iter().find(|r| !r.passed()) {
        None => Ok(()),
        Some(r) => Err(Failure(
            PROPERTY,
            format!(
                "property {} failed: {}",
                r.name,
                r.counterexample.as_deref().unwrap_or("")
            ),
        )),
    }
}
