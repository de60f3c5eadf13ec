//! Randomized property checks runnable from the command line.
//!
//! Each property draws `trials` cases from a seeded generator and reports
//! the first counterexample it finds. A failing property makes the
//! `selfcheck` command exit with status 3.

use std::fmt::Write as _;

use docstruct_core::constraint::{check_masked_output, validate_and_repair, ConstraintMode};
use docstruct_core::eval::{teds, tree_edit_distance};
use docstruct_core::prompt::format_action_block;
use docstruct_core::tracer::{
    tracer_gold_actions, tracer_structure_document, TracerConfig, TracerOracle,
};
use docstruct_core::{
    parse_action_block, structure_document, tree_to_actions, Action, ConstraintPolicy,
    ContextStack, EngineState, LogicalTree, NodeId, OraclePredictor, StructuringConfig,
    TextSegment, TokenizerProfile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deliberate defects used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Repair stops clamping heading levels.
    ClampOff,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clamp-off" => Ok(Fault::ClampOff),
            _ => Err(format!("unknown fault {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelfcheckOptions {
    pub trials: usize,
    pub seed: u64,
    /// Also check the shift-reduce baseline.
    pub baseline: bool,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub trials: usize,
    pub counterexample: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

type Check = fn(&mut ChaCha8Rng, &SelfcheckOptions) -> Result<(), String>;

pub fn run(options: &SelfcheckOptions) -> Vec<PropertyResult> {
    let mut checks: Vec<(&'static str, Check)> = vec![
        ("clamp-safety", clamp_safety),
        ("oracle-round-trip", oracle_round_trip),
        ("mask-accepts-gold", mask_accepts_gold),
        ("action-block-round-trip", action_block_round_trip),
        ("step-count-law", step_count_law),
        ("ted-matches-brute-force", ted_matches_brute_force),
        ("metrics-identity", metrics_identity),
    ];
    if options.baseline {
        checks.push(("baseline-round-trip", baseline_round_trip));
        checks.push(("baseline-prediction-economy", baseline_economy));
    }
    checks
        .into_iter()
        .enumerate()
        .map(|(k, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(k as u64);
            let counterexample = (0..options.trials).find_map(|trial| {
                check(&mut rng, options)
                    .err()
                    .map(|e| format!("trial {trial}: {e}"))
            });
            PropertyResult {
                name,
                trials: options.trials,
                counterexample,
            }
        })
        .collect()
}

pub fn render(results: &[PropertyResult]) -> String {
    let mut out = String::new();
    for r in results {
        match &r.counterexample {
            None => writeln!(out, "ok    {} ({} trials)", r.name, r.trials),
            Some(e) => writeln!(out, "FAIL  {}: {e}", r.name),
        }
        .unwrap();
    }
    out
}

fn random_actions(rng: &mut ChaCha8Rng, max_len: usize, max_level: u32) -> Vec<Action> {
    let n = rng.random_range(0..=max_len);
    (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => Action::NewHeading(rng.random_range(1..=max_level)),
            1 => Action::NewParagraph,
            _ => Action::Concatenation,
        })
        .collect()
}

fn repair(actions: &[Action], stack: &ContextStack, fault: Option<Fault>) -> Vec<Action> {
    match fault {
        None => validate_and_repair(actions, stack, ConstraintMode::Repair)
            .expect("repair mode never rejects"),
        // without clamping only the root concatenation is fixed
        Some(Fault::ClampOff) => actions
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if i == 0 && a.is_concatenation() && stack.is_root_only() {
                    Action::NewParagraph
                } else {
                    a
                }
            })
            .collect(),
    }
}

/// A tree built by repairing and executing random actions; labels come from
/// `alphabet` so that equal labels occur.
fn random_tree(rng: &mut ChaCha8Rng, max_len: usize, alphabet: &[&str]) -> LogicalTree {
    let raw = random_actions(rng, max_len, 4);
    let mut state = EngineState::new();
    for a in raw {
        let a = repair(&[a], &state.stack, None)[0];
        let label = alphabet[rng.random_range(0..alphabet.len())];
        state.apply(a, label).expect("repaired actions execute");
    }
    state.tree
}

fn clamp_safety(rng: &mut ChaCha8Rng, o: &SelfcheckOptions) -> Result<(), String> {
    let raw = random_actions(rng, 40, 8);
    let mut state = EngineState::new();
    let repaired = repair(&raw, &state.stack, o.fault);
    for (i, &a) in repaired.iter().enumerate() {
        state
            .apply(a, &format!("s{i}"))
            .map_err(|e| format!("raw {raw:?}: action {i} ({a}) failed: {e}"))?;
    }
    state.tree.validate().map_err(|e| e.to_string())
}

fn oracle_round_trip(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let tree = random_tree(rng, 40, &["a", "b", "c", "d"]);
    let (segments, gold) = tree_to_actions(&tree).map_err(|e| e.to_string())?;
    let segments = TextSegment::from_lines("doc", segments);
    let wi = rng.random_range(1..=5);
    let wo = rng.random_range(1..=wi);
    let config = StructuringConfig::new(wi, wo).map_err(|e| e.to_string())?;
    let (rebuilt, report) = structure_document(
        &segments,
        &mut OraclePredictor::new(gold),
        &config,
        &ConstraintPolicy::default(),
    )
    .map_err(|e| e.to_string())?;
    if rebuilt != tree {
        return Err(format!(
            "w_I={wi} w_O={wo}: rebuilt\n{rebuilt}differs from\n{tree}"
        ));
    }
    if !report.skipped_segment_indices.is_empty() {
        return Err(format!("skipped {:?}", report.skipped_segment_indices));
    }
    Ok(())
}

fn mask_accepts_gold(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let tree = random_tree(rng, 30, &["x"]);
    let (_, gold) = tree_to_actions(&tree).map_err(|e| e.to_string())?;
    let w = rng.random_range(1..=4);
    for profile in [
        TokenizerProfile::gpt2_medium(),
        TokenizerProfile::baichuan_7b(),
    ] {
        let mut state = EngineState::new();
        for chunk in gold.chunks(w) {
            let text = format_action_block(chunk);
            let decoded = check_masked_output(&text, &profile, chunk.len(), &state.stack)
                .map_err(|e| format!("{}: {text:?} rejected: {e:?}", profile.name()))?;
            for a in decoded {
                state.apply(a, "x").map_err(|e| e.to_string())?;
            }
        }
        if state.tree != tree {
            return Err(format!(
                "{}: masked replay built a different tree",
                profile.name()
            ));
        }
    }
    Ok(())
}

fn action_block_round_trip(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let actions = random_actions(rng, 16, 64);
    let text = format_action_block(&actions);
    match parse_action_block(&text, actions.len()) {
        Ok(parsed) if parsed == actions => Ok(()),
        other => Err(format!("{text:?} parsed as {other:?}")),
    }
}

fn step_count_law(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let n = rng.random_range(1..=60);
    let wi = rng.random_range(1..=6);
    let wo = rng.random_range(1..=wi);
    let segments = TextSegment::from_lines("doc", (0..n).map(|i| format!("line {i}")));
    let config = StructuringConfig::new(wi, wo).map_err(|e| e.to_string())?;
    let (_, report) = structure_document(
        &segments,
        &mut OraclePredictor::new(vec![Action::NewParagraph; n]),
        &config,
        &ConstraintPolicy::default(),
    )
    .map_err(|e| e.to_string())?;
    let expected = n.div_ceil(wo);
    (report.steps == expected).then_some(()).ok_or_else(|| {
        format!(
            "N={n} w_I={wi} w_O={wo}: {} steps, expected {expected}",
            report.steps
        )
    })
}

fn ted_matches_brute_force(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let alphabet = ["a", "b"];
    let a = random_tree(rng, 5, &alphabet);
    let b = random_tree(rng, 5, &alphabet);
    let fast = tree_edit_distance(&a, &b, " ");
    let slow = brute_force_ted(&a, &b);
    if fast != slow {
        return Err(format!(
            "distance {fast} != brute force {slow} between\n{a}and\n{b}"
        ));
    }
    let score = teds(&a, &b, false, " ");
    let expected = 1.0 - slow as f64 / a.len().max(b.len()) as f64;
    ((score - expected).abs() <= 1e-12)
        .then_some(())
        .ok_or_else(|| format!("TEDS {score} != {expected}"))
}

fn metrics_identity(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    use docstruct_core::eval::{evaluate_document, EvalOptions};
    let tree = random_tree(rng, 30, &["a", "b", "c"]);
    let d = evaluate_document("doc", &tree, &tree, &EvalOptions::new());
    let total = d.nodes.total();
    if total.matched != total.gold || total.matched != total.predicted || d.teds != 1.0 || !d.exact
    {
        return Err(format!("self-comparison of\n{tree}scored {d:?}"));
    }
    Ok(())
}

fn baseline_round_trip(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let tree = random_tree(rng, 40, &["a", "b", "c"]);
    let (segments, gold) = tracer_gold_actions(&tree).map_err(|e| e.to_string())?;
    let n = segments.len();
    let segments = TextSegment::from_lines("doc", segments);
    let (rebuilt, report) = tracer_structure_document(
        &segments,
        &mut TracerOracle::new(gold),
        &TracerConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    if rebuilt != tree {
        return Err(format!("rebuilt\n{rebuilt}differs from\n{tree}"));
    }
    if report.transitions != n + report.reduces || report.transitions < n {
        return Err(format!("N={n} but {report:?}"));
    }
    Ok(())
}

/// One-pass structuring needs exactly N predictions; the baseline needs
/// N plus one per reduce, strictly more once a heading has to be closed.
fn baseline_economy(rng: &mut ChaCha8Rng, _: &SelfcheckOptions) -> Result<(), String> {
    let tree = random_tree(rng, 40, &["a", "b"]);
    let (segments, gold) = tree_to_actions(&tree).map_err(|e| e.to_string())?;
    let n = segments.len();
    let segments = TextSegment::from_lines("doc", segments);
    let (_, report) = structure_document(
        &segments,
        &mut OraclePredictor::new(gold),
        &StructuringConfig::one_pass(1).map_err(|e| e.to_string())?,
        &ConstraintPolicy::default(),
    )
    .map_err(|e| e.to_string())?;
    let (_, tracer_gold) = tracer_gold_actions(&tree).map_err(|e| e.to_string())?;
    let (_, baseline) = tracer_structure_document(
        &segments,
        &mut TracerOracle::new(tracer_gold),
        &TracerConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    if report.committed_actions != n || baseline.transitions < n {
        return Err(format!(
            "N={n}: {} actions vs {} transitions",
            report.committed_actions, baseline.transitions
        ));
    }
    if has_sibling_headings_below_depth_two(&tree) && baseline.transitions <= n {
        return Err(format!("no reduce needed for\n{tree}"));
    }
    Ok(())
}

fn has_sibling_headings_below_depth_two(tree: &LogicalTree) -> bool {
    tree.max_depth() >= 2
        && tree.preorder().into_iter().any(|id| {
            tree.children(id)
                .iter()
                .filter(|&&c| tree.node(c).kind.is_heading())
                .count()
                >= 2
        })
}

/// Node labels and preorder relations of a small tree.
struct Flat {
    labels: Vec<(bool, String)>,
    /// `anc[i][j]`: node i is a proper ancestor of node j.
    anc: Vec<Vec<bool>>,
}

fn flatten(tree: &LogicalTree) -> Flat {
    let order = tree.preorder();
    let pos = |id: NodeId| order.iter().position(|&x| x == id).unwrap();
    let n = order.len();
    let mut anc = vec![vec![false; n]; n];
    for (j, &id) in order.iter().enumerate() {
        let mut cur = tree.node(id).parent;
        while let Some(p) = cur {
            anc[pos(p)][j] = true;
            cur = tree.node(p).parent;
        }
    }
    let labels = order
        .iter()
        .map(|&id| {
            let node = tree.node(id);
            (node.kind.is_heading(), node.joined_text(" "))
        })
        .collect();
    Flat { labels, anc }
}

/// Edit distance by exhaustive search over all order- and
/// ancestry-preserving node mappings. Exponential; for tiny trees only.
pub fn brute_force_ted(a: &LogicalTree, b: &LogicalTree) -> usize {
    let (fa, fb) = (flatten(a), flatten(b));
    let mut best = fa.labels.len() + fb.labels.len();
    let mut pairs = Vec::new();
    let mut used = vec![false; fb.labels.len()];
    search(&fa, &fb, 0, &mut pairs, &mut used, &mut best);
    best
}

fn search(
    fa: &Flat,
    fb: &Flat,
    i: usize,
    pairs: &mut Vec<(usize, usize)>,
    used: &mut [bool],
    best: &mut usize,
) {
    if i == fa.labels.len() {
        let relabels = pairs
            .iter()
            .filter(|&&(x, y)| fa.labels[x] != fb.labels[y])
            .count();
        let cost = fa.labels.len() + fb.labels.len() - 2 * pairs.len() + relabels;
        *best = (*best).min(cost);
        return;
    }
    search(fa, fb, i + 1, pairs, used, best);
    for j in 0..fb.labels.len() {
        if used[j] {
            continue;
        }
        // i comes after every mapped x in preorder, so j must come after
        // every mapped y, with ancestry matching both ways
        let consistent = pairs
            .iter()
            .all(|&(x, y)| y < j && fa.anc[x][i] == fb.anc[y][j] && fa.anc[i][x] == fb.anc[j][y]);
        if consistent {
            used[j] = true;
            pairs.push((i, j));
            search(fa, fb, i + 1, pairs, used, best);
            pairs.pop();
            used[j] = false;
        }
    }
}
