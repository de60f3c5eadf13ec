use docstruct_core::constraint::{check_masked_output, validate_and_repair, ConstraintMode};
use docstruct_core::prompt::format_action_block;
use docstruct_core::tracer::{
    tracer_gold_actions, tracer_structure_document, TracerConfig, TracerOracle,
};
use docstruct_core::{
    clamp_heading_level, emit_training_examples, parse_action_block, structure_document,
    tree_to_actions, Action, ConstraintPolicy, ContextStack, EngineState, LogicalTree,
    OraclePredictor, StructuringConfig, TextSegment, TokenizerProfile,
};
use proptest::prelude::*;

fn raw_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (1u32..=8).prop_map(Action::NewHeading),
        Just(Action::NewParagraph),
        Just(Action::Concatenation),
    ]
}

/// Builds a tree by repairing and executing an arbitrary action sequence.
fn build(raw: &[Action]) -> (LogicalTree, Vec<Action>) {
    let mut state = EngineState::new();
    let mut executed = Vec::new();
    for (i, &a) in raw.iter().enumerate() {
        let fixed = validate_and_repair(&[a], &state.stack, ConstraintMode::Repair).unwrap()[0];
        state.apply(fixed, &format!("s{i}")).unwrap();
        assert!(state.stack.is_consistent_with(&state.tree));
        executed.push(fixed);
    }
    (state.tree, executed)
}

fn random_tree() -> impl Strategy<Value = LogicalTree> {
    prop::collection::vec(raw_action(), 0..60).prop_map(|raw| build(&raw).0)
}

proptest! {
    #[test]
    fn repaired_sequences_always_execute(raw in prop::collection::vec(raw_action(), 0..80)) {
        let mut state = EngineState::new();
        let repaired = validate_and_repair(&raw, &state.stack, ConstraintMode::Repair).unwrap();
        prop_assert!(validate_and_repair(&repaired, &state.stack, ConstraintMode::Strict).is_ok());
        for (i, a) in repaired.iter().enumerate() {
            if let Action::NewHeading(level) = *a {
                prop_assert!(level <= state.stack.max_heading_level() + 1);
            }
            state.apply(*a, &format!("s{i}")).unwrap();
            let levels: Vec<u32> = state.stack.entries().iter().filter_map(|e| e.kind.heading_level()).collect();
            prop_assert_eq!(levels, (0..state.stack.max_heading_level() + 1).collect::<Vec<_>>());
        }
        prop_assert!(state.tree.validate().is_ok());
    }

    #[test]
    fn linearization_inverts_execution(raw in prop::collection::vec(raw_action(), 0..80)) {
        let (tree, executed) = build(&raw);
        let (segments, actions) = tree_to_actions(&tree).unwrap();
        prop_assert_eq!(&actions, &executed);
        prop_assert_eq!(segments.len(), actions.len());
        prop_assert!(actions.first().is_none_or(|a| !a.is_concatenation()));
        prop_assert!(validate_and_repair(&actions, &ContextStack::new(&LogicalTree::new()), ConstraintMode::Strict).is_ok());
    }

    #[test]
    fn oracle_round_trip(tree in random_tree(), wi in 1usize..=5, wo_seed in 0usize..5) {
        let wo = 1 + wo_seed % wi;
        let (segments, gold) = tree_to_actions(&tree).unwrap();
        let segments = TextSegment::from_lines("doc", segments);
        let config = StructuringConfig::new(wi, wo).unwrap();
        let mut oracle = OraclePredictor::new(gold.clone());
        let (rebuilt, report) = structure_document(&segments, &mut oracle, &config, &ConstraintPolicy::default()).unwrap();
        prop_assert_eq!(&rebuilt, &tree);
        prop_assert_eq!(report.steps, segments.len().div_ceil(wo));
        prop_assert_eq!(report.committed_actions, segments.len());
        prop_assert!(report.skipped_segment_indices.is_empty());
    }

    #[test]
    fn masked_mode_accepts_gold_output(tree in random_tree(), w in 1usize..=4) {
        let (segments, gold) = tree_to_actions(&tree).unwrap();
        let segments = TextSegment::from_lines("doc", segments);
        let config = StructuringConfig::one_pass(w).unwrap();
        for profile in [TokenizerProfile::gpt2_medium(), TokenizerProfile::baichuan_7b()] {
            let policy = ConstraintPolicy::new(ConstraintMode::Mask, profile);
            let (rebuilt, report) = structure_document(&segments, &mut OraclePredictor::new(gold.clone()), &config, &policy).unwrap();
            prop_assert_eq!(&rebuilt, &tree);
            prop_assert!(report.failed_steps.is_empty());
        }
    }

    #[test]
    fn clamp_is_idempotent(raw in prop::collection::vec(raw_action(), 0..30), level in 1u32..70) {
        let mut state = EngineState::new();
        let repaired = validate_and_repair(&raw, &state.stack, ConstraintMode::Repair).unwrap();
        for (i, a) in repaired.iter().enumerate() {
            state.apply(*a, &format!("s{i}")).unwrap();
        }
        let once = clamp_heading_level(Action::NewHeading(level), &state.stack);
        prop_assert_eq!(clamp_heading_level(once, &state.stack), once);
        prop_assert!(state.stack.check(once).is_ok());
    }

    #[test]
    fn action_block_round_trip(actions in prop::collection::vec(raw_action(), 0..=16)) {
        let text = format_action_block(&actions);
        prop_assert_eq!(parse_action_block(&text, actions.len()).unwrap(), actions);
    }

    #[test]
    fn training_targets_reassemble_gold(tree in random_tree(), w in 1usize..=5) {
        let (_, gold) = tree_to_actions(&tree).unwrap();
        let config = StructuringConfig::one_pass(w).unwrap();
        let examples = emit_training_examples("doc", &tree, &config).unwrap();
        prop_assert_eq!(examples.len(), gold.len().div_ceil(w));
        let mut all = Vec::new();
        for ex in &examples {
            let n = (gold.len() - ex.step_index * w).min(w);
            all.extend(parse_action_block(&ex.target, n).unwrap());
        }
        prop_assert_eq!(all, gold);
    }

    #[test]
    fn tracer_needs_at_least_as_many_predictions(tree in random_tree()) {
        let (segments, gold) = tracer_gold_actions(&tree).unwrap();
        let n = segments.len();
        let segments = TextSegment::from_lines("doc", segments);
        let (rebuilt, report) = tracer_structure_document(&segments, &mut TracerOracle::new(gold), &TracerConfig::default()).unwrap();
        prop_assert_eq!(&rebuilt, &tree);
        prop_assert_eq!(report.consuming(), n);
        prop_assert_eq!(report.transitions, n + report.reduces);
        prop_assert_eq!(report.coerced, 0);
    }
}

#[test]
fn masked_first_token_rejects_concatenation() {
    let tree = LogicalTree::new();
    let stack = ContextStack::new(&tree);
    let profile = TokenizerProfile::gpt2_medium();
    assert!(check_masked_output("=\n", &profile, 1, &stack).is_err());
    assert!(check_masked_output("++\n", &profile, 1, &stack).is_err());
    assert_eq!(
        check_masked_output("+\n", &profile, 1, &stack).unwrap(),
        [Action::NewHeading(1)]
    );
}

#[test]
fn step_count_law() {
    for n in 1..=50usize {
        let segments = TextSegment::from_lines("doc", (0..n).map(|i| format!("line {i}")));
        let gold = vec![Action::NewParagraph; n];
        for wi in 1..=5 {
            for wo in 1..=wi {
                let config = StructuringConfig::new(wi, wo).unwrap();
                let (_, report) = structure_document(
                    &segments,
                    &mut OraclePredictor::new(gold.clone()),
                    &config,
                    &ConstraintPolicy::default(),
                )
                .unwrap();
                assert_eq!(report.steps, n.div_ceil(wo), "n={n} wi={wi} wo={wo}");
            }
        }
    }
}
