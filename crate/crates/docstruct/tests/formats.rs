use docstruct::format::{
    read_actions, read_segments, read_trees, write_actions, write_segments, write_trees,
    ActionsDoc, SegmentsDoc, TreeDoc,
};
use docstruct::synthetic::{generate_synthetic_corpus, SyntheticParams};
use docstruct_core::{Action, TextSegment};
use proptest::prelude::*;

fn line() -> impl Strategy<Value = String> {
    // anything but line breaks, including quotes, escapes and non-ASCII
    "[^\n\r]{0,20}"
}

proptest! {
    #[test]
    fn segments_round_trip(docs in prop::collection::vec(prop::collection::vec(line(), 0..8), 0..10)) {
        let docs: Vec<SegmentsDoc> = docs
            .into_iter()
            .enumerate()
            .map(|(i, lines)| {
                let doc_id = format!("d{i}");
                SegmentsDoc { segments: TextSegment::from_lines(&doc_id, lines), doc_id }
            })
            .collect();
        let mut buf = Vec::new();
        write_segments(&mut buf, &docs).unwrap();
        prop_assert_eq!(read_segments(buf.as_slice()).unwrap(), docs);
    }

    #[test]
    fn actions_round_trip(levels in prop::collection::vec(prop::collection::vec(0u32..=64, 0..20), 0..10)) {
        let docs: Vec<ActionsDoc<Action>> = levels
            .into_iter()
            .enumerate()
            .map(|(i, ls)| ActionsDoc {
                doc_id: format!("d{i}"),
                actions: ls
                    .into_iter()
                    .map(|l| match l {
                        0 => Action::NewParagraph,
                        1 if i % 2 == 0 => Action::Concatenation,
                        l => Action::NewHeading(l),
                    })
                    .collect(),
            })
            .collect();
        let mut buf = Vec::new();
        write_actions(&mut buf, &docs).unwrap();
        prop_assert_eq!(read_actions::<_, Action>(buf.as_slice()).unwrap(), docs);
    }
}

#[test]
fn hundred_synthetic_trees_round_trip() {
    let params = SyntheticParams {
        max_depth: 6,
        ..Default::default()
    };
    let docs: Vec<TreeDoc> = generate_synthetic_corpus(100, 17, &params);
    let mut buf = Vec::new();
    write_trees(&mut buf, &docs).unwrap();
    assert_eq!(read_trees(buf.as_slice()).unwrap(), docs);
}
