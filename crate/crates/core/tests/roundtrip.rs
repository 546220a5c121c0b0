use std::sync::Arc;

use efl_core::corpus::{
    load_records, records_to_jsonl, save_records, ColumnMap, Dataset, InputFormat, Label, LabelDef, MetricKind,
    Record, TaskKind, TaskSpec,
};
use proptest::prelude::*;

fn classification_spec() -> Arc<TaskSpec> {
    Arc::new(TaskSpec {
        name: "roundtrip".into(),
        kind: TaskKind::SingleSentence,
        labels: ["neg", "neu", "pos"]
            .iter()
            .enumerate()
            .map(|(i, n)| LabelDef {
                class_id: i,
                class_name: n.to_string(),
            })
            .collect(),
        descriptions: (0..3).map(|i| (i, format!("desc {i}"))).collect(),
        metric: MetricKind::Accuracy,
        score_range: None,
    })
}

fn regression_spec() -> Arc<TaskSpec> {
    Arc::new(TaskSpec {
        name: "roundtrip_reg".into(),
        kind: TaskKind::Regression,
        labels: vec![],
        descriptions: Default::default(),
        metric: MetricKind::Pearson,
        score_range: Some((0.0, 5.0)),
    })
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Zé\"\\\\ ,.!?\u{4e2d}\t]{0,30}[a-z]".prop_map(|s| s)
}

fn record(i: usize) -> impl Strategy<Value = Record> {
    (text(), proptest::option::of(text()), 0usize..3, proptest::option::of("[a-z]{2}")).prop_map(
        move |(a, b, c, lang)| Record {
            uid: format!("r{i}"),
            text_a: a,
            text_b: b,
            label: Some(Label::Class(c)),
            language: lang,
        },
    )
}

fn records() -> impl Strategy<Value = Vec<Record>> {
    (0usize..12).prop_flat_map(|n| (0..n).map(record).collect::<Vec<_>>())
}

proptest! {
    #[test]
    fn jsonl_save_then_load_is_identity(recs in records()) {
        let ds = Dataset::new(classification_spec(), "train", recs, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_records(&ds, &path).unwrap();
        let back = load_records(&path, InputFormat::Jsonl, &ColumnMap::default(), classification_spec(), "train", false).unwrap();
        prop_assert_eq!(&back.records, &ds.records);
        prop_assert_eq!(records_to_jsonl(&back), records_to_jsonl(&ds));
    }

    #[test]
    fn regression_scores_survive_the_round_trip(scores in proptest::collection::vec(0.0f64..=5.0, 1..10)) {
        let recs: Vec<Record> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Record::new(format!("s{i}"), "a b c", Some(Label::Score(s))).with_text_b("d e"))
            .collect();
        let ds = Dataset::new(regression_spec(), "train", recs, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        save_records(&ds, &path).unwrap();
        let back = load_records(&path, InputFormat::Jsonl, &ColumnMap::default(), regression_spec(), "train", false).unwrap();
        prop_assert_eq!(back.records, ds.records);
    }
}

#[test]
fn tsv_fixture_counts_lines_minus_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.tsv");
    let body = "id\tsentence\tlabel\nx1\tgood one\tpos\nx2\tbad one\tneg\nx3\tso so\tneu\n";
    std::fs::write(&path, body).unwrap();
    let lines = body.lines().count();
    let cols = ColumnMap::parse("uid=0,text_a=1,label=2", true).unwrap();
    let ds = load_records(&path, InputFormat::Tsv, &cols, classification_spec(), "train", false).unwrap();
    assert_eq!(ds.len(), lines - 1);
}
