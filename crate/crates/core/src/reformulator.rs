//! Turns labeled records into premise/hypothesis entailment instances.
//!
//! A single-sentence example `x` with label description `p` becomes the pair
//! `(x, p)` whose target says whether `x` entails `p`. Special tokens are never
//! materialized here; backends assemble model inputs themselves.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label, Record, TaskKind};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    UcaPositive,
    UcaNegative,
    DownsampleNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentInstance {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    /// 1 = entails, 0 = does not; interior values only for regression.
    /// `None` for inference-time instances.
    pub target: Option<f64>,
    pub provenance: Provenance,
    pub source_class: Option<usize>,
}

/// Sentence-pair example keeping its native class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInstance {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: usize,
}

fn class_label(r: &Record) -> Result<usize> {
    r.label
        .and_then(|l| l.class())
        .ok_or_else(|| Error::precondition(format!("{}: record has no class label", r.uid)))
}

/// Binary tasks: every record is paired with the positive-class description;
/// the target is 1 exactly for records of class 1.
pub fn reformulate_binary(dataset: &Dataset, positive_description: &str) -> Result<Vec<EntailmentInstance>> {
    let task = &dataset.task;
    if task.kind != TaskKind::SingleSentence || task.n_classes() != 2 {
        return Err(Error::precondition(format!(
            "binary reformulation needs a 2-class single-sentence task, {} is not",
            task.name
        )));
    }
    if positive_description.trim().is_empty() {
        return Err(Error::precondition("empty positive description"));
    }
    dataset
        .records
        .iter()
        .map(|r| {
            let class = class_label(r)?;
            Ok(EntailmentInstance {
                uid: r.uid.clone(),
                premise: r.text_a.clone(),
                hypothesis: positive_description.to_string(),
                target: Some(if class == 1 { 1.0 } else { 0.0 }),
                provenance: Provenance::Original,
                source_class: Some(class),
            })
        })
        .collect()
}

/// Multi-class construction: for each class `i` (ascending), the first `k`
/// class-`i` texts are paired with `p_i` (target 1), then the same texts are
/// each paired with a uniformly drawn `p_j`, `j != i` (target 0).
pub fn reformulate_multiclass(
    groups: &BTreeMap<usize, Vec<&Record>>,
    descriptions: &BTreeMap<usize, String>,
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<EntailmentInstance>> {
    if groups.len() < 2 {
        return Err(Error::precondition("multi-class reformulation needs at least 2 classes"));
    }
    if k == 0 {
        return Err(Error::precondition("k must be at least 1"));
    }
    let classes: Vec<usize> = groups.keys().copied().collect();
    for (&class, records) in groups {
        if records.len() < k {
            return Err(Error::InsufficientClass {
                class: class.to_string(),
                available: records.len(),
                required: k,
            });
        }
        if !descriptions.contains_key(&class) {
            return Err(Error::precondition(format!("class {class} has no description")));
        }
    }
    let mut out = Vec::with_capacity(2 * k * classes.len());
    for (pos, (&class, records)) in groups.iter().enumerate() {
        let chosen = &records[..k];
        for r in chosen {
            out.push(EntailmentInstance {
                uid: format!("{}#{class}", r.uid),
                premise: r.text_a.clone(),
                hypothesis: descriptions[&class].clone(),
                target: Some(1.0),
                provenance: Provenance::Original,
                source_class: Some(class),
            });
        }
        for r in chosen {
            let draw = rng.below(classes.len() - 1);
            let other = classes[if draw >= pos { draw + 1 } else { draw }];
            out.push(EntailmentInstance {
                uid: format!("{}#{other}", r.uid),
                premise: r.text_a.clone(),
                hypothesis: descriptions[&other].clone(),
                target: Some(0.0),
                provenance: Provenance::Original,
                source_class: Some(class),
            });
        }
    }
    Ok(out)
}

/// [`reformulate_multiclass`] over a whole dataset using the task's own
/// descriptions.
pub fn reformulate_multiclass_dataset(dataset: &Dataset, k: usize, rng: &mut Rng) -> Result<Vec<EntailmentInstance>> {
    if dataset.task.kind != TaskKind::SingleSentence {
        return Err(Error::precondition(format!(
            "multi-class reformulation needs a single-sentence task, {} is not",
            dataset.task.name
        )));
    }
    reformulate_multiclass(&dataset.by_class(), &dataset.task.descriptions, k, rng)
}

/// Sentence-pair tasks keep their native labels.
pub fn reformulate_pair(dataset: &Dataset) -> Result<Vec<PairInstance>> {
    if dataset.task.kind != TaskKind::SentencePair {
        return Err(Error::precondition(format!("{} is not a sentence-pair task", dataset.task.name)));
    }
    dataset
        .records
        .iter()
        .map(|r| {
            let hypothesis = r
                .text_b
                .clone()
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| Error::precondition(format!("{}: missing text_b", r.uid)))?;
            Ok(PairInstance {
                uid: r.uid.clone(),
                premise: r.text_a.clone(),
                hypothesis,
                label: class_label(r)?,
            })
        })
        .collect()
}

/// Hypothesis for a regression record: the task description if one is given,
/// otherwise the record's second sentence.
pub fn regression_hypothesis(r: &Record, description: Option<&str>) -> Result<String> {
    match description.filter(|d| !d.trim().is_empty()) {
        Some(d) => Ok(d.to_string()),
        None => r
            .text_b
            .clone()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| Error::precondition(format!("{}: no description and no text_b", r.uid))),
    }
}

/// Regression: target is the label rescaled affinely onto `[0, 1]`.
pub fn reformulate_regression(dataset: &Dataset, description: Option<&str>) -> Result<Vec<EntailmentInstance>> {
    let task = &dataset.task;
    let (lo, hi) = match (task.kind, task.score_range) {
        (TaskKind::Regression, Some(range)) => range,
        _ => return Err(Error::precondition(format!("{} is not a regression task", task.name))),
    };
    dataset
        .records
        .iter()
        .map(|r| {
            let score = match r.label {
                Some(Label::Score(s)) => s,
                _ => return Err(Error::precondition(format!("{}: record has no score", r.uid))),
            };
            if !(lo..=hi).contains(&score) {
                return Err(Error::precondition(format!("{}: score {score} outside [{lo}, {hi}]", r.uid)));
            }
            Ok(EntailmentInstance {
                uid: r.uid.clone(),
                premise: r.text_a.clone(),
                hypothesis: regression_hypothesis(r, description)?,
                target: Some((score - lo) / (hi - lo)),
                provenance: Provenance::Original,
                source_class: None,
            })
        })
        .collect()
}

/// Maps a predicted entailment probability back onto the score range.
pub fn score_from_probability(p: f64, range: (f64, f64)) -> f64 {
    p * (range.1 - range.0) + range.0
}

/// One unlabeled instance per class, in class-id order.
pub fn expand_for_inference(record: &Record, descriptions: &BTreeMap<usize, String>) -> Result<Vec<EntailmentInstance>> {
    if descriptions.is_empty() {
        return Err(Error::precondition("no label descriptions to expand"));
    }
    Ok(descriptions
        .iter()
        .map(|(&class, desc)| EntailmentInstance {
            uid: format!("{}#{class}", record.uid),
            premise: record.text_a.clone(),
            hypothesis: desc.clone(),
            target: None,
            provenance: Provenance::Original,
            source_class: Some(class),
        })
        .collect())
}

/// Argmax over per-class entailment scores; ties go to the lowest index.
pub fn predict_multiclass(entail_scores: &[f64]) -> Result<usize> {
    if entail_scores.is_empty() {
        return Err(Error::precondition("no scores to choose from"));
    }
    if entail_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::precondition("NaN entailment score"));
    }
    let mut best = 0;
    for (i, &s) in entail_scores.iter().enumerate().skip(1) {
        if s > entail_scores[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut buf = Vec::new();
    write_jsonl(items, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::gen_synthetic;
    use crate::corpus::{LabelDef, MetricKind, TaskSpec};
    use std::sync::Arc;

    fn binary_task() -> Arc<TaskSpec> {
        Arc::new(TaskSpec {
            name: "sst2".into(),
            kind: TaskKind::SingleSentence,
            labels: vec![
                LabelDef { class_id: 0, class_name: "negative".into() },
                LabelDef { class_id: 1, class_name: "positive".into() },
            ],
            descriptions: [(0, "It was terrible".into()), (1, "It was great".into())].into_iter().collect(),
            metric: MetricKind::Accuracy,
            score_range: None,
        })
    }

    #[test]
    fn binary_positive_example() {
        let ds = Dataset::new(
            binary_task(),
            "train",
            vec![
                Record::new("a", "I am in love with these actors", Some(Label::Class(1))),
                Record::new("b", "I am in love with these actors", Some(Label::Class(0))),
            ],
            false,
        )
        .unwrap();
        let out = reformulate_binary(&ds, "This is a great movie").unwrap();
        assert_eq!(out[0].premise, "I am in love with these actors");
        assert_eq!(out[0].hypothesis, "This is a great movie");
        assert_eq!(out[0].target, Some(1.0));
        assert_eq!(out[1].target, Some(0.0));
    }

    #[test]
    fn binary_preserves_cardinality() {
        let ds = gen_synthetic(1, 8, 2, 1.0).unwrap();
        let out = reformulate_binary(&ds, "It was great").unwrap();
        assert_eq!(out.len(), 16);
        assert_eq!(out.iter().filter(|i| i.target == Some(1.0)).count(), 8);
    }

    #[test]
    fn binary_rejects_multiclass() {
        let ds = gen_synthetic(1, 8, 4, 1.0).unwrap();
        assert!(reformulate_binary(&ds, "x").is_err());
    }

    #[test]
    fn multiclass_counts() {
        let ds = gen_synthetic(1, 8, 4, 1.0).unwrap();
        let out = reformulate_multiclass_dataset(&ds, 8, &mut Rng::new(7)).unwrap();
        assert_eq!(out.len(), 64);
        assert_eq!(out.iter().filter(|i| i.target == Some(1.0)).count(), 32);
        assert_eq!(out.iter().filter(|i| i.target == Some(0.0)).count(), 32);
        let two = gen_synthetic(1, 8, 2, 1.0).unwrap();
        assert_eq!(reformulate_multiclass_dataset(&two, 8, &mut Rng::new(7)).unwrap().len(), 32);
    }

    #[test]
    fn multiclass_negatives_never_use_own_description() {
        let ds = gen_synthetic(3, 8, 4, 1.0).unwrap();
        let descs = &ds.task.descriptions;
        for inst in reformulate_multiclass_dataset(&ds, 8, &mut Rng::new(11)).unwrap() {
            let own = &descs[&inst.source_class.unwrap()];
            if inst.target == Some(0.0) {
                assert_ne!(&inst.hypothesis, own);
            } else {
                assert_eq!(&inst.hypothesis, own);
            }
        }
    }

    #[test]
    fn multiclass_same_seed_same_assignment() {
        let ds = gen_synthetic(3, 8, 4, 1.0).unwrap();
        let a = to_jsonl(&reformulate_multiclass_dataset(&ds, 8, &mut Rng::new(7)).unwrap());
        let b = to_jsonl(&reformulate_multiclass_dataset(&ds, 8, &mut Rng::new(7)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn multiclass_short_class_is_named() {
        let ds = gen_synthetic(3, 5, 4, 1.0).unwrap();
        match reformulate_multiclass_dataset(&ds, 8, &mut Rng::new(7)) {
            Err(Error::InsufficientClass { class, available: 5, required: 8 }) => assert_eq!(class, "0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multiclass_missing_description() {
        let ds = gen_synthetic(3, 8, 3, 1.0).unwrap();
        let mut descs = ds.task.descriptions.clone();
        descs.remove(&2);
        assert!(reformulate_multiclass(&ds.by_class(), &descs, 8, &mut Rng::new(1)).is_err());
    }

    fn pair_task(classes: &[&str]) -> Arc<TaskSpec> {
        Arc::new(TaskSpec {
            name: "pair".into(),
            kind: TaskKind::SentencePair,
            labels: classes
                .iter()
                .enumerate()
                .map(|(i, n)| LabelDef { class_id: i, class_name: n.to_string() })
                .collect(),
            descriptions: BTreeMap::new(),
            metric: MetricKind::Accuracy,
            score_range: None,
        })
    }

    #[test]
    fn pair_keeps_native_label() {
        let task = pair_task(&["not_duplicate", "duplicate"]);
        let ds = Dataset::new(
            task,
            "train",
            vec![Record::new("q", "How do I cook rice?", Some(Label::Class(1))).with_text_b("What is the way to cook rice?")],
            false,
        )
        .unwrap();
        let out = reformulate_pair(&ds).unwrap();
        assert_eq!(out[0].premise, "How do I cook rice?");
        assert_eq!(out[0].hypothesis, "What is the way to cook rice?");
        assert_eq!(ds.task.class_name(out[0].label), Some("duplicate"));
    }

    #[test]
    fn pair_snli_three_classes_and_empty() {
        let task = pair_task(&["entailment", "neutral", "contradiction"]);
        let ds = Dataset::new(
            Arc::clone(&task),
            "train",
            vec![Record::new("s", "A man sleeps.", Some(Label::Class(2))).with_text_b("A man runs.")],
            false,
        )
        .unwrap();
        assert_eq!(reformulate_pair(&ds).unwrap()[0].label, 2);
        let empty = Dataset::new(task, "train", vec![], false).unwrap();
        assert!(reformulate_pair(&empty).unwrap().is_empty());
    }

    #[test]
    fn pair_missing_text_b_names_uid() {
        let ds = Dataset::new(pair_task(&["a", "b"]), "train", vec![Record::new("u9", "x", Some(Label::Class(0)))], false)
            .unwrap();
        assert!(reformulate_pair(&ds).unwrap_err().to_string().contains("u9"));
    }

    fn stsb(scores: &[f64]) -> Dataset {
        let task = Arc::new(TaskSpec {
            name: "stsb".into(),
            kind: TaskKind::Regression,
            labels: vec![],
            descriptions: BTreeMap::new(),
            metric: MetricKind::Pearson,
            score_range: Some((0.0, 5.0)),
        });
        let records = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| Record::new(format!("r{i}"), "a", Some(Label::Score(s))).with_text_b("b"))
            .collect();
        Dataset::new(task, "train", records, false).unwrap()
    }

    #[test]
    fn regression_targets() {
        let out = reformulate_regression(&stsb(&[5.0, 0.0, 2.5]), None).unwrap();
        let targets: Vec<f64> = out.iter().map(|i| i.target.unwrap()).collect();
        assert_eq!(targets, vec![1.0, 0.0, 0.5]);
        assert_eq!(out[0].hypothesis, "b");
        let described = reformulate_regression(&stsb(&[1.0]), Some("They mean the same")).unwrap();
        assert_eq!(described[0].hypothesis, "They mean the same");
        assert_eq!(score_from_probability(0.5, (0.0, 5.0)), 2.5);
    }

    #[test]
    fn regression_out_of_range_names_uid() {
        let mut ds = stsb(&[1.0]);
        ds.records[0].label = Some(Label::Score(7.0));
        assert!(reformulate_regression(&ds, None).unwrap_err().to_string().contains("r0"));
    }

    #[test]
    fn inference_fan_out_in_class_order() {
        let ds = gen_synthetic(1, 1, 4, 1.0).unwrap();
        let out = expand_for_inference(&ds.records[0], &ds.task.descriptions).unwrap();
        assert_eq!(out.len(), 4);
        for (i, inst) in out.iter().enumerate() {
            assert_eq!(inst.source_class, Some(i));
            assert_eq!(inst.hypothesis, ds.task.descriptions[&i]);
            assert_eq!(inst.target, None);
        }
        let bin = gen_synthetic(1, 1, 2, 1.0).unwrap();
        assert_eq!(expand_for_inference(&bin.records[0], &bin.task.descriptions).unwrap().len(), 2);
        assert!(expand_for_inference(&bin.records[0], &BTreeMap::new()).is_err());
    }

    #[test]
    fn argmax_and_ties() {
        assert_eq!(predict_multiclass(&[0.1, 0.7, 0.2, 0.0]).unwrap(), 1);
        assert_eq!(predict_multiclass(&[0.5, 0.5]).unwrap(), 0);
        assert_eq!(predict_multiclass(&[0.2, 0.9, 0.9]).unwrap(), 1);
        assert!(predict_multiclass(&[]).is_err());
    }

    #[test]
    fn instance_jsonl_round_trip() {
        let ds = gen_synthetic(1, 4, 3, 1.0).unwrap();
        let out = reformulate_multiclass_dataset(&ds, 4, &mut Rng::new(1)).unwrap();
        let text = to_jsonl(&out);
        let back: Vec<EntailmentInstance> = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, out);
        assert!(text.lines().next().unwrap().contains("\"provenance\":\"original\""));
    }
}
