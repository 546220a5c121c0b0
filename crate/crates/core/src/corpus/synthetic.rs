//! Keyword-driven synthetic datasets for desk-scale runs.
//!
//! Every sentence is a handful of neutral filler words plus one class
//! keyword. `separability` is the probability that the keyword belongs to the
//! sentence's own class; otherwise it is drawn uniformly from all classes.
//! Output is a pure function of the arguments.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Dataset, Label, LabelDef, MetricKind, Record, TaskKind, TaskSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fixed data seed for the named fixtures; run seeds only drive sampling.
pub const FIXTURE_DATA_SEED: u64 = 2021;

/// Entailment corpus used to pre-train fixture runs.
pub const PRETRAIN_FIXTURE: &str = "nli_fixture";

const FILLER: [&str; 40] = [
    "the", "film", "story", "plot", "actor", "scene", "camera", "music", "dialogue", "ending",
    "director", "cast", "script", "moment", "character", "screen", "audience", "evening",
    "picture", "sequence", "feels", "seems", "runs", "holds", "moves", "shows", "offers",
    "brings", "and", "with", "about", "around", "through", "under", "quite", "rather", "mostly",
    "often", "perhaps", "nearly",
];

const KEYWORDS: [&str; 24] = [
    "great", "terrible", "world", "sports", "business", "science", "good", "bad", "fun", "boring",
    "smart", "dull", "warm", "cold", "bright", "dark", "calm", "angry", "fresh", "stale", "rich",
    "poor", "benign", "hatespeech",
];

const TEMPLATES: [&str; 4] = ["It was {}", "It is {}.", "This is {}", "It is {} news."];

fn keyword(c: usize) -> String {
    KEYWORDS
        .get(c)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("kw{c}"))
}

fn filler_sentence(rng: &mut Rng, keywords: &[&str]) -> String {
    let len = 5 + rng.below(6);
    let mut words: Vec<&str> = (0..len).map(|_| FILLER[rng.below(FILLER.len())]).collect();
    for kw in keywords {
        let pos = rng.below(words.len() + 1);
        words.insert(pos, kw);
    }
    words.join(" ")
}

fn keyword_sentence(rng: &mut Rng, own: usize, keywords: &[String], separability: f64) -> String {
    let kw = if rng.bernoulli(separability) {
        own
    } else {
        rng.below(keywords.len())
    };
    filler_sentence(rng, &[keywords[kw].as_str()])
}

fn single_spec(name: &str, class_names: &[String], descriptions: &[String]) -> TaskSpec {
    TaskSpec {
        name: name.to_string(),
        kind: TaskKind::SingleSentence,
        labels: class_names
            .iter()
            .enumerate()
            .map(|(i, n)| LabelDef {
                class_id: i,
                class_name: n.clone(),
            })
            .collect(),
        descriptions: descriptions.iter().cloned().enumerate().collect(),
        metric: MetricKind::Accuracy,
        score_range: None,
    }
}

/// Task spec used by [`gen_synthetic`] for `n_classes` classes.
pub fn synthetic_spec(n_classes: usize) -> TaskSpec {
    let names: Vec<String> = (0..n_classes).map(|c| format!("class_{c}")).collect();
    let descs: Vec<String> = (0..n_classes).map(|c| format!("It was {}", keyword(c))).collect();
    single_spec(&format!("synthetic{n_classes}"), &names, &descs)
}

pub fn gen_synthetic(
    seed: u64,
    n_per_class: usize,
    n_classes: usize,
    separability: f64,
) -> Result<Dataset> {
    if n_per_class < 1 || n_classes < 2 {
        return Err(Error::precondition(
            "gen_synthetic needs n_per_class >= 1 and n_classes >= 2",
        ));
    }
    let keywords: Vec<String> = (0..n_classes).map(keyword).collect();
    gen_keyword_dataset(
        Arc::new(synthetic_spec(n_classes)),
        &keywords,
        &vec![n_per_class; n_classes],
        separability,
        seed,
        "train",
    )
}

/// Single-sentence dataset with explicit per-class counts.
pub fn gen_keyword_dataset(
    task: Arc<TaskSpec>,
    keywords: &[String],
    counts: &[usize],
    separability: f64,
    seed: u64,
    split_name: &str,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&separability) {
        return Err(Error::precondition("separability must lie in [0, 1]"));
    }
    if keywords.len() != counts.len() || counts.len() != task.n_classes() {
        return Err(Error::precondition("one keyword and one count per class"));
    }
    let mut rng = Rng::new(seed);
    let mut records = Vec::with_capacity(counts.iter().sum());
    for (class, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let text = keyword_sentence(&mut rng, class, keywords, separability);
            records.push(Record::new(
                format!("{split_name}{seed}-{class}-{i}"),
                text,
                Some(Label::Class(class)),
            ));
        }
    }
    Dataset::new(task, split_name, records, false)
}

#[derive(Debug, Clone)]
enum Shape {
    Single {
        keywords: Vec<String>,
        separability: f64,
    },
    Paraphrase,
    Nli,
    Similarity,
}

/// A named synthetic task with fixed train/test sizes.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: Arc<TaskSpec>,
    shape: Shape,
    train_counts: Vec<usize>,
    test_counts: Vec<usize>,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn single_fixture(
    name: &str,
    class_names: &[&str],
    keywords: &[&str],
    descriptions: &[String],
    separability: f64,
    train_counts: Vec<usize>,
    test_counts: Vec<usize>,
) -> Fixture {
    Fixture {
        spec: Arc::new(single_spec(name, &strings(class_names), descriptions)),
        shape: Shape::Single {
            keywords: strings(keywords),
            separability,
        },
        train_counts,
        test_counts,
    }
}

fn pair_spec(name: &str, class_names: &[&str], metric: MetricKind) -> TaskSpec {
    TaskSpec {
        name: name.to_string(),
        kind: TaskKind::SentencePair,
        labels: class_names
            .iter()
            .enumerate()
            .map(|(i, n)| LabelDef {
                class_id: i,
                class_name: n.to_string(),
            })
            .collect(),
        descriptions: BTreeMap::new(),
        metric,
        score_range: None,
    }
}

const SWEEP_PAIRS: [(&str, &str); 4] = [
    ("terrible", "great"),
    ("bad", "good"),
    ("boring", "fun"),
    ("dull", "smart"),
];

pub const SWEEP_FIXTURES: usize = 11;

fn all_fixtures() -> Vec<Fixture> {
    let was = |kw: &str| format!("It was {kw}");
    let mut out = vec![
        single_fixture(
            "sst2_fixture",
            &["negative", "positive"],
            &["terrible", "great"],
            &[was("terrible"), was("great")],
            1.0,
            vec![100, 100],
            vec![200, 200],
        ),
        single_fixture(
            "hard_fixture",
            &["negative", "positive"],
            &["terrible", "great"],
            &[was("terrible"), was("great")],
            0.6,
            vec![100, 100],
            vec![200, 200],
        ),
        single_fixture(
            "agnews_fixture",
            &["world", "sports", "business", "science"],
            &["world", "sports", "business", "science"],
            &["world", "sports", "business", "science"].map(|k| format!("It is {k} news.")),
            1.0,
            vec![50; 4],
            vec![100; 4],
        ),
        single_fixture(
            "os_fixture",
            &["benign", "hatespeech"],
            &["benign", "hatespeech"],
            &[was("benign"), was("hatespeech")],
            1.0,
            vec![334, 166],
            vec![668, 332],
        ),
        Fixture {
            spec: Arc::new(pair_spec(
                "qqp_fixture",
                &["not_duplicate", "duplicate"],
                MetricKind::BinaryF1,
            )),
            shape: Shape::Paraphrase,
            train_counts: vec![126, 74],
            test_counts: vec![630, 370],
        },
        Fixture {
            spec: Arc::new(pair_spec(
                PRETRAIN_FIXTURE,
                &["entailment", "neutral", "contradiction"],
                MetricKind::Accuracy,
            )),
            shape: Shape::Nli,
            train_counts: vec![300; 3],
            test_counts: vec![100; 3],
        },
        Fixture {
            spec: Arc::new(TaskSpec {
                name: "stsb_fixture".into(),
                kind: TaskKind::Regression,
                labels: vec![],
                descriptions: BTreeMap::new(),
                metric: MetricKind::Pearson,
                score_range: Some((0.0, 5.0)),
            }),
            shape: Shape::Similarity,
            train_counts: vec![200],
            test_counts: vec![200],
        },
    ];
    for i in 0..SWEEP_FIXTURES {
        let (neg, pos) = SWEEP_PAIRS[i % SWEEP_PAIRS.len()];
        out.push(single_fixture(
            &format!("sweep{i}_fixture"),
            &["negative", "positive"],
            &[neg, pos],
            &[was(neg), was(pos)],
            0.8,
            vec![60, 60],
            vec![100, 100],
        ));
    }
    out
}

pub fn fixture_specs() -> Vec<TaskSpec> {
    all_fixtures().into_iter().map(|f| (*f.spec).clone()).collect()
}

pub fn fixture(name: &str) -> Option<Fixture> {
    all_fixtures().into_iter().find(|f| f.spec.name == name)
}

pub fn fixture_names() -> Vec<String> {
    all_fixtures().into_iter().map(|f| f.spec.name.to_string()).collect()
}

/// Names of the sweep fixtures, `sweep0_fixture` .. `sweep10_fixture`.
pub fn sweep_fixture_names() -> Vec<String> {
    (0..SWEEP_FIXTURES).map(|i| format!("sweep{i}_fixture")).collect()
}

impl Fixture {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn train(&self) -> Result<Dataset> {
        self.generate("train", &self.train_counts, FIXTURE_DATA_SEED)
    }

    pub fn test(&self) -> Result<Dataset> {
        self.generate(
            "test",
            &self.test_counts,
            Rng::derive(FIXTURE_DATA_SEED, &[1]).state(),
        )
    }

    fn generate(&self, split: &str, counts: &[usize], seed: u64) -> Result<Dataset> {
        let task = Arc::clone(&self.spec);
        match &self.shape {
            Shape::Single {
                keywords,
                separability,
            } => gen_keyword_dataset(task, keywords, counts, *separability, seed, split),
            Shape::Paraphrase => gen_paraphrase(task, counts, seed, split),
            Shape::Nli => gen_nli(task, counts, seed, split),
            Shape::Similarity => gen_similarity(task, counts[0], seed, split),
        }
    }
}

fn other_keyword(rng: &mut Rng, not: usize) -> usize {
    let r = rng.below(KEYWORDS.len() - 1);
    if r >= not {
        r + 1
    } else {
        r
    }
}

/// Class 1 pairs share their keyword, class 0 pairs do not.
fn gen_paraphrase(task: Arc<TaskSpec>, counts: &[usize], seed: u64, split: &str) -> Result<Dataset> {
    let mut rng = Rng::new(seed);
    let mut records = Vec::new();
    for (class, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let k1 = rng.below(KEYWORDS.len());
            let k2 = if class == 1 { k1 } else { other_keyword(&mut rng, k1) };
            let a = filler_sentence(&mut rng, &[KEYWORDS[k1]]);
            let b = filler_sentence(&mut rng, &[KEYWORDS[k2]]);
            records.push(
                Record::new(format!("{split}{seed}-{class}-{i}"), a, Some(Label::Class(class)))
                    .with_text_b(b),
            );
        }
    }
    Dataset::new(task, split, records, false)
}

/// Entailment: the hypothesis restates the premise keyword through a short
/// template. Contradiction: a different keyword. Neutral: a filler clause
/// with an unrelated keyword.
fn gen_nli(task: Arc<TaskSpec>, counts: &[usize], seed: u64, split: &str) -> Result<Dataset> {
    let mut rng = Rng::new(seed);
    let mut records = Vec::new();
    for (class, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let k = rng.below(KEYWORDS.len());
            let premise = filler_sentence(&mut rng, &[KEYWORDS[k]]);
            let template = TEMPLATES[rng.below(TEMPLATES.len())];
            let hypothesis = match class {
                0 => template.replace("{}", KEYWORDS[k]),
                1 => {
                    let other = other_keyword(&mut rng, k);
                    filler_sentence(&mut rng, &[KEYWORDS[other]])
                }
                _ => {
                    let other = other_keyword(&mut rng, k);
                    template.replace("{}", KEYWORDS[other])
                }
            };
            records.push(
                Record::new(format!("{split}{seed}-{class}-{i}"), premise, Some(Label::Class(class)))
                    .with_text_b(hypothesis),
            );
        }
    }
    Dataset::new(task, split, records, false)
}

/// Score is 5·(shared keywords)/3 for sentences carrying three keywords each.
fn gen_similarity(task: Arc<TaskSpec>, n: usize, seed: u64, split: &str) -> Result<Dataset> {
    let mut rng = Rng::new(seed);
    let mut records = Vec::new();
    for i in 0..n {
        let picked = rng.sample_indices(KEYWORDS.len(), 6);
        let shared = rng.below(4);
        let a_kw: Vec<&str> = picked[..3].iter().map(|&k| KEYWORDS[k]).collect();
        let b_kw: Vec<&str> = picked[..shared]
            .iter()
            .chain(&picked[3..6 - shared])
            .map(|&k| KEYWORDS[k])
            .collect();
        let a = filler_sentence(&mut rng, &a_kw);
        let b = filler_sentence(&mut rng, &b_kw);
        let score = 5.0 * shared as f64 / 3.0;
        records.push(Record::new(format!("{split}{seed}-{i}"), a, Some(Label::Score(score))).with_text_b(b));
    }
    Dataset::new(task, split, records, false)
}

/// Copy of `dataset` with every word's characters reversed and the records
/// tagged with `language`; a stand-in for an unseen-language test set.
pub fn pseudo_language(dataset: &Dataset, language: &str) -> Dataset {
    let reverse = |s: &str| -> String {
        s.split_ascii_whitespace()
            .map(|w| w.chars().rev().collect::<String>())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let records = dataset
        .records
        .iter()
        .map(|r| Record {
            uid: format!("{language}-{}", r.uid),
            text_a: reverse(&r.text_a),
            text_b: r.text_b.as_deref().map(reverse),
            label: r.label,
            language: Some(language.to_string()),
        })
        .collect();
    Dataset {
        task: Arc::clone(&dataset.task),
        split_name: dataset.split_name.clone(),
        unlabeled: dataset.unlabeled,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::records_to_jsonl;

    #[test]
    fn same_seed_same_bytes() {
        let a = records_to_jsonl(&gen_synthetic(7, 10, 2, 1.0).unwrap());
        let b = records_to_jsonl(&gen_synthetic(7, 10, 2, 1.0).unwrap());
        assert_eq!(a, b);
        let c = records_to_jsonl(&gen_synthetic(8, 10, 2, 1.0).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn counts_per_class() {
        let ds = gen_synthetic(7, 10, 4, 1.0).unwrap();
        assert_eq!(ds.len(), 40);
        for (_, recs) in ds.by_class() {
            assert_eq!(recs.len(), 10);
        }
    }

    #[test]
    fn full_separability_puts_own_keyword_in_every_sentence() {
        let ds = gen_synthetic(3, 30, 4, 1.0).unwrap();
        for r in &ds.records {
            let c = r.label.unwrap().class().unwrap();
            assert!(r.text_a.split(' ').any(|w| w == keyword(c)), "{}", r.text_a);
        }
    }

    #[test]
    fn zero_separability_spreads_keywords() {
        let ds = gen_synthetic(3, 400, 2, 0.0).unwrap();
        let own = ds
            .records
            .iter()
            .filter(|r| {
                let c = r.label.unwrap().class().unwrap();
                r.text_a.split(' ').any(|w| w == keyword(c))
            })
            .count();
        let frac = own as f64 / ds.len() as f64;
        assert!((frac - 0.5).abs() < 0.06, "{frac}");
    }

    #[test]
    fn preconditions() {
        assert!(gen_synthetic(1, 0, 2, 1.0).is_err());
        assert!(gen_synthetic(1, 3, 1, 1.0).is_err());
    }

    #[test]
    fn fixtures_build_and_have_expected_ratios() {
        for name in fixture_names() {
            let f = fixture(&name).unwrap();
            let train = f.train().unwrap();
            let test = f.test().unwrap();
            assert!(!train.is_empty() && !test.is_empty(), "{name}");
            let train_uids: std::collections::HashSet<_> = train.records.iter().map(|r| &r.uid).collect();
            assert!(test.records.iter().all(|r| !train_uids.contains(&r.uid)), "{name}");
        }
        let os = fixture("os_fixture").unwrap().test().unwrap();
        let benign = os.records.iter().filter(|r| r.label == Some(Label::Class(0))).count();
        assert_eq!(benign as f64 / os.len() as f64, 0.668);
    }

    #[test]
    fn similarity_scores_stay_in_range() {
        let ds = fixture("stsb_fixture").unwrap().train().unwrap();
        assert!(ds.records.iter().all(|r| {
            let s = r.label.unwrap().score().unwrap();
            (0.0..=5.0).contains(&s)
        }));
    }

    #[test]
    fn pseudo_language_reverses_words() {
        let ds = gen_synthetic(1, 1, 2, 1.0).unwrap();
        let xx = pseudo_language(&ds, "xx");
        let first = &xx.records[0];
        assert_eq!(first.language.as_deref(), Some("xx"));
        let orig: Vec<&str> = ds.records[0].text_a.split(' ').collect();
        let rev: Vec<String> = first.text_a.split(' ').map(|w| w.chars().rev().collect()).collect();
        assert_eq!(orig, rev);
    }
}
