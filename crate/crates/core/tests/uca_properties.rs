use std::collections::BTreeMap;

use efl_core::corpus::synthetic::fixture;
use efl_core::corpus::TaskKind;
use efl_core::reformulator::{reformulate_binary, Provenance};
use efl_core::uca::{
    apply_transform, build_uca_set, delete_word_span, delete_words, draw_transform, AugmentConfig, Mix, Strength,
    Transform,
};
use efl_core::Rng;

const SENTENCE: &str = "the quick brown fox jumps over the lazy dog today";

// Expected strings come from a separate Python implementation of the
// generator and the partial Fisher-Yates draw.
#[test]
fn seed_42_golden_outputs() {
    assert_eq!(delete_words(SENTENCE, 0.40, &mut Rng::new(42)).unwrap(), "the quick the lazy dog today");
    assert_eq!(
        delete_words(SENTENCE, 0.15, &mut Rng::new(42)).unwrap(),
        "the quick jumps over the lazy dog today"
    );
    assert_eq!(
        delete_word_span(SENTENCE, 2, &mut Rng::new(42)).unwrap(),
        "the fox jumps over the lazy dog today"
    );
    assert_eq!(Rng::new(42).sample_indices(100, 8), vec![13, 83, 86, 9, 2, 27, 87, 45]);
}

fn fixture_sentences(n: usize) -> Vec<String> {
    let train = fixture("sst2_fixture").unwrap().train().unwrap();
    let mut rng = Rng::new(11);
    rng.sample_indices(train.len(), n)
        .into_iter()
        .map(|i| train.records[i].text_a.clone())
        .collect()
}

fn expected_after_deletion(w: usize, p: f64) -> usize {
    let k = (p * w as f64).round() as usize;
    w - k.min(w - 1)
}

#[test]
fn word_deletion_arithmetic_on_fixture_sentences() {
    let mut rng = Rng::new(3);
    for s in fixture_sentences(100) {
        let w = s.split_whitespace().count();
        for p in [Strength::positive().p_del_words, Strength::negative().p_del_words] {
            let out = delete_words(&s, p, &mut rng).unwrap();
            assert_eq!(out.split_whitespace().count(), expected_after_deletion(w, p), "{s:?} at {p}");
        }
    }
}

#[test]
fn no_transform_empties_a_sentence() {
    let mut rng = Rng::new(4);
    let mut inputs = fixture_sentences(30);
    inputs.extend(["a".to_string(), "ab".to_string(), "one two".to_string(), "x y z".to_string()]);
    for s in &inputs {
        for strength in [Strength::positive(), Strength::negative()] {
            for t in Transform::ALL {
                for _ in 0..5 {
                    let out = apply_transform(t, s, &strength, None, &mut rng).unwrap();
                    assert!(!out.trim().is_empty(), "{t:?} emptied {s:?}");
                }
            }
        }
    }
}

fn binary_train(seed: u64) -> Vec<efl_core::reformulator::EntailmentInstance> {
    let train = fixture("sst2_fixture").unwrap().train().unwrap();
    let split = efl_core::protocol::sample_few_shot(&train, 8, seed).unwrap();
    let few = train.subset("few", &split.uids()).unwrap();
    reformulate_binary(&few, "It was great").unwrap()
}

#[test]
fn eight_positives_and_eight_negatives_per_class() {
    let train = binary_train(1);
    let extra = build_uca_set(&train, TaskKind::SingleSentence, &AugmentConfig::default(), &mut Rng::new(1)).unwrap();
    let mut counts: BTreeMap<(Option<usize>, bool), usize> = BTreeMap::new();
    for inst in &extra {
        let positive = inst.provenance == Provenance::UcaPositive;
        *counts.entry((inst.source_class, positive)).or_default() += 1;
        assert_ne!(inst.provenance, Provenance::Original);
    }
    assert_eq!(
        counts,
        BTreeMap::from([((Some(0), false), 8), ((Some(0), true), 8), ((Some(1), false), 8), ((Some(1), true), 8)])
    );
}

#[test]
fn downsample_fraction_over_a_thousand_negatives() {
    let train = binary_train(2);
    let cfg = AugmentConfig {
        per_class_budget: 500,
        ..AugmentConfig::default()
    };
    let extra = build_uca_set(&train, TaskKind::SingleSentence, &cfg, &mut Rng::new(2)).unwrap();
    let negatives: Vec<_> = extra.iter().filter(|i| i.provenance != Provenance::UcaPositive).collect();
    assert_eq!(negatives.len(), 1000);
    let down = negatives.iter().filter(|i| i.provenance == Provenance::DownsampleNegative).count();
    let frac = down as f64 / 1000.0;
    assert!((0.66..=0.74).contains(&frac), "downsample fraction {frac}");
    assert!(negatives.iter().all(|i| i.target == Some(0.0)));
}

#[test]
fn positive_mix_frequencies() {
    let mix = Mix::default();
    let mut rng = Rng::new(8);
    let draws = 20_000;
    let mut counts: BTreeMap<Transform, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(draw_transform(&mix, &mut rng)).or_default() += 1;
    }
    let mut chi2 = 0.0;
    for t in Transform::ALL {
        let expected = mix.weight(t) * draws as f64;
        let seen = *counts.get(&t).unwrap_or(&0) as f64;
        if expected == 0.0 {
            assert_eq!(seen, 0.0, "{t:?} has zero weight");
            continue;
        }
        assert!((seen / draws as f64 - mix.weight(t)).abs() <= 0.02, "{t:?}");
        chi2 += (seen - expected).powi(2) / expected;
    }
    // 99.9th percentile of chi-square with 3 degrees of freedom.
    assert!(chi2 < 16.27, "chi-square {chi2}");
}

#[test]
fn augmentation_is_deterministic() {
    let train = binary_train(3);
    let a = build_uca_set(&train, TaskKind::SingleSentence, &AugmentConfig::default(), &mut Rng::new(9)).unwrap();
    let b = build_uca_set(&train, TaskKind::SingleSentence, &AugmentConfig::default(), &mut Rng::new(9)).unwrap();
    assert_eq!(a, b);
}
