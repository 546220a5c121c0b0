//! Unsupervised contrastive augmentation.
//!
//! Because every training example is a sentence pair, new pairs can be
//! synthesized without labels: a lightly perturbed copy of a sentence should
//! still be entailed by the original, while two unrelated training sentences,
//! or a sentence and a heavily mangled copy of itself, should not.

mod transforms;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::reformulator::{EntailmentInstance, Provenance};
use crate::rng::{round_count, Rng};

pub use transforms::{
    delete_chars, delete_word_span, delete_words, reorder_spans, reorder_word_spans, reorder_words,
    substitute_synonyms, swap_blocks, Lexicon, Substitution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    CharDelete,
    SpanReorder,
    WordDelete,
    WordReorder,
    SpanDelete,
    Synonym,
}

impl Transform {
    pub const ALL: [Transform; 6] = [
        Transform::CharDelete,
        Transform::SpanReorder,
        Transform::WordDelete,
        Transform::WordReorder,
        Transform::SpanDelete,
        Transform::Synonym,
    ];
}

/// Mixture weights over the transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    pub char_delete: f64,
    pub span_reorder: f64,
    pub word_delete: f64,
    pub word_reorder: f64,
    #[serde(default)]
    pub span_delete: f64,
    #[serde(default)]
    pub synonym: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Self {
            char_delete: 0.10,
            span_reorder: 0.10,
            word_delete: 0.40,
            word_reorder: 0.40,
            span_delete: 0.0,
            synonym: 0.0,
        }
    }
}

impl Mix {
    pub fn only(t: Transform) -> Self {
        let mut m = Mix {
            char_delete: 0.0,
            span_reorder: 0.0,
            word_delete: 0.0,
            word_reorder: 0.0,
            span_delete: 0.0,
            synonym: 0.0,
        };
        *m.weight_mut(t) = 1.0;
        m
    }

    pub fn weight(&self, t: Transform) -> f64 {
        match t {
            Transform::CharDelete => self.char_delete,
            Transform::SpanReorder => self.span_reorder,
            Transform::WordDelete => self.word_delete,
            Transform::WordReorder => self.word_reorder,
            Transform::SpanDelete => self.span_delete,
            Transform::Synonym => self.synonym,
        }
    }

    fn weight_mut(&mut self, t: Transform) -> &mut f64 {
        match t {
            Transform::CharDelete => &mut self.char_delete,
            Transform::SpanReorder => &mut self.span_reorder,
            Transform::WordDelete => &mut self.word_delete,
            Transform::WordReorder => &mut self.word_reorder,
            Transform::SpanDelete => &mut self.span_delete,
            Transform::Synonym => &mut self.synonym,
        }
    }

    fn validate(&self, name: &str, failed: &mut Vec<String>) {
        let mut total = 0.0;
        for t in Transform::ALL {
            let w = self.weight(t);
            if !(0.0..=1.0).contains(&w) {
                failed.push(format!("{name}: weight {w} for {t:?} outside [0, 1]"));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            failed.push(format!("{name}: weights sum to {total}, not 1"));
        }
    }
}

/// One draw from the mixture; consumes one generator step.
pub fn draw_transform(mix: &Mix, rng: &mut Rng) -> Transform {
    let u = rng.next_f64();
    let mut acc = 0.0;
    let mut last = Transform::WordDelete;
    for t in Transform::ALL {
        let w = mix.weight(t);
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = t;
        if u < acc {
            return t;
        }
    }
    last
}

/// Transform parameters for one augmentation strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strength {
    pub p_del_chars: f64,
    pub span_char_frac: f64,
    pub n_span_pairs: usize,
    pub p_del_words: f64,
    pub n_word_pairs: usize,
    /// Length of each swapped word span as a fraction of the word count;
    /// 0 swaps single words.
    pub word_pair_frac: f64,
    pub span_del_words: usize,
    pub n_sub_words: usize,
}

impl Strength {
    pub fn positive() -> Self {
        Self {
            p_del_chars: 0.15,
            span_char_frac: 0.05,
            n_span_pairs: 3,
            p_del_words: 0.15,
            n_word_pairs: 2,
            word_pair_frac: 0.0,
            span_del_words: 2,
            n_sub_words: 2,
        }
    }

    pub fn negative() -> Self {
        Self {
            p_del_chars: 0.40,
            span_char_frac: 0.25,
            n_span_pairs: 3,
            p_del_words: 0.40,
            n_word_pairs: 2,
            word_pair_frac: 0.40,
            span_del_words: 2,
            n_sub_words: 2,
        }
    }

    fn validate(&self, name: &str, failed: &mut Vec<String>) {
        for (field, v) in [
            ("p_del_chars", self.p_del_chars),
            ("p_del_words", self.p_del_words),
        ] {
            if !(0.0..1.0).contains(&v) {
                failed.push(format!("{name}.{field} = {v} outside [0, 1)"));
            }
        }
        for (field, v) in [
            ("span_char_frac", self.span_char_frac),
            ("word_pair_frac", self.word_pair_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                failed.push(format!("{name}.{field} = {v} outside [0, 1]"));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub positive: Strength,
    pub negative: Strength,
    pub positive_mix: Mix,
    pub negative_mix: Mix,
    /// Share of negatives built by pairing sentences from different
    /// instances; the rest come from aggressive augmentation.
    pub neg_downsample_frac: f64,
    pub per_class_budget: usize,
    #[serde(skip)]
    pub lexicon: Option<Lexicon>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            positive: Strength::positive(),
            negative: Strength::negative(),
            positive_mix: Mix::default(),
            negative_mix: Mix::default(),
            neg_downsample_frac: 0.70,
            per_class_budget: 8,
            lexicon: None,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut failed = Vec::new();
        self.positive.validate("positive", &mut failed);
        self.negative.validate("negative", &mut failed);
        self.positive_mix.validate("positive_mix", &mut failed);
        self.negative_mix.validate("negative_mix", &mut failed);
        if !(0.0..=1.0).contains(&self.neg_downsample_frac) {
            failed.push(format!("neg_downsample_frac {} outside [0, 1]", self.neg_downsample_frac));
        }
        if self.per_class_budget < 1 {
            failed.push("per_class_budget must be at least 1".into());
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failed))
        }
    }
}

/// Applies one transform with the given strength.
pub fn apply_transform(
    t: Transform,
    sentence: &str,
    strength: &Strength,
    lexicon: Option<&Lexicon>,
    rng: &mut Rng,
) -> Result<String> {
    if sentence.trim().is_empty() {
        return Err(Error::precondition("cannot augment an empty sentence"));
    }
    match t {
        Transform::CharDelete => delete_chars(sentence, strength.p_del_chars, rng),
        Transform::SpanReorder => Ok(reorder_spans(
            sentence,
            strength.span_char_frac,
            strength.n_span_pairs,
            rng,
        )),
        Transform::WordDelete => delete_words(sentence, strength.p_del_words, rng),
        Transform::WordReorder => {
            let n_words = sentence.split_ascii_whitespace().count();
            let span = round_count(strength.word_pair_frac, n_words).max(1);
            reorder_word_spans(sentence, strength.n_word_pairs, span, rng)
        }
        Transform::SpanDelete => delete_word_span(sentence, strength.span_del_words, rng),
        Transform::Synonym => {
            let empty = Lexicon::new();
            substitute_synonyms(sentence, strength.n_sub_words, lexicon.unwrap_or(&empty), rng)
                .map(|s| s.text)
        }
    }
}

/// Meaning-preserving augmentation; returns the drawn transform too.
pub fn augment_positive_traced(sentence: &str, cfg: &AugmentConfig, rng: &mut Rng) -> Result<(Transform, String)> {
    let t = draw_transform(&cfg.positive_mix, rng);
    let out = apply_transform(t, sentence, &cfg.positive, cfg.lexicon.as_ref(), rng)?;
    Ok((t, out))
}

pub fn augment_positive(sentence: &str, cfg: &AugmentConfig, rng: &mut Rng) -> Result<String> {
    augment_positive_traced(sentence, cfg, rng).map(|(_, s)| s)
}

/// Meaning-destroying augmentation with the negative-strength parameters.
pub fn augment_negative_traced(sentence: &str, cfg: &AugmentConfig, rng: &mut Rng) -> Result<(Transform, String)> {
    let t = draw_transform(&cfg.negative_mix, rng);
    let out = apply_transform(t, sentence, &cfg.negative, cfg.lexicon.as_ref(), rng)?;
    Ok((t, out))
}

pub fn augment_negative_aggressive(sentence: &str, cfg: &AugmentConfig, rng: &mut Rng) -> Result<String> {
    augment_negative_traced(sentence, cfg, rng).map(|(_, s)| s)
}

/// Builds the augmented pairs for a reformulated training set.
///
/// Per source class (instances grouped by `source_class`), `per_class_budget`
/// positives and `per_class_budget` negatives are produced:
///
/// * single-sentence tasks: `(S1, S1')` with target 1, or `(S1', p)` keeping
///   the source target, with equal probability;
/// * pair and regression tasks: `(S1, S2')` or `(S1', S2)`, keeping the
///   source target;
/// * negatives: with probability `neg_downsample_frac` the first sentence of
///   a class instance paired with the first sentence of an instance from
///   another class, otherwise `(S1, S1'')` with an aggressive augmentation.
///
/// Only new instances are returned; callers append them to the originals.
pub fn build_uca_set(
    train: &[EntailmentInstance],
    task_kind: TaskKind,
    cfg: &AugmentConfig,
    rng: &mut Rng,
) -> Result<Vec<EntailmentInstance>> {
    cfg.validate()?;
    if train.len() < 2 {
        return Err(Error::precondition(format!(
            "augmentation needs at least 2 original instances, got {}",
            train.len()
        )));
    }
    if let Some(bad) = train.iter().find(|i| i.provenance != Provenance::Original) {
        return Err(Error::precondition(format!("{} is not an original instance", bad.uid)));
    }
    if let Some(bad) = train.iter().find(|i| i.target.is_none()) {
        return Err(Error::precondition(format!("{} has no target", bad.uid)));
    }

    let mut groups: BTreeMap<Option<usize>, Vec<&EntailmentInstance>> = BTreeMap::new();
    for inst in train {
        groups.entry(inst.source_class).or_default().push(inst);
    }

    let budget = cfg.per_class_budget;
    let mut out = Vec::with_capacity(groups.len() * budget * 2);
    for (class, members) in &groups {
        let class_tag = class.map_or_else(|| "all".to_string(), |c| c.to_string());
        for n in 0..budget {
            let src = members[rng.below(members.len())];
            let (premise, hypothesis, target) = match task_kind {
                TaskKind::SingleSentence => {
                    let aug = augment_positive(&src.premise, cfg, rng)?;
                    if rng.bernoulli(0.5) {
                        (src.premise.clone(), aug, Some(1.0))
                    } else {
                        (aug, src.hypothesis.clone(), src.target)
                    }
                }
                TaskKind::SentencePair | TaskKind::Regression => {
                    if rng.bernoulli(0.5) {
                        let aug = augment_positive(&src.hypothesis, cfg, rng)?;
                        (src.premise.clone(), aug, src.target)
                    } else {
                        let aug = augment_positive(&src.premise, cfg, rng)?;
                        (aug, src.hypothesis.clone(), src.target)
                    }
                }
            };
            out.push(EntailmentInstance {
                uid: format!("{}~uca{class_tag}+{n}", src.uid),
                premise,
                hypothesis,
                target,
                provenance: Provenance::UcaPositive,
                source_class: *class,
            });
        }
        for n in 0..budget {
            if rng.bernoulli(cfg.neg_downsample_frac) {
                let anchor = members[rng.below(members.len())];
                let mut contrast: Vec<&EntailmentInstance> =
                    train.iter().filter(|i| i.source_class != *class).collect();
                if contrast.is_empty() {
                    contrast = train.iter().filter(|i| i.premise != anchor.premise).collect();
                }
                if contrast.is_empty() {
                    contrast = train.iter().filter(|i| i.uid != anchor.uid).collect();
                }
                let other = contrast[rng.below(contrast.len())];
                out.push(EntailmentInstance {
                    uid: format!("{}~uca{class_tag}-{n}", anchor.uid),
                    premise: anchor.premise.clone(),
                    hypothesis: other.premise.clone(),
                    target: Some(0.0),
                    provenance: Provenance::DownsampleNegative,
                    source_class: *class,
                });
            } else {
                let src = members[rng.below(members.len())];
                let aug = augment_negative_aggressive(&src.premise, cfg, rng)?;
                out.push(EntailmentInstance {
                    uid: format!("{}~uca{class_tag}-{n}", src.uid),
                    premise: src.premise.clone(),
                    hypothesis: aug,
                    target: Some(0.0),
                    provenance: Provenance::UcaNegative,
                    source_class: *class,
                });
            }
        }
    }
    Ok(out)
}
