//! In-process backend: hashed sparse features and a linear output layer.
//!
//! Each pair is mapped to six L2-normalized feature blocks hashed into
//! 2^18 buckets with FNV-1a: premise words, hypothesis words, premise and
//! hypothesis character 2–4-grams, character n-grams that straddle a
//! boundary marker in `premise ‖ hypothesis`, and hypothesis words that also
//! occur in the premise. A dense word-overlap ratio sits in one extra slot.
//! Heads of two or more outputs use softmax cross-entropy; a 1-way head is a
//! linear output trained with squared error.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{check_targets, Backend, BackendConfig, BackendKind, ModelHandle, Target, TextPair, TrainExample};

pub const HASH_BITS: u32 = 18;
pub const HASH_BUCKETS: usize = 1 << HASH_BITS;
/// Width of a weight row: the hashed buckets plus the overlap slot.
pub const FEATURE_DIM: usize = HASH_BUCKETS + 1;
const OVERLAP_SLOT: u32 = HASH_BUCKETS as u32;
const BOUNDARY: char = '\u{241E}';
const MAGIC: &[u8; 4] = b"EFLW";

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn bucket(key: &str) -> u32 {
    (fnv1a(key.as_bytes()) & (HASH_BUCKETS as u64 - 1)) as u32
}

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Features(Vec<(u32, f64)>);

impl Features {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.0
    }
}

#[derive(Default)]
struct Accum(BTreeMap<u32, f64>);

impl Accum {
    /// Adds one L2-normalized block of feature counts.
    fn add_block(&mut self, keys: impl IntoIterator<Item = String>) {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for k in keys {
            *counts.entry(bucket(&k)).or_insert(0.0) += 1.0;
        }
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return;
        }
        for (i, c) in counts {
            *self.0.entry(i).or_insert(0.0) += c / norm;
        }
    }
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn char_ngrams(prefix: &str, text: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    for n in 2..=4 {
        for w in chars.windows(n) {
            out.push(format!("{prefix}{n}:{}", w.iter().collect::<String>()));
        }
    }
}

/// Character n-grams of `premise ‖ hypothesis` that contain the marker.
fn boundary_ngrams(premise: &str, hypothesis: &str) -> Vec<String> {
    let left: Vec<char> = premise.to_lowercase().chars().collect();
    let right: Vec<char> = hypothesis.to_lowercase().chars().collect();
    let mut joined = Vec::with_capacity(7);
    joined.extend(&left[left.len().saturating_sub(3)..]);
    let marker = joined.len();
    joined.push(BOUNDARY);
    joined.extend(&right[..right.len().min(3)]);
    let mut out = Vec::new();
    for n in 2..=4 {
        for start in 0..joined.len().saturating_sub(n - 1) {
            if (start..start + n).contains(&marker) {
                out.push(format!("x:{n}:{}", joined[start..start + n].iter().collect::<String>()));
            }
        }
    }
    out
}

pub fn featurize(premise: &str, hypothesis: &str) -> Features {
    let pw = words(premise);
    let hw = words(hypothesis);
    let mut acc = Accum::default();
    acc.add_block(pw.iter().map(|w| format!("p:w:{w}")));
    acc.add_block(hw.iter().map(|w| format!("h:w:{w}")));
    let mut grams = Vec::new();
    char_ngrams("p:c", premise, &mut grams);
    acc.add_block(grams.drain(..));
    char_ngrams("h:c", hypothesis, &mut grams);
    acc.add_block(grams);
    if !hypothesis.is_empty() {
        acc.add_block(boundary_ngrams(premise, hypothesis));
    }
    let premise_set: BTreeSet<&str> = pw.iter().map(String::as_str).collect();
    let matched: Vec<&String> = hw.iter().filter(|w| premise_set.contains(w.as_str())).collect();
    acc.add_block(matched.iter().map(|w| format!("m:w:{w}")));
    let mut entries: Vec<(u32, f64)> = acc.0.into_iter().collect();
    if !hw.is_empty() && !matched.is_empty() {
        entries.push((OVERLAP_SLOT, matched.len() as f64 / hw.len() as f64));
    }
    Features(entries)
}

/// Dense weight matrix `head_size × FEATURE_DIM` plus a bias per output.
///
/// Weights are stored as `scale · raw` so decoupled weight decay costs O(1)
/// per step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    head_size: usize,
    raw: Vec<f64>,
    scale: f64,
    bias: Vec<f64>,
}

/// Gradient of the mean batch loss: touched weights keyed by
/// `(output, feature)` and the full bias gradient.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub weights: BTreeMap<(usize, u32), f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(head_size: usize) -> Self {
        Self {
            head_size,
            raw: vec![0.0; head_size * FEATURE_DIM],
            scale: 1.0,
            bias: vec![0.0; head_size],
        }
    }

    pub fn head_size(&self) -> usize {
        self.head_size
    }

    pub fn weight(&self, output: usize, feature: u32) -> f64 {
        self.scale * self.raw[output * FEATURE_DIM + feature as usize]
    }

    pub fn set_weight(&mut self, output: usize, feature: u32, value: f64) {
        self.raw[output * FEATURE_DIM + feature as usize] = value / self.scale;
    }

    pub fn bias(&self, output: usize) -> f64 {
        self.bias[output]
    }

    pub fn set_bias(&mut self, output: usize, value: f64) {
        self.bias[output] = value;
    }

    pub fn logits(&self, x: &Features) -> Vec<f64> {
        (0..self.head_size)
            .map(|k| {
                let row = &self.raw[k * FEATURE_DIM..(k + 1) * FEATURE_DIM];
                let dot: f64 = x.0.iter().map(|&(i, v)| row[i as usize] * v).sum();
                self.bias[k] + self.scale * dot
            })
            .collect()
    }

    /// Probabilities for classification heads; a clamped scalar for 1-way
    /// heads.
    pub fn predict(&self, x: &Features) -> Vec<f64> {
        let z = self.logits(x);
        if self.head_size == 1 {
            vec![z[0].clamp(0.0, 1.0)]
        } else {
            softmax(&z)
        }
    }

    /// `d loss / d logits` for one example, along with its loss.
    fn output_grad(&self, x: &Features, target: Target) -> (f64, Vec<f64>) {
        let z = self.logits(x);
        if self.head_size == 1 {
            let y = target.wire_value();
            let d = z[0] - y;
            return (0.5 * d * d, vec![d]);
        }
        let p = softmax(&z);
        let mut q = vec![0.0; self.head_size];
        match target {
            Target::Class(c) => q[c] = 1.0,
            Target::Soft(t) => {
                q[0] = 1.0 - t;
                q[1] = t;
            }
            Target::Scalar(_) => unreachable!("scalar targets are checked against the head size"),
        }
        let loss = -q
            .iter()
            .zip(&p)
            .filter(|(qk, _)| **qk > 0.0)
            .map(|(qk, pk)| qk * pk.max(f64::MIN_POSITIVE).ln())
            .sum::<f64>();
        (loss, p.iter().zip(&q).map(|(pk, qk)| pk - qk).collect())
    }

    /// Mean loss over a batch (weight decay excluded; it is decoupled).
    pub fn loss(&self, batch: &[(Features, Target)]) -> f64 {
        let total: f64 = batch.iter().map(|(x, t)| self.output_grad(x, *t).0).sum();
        total / batch.len() as f64
    }

    pub fn gradient(&self, batch: &[(Features, Target)]) -> Gradient {
        let n = batch.len() as f64;
        let mut grad = Gradient {
            weights: BTreeMap::new(),
            bias: vec![0.0; self.head_size],
        };
        for (x, t) in batch {
            let (_, dz) = self.output_grad(x, *t);
            for (k, &d) in dz.iter().enumerate() {
                grad.bias[k] += d / n;
                for &(i, v) in &x.0 {
                    *grad.weights.entry((k, i)).or_insert(0.0) += d * v / n;
                }
            }
        }
        grad
    }

    fn step(&mut self, grad: &Gradient, lr: f64, weight_decay: f64) {
        let decay = 1.0 - lr * weight_decay;
        if decay != 1.0 {
            self.scale *= decay;
            if self.scale < 1e-6 {
                for w in &mut self.raw {
                    *w *= self.scale;
                }
                self.scale = 1.0;
            }
        }
        for (&(k, i), &g) in &grad.weights {
            self.raw[k * FEATURE_DIM + i as usize] -= lr * g / self.scale;
        }
        for (b, g) in self.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
    }

    /// Seeded mini-batch gradient descent over `data`.
    pub fn fit(&mut self, data: &[(Features, Target)], config: &BackendConfig) {
        let h = &config.hyperparams;
        let batch = h.batch_size.max(1);
        let steps_per_epoch = data.len().div_ceil(batch);
        let total = steps_per_epoch * h.max_epochs;
        let warmup = (h.warmup_ratio * total as f64).round() as usize;
        let mut rng = Rng::new(h.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut t = 0;
        for _ in 0..h.max_epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(batch) {
                let lr = scheduled_lr(h.learning_rate, h.warmup_ratio, warmup, total, t);
                let items: Vec<(Features, Target)> = chunk.iter().map(|&i| data[i].clone()).collect();
                let grad = self.gradient(&items);
                self.step(&grad, lr, h.weight_decay);
                t += 1;
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * (self.raw.len() + self.head_size));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.head_size as u32).to_le_bytes());
        out.extend_from_slice(&(FEATURE_DIM as u64).to_le_bytes());
        for b in &self.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for w in &self.raw {
            out.extend_from_slice(&(w * self.scale).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Backend(format!("invalid model file: {m}"));
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("missing header"));
        }
        let head_size = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        if dim != FEATURE_DIM || head_size == 0 {
            return Err(bad("unexpected dimensions"));
        }
        let n = head_size * (dim + 1);
        if bytes.len() != 16 + 8 * n {
            return Err(bad("truncated weights"));
        }
        let mut values = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let bias = values.by_ref().take(head_size).collect();
        let raw = values.collect();
        Ok(Self {
            head_size,
            raw,
            scale: 1.0,
            bias,
        })
    }
}

fn scheduled_lr(base: f64, warmup_ratio: f64, warmup: usize, total: usize, t: usize) -> f64 {
    if warmup_ratio <= 0.0 {
        return base;
    }
    if t < warmup {
        base * (t + 1) as f64 / warmup as f64
    } else {
        base * (total - t) as f64 / (total - warmup).max(1) as f64
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn prepare(examples: &[TrainExample], config: &BackendConfig) -> Result<Vec<(Features, Target)>> {
    config.validate()?;
    check_targets(examples, config.head_size)?;
    Ok(examples
        .iter()
        .map(|ex| (featurize(&ex.premise, &ex.hypothesis), ex.target))
        .collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinBackend;

impl Backend for BuiltinBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Builtin
    }

    fn train(&self, examples: &[TrainExample], config: &BackendConfig) -> Result<ModelHandle> {
        if examples.is_empty() {
            return Err(Error::precondition("cannot train on zero instances"));
        }
        let data = prepare(examples, config)?;
        let mut model = LinearModel::zeros(config.head_size);
        model.fit(&data, config);
        Ok(ModelHandle::builtin(model))
    }

    fn continue_train(
        &self,
        handle: &ModelHandle,
        examples: &[TrainExample],
        config: &BackendConfig,
    ) -> Result<ModelHandle> {
        let base = handle
            .builtin_model()
            .ok_or_else(|| Error::Backend("handle does not belong to the builtin backend".into()))?;
        if examples.is_empty() {
            return Ok(handle.clone());
        }
        let data = prepare(examples, config)?;
        let mut model = if base.head_size() == config.head_size {
            base.clone()
        } else {
            LinearModel::zeros(config.head_size)
        };
        model.fit(&data, config);
        Ok(ModelHandle::builtin(model))
    }

    fn score(&self, handle: &ModelHandle, pairs: &[TextPair]) -> Result<Vec<Vec<f64>>> {
        let model = handle
            .builtin_model()
            .ok_or_else(|| Error::Backend("handle does not belong to the builtin backend".into()))?;
        Ok(pairs.iter().map(|(p, h)| model.predict(&featurize(p, h))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Hyperparams;

    fn cfg(head: usize) -> BackendConfig {
        BackendConfig::new(
            BackendKind::Builtin,
            Hyperparams::few_shot().for_backend(BackendKind::Builtin).with_seed(3),
            head,
        )
    }

    fn ex(p: &str, h: &str, t: Target) -> TrainExample {
        TrainExample {
            uid: p.to_string(),
            premise: p.into(),
            hypothesis: h.into(),
            target: t,
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn features_are_sorted_and_deterministic() {
        let a = featurize("the movie was great", "It was great");
        let b = featurize("the movie was great", "It was great");
        assert_eq!(a, b);
        assert!(a.entries().windows(2).all(|w| w[0].0 < w[1].0));
        assert!(a.entries().iter().any(|&(i, _)| i == OVERLAP_SLOT));
    }

    #[test]
    fn boundary_grams_straddle_the_marker() {
        let grams = boundary_ngrams("abc", "xy");
        assert!(grams.iter().all(|g| g.contains(BOUNDARY)));
        assert_eq!(grams.len(), 2 + 3 + 3);
    }

    #[test]
    fn training_separates_a_toy_set() {
        let data = vec![
            ex("good fine great", "", Target::Class(1)),
            ex("great good", "", Target::Class(1)),
            ex("bad awful", "", Target::Class(0)),
            ex("awful poor bad", "", Target::Class(0)),
        ];
        let handle = BuiltinBackend.train(&data, &cfg(2)).unwrap();
        let probs = BuiltinBackend
            .score(&handle, &[("good great".into(), "".into()), ("bad awful".into(), "".into())])
            .unwrap();
        assert!(probs[0][1] > 0.5 && probs[1][1] < 0.5);
        for row in probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_instances_rejected_and_continue_with_none_is_identity() {
        assert!(BuiltinBackend.train(&[], &cfg(2)).is_err());
        let h = BuiltinBackend
            .train(&[ex("a b", "c", Target::Class(1))], &cfg(2))
            .unwrap();
        let same = BuiltinBackend.continue_train(&h, &[], &cfg(2)).unwrap();
        assert_eq!(h.builtin_model(), same.builtin_model());
    }

    #[test]
    fn head_change_reinitializes() {
        let h = BuiltinBackend
            .train(&[ex("a b", "c", Target::Class(2))], &cfg(3))
            .unwrap();
        let h2 = BuiltinBackend
            .continue_train(&h, &[ex("a b", "c", Target::Class(1))], &cfg(2))
            .unwrap();
        assert_eq!(h2.head_size(), 2);
    }

    #[test]
    fn scalar_head_is_clamped() {
        let h = BuiltinBackend
            .train(&[ex("a b", "c", Target::Scalar(1.0)), ex("d e", "c", Target::Scalar(0.0))], &cfg(1))
            .unwrap();
        let out = BuiltinBackend.score(&h, &[("a b".into(), "c".into())]).unwrap();
        assert_eq!(out[0].len(), 1);
        assert!((0.0..=1.0).contains(&out[0][0]));
    }

    #[test]
    fn bytes_round_trip() {
        let mut m = LinearModel::zeros(2);
        m.set_weight(1, 17, 0.25);
        m.set_bias(0, -1.5);
        let back = LinearModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.weight(1, 17), 0.25);
        assert_eq!(back.bias(0), -1.5);
        assert!(LinearModel::from_bytes(b"nope").is_err());
    }

    #[test]
    fn warmup_then_linear_decay() {
        assert_eq!(scheduled_lr(1.0, 0.0, 0, 10, 5), 1.0);
        assert_eq!(scheduled_lr(1.0, 0.2, 2, 10, 0), 0.5);
        assert_eq!(scheduled_lr(1.0, 0.2, 2, 10, 1), 1.0);
        assert_eq!(scheduled_lr(1.0, 0.2, 2, 10, 2), 1.0);
        assert_eq!(scheduled_lr(1.0, 0.2, 2, 10, 9), 0.125);
    }
}
