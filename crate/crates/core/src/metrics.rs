//! Accuracy, binary F1, macro-F1, Pearson correlation and the majority
//! baseline.
//!
//! Per-class F1 is 0 when a class has no gold and no predicted members.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::MetricKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Class(usize),
    Score(f64),
}

impl Value {
    fn as_class(&self) -> Result<usize> {
        match *self {
            Value::Class(c) => Ok(c),
            Value::Score(s) => Err(Error::precondition(format!("expected a class id, got {s}"))),
        }
    }

    fn as_f64(&self) -> f64 {
        match *self {
            Value::Class(c) => c as f64,
            Value::Score(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub uid: String,
    pub predicted: Value,
    pub gold: Value,
}

impl Prediction {
    pub fn class(uid: impl Into<String>, predicted: usize, gold: usize) -> Self {
        Self {
            uid: uid.into(),
            predicted: Value::Class(predicted),
            gold: Value::Class(gold),
        }
    }

    pub fn score(uid: impl Into<String>, predicted: f64, gold: f64) -> Self {
        Self {
            uid: uid.into(),
            predicted: Value::Score(predicted),
            gold: Value::Score(gold),
        }
    }
}

fn class_pairs(preds: &[Prediction]) -> Result<Vec<(usize, usize)>> {
    if preds.is_empty() {
        return Err(Error::precondition("no predictions"));
    }
    preds
        .iter()
        .map(|p| Ok((p.predicted.as_class()?, p.gold.as_class()?)))
        .collect()
}

pub fn accuracy(preds: &[Prediction]) -> Result<f64> {
    let pairs = class_pairs(preds)?;
    let correct = pairs.iter().filter(|(p, g)| p == g).count();
    Ok(correct as f64 / pairs.len() as f64)
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

fn class_f1(pairs: &[(usize, usize)], class: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &(p, g) in pairs {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    f1_from_counts(tp, fp, fn_)
}

/// F1 of `positive_class` against all others.
pub fn binary_f1(preds: &[Prediction], positive_class: usize) -> Result<f64> {
    Ok(class_f1(&class_pairs(preds)?, positive_class))
}

/// Unweighted mean of per-class F1 over classes `0..n_classes`.
pub fn macro_f1(preds: &[Prediction], n_classes: usize) -> Result<f64> {
    if n_classes == 0 {
        return Err(Error::precondition("macro-F1 needs at least one class"));
    }
    let pairs = class_pairs(preds)?;
    if let Some(&(p, g)) = pairs.iter().find(|(p, g)| *p >= n_classes || *g >= n_classes) {
        return Err(Error::precondition(format!(
            "class id {} outside 0..{n_classes}",
            p.max(g)
        )));
    }
    let total: f64 = (0..n_classes).map(|c| class_f1(&pairs, c)).sum();
    Ok(total / n_classes as f64)
}

/// Pearson correlation between predictions and gold values. Constant
/// series are rejected rather than producing NaN.
pub fn pearson(preds: &[Prediction]) -> Result<f64> {
    if preds.len() < 2 {
        return Err(Error::DegenerateInput("pearson needs at least 2 points".into()));
    }
    let xs: Vec<f64> = preds.iter().map(|p| p.predicted.as_f64()).collect();
    let ys: Vec<f64> = preds.iter().map(|p| p.gold.as_f64()).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("constant predictions".into()));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateInput("constant gold values".into()));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Scores predictions with a task metric. Binary F1 uses class 1 as the
/// positive class.
pub fn evaluate(metric: MetricKind, preds: &[Prediction], n_classes: usize) -> Result<f64> {
    match metric {
        MetricKind::Accuracy => accuracy(preds),
        MetricKind::BinaryF1 => binary_f1(preds, 1),
        MetricKind::MacroF1 => macro_f1(preds, n_classes),
        MetricKind::Pearson => pearson(preds),
    }
}

/// Most frequent class; ties go to the lowest id.
pub fn majority_class(labels: &[usize], n_classes: usize) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::precondition("no labels to take a majority over"));
    }
    let width = n_classes.max(labels.iter().max().map_or(0, |m| m + 1));
    let mut counts = vec![0usize; width];
    for &l in labels {
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Constant prediction of the majority class of `distribution`, scored
/// against `test_gold`.
pub fn majority_baseline(
    distribution: &[usize],
    test_gold: &[usize],
    metric: MetricKind,
    n_classes: usize,
) -> Result<f64> {
    if test_gold.is_empty() {
        return Err(Error::precondition("empty gold labels"));
    }
    let majority = majority_class(distribution, n_classes)?;
    let preds: Vec<Prediction> = test_gold
        .iter()
        .enumerate()
        .map(|(i, &g)| Prediction::class(i.to_string(), majority, g))
        .collect();
    evaluate(metric, &preds, n_classes)
}

pub fn read_predictions<R: BufRead>(input: R) -> Result<Vec<Prediction>> {
    crate::reformulator::read_jsonl(input)
}
