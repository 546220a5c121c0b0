//! Few-shot sampling and the multi-seed experiment runner.
//!
//! Every randomized step of a seed's run draws from its own stream derived
//! from that seed, so seeds can run in any order (or concurrently) and still
//! produce identical reports.

mod analysis;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{
    check_targets, Backend, BackendConfig, BackendKind, Hyperparams, ModelHandle, Target, TextPair,
    TrainExample, ENTAIL,
};
use crate::corpus::{Dataset, Label, MetricKind, Record, TaskKind, TaskSpec};
use crate::error::{Error, Result, StageExt};
use crate::metrics::{evaluate, majority_baseline, Prediction};
use crate::reformulator::{
    expand_for_inference, predict_multiclass, reformulate_binary, reformulate_multiclass, reformulate_pair,
    reformulate_regression, regression_hypothesis, score_from_probability, EntailmentInstance, Provenance,
};
use crate::rng::Rng;
use crate::uca::{build_uca_set, AugmentConfig};

pub use analysis::{ablate_descriptions, multilingual_eval, write_ablation_csv, AblationRow, MultilingualReport};
pub use sweep::{scratch_scores, transfer_sweep, SweepCell, SweepMatrix, SweepTask};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_K: usize = 8;

const STREAM_REFORMULATE: u64 = 1;
const STREAM_AUGMENT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotSplit {
    pub seed: u64,
    pub k: usize,
    /// Regression tasks use bin 0 (below the range midpoint) and bin 1.
    pub uids_per_class: BTreeMap<usize, Vec<String>>,
}

impl FewShotSplit {
    /// All sampled uids, class by class.
    pub fn uids(&self) -> Vec<String> {
        self.uids_per_class.values().flatten().cloned().collect()
    }
}

fn regression_bin(score: f64, range: (f64, f64)) -> usize {
    usize::from(score >= (range.0 + range.1) / 2.0)
}

/// Uniform sample without replacement of `k` records per class, classes in
/// ascending order, all drawn from one generator seeded with `seed`.
pub fn sample_few_shot(dataset: &Dataset, k: usize, seed: u64) -> Result<FewShotSplit> {
    if k == 0 {
        return Err(Error::precondition("k must be at least 1"));
    }
    let task = &dataset.task;
    let groups: BTreeMap<usize, Vec<&Record>> = match (task.kind, task.score_range) {
        (TaskKind::Regression, Some(range)) => {
            let mut bins: BTreeMap<usize, Vec<&Record>> = BTreeMap::from([(0, vec![]), (1, vec![])]);
            for r in &dataset.records {
                if let Some(Label::Score(s)) = r.label {
                    bins.entry(regression_bin(s, range)).or_default().push(r);
                }
            }
            bins
        }
        _ => dataset.by_class(),
    };
    let mut rng = Rng::new(seed);
    let mut uids_per_class = BTreeMap::new();
    for (class, records) in &groups {
        if records.len() < k {
            let class = match task.class_name(*class) {
                Some(name) => name.to_string(),
                None if *class == 0 => "lower half of the score range".to_string(),
                None => "upper half of the score range".to_string(),
            };
            return Err(Error::InsufficientClass {
                class,
                available: records.len(),
                required: k,
            });
        }
        let picked = rng
            .sample_indices(records.len(), k)
            .into_iter()
            .map(|i| records[i].uid.clone())
            .collect();
        uids_per_class.insert(*class, picked);
    }
    Ok(FewShotSplit {
        seed,
        k,
        uids_per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Majority,
    StandardFt,
    Efl,
    EflWoPt,
    Stilts,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Majority => "majority",
            Method::StandardFt => "standard_ft",
            Method::Efl => "efl",
            Method::EflWoPt => "efl_wo_pt",
            Method::Stilts => "stilts",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "majority" => Method::Majority,
            "standard_ft" => Method::StandardFt,
            "efl" => Method::Efl,
            "efl_wo_pt" => Method::EflWoPt,
            "stilts" => Method::Stilts,
            other => return Err(Error::precondition(format!("unknown method {other:?}"))),
        })
    }

    pub fn needs_pretrain(&self) -> bool {
        matches!(self, Method::Efl | Method::Stilts)
    }
}

/// Everything one protocol run needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub train: Dataset,
    pub test: Dataset,
    pub method: Method,
    pub k: usize,
    pub seeds: Vec<u64>,
    /// `Some` adds contrastive augmentation to the training set.
    pub uca: Option<AugmentConfig>,
    /// Entailment corpus for `efl`, source task for `stilts`.
    pub pretrain: Option<Dataset>,
    /// Label descriptions used for reformulation and inference; defaults to
    /// the task's own.
    pub descriptions: BTreeMap<usize, String>,
    pub few_shot: Hyperparams,
    pub full_data: Hyperparams,
    pub parallel: bool,
    pub record_wall_time: bool,
}

impl RunSpec {
    pub fn new(train: Dataset, test: Dataset, method: Method, backend: BackendKind) -> Self {
        let descriptions = train.task.descriptions.clone();
        Self {
            train,
            test,
            method,
            k: DEFAULT_K,
            seeds: DEFAULT_SEEDS.to_vec(),
            uca: None,
            pretrain: None,
            descriptions,
            few_shot: Hyperparams::few_shot().for_backend(backend),
            full_data: Hyperparams::full_data().for_backend(backend),
            parallel: false,
            record_wall_time: false,
        }
    }

    pub fn task(&self) -> &TaskSpec {
        &self.train.task
    }

    pub fn validate(&self) -> Result<()> {
        let mut failed = Vec::new();
        if self.seeds.is_empty() {
            failed.push("at least one seed is required".to_string());
        }
        if self.k == 0 {
            failed.push("k must be at least 1".to_string());
        }
        if self.method.needs_pretrain() && self.pretrain.is_none() {
            failed.push(format!("method {} needs a pretraining source", self.method.name()));
        }
        if self.train.task.name != self.test.task.name {
            failed.push(format!(
                "train split is {} but test split is {}",
                self.train.task.name, self.test.task.name
            ));
        }
        if self.uca.is_some() && !matches!(self.method, Method::Efl | Method::EflWoPt) {
            failed.push("augmentation applies only to efl and efl_wo_pt".to_string());
        }
        if let Some(cfg) = &self.uca {
            if let Err(Error::Validation(v)) = cfg.validate() {
                failed.extend(v);
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failed))
        }
    }
}

/// How a trained model is queried at test time.
#[derive(Debug, Clone, PartialEq)]
pub enum InferenceMode {
    /// Native head over `(text_a, text_b)`; argmax for classes, the scalar
    /// output mapped onto the score range for regression.
    Native,
    /// Single binary entailment pass against the class-1 description.
    BinaryEntailment(String),
    /// One pass per class description, argmax of entailment probability.
    MultiEntailment(BTreeMap<usize, String>),
    /// Entailment probability against the description (or `text_b`) mapped
    /// onto the score range.
    RegressionEntailment(Option<String>),
}

impl InferenceMode {
    pub fn for_method(task: &TaskSpec, method: Method, descriptions: &BTreeMap<usize, String>) -> Result<Self> {
        if matches!(method, Method::StandardFt | Method::Stilts | Method::Majority) {
            return Ok(InferenceMode::Native);
        }
        Ok(match task.kind {
            TaskKind::SentencePair => InferenceMode::Native,
            TaskKind::Regression => {
                InferenceMode::RegressionEntailment(descriptions.get(&0).filter(|d| !d.trim().is_empty()).cloned())
            }
            TaskKind::SingleSentence if task.n_classes() == 2 => InferenceMode::BinaryEntailment(
                descriptions
                    .get(&1)
                    .cloned()
                    .ok_or_else(|| Error::precondition("binary task has no class-1 description"))?,
            ),
            TaskKind::SingleSentence => InferenceMode::MultiEntailment(descriptions.clone()),
        })
    }
}

fn second_text(r: &Record) -> String {
    r.text_b.clone().unwrap_or_default()
}

fn gold(task: &TaskSpec, r: &Record) -> Result<Prediction> {
    match r.label {
        Some(Label::Class(c)) => Ok(Prediction::class(r.uid.clone(), 0, c)),
        Some(Label::Score(s)) if task.kind == TaskKind::Regression => Ok(Prediction::score(r.uid.clone(), 0.0, s)),
        _ => Err(Error::precondition(format!("{}: test record has no usable gold label", r.uid))),
    }
}

fn score_range(task: &TaskSpec) -> Result<(f64, f64)> {
    task.score_range
        .ok_or_else(|| Error::precondition(format!("{} has no score range", task.name)))
}

fn argmax(row: &[f64]) -> Result<usize> {
    predict_multiclass(row)
}

/// Scores every test record with `handle` and returns predictions in test
/// order.
pub fn predict(
    backend: &dyn Backend,
    handle: &ModelHandle,
    test: &Dataset,
    mode: &InferenceMode,
) -> Result<Vec<Prediction>> {
    let task = &*test.task;
    let mut preds: Vec<Prediction> = test.records.iter().map(|r| gold(task, r)).collect::<Result<_>>()?;
    match mode {
        InferenceMode::Native => {
            let pairs: Vec<TextPair> = test.records.iter().map(|r| (r.text_a.clone(), second_text(r))).collect();
            let rows = backend.score(handle, &pairs)?;
            for (p, row) in preds.iter_mut().zip(rows) {
                if task.kind == TaskKind::Regression {
                    p.predicted = crate::metrics::Value::Score(score_from_probability(row[0], score_range(task)?));
                } else {
                    p.predicted = crate::metrics::Value::Class(argmax(&row)?);
                }
            }
        }
        InferenceMode::BinaryEntailment(desc) => {
            let pairs: Vec<TextPair> = test.records.iter().map(|r| (r.text_a.clone(), desc.clone())).collect();
            let rows = backend.score(handle, &pairs)?;
            for (p, row) in preds.iter_mut().zip(rows) {
                p.predicted = crate::metrics::Value::Class(usize::from(row[ENTAIL] >= 0.5));
            }
        }
        InferenceMode::MultiEntailment(descs) => {
            let mut pairs: Vec<TextPair> = Vec::with_capacity(test.len() * descs.len());
            for r in &test.records {
                for inst in expand_for_inference(r, descs)? {
                    pairs.push((inst.premise, inst.hypothesis));
                }
            }
            let rows = backend.score(handle, &pairs)?;
            for (p, chunk) in preds.iter_mut().zip(rows.chunks(descs.len())) {
                let entail: Vec<f64> = chunk.iter().map(|row| row[ENTAIL]).collect();
                let class = *descs.keys().nth(predict_multiclass(&entail)?).expect("chunk matches classes");
                p.predicted = crate::metrics::Value::Class(class);
            }
        }
        InferenceMode::RegressionEntailment(desc) => {
            let range = score_range(task)?;
            let pairs: Vec<TextPair> = test
                .records
                .iter()
                .map(|r| Ok((r.text_a.clone(), regression_hypothesis(r, desc.as_deref())?)))
                .collect::<Result<_>>()?;
            let rows = backend.score(handle, &pairs)?;
            for (p, row) in preds.iter_mut().zip(rows) {
                p.predicted = crate::metrics::Value::Score(score_from_probability(row[ENTAIL], range));
            }
        }
    }
    Ok(preds)
}

pub fn evaluate_model(backend: &dyn Backend, handle: &ModelHandle, test: &Dataset, mode: &InferenceMode) -> Result<f64> {
    let preds = predict(backend, handle, test, mode)?;
    evaluate(test.task.metric, &preds, test.task.n_classes())
}

/// Native-label examples: class ids for classification, the rescaled score
/// for regression (1-way head).
pub fn native_examples(dataset: &Dataset) -> Result<(Vec<TrainExample>, usize)> {
    let task = &*dataset.task;
    match task.kind {
        TaskKind::SentencePair => {
            let ex = reformulate_pair(dataset)?.iter().map(TrainExample::from_pair).collect();
            Ok((ex, task.n_classes()))
        }
        TaskKind::SingleSentence => {
            let ex = dataset
                .records
                .iter()
                .map(|r| {
                    let c = r
                        .label
                        .and_then(|l| l.class())
                        .ok_or_else(|| Error::precondition(format!("{}: record has no class label", r.uid)))?;
                    Ok(TrainExample {
                        uid: r.uid.clone(),
                        premise: r.text_a.clone(),
                        hypothesis: String::new(),
                        target: Target::Class(c),
                    })
                })
                .collect::<Result<_>>()?;
            Ok((ex, task.n_classes()))
        }
        TaskKind::Regression => {
            let (lo, hi) = score_range(task)?;
            let ex = dataset
                .records
                .iter()
                .map(|r| {
                    let s = r
                        .label
                        .and_then(|l| l.score())
                        .ok_or_else(|| Error::precondition(format!("{}: record has no score", r.uid)))?;
                    Ok(TrainExample {
                        uid: r.uid.clone(),
                        premise: r.text_a.clone(),
                        hypothesis: second_text(r),
                        target: Target::Scalar((s - lo) / (hi - lo)),
                    })
                })
                .collect::<Result<_>>()?;
            Ok((ex, 1))
        }
    }
}

/// NLI pairs collapsed to binary entailment: the `entailment` class becomes
/// target 1 and every other class 0. Two-class pair tasks keep class 1 as
/// the entailing class.
pub fn entailment_pretrain_examples(dataset: &Dataset) -> Result<Vec<TrainExample>> {
    let task = &*dataset.task;
    if task.kind != TaskKind::SentencePair {
        return Err(Error::precondition(format!(
            "entailment pretraining needs a sentence-pair corpus, {} is not",
            task.name
        )));
    }
    let entail = match task.class_id("entailment") {
        Some(c) => c,
        None if task.n_classes() == 2 => 1,
        None => {
            return Err(Error::precondition(format!(
                "{} has no \"entailment\" class to collapse onto",
                task.name
            )))
        }
    };
    Ok(reformulate_pair(dataset)?
        .into_iter()
        .map(|p| TrainExample {
            uid: p.uid,
            premise: p.premise,
            hypothesis: p.hypothesis,
            target: Target::Class(usize::from(p.label == entail)),
        })
        .collect())
}

/// Entailment-format training set for the EFL methods, plus the head size.
/// Pair tasks train their native head.
fn efl_instances(
    few: &Dataset,
    descriptions: &BTreeMap<usize, String>,
    k: usize,
    rng: &mut Rng,
) -> Result<(Vec<EntailmentInstance>, usize)> {
    let task = &*few.task;
    match task.kind {
        TaskKind::SingleSentence if task.n_classes() == 2 => {
            let desc = descriptions
                .get(&1)
                .ok_or_else(|| Error::precondition("binary task has no class-1 description"))?;
            Ok((reformulate_binary(few, desc)?, 2))
        }
        TaskKind::SingleSentence => Ok((reformulate_multiclass(&few.by_class(), descriptions, k, rng)?, 2)),
        TaskKind::Regression => {
            let desc = descriptions.get(&0).map(String::as_str);
            Ok((reformulate_regression(few, desc)?, 2))
        }
        TaskKind::SentencePair => {
            let pairs = reformulate_pair(few)?;
            let n = task.n_classes();
            let inst = pairs
                .into_iter()
                .map(|p| EntailmentInstance {
                    uid: p.uid,
                    premise: p.premise,
                    hypothesis: p.hypothesis,
                    target: Some(p.label as f64),
                    provenance: Provenance::Original,
                    source_class: Some(p.label),
                })
                .collect();
            Ok((inst, n))
        }
    }
}

fn efl_examples(instances: &[EntailmentInstance], head_size: usize) -> Result<Vec<TrainExample>> {
    instances
        .iter()
        .map(|inst| {
            if head_size > 2 {
                let label = inst.source_class.ok_or_else(|| Error::precondition("pair instance without label"))?;
                Ok(TrainExample {
                    uid: inst.uid.clone(),
                    premise: inst.premise.clone(),
                    hypothesis: inst.hypothesis.clone(),
                    target: Target::Class(label),
                })
            } else {
                TrainExample::from_entailment(inst)
            }
        })
        .collect()
}

/// Result of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub score: f64,
    pub split: Option<FewShotSplit>,
    /// Uids of every target-task training example, augmentation included.
    pub train_uids: Vec<String>,
    pub n_test: usize,
    pub wall_time_secs: f64,
}

/// Models shared by all seeds of a run.
#[derive(Debug, Clone, Default)]
pub struct Prepared {
    pub pretrained: Option<ModelHandle>,
}

/// Trains whatever the method needs before the per-seed loop: the binary
/// entailment model for `efl`, the native source model for `stilts`.
pub fn prepare(spec: &RunSpec, backend: &dyn Backend) -> Result<Prepared> {
    spec.validate()?;
    let pretrained = match (spec.method, &spec.pretrain) {
        (Method::Efl, Some(source)) => {
            let examples = entailment_pretrain_examples(source).stage("pretrain")?;
            let cfg = BackendConfig::new(backend.kind(), spec.full_data, 2);
            Some(backend.train(&examples, &cfg).stage("pretrain")?)
        }
        (Method::Stilts, Some(source)) => {
            let (examples, head) = native_examples(source).stage("pretrain")?;
            let cfg = BackendConfig::new(backend.kind(), spec.full_data, head);
            Some(backend.train(&examples, &cfg).stage("pretrain")?)
        }
        _ => None,
    };
    Ok(Prepared { pretrained })
}

/// Trains the target model for one seed and returns it with the inference
/// mode and the training uids.
pub fn train_seed(
    spec: &RunSpec,
    prepared: &Prepared,
    backend: &dyn Backend,
    seed: u64,
) -> Result<(ModelHandle, InferenceMode, FewShotSplit, Vec<String>)> {
    let split = sample_few_shot(&spec.train, spec.k, seed).stage("sample")?;
    let few = spec.train.subset("few_shot", &split.uids()).stage("sample")?;
    let hyper = spec.few_shot.with_seed(seed);
    let mode = InferenceMode::for_method(spec.task(), spec.method, &spec.descriptions)?;
    let (examples, head) = match spec.method {
        Method::StandardFt | Method::Stilts => native_examples(&few).stage("reformulate")?,
        Method::Efl | Method::EflWoPt => {
            let mut rng = Rng::derive(seed, &[STREAM_REFORMULATE]);
            let (mut instances, head) = efl_instances(&few, &spec.descriptions, spec.k, &mut rng).stage("reformulate")?;
            if let Some(cfg) = &spec.uca {
                if head > 2 {
                    return Err(Error::precondition(
                        "augmentation needs binary entailment targets; this task trains a multi-way native head",
                    )
                    .in_stage("augment"));
                }
                let mut rng = Rng::derive(seed, &[STREAM_AUGMENT]);
                let extra = build_uca_set(&instances, spec.task().kind, cfg, &mut rng).stage("augment")?;
                instances.extend(extra);
            }
            (efl_examples(&instances, head).stage("reformulate")?, head)
        }
        Method::Majority => unreachable!("majority does not train"),
    };
    let cfg = BackendConfig::new(backend.kind(), hyper, head);
    check_targets(&examples, head).stage("train")?;
    let handle = match &prepared.pretrained {
        Some(base) => backend.continue_train(base, &examples, &cfg),
        None => backend.train(&examples, &cfg),
    }
    .stage("train")?;
    let uids = examples.into_iter().map(|e| e.uid).collect();
    Ok((handle, mode, split, uids))
}

fn majority_score(spec: &RunSpec) -> Result<f64> {
    let task = spec.task();
    if task.kind == TaskKind::Regression {
        return Err(Error::precondition("the majority baseline is undefined for regression tasks"));
    }
    let labels = |d: &Dataset| -> Vec<usize> { d.records.iter().filter_map(|r| r.label.and_then(|l| l.class())).collect() };
    majority_baseline(&labels(&spec.train), &labels(&spec.test), task.metric, task.n_classes())
}

/// One seed of the protocol against the full test split.
pub fn run_seed(spec: &RunSpec, prepared: &Prepared, backend: &dyn Backend, seed: u64) -> Result<SeedOutcome> {
    let start = Instant::now();
    let (score, split, train_uids) = if spec.method == Method::Majority {
        (majority_score(spec).stage("evaluate")?, None, Vec::new())
    } else {
        let (handle, mode, split, uids) = train_seed(spec, prepared, backend, seed)?;
        let score = evaluate_model(backend, &handle, &spec.test, &mode).stage("evaluate")?;
        (score, Some(split), uids)
    };
    Ok(SeedOutcome {
        seed,
        score,
        split,
        train_uids,
        n_test: spec.test.len(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_single(spec: &RunSpec, backend: &dyn Backend, seed: u64) -> Result<f64> {
    let prepared = prepare(spec, backend)?;
    run_seed(spec, &prepared, backend, seed)
        .map(|o| o.score)
        .map_err(|e| Error::Seed {
            seed,
            source: Box::new(e),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub task: String,
    pub method: Method,
    pub k: usize,
    pub uca: bool,
    pub metric: MetricKind,
    pub seeds: Vec<u64>,
    pub per_seed_scores: Vec<f64>,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single seed.
    pub std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<Vec<f64>>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunReport {
    pub fn from_outcomes(spec: &RunSpec, outcomes: &[SeedOutcome]) -> Self {
        let scores: Vec<f64> = outcomes.iter().map(|o| o.score).collect();
        let (mean, std) = mean_std(&scores);
        Self {
            schema_version: SCHEMA_VERSION,
            task: spec.task().name.clone(),
            method: spec.method,
            k: spec.k,
            uca: spec.uca.is_some(),
            metric: spec.task().metric,
            seeds: outcomes.iter().map(|o| o.seed).collect(),
            per_seed_scores: scores,
            mean,
            std,
            wall_time_secs: spec
                .record_wall_time
                .then(|| outcomes.iter().map(|o| o.wall_time_secs).collect()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row per seed.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["task", "method", "k", "seed", "metric", "score"];
        if self.wall_time_secs.is_some() {
            header.push("wall_time_secs");
        }
        w.write_record(&header)?;
        for (i, (seed, score)) in self.seeds.iter().zip(&self.per_seed_scores).enumerate() {
            let mut row = vec![
                self.task.clone(),
                self.method.name().to_string(),
                self.k.to_string(),
                seed.to_string(),
                serde_json::to_string(&self.metric)?.trim_matches('"').to_string(),
                score.to_string(),
            ];
            if let Some(times) = &self.wall_time_secs {
                row.push(times[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub report: RunReport,
    pub outcomes: Vec<SeedOutcome>,
}

/// Runs every seed of `spec`; seeds run concurrently when `spec.parallel`
/// is set, with results kept in seed-list order.
pub fn run_protocol(spec: &RunSpec, backend: &dyn Backend) -> Result<ProtocolResult> {
    let prepared = prepare(spec, backend)?;
    let one = |&seed: &u64| {
        run_seed(spec, &prepared, backend, seed).map_err(|e| Error::Seed {
            seed,
            source: Box::new(e),
        })
    };
    let outcomes: Vec<SeedOutcome> = if spec.parallel {
        spec.seeds.par_iter().map(one).collect::<Result<_>>()?
    } else {
        spec.seeds.iter().map(one).collect::<Result<_>>()?
    };
    Ok(ProtocolResult {
        report: RunReport::from_outcomes(spec, &outcomes),
        outcomes,
    })
}

/// Record uid an instance uid was derived from.
pub fn source_uid(instance_uid: &str) -> &str {
    instance_uid.split(['#', '~']).next().unwrap_or(instance_uid)
}

/// Test uids that leaked into training, if any.
pub fn audit_test_leak(outcomes: &[SeedOutcome], test: &Dataset) -> Vec<String> {
    let test_uids: BTreeSet<&str> = test.records.iter().map(|r| r.uid.as_str()).collect();
    let mut leaked = BTreeSet::new();
    for o in outcomes {
        for uid in &o.train_uids {
            let base = source_uid(uid);
            if test_uids.contains(base) {
                leaked.insert(base.to_string());
            }
        }
    }
    leaked.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::fixture;

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[0.9; 5]);
        assert!((m - 0.9).abs() < 1e-12);
        assert!(s.abs() < 1e-12);
        let (m, s) = mean_std(&[0.8, 1.0]);
        assert!((m - 0.9).abs() < 1e-12);
        assert!((s - 0.1414213562373095).abs() < 1e-12);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn sampling_counts_and_determinism() {
        let train = fixture("sst2_fixture").unwrap().train().unwrap();
        let a = sample_few_shot(&train, 8, 1).unwrap();
        assert_eq!(a, sample_few_shot(&train, 8, 1).unwrap());
        assert_ne!(a, sample_few_shot(&train, 8, 2).unwrap());
        let uids = a.uids();
        assert_eq!(uids.len(), 16);
        assert_eq!(uids.iter().collect::<BTreeSet<_>>().len(), 16);
        match sample_few_shot(&train, 101, 1) {
            Err(Error::InsufficientClass { available, required, .. }) => assert_eq!((available, required), (100, 101)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn regression_sampling_bins_at_midpoint() {
        let train = fixture("stsb_fixture").unwrap().train().unwrap();
        let split = sample_few_shot(&train, 4, 3).unwrap();
        let scores: BTreeMap<&str, f64> = train
            .records
            .iter()
            .map(|r| (r.uid.as_str(), r.label.unwrap().score().unwrap()))
            .collect();
        assert!(split.uids_per_class[&0].iter().all(|u| scores[u.as_str()] < 2.5));
        assert!(split.uids_per_class[&1].iter().all(|u| scores[u.as_str()] >= 2.5));
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Majority, Method::StandardFt, Method::Efl, Method::EflWoPt, Method::Stilts] {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("gpt3").is_err());
    }

    #[test]
    fn source_uid_strips_derivation_suffixes() {
        assert_eq!(source_uid("a1#3"), "a1");
        assert_eq!(source_uid("a1~uca0+2"), "a1");
        assert_eq!(source_uid("plain"), "plain");
    }

    #[test]
    fn spec_validation() {
        let fx = fixture("sst2_fixture").unwrap();
        let mut spec = RunSpec::new(fx.train().unwrap(), fx.test().unwrap(), Method::Efl, BackendKind::Builtin);
        assert!(spec.validate().is_err());
        spec.method = Method::StandardFt;
        spec.uca = Some(AugmentConfig::default());
        assert!(spec.validate().is_err());
        spec.uca = None;
        spec.seeds.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn nli_collapse() {
        let nli = fixture("nli_fixture").unwrap().train().unwrap();
        let ex = entailment_pretrain_examples(&nli).unwrap();
        let pos = ex.iter().filter(|e| e.target == Target::Class(1)).count();
        assert_eq!(pos, 300);
        assert_eq!(ex.len(), 900);
    }
}
