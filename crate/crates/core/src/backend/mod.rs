//! Training and scoring backends.
//!
//! A backend turns premise/hypothesis pairs with targets into a
//! [`ModelHandle`] and scores new pairs with it. Two implementations exist:
//! the in-process [`BuiltinBackend`] (hashed n-gram features with a linear
//! softmax head) and [`BridgeBackend`], which forwards every call to an
//! external process over newline-delimited JSON.

pub mod bridge;
pub mod builtin;
pub mod mock;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reformulator::{EntailmentInstance, PairInstance};

pub use bridge::BridgeBackend;
pub use builtin::{BuiltinBackend, LinearModel};

/// Learning rate used by the builtin backend in place of the transformer
/// default; its features live on a very different scale.
pub const BUILTIN_LEARNING_RATE: f64 = 0.1;

/// Index of the entailment class in a 2-way entailment head.
pub const ENTAIL: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Builtin,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// 0 means a constant learning rate; otherwise linear warm-up over this
    /// share of the steps followed by linear decay.
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Hyperparams {
    /// Few-shot regime: constant lr 1e-5, batch 8, 10 epochs.
    pub fn few_shot() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 8,
            max_epochs: 10,
            warmup_ratio: 0.0,
            weight_decay: 0.0,
            seed: 0,
        }
    }

    /// Full-data regime: lr 1e-5, batch 32, weight decay 0.1, 10 epochs,
    /// 6% warm-up then linear decay.
    pub fn full_data() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 32,
            max_epochs: 10,
            warmup_ratio: 0.06,
            weight_decay: 0.1,
            seed: 0,
        }
    }

    /// Applies the builtin learning-rate override when `kind` is builtin.
    pub fn for_backend(mut self, kind: BackendKind) -> Self {
        if kind == BackendKind::Builtin {
            self.learning_rate = BUILTIN_LEARNING_RATE;
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub hyperparams: Hyperparams,
    /// Output classes; 2 for entailment, 1 for a scalar regression head.
    pub head_size: usize,
}

impl BackendConfig {
    pub fn new(kind: BackendKind, hyperparams: Hyperparams, head_size: usize) -> Self {
        Self {
            kind,
            hyperparams,
            head_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyperparams;
        let mut failed = Vec::new();
        if h.learning_rate.is_nan() || h.learning_rate <= 0.0 {
            failed.push(format!("learning_rate must be > 0, got {}", h.learning_rate));
        }
        if h.batch_size < 1 {
            failed.push("batch_size must be >= 1".to_string());
        }
        if self.head_size < 1 {
            failed.push("head_size must be >= 1".to_string());
        }
        if !(0.0..1.0).contains(&h.warmup_ratio) {
            failed.push(format!("warmup_ratio must lie in [0, 1), got {}", h.warmup_ratio));
        }
        if h.weight_decay < 0.0 {
            failed.push(format!("weight_decay must be >= 0, got {}", h.weight_decay));
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failed))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// Hard class index.
    Class(usize),
    /// Entailment probability for a 2-way head: the distribution `[1-p, p]`.
    Soft(f64),
    /// Regression value for a 1-way head.
    Scalar(f64),
}

impl Target {
    /// Value written to the bridge instance file.
    pub fn wire_value(&self) -> f64 {
        match *self {
            Target::Class(c) => c as f64,
            Target::Soft(p) | Target::Scalar(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    pub target: Target,
}

impl TrainExample {
    pub fn from_entailment(inst: &EntailmentInstance) -> Result<Self> {
        let t = inst
            .target
            .ok_or_else(|| Error::precondition(format!("{}: instance has no target", inst.uid)))?;
        let target = if t == 0.0 || t == 1.0 {
            Target::Class(t as usize)
        } else if (0.0..=1.0).contains(&t) {
            Target::Soft(t)
        } else {
            return Err(Error::precondition(format!("{}: target {t} outside [0, 1]", inst.uid)));
        };
        Ok(Self {
            uid: inst.uid.clone(),
            premise: inst.premise.clone(),
            hypothesis: inst.hypothesis.clone(),
            target,
        })
    }

    pub fn from_pair(inst: &PairInstance) -> Self {
        Self {
            uid: inst.uid.clone(),
            premise: inst.premise.clone(),
            hypothesis: inst.hypothesis.clone(),
            target: Target::Class(inst.label),
        }
    }
}

pub fn entailment_examples(instances: &[EntailmentInstance]) -> Result<Vec<TrainExample>> {
    instances.iter().map(TrainExample::from_entailment).collect()
}

/// Checks that every target fits a head of `head_size` outputs.
pub fn check_targets(examples: &[TrainExample], head_size: usize) -> Result<()> {
    for ex in examples {
        let ok = match (ex.target, head_size) {
            (Target::Scalar(_), 1) => true,
            (Target::Soft(p), 2) => (0.0..=1.0).contains(&p),
            (Target::Class(c), n) if n >= 2 => c < n,
            _ => false,
        };
        if !ok {
            return Err(Error::precondition(format!(
                "mixed target arity: {} has target {:?} for a {head_size}-way head",
                ex.uid, ex.target
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum HandleInner {
    Builtin(Arc<LinearModel>),
    Bridge(String),
}

/// Trained model reference. Builtin handles own their (immutable) weights;
/// bridge handles name a model held by the external process.
#[derive(Debug, Clone)]
pub struct ModelHandle {
    kind: BackendKind,
    head_size: usize,
    inner: HandleInner,
}

impl ModelHandle {
    pub fn builtin(model: LinearModel) -> Self {
        Self {
            kind: BackendKind::Builtin,
            head_size: model.head_size(),
            inner: HandleInner::Builtin(Arc::new(model)),
        }
    }

    pub fn bridge(model_id: impl Into<String>, head_size: usize) -> Self {
        Self {
            kind: BackendKind::Bridge,
            head_size,
            inner: HandleInner::Bridge(model_id.into()),
        }
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn head_size(&self) -> usize {
        self.head_size
    }

    pub fn builtin_model(&self) -> Option<&LinearModel> {
        match &self.inner {
            HandleInner::Builtin(m) => Some(m),
            HandleInner::Bridge(_) => None,
        }
    }

    pub fn model_id(&self) -> Option<&str> {
        match &self.inner {
            HandleInner::Bridge(id) => Some(id),
            HandleInner::Builtin(_) => None,
        }
    }

    /// Builtin handles are written as a flat binary; bridge handles as their
    /// model id string.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = match &self.inner {
            HandleInner::Builtin(m) => m.to_bytes(),
            HandleInner::Bridge(id) => format!("{id}\t{}\n", self.head_size).into_bytes(),
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, kind: BackendKind) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        match kind {
            BackendKind::Builtin => Ok(Self::builtin(LinearModel::from_bytes(&bytes)?)),
            BackendKind::Bridge => {
                let text = String::from_utf8(bytes)
                    .map_err(|_| Error::Backend("bridge handle file is not UTF-8".into()))?;
                let (id, head) = text
                    .trim()
                    .split_once('\t')
                    .ok_or_else(|| Error::Backend("bad bridge handle file".into()))?;
                let head_size = head
                    .parse()
                    .map_err(|_| Error::Backend("bad head size in handle file".into()))?;
                Ok(Self::bridge(id, head_size))
            }
        }
    }
}

pub type TextPair = (String, String);

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn train(&self, examples: &[TrainExample], config: &BackendConfig) -> Result<ModelHandle>;

    /// Warm-started training. A changed head size re-initializes the output
    /// layer; an empty example list returns the handle unchanged.
    fn continue_train(
        &self,
        handle: &ModelHandle,
        examples: &[TrainExample],
        config: &BackendConfig,
    ) -> Result<ModelHandle>;

    /// One probability vector per pair, in input order. Scalar heads return
    /// a single value in `[0, 1]`.
    fn score(&self, handle: &ModelHandle, pairs: &[TextPair]) -> Result<Vec<Vec<f64>>>;
}
