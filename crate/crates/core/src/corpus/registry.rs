use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{synthetic, TaskSpec};
use crate::error::{Error, Result};

const BUILTIN_TASKS: &str = include_str!("../../data/tasks.json");

/// Name-keyed task definitions. Lookups hand out shared, immutable specs.
#[derive(Debug, Clone, Default)]
pub struct TaskRegistry {
    tasks: BTreeMap<String, Arc<TaskSpec>>,
}

impl TaskRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Benchmark tasks with their default label descriptions, plus the
    /// synthetic `*_fixture` tasks.
    pub fn builtin() -> Self {
        let mut reg = Self::from_json(BUILTIN_TASKS).expect("bundled task registry is valid");
        for spec in synthetic::fixture_specs() {
            reg.register(spec).expect("fixture specs are valid");
        }
        reg
    }

    /// Only the bundled benchmark tasks.
    pub fn benchmarks() -> Self {
        Self::from_json(BUILTIN_TASKS).expect("bundled task registry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let specs: Vec<TaskSpec> = serde_json::from_str(text)?;
        let mut reg = Self::new();
        for spec in specs {
            reg.register(spec)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        let specs: Vec<&TaskSpec> = self.tasks.values().map(Arc::as_ref).collect();
        Ok(serde_json::to_string_pretty(&specs)?)
    }

    /// Validates and inserts `spec`; an existing entry with the same name is
    /// replaced.
    pub fn register(&mut self, spec: TaskSpec) -> Result<()> {
        spec.validate()?;
        self.tasks.insert(spec.name.clone(), Arc::new(spec));
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<Arc<TaskSpec>> {
        self.tasks.get(name).cloned()
    }

    pub fn get(&self, name: &str) -> Result<Arc<TaskSpec>> {
        self.lookup(name).ok_or_else(|| Error::UnknownTask(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelDef, MetricKind, TaskKind};

    const TABLE2: [&str; 18] = [
        "sst2", "mr", "cr", "mpqa", "subj", "os", "imdb", "cola", "trec", "yelp", "agnews", "qqp",
        "mrpc", "qnli", "snli", "rte", "stsb", "boolq",
    ];

    #[test]
    fn ships_every_benchmark_task() {
        let reg = TaskRegistry::benchmarks();
        for name in TABLE2 {
            assert!(reg.lookup(name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn sst2_positive_description() {
        let reg = TaskRegistry::builtin();
        let sst2 = reg.lookup("sst2").unwrap();
        assert_eq!(sst2.description(1), Some("It was great"));
        assert_eq!(sst2.class_name(1), Some("positive"));
    }

    #[test]
    fn agnews_has_four_described_classes() {
        let reg = TaskRegistry::builtin();
        let ag = reg.lookup("agnews").unwrap();
        assert_eq!(ag.n_classes(), 4);
        assert_eq!(ag.descriptions.len(), 4);
    }

    #[test]
    fn stsb_is_regression_on_zero_to_five() {
        let stsb = TaskRegistry::builtin().lookup("stsb").unwrap();
        assert_eq!(stsb.kind, TaskKind::Regression);
        assert_eq!(stsb.score_range, Some((0.0, 5.0)));
    }

    #[test]
    fn regression_with_labels_is_rejected() {
        let mut reg = TaskRegistry::new();
        let spec = TaskSpec {
            name: "bad".into(),
            kind: TaskKind::Regression,
            labels: vec![LabelDef { class_id: 0, class_name: "x".into() }],
            descriptions: BTreeMap::new(),
            metric: MetricKind::Pearson,
            score_range: Some((0.0, 1.0)),
        };
        assert!(matches!(reg.register(spec), Err(Error::Validation(_))));
        assert!(reg.lookup("bad").is_none());
    }

    #[test]
    fn reregistering_replaces() {
        let mut reg = TaskRegistry::builtin();
        let mut spec = (*reg.lookup("sst2").unwrap()).clone();
        spec.descriptions.insert(1, "It is great movie".into());
        reg.register(spec).unwrap();
        assert_eq!(reg.lookup("sst2").unwrap().description(1), Some("It is great movie"));
    }

    #[test]
    fn json_round_trip_preserves_specs() {
        let reg = TaskRegistry::builtin();
        let back = TaskRegistry::from_json(&reg.to_json().unwrap()).unwrap();
        assert_eq!(back.len(), reg.len());
        for name in reg.names() {
            assert_eq!(back.lookup(name), reg.lookup(name));
        }
    }

    #[test]
    fn lookups_do_not_mutate() {
        let reg = TaskRegistry::builtin();
        let before = reg.to_json().unwrap();
        let mut copy = (*reg.lookup("trec").unwrap()).clone();
        copy.descriptions.clear();
        assert_eq!(reg.to_json().unwrap(), before);
    }
}
