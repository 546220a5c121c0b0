//! Label-description ablation and multilingual evaluation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::backend::{Backend, ModelHandle};
use crate::corpus::{Dataset, TaskKind, TaskSpec};
use crate::error::{Error, Result};

use super::{evaluate_model, run_protocol, InferenceMode, Method, RunReport, RunSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    /// Descriptions joined with ` | ` in class order.
    pub key: String,
    pub descriptions: BTreeMap<usize, String>,
    pub report: RunReport,
}

fn check_candidate(task: &TaskSpec, candidate: &BTreeMap<usize, String>) -> Result<()> {
    let required: Vec<usize> = match task.kind {
        TaskKind::Regression => vec![0],
        _ => (0..task.n_classes()).collect(),
    };
    let missing: Vec<String> = required
        .iter()
        .filter(|c| candidate.get(c).is_none_or(|d| d.trim().is_empty()))
        .map(|c| format!("class {c} has no description"))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(missing))
    }
}

/// One protocol run per candidate description set.
pub fn ablate_descriptions(
    spec: &RunSpec,
    candidates: &[BTreeMap<usize, String>],
    backend: &dyn Backend,
) -> Result<Vec<AblationRow>> {
    if candidates.is_empty() {
        return Err(Error::precondition("no description candidates"));
    }
    for c in candidates {
        check_candidate(spec.task(), c)?;
    }
    candidates
        .iter()
        .map(|c| {
            let mut run = spec.clone();
            run.descriptions = c.clone();
            let result = run_protocol(&run, backend)?;
            Ok(AblationRow {
                key: c.values().cloned().collect::<Vec<_>>().join(" | "),
                descriptions: c.clone(),
                report: result.report,
            })
        })
        .collect()
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["descriptions", "mean", "std", "per_seed_scores"])?;
    for row in rows {
        let scores: Vec<String> = row.report.per_seed_scores.iter().map(f64::to_string).collect();
        w.write_record([
            row.key.clone(),
            row.report.mean.to_string(),
            row.report.std.to_string(),
            scores.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilingualReport {
    pub scores: BTreeMap<String, f64>,
    /// Unweighted mean over languages.
    pub average: f64,
}

/// Scores `handle` on each language's test set, always with the task's own
/// (English) descriptions.
pub fn multilingual_eval(
    backend: &dyn Backend,
    handle: &ModelHandle,
    task: &TaskSpec,
    method: Method,
    languages: &[String],
    test_sets: &BTreeMap<String, Dataset>,
) -> Result<MultilingualReport> {
    if languages.is_empty() {
        return Err(Error::precondition("no languages to evaluate"));
    }
    let mode = InferenceMode::for_method(task, method, &task.descriptions)?;
    let mut scores = BTreeMap::new();
    for lang in languages {
        let test = test_sets
            .get(lang)
            .ok_or_else(|| Error::precondition(format!("no test set for language {lang:?}")))?;
        scores.insert(lang.clone(), evaluate_model(backend, handle, test, &mode)?);
    }
    let average = scores.values().sum::<f64>() / scores.len() as f64;
    Ok(MultilingualReport { scores, average })
}
