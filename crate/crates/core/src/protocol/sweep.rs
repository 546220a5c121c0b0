//! Intermediate-task transfer sweep over all ordered task pairs.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{Backend, BackendConfig, Hyperparams, ModelHandle};
use crate::corpus::Dataset;
use crate::error::{Error, Result};

use super::{evaluate_model, mean_std, native_examples, sample_few_shot, InferenceMode};

#[derive(Debug, Clone)]
pub struct SweepTask {
    pub train: Dataset,
    pub test: Dataset,
}

impl SweepTask {
    pub fn name(&self) -> &str {
        &self.train.task.name
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub source: String,
    pub target: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMatrix {
    pub tasks: Vec<String>,
    /// Off-diagonal cells in (source, target) order.
    pub cells: Vec<SweepCell>,
}

impl SweepMatrix {
    pub fn cell(&self, source: &str, target: &str) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.source == source && c.target == target)
    }

    /// Source tasks as rows, targets as columns; the diagonal is left empty
    /// and failed cells hold `error: <message>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["source".to_string()];
        header.extend(self.tasks.iter().cloned());
        w.write_record(&header)?;
        for source in &self.tasks {
            let mut row = vec![source.clone()];
            for target in &self.tasks {
                row.push(match self.cell(source, target) {
                    None => String::new(),
                    Some(SweepCell { mean: Some(m), .. }) => m.to_string(),
                    Some(c) => format!("error: {}", c.error.as_deref().unwrap_or("unknown")),
                });
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

fn source_model(task: &SweepTask, backend: &dyn Backend, hyper: Hyperparams) -> Result<ModelHandle> {
    let (examples, head) = native_examples(&task.train)?;
    backend.train(&examples, &BackendConfig::new(backend.kind(), hyper, head))
}

fn target_scores(
    base: Option<&ModelHandle>,
    target: &SweepTask,
    k: usize,
    seeds: &[u64],
    backend: &dyn Backend,
    few_shot: Hyperparams,
) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&seed| {
            let split = sample_few_shot(&target.train, k, seed)?;
            let few = target.train.subset("few_shot", &split.uids())?;
            let (examples, head) = native_examples(&few)?;
            let cfg = BackendConfig::new(backend.kind(), few_shot.with_seed(seed), head);
            let handle = match base {
                Some(b) => backend.continue_train(b, &examples, &cfg)?,
                None => backend.train(&examples, &cfg)?,
            };
            evaluate_model(backend, &handle, &target.test, &InferenceMode::Native)
        })
        .collect()
}

/// Few-shot scores of `target` trained from scratch, one per seed.
pub fn scratch_scores(
    target: &SweepTask,
    k: usize,
    seeds: &[u64],
    backend: &dyn Backend,
    few_shot: Hyperparams,
) -> Result<Vec<f64>> {
    target_scores(None, target, k, seeds, backend, few_shot)
}

/// For every ordered pair `(source, target)` with `source != target`: train
/// natively on the full source split, then fine-tune few-shot on the target
/// for each seed. Failures are recorded in their cell.
pub fn transfer_sweep(
    tasks: &[SweepTask],
    k: usize,
    seeds: &[u64],
    backend: &dyn Backend,
    few_shot: Hyperparams,
    full_data: Hyperparams,
    parallel: bool,
) -> Result<SweepMatrix> {
    if tasks.len() < 2 {
        return Err(Error::precondition("a transfer sweep needs at least 2 tasks"));
    }
    if seeds.is_empty() {
        return Err(Error::precondition("at least one seed is required"));
    }
    let names: Vec<String> = tasks.iter().map(|t| t.name().to_string()).collect();
    let row = |source: &SweepTask| -> Vec<SweepCell> {
        let model = source_model(source, backend, full_data);
        tasks
            .iter()
            .filter(|t| t.name() != source.name())
            .map(|target| {
                let result = model
                    .as_ref()
                    .map_err(|e| Error::Backend(format!("source training failed: {e}")))
                    .and_then(|m| target_scores(Some(m), target, k, seeds, backend, few_shot));
                let (mean, std, error) = match result {
                    Ok(scores) => {
                        let (m, s) = mean_std(&scores);
                        (Some(m), Some(s), None)
                    }
                    Err(e) => (None, None, Some(e.to_string())),
                };
                SweepCell {
                    source: source.name().to_string(),
                    target: target.name().to_string(),
                    mean,
                    std,
                    error,
                }
            })
            .collect()
    };
    let rows: Vec<Vec<SweepCell>> = if parallel {
        tasks.par_iter().map(row).collect()
    } else {
        tasks.iter().map(row).collect()
    };
    Ok(SweepMatrix {
        tasks: names,
        cells: rows.into_iter().flatten().collect(),
    })
}
