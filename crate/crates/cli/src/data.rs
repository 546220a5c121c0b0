//! Resolving task names and dataset files into loaded datasets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use efl_core::corpus::synthetic::fixture;
use efl_core::corpus::{load_records, ColumnMap, Dataset, InputFormat, TaskRegistry, TaskSpec};

use crate::UsageError;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Jsonl,
    Tsv,
}

impl From<Format> for InputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => InputFormat::Jsonl,
            Format::Tsv => InputFormat::Tsv,
        }
    }
}

/// Where a task's data comes from. Fixture tasks generate their splits when
/// no file is given.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Training split file
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test split file
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Input file format
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: Format,
    /// Column map such as `uid=0,text_a=1,label=2` (TSV indices or JSON keys)
    #[arg(long)]
    pub columns: Option<String>,
    /// The TSV files start with a header row
    #[arg(long)]
    pub header: bool,
}

impl DataArgs {
    fn column_map(&self) -> Result<ColumnMap> {
        match &self.columns {
            Some(spec) => Ok(ColumnMap::parse(spec, self.header)?),
            None => Ok(ColumnMap {
                has_header: self.header,
                ..ColumnMap::default()
            }),
        }
    }

    pub fn load(&self, path: &Path, task: Arc<TaskSpec>, split: &str) -> Result<Dataset> {
        let columns = self.column_map()?;
        load_records(path, self.format.into(), &columns, task, split, false)
            .with_context(|| format!("loading {}", path.display()))
    }
}

pub fn task_spec(registry: &TaskRegistry, name: &str) -> Result<Arc<TaskSpec>> {
    Ok(registry.get(name)?)
}

/// Loads (or generates) one split of `task`.
pub fn split(registry: &TaskRegistry, task: &str, args: &DataArgs, which: &str) -> Result<Dataset> {
    let path = match which {
        "train" => args.train.as_ref(),
        _ => args.test.as_ref(),
    };
    let spec = task_spec(registry, task)?;
    match (path, fixture(task)) {
        (Some(p), _) => args.load(p, spec, which),
        (None, Some(fx)) => Ok(if which == "train" { fx.train()? } else { fx.test()? }),
        (None, None) => bail!(UsageError(format!("task {task} is not a fixture; pass --{which} <file>"))),
    }
}

/// Pretraining source: a fixture name, or a file read with the spec of
/// `task`.
pub fn pretrain_source(
    registry: &TaskRegistry,
    source: &str,
    task: Option<&str>,
    args: &DataArgs,
) -> Result<Dataset> {
    if let Some(fx) = fixture(source) {
        return Ok(fx.train()?);
    }
    let Some(task) = task else {
        bail!(UsageError(format!(
            "{source} is not a fixture; name its task with --pretrain-task"
        )));
    };
    let path = Path::new(source);
    if !path.exists() {
        bail!(UsageError(format!("pretraining source {source} does not exist")));
    }
    args.load(path, task_spec(registry, task)?, "pretrain")
}
