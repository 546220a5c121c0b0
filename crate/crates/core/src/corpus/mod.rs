//! Task definitions, record ingestion and synthetic fixtures.
//!
//! On disk every record is one JSON object per line with the fields
//! `uid`, `text_a`, `text_b`, `label` and `language`. Class labels are stored
//! by name and resolved to class ids through the owning [`TaskSpec`];
//! regression labels are plain numbers. TSV input is accepted through an
//! explicit [`ColumnMap`].

mod registry;
pub mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub use registry::TaskRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    SingleSentence,
    SentencePair,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    MacroF1,
    BinaryF1,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub class_id: usize,
    pub class_name: String,
}

/// A task's label space, label descriptions and evaluation metric.
///
/// Binary tasks follow one convention throughout: class `1` is the entailed
/// ("positive") class and its description is the hypothesis used by binary
/// reformulation. For regression tasks `labels` is empty and `descriptions`
/// may hold a single entry under key `0`, used as the hypothesis for
/// single-sentence regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    #[serde(default)]
    pub labels: Vec<LabelDef>,
    #[serde(default)]
    pub descriptions: BTreeMap<usize, String>,
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_range: Option<(f64, f64)>,
}

impl TaskSpec {
    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.labels
            .iter()
            .find(|l| l.class_name == name)
            .map(|l| l.class_id)
    }

    pub fn class_name(&self, id: usize) -> Option<&str> {
        self.labels
            .iter()
            .find(|l| l.class_id == id)
            .map(|l| l.class_name.as_str())
    }

    pub fn description(&self, class_id: usize) -> Option<&str> {
        self.descriptions.get(&class_id).map(String::as_str)
    }

    pub fn is_binary(&self) -> bool {
        self.kind != TaskKind::Regression && self.labels.len() == 2
    }

    /// Returns every violated invariant, or `Ok` if none.
    pub fn validate(&self) -> Result<()> {
        let mut failed = Vec::new();
        if self.name.trim().is_empty() {
            failed.push("name is empty".to_string());
        }
        for (i, label) in self.labels.iter().enumerate() {
            if label.class_id != i {
                failed.push(format!(
                    "class ids must be 0..{} in order, found {} at position {i}",
                    self.labels.len(),
                    label.class_id
                ));
                break;
            }
        }
        let mut names = HashSet::new();
        for label in &self.labels {
            if !names.insert(label.class_name.as_str()) {
                failed.push(format!("duplicate class name {:?}", label.class_name));
            }
        }
        match self.kind {
            TaskKind::Regression => {
                if !self.labels.is_empty() {
                    failed.push("regression task must have no labels".to_string());
                }
                match self.score_range {
                    Some((lo, hi)) if lo < hi => {}
                    Some((lo, hi)) => failed.push(format!("score_range min {lo} >= max {hi}")),
                    None => failed.push("regression task needs a score_range".to_string()),
                }
                if self.descriptions.keys().any(|&k| k != 0) {
                    failed.push("regression descriptions may only use key 0".to_string());
                }
            }
            TaskKind::SingleSentence | TaskKind::SentencePair => {
                if self.labels.len() < 2 {
                    failed.push(format!("need at least 2 classes, found {}", self.labels.len()));
                }
                if self.score_range.is_some() {
                    failed.push("score_range is only valid for regression".to_string());
                }
                let pair_without_descriptions =
                    self.kind == TaskKind::SentencePair && self.descriptions.is_empty();
                if !pair_without_descriptions {
                    for label in &self.labels {
                        match self.descriptions.get(&label.class_id) {
                            Some(d) if !d.trim().is_empty() => {}
                            _ => failed.push(format!(
                                "class {} ({}) has no description",
                                label.class_id, label.class_name
                            )),
                        }
                    }
                    for &k in self.descriptions.keys() {
                        if k >= self.labels.len() {
                            failed.push(format!("description for unknown class id {k}"));
                        }
                    }
                }
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failed))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Class(usize),
    Score(f64),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Score(_) => None,
        }
    }

    pub fn score(&self) -> Option<f64> {
        match *self {
            Label::Score(s) => Some(s),
            Label::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub uid: String,
    pub text_a: String,
    pub text_b: Option<String>,
    pub label: Option<Label>,
    pub language: Option<String>,
}

impl Record {
    pub fn new(uid: impl Into<String>, text_a: impl Into<String>, label: Option<Label>) -> Self {
        Self {
            uid: uid.into(),
            text_a: text_a.into(),
            text_b: None,
            label,
            language: None,
        }
    }

    pub fn with_text_b(mut self, text_b: impl Into<String>) -> Self {
        self.text_b = Some(text_b.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Arc<TaskSpec>,
    pub split_name: String,
    /// Only unlabeled splits may contain records without a label.
    pub unlabeled: bool,
    pub records: Vec<Record>,
}

impl Dataset {
    /// Builds a dataset after checking every record against the task.
    pub fn new(
        task: Arc<TaskSpec>,
        split_name: impl Into<String>,
        records: Vec<Record>,
        unlabeled: bool,
    ) -> Result<Self> {
        let ds = Self {
            task,
            split_name: split_name.into(),
            unlabeled,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        let mut failed = Vec::new();
        for r in &self.records {
            if !seen.insert(r.uid.as_str()) {
                failed.push(format!("duplicate uid {:?}", r.uid));
            }
            if let Err(e) = check_record(&self.task, r, self.unlabeled) {
                failed.push(e);
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(failed))
        }
    }

    /// Records grouped by class id (class order), preserving dataset order.
    pub fn by_class(&self) -> BTreeMap<usize, Vec<&Record>> {
        let mut groups: BTreeMap<usize, Vec<&Record>> = BTreeMap::new();
        for label in &self.task.labels {
            groups.insert(label.class_id, Vec::new());
        }
        for r in &self.records {
            if let Some(Label::Class(c)) = r.label {
                groups.entry(c).or_default().push(r);
            }
        }
        groups
    }

    /// A new dataset holding the records whose uid is in `uids`, in the order
    /// given by `uids`.
    pub fn subset(&self, split_name: &str, uids: &[String]) -> Result<Dataset> {
        let index: BTreeMap<&str, &Record> =
            self.records.iter().map(|r| (r.uid.as_str(), r)).collect();
        let records = uids
            .iter()
            .map(|u| {
                index
                    .get(u.as_str())
                    .map(|r| (*r).clone())
                    .ok_or_else(|| Error::precondition(format!("uid {u:?} not in {}", self.split_name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            task: Arc::clone(&self.task),
            split_name: split_name.to_string(),
            unlabeled: self.unlabeled,
            records,
        })
    }
}

fn check_record(task: &TaskSpec, r: &Record, unlabeled: bool) -> Result<(), String> {
    if r.uid.is_empty() {
        return Err("record with empty uid".to_string());
    }
    if r.text_a.trim().is_empty() {
        return Err(format!("{}: text_a is empty", r.uid));
    }
    match (r.label, task.kind) {
        (None, _) if unlabeled => Ok(()),
        (None, _) => Err(format!("{}: missing label in labeled split", r.uid)),
        (Some(Label::Class(c)), TaskKind::SingleSentence | TaskKind::SentencePair) => {
            if c < task.n_classes() {
                Ok(())
            } else {
                Err(format!("{}: class id {c} out of range", r.uid))
            }
        }
        (Some(Label::Score(s)), TaskKind::Regression) => {
            let (lo, hi) = task.score_range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            if s.is_finite() && s >= lo && s <= hi {
                Ok(())
            } else {
                Err(format!("{}: score {s} outside [{lo}, {hi}]", r.uid))
            }
        }
        (Some(Label::Class(_)), TaskKind::Regression) => {
            Err(format!("{}: class label on regression task", r.uid))
        }
        (Some(Label::Score(_)), _) => Err(format!("{}: numeric score on classification task", r.uid)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Tsv,
}

/// Where a record field is read from: a JSON key / TSV header name, or a
/// zero-based TSV column index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl Column {
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub uid: Option<Column>,
    pub text_a: Column,
    pub text_b: Option<Column>,
    pub label: Option<Column>,
    pub language: Option<Column>,
    /// TSV only: the first line is a header.
    pub has_header: bool,
}

impl Default for ColumnMap {
    /// Canonical JSONL field names.
    fn default() -> Self {
        Self {
            uid: Some(Column::Name("uid".into())),
            text_a: Column::Name("text_a".into()),
            text_b: Some(Column::Name("text_b".into())),
            label: Some(Column::Name("label".into())),
            language: Some(Column::Name("language".into())),
            has_header: false,
        }
    }
}

impl ColumnMap {
    /// Parses `field=column` pairs such as `uid=0,text_a=1,label=2`.
    /// Fields not mentioned are absent.
    pub fn parse(spec: &str, has_header: bool) -> Result<Self> {
        let mut map = ColumnMap {
            uid: None,
            text_a: Column::Index(0),
            text_b: None,
            label: None,
            language: None,
            has_header,
        };
        let mut saw_text_a = false;
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (field, col) = part
                .split_once('=')
                .ok_or_else(|| Error::precondition(format!("bad column mapping {part:?}")))?;
            let col = Column::parse(col.trim());
            match field.trim() {
                "uid" => map.uid = Some(col),
                "text_a" => {
                    map.text_a = col;
                    saw_text_a = true;
                }
                "text_b" => map.text_b = Some(col),
                "label" => map.label = Some(col),
                "language" => map.language = Some(col),
                other => return Err(Error::precondition(format!("unknown record field {other:?}"))),
            }
        }
        if !saw_text_a {
            return Err(Error::precondition("column map must cover text_a"));
        }
        Ok(map)
    }
}

/// Reads a dataset file. Blank lines are skipped; errors report the 1-based
/// line number.
pub fn load_records(
    path: &Path,
    format: InputFormat,
    columns: &ColumnMap,
    task: Arc<TaskSpec>,
    split_name: &str,
    unlabeled: bool,
) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = match format {
        InputFormat::Jsonl => parse_jsonl(&text, columns, &task)?,
        InputFormat::Tsv => parse_tsv(&text, columns, &task)?,
    };
    if !unlabeled && columns.label.is_none() {
        return Err(Error::precondition("column map must cover label for a labeled split"));
    }
    Dataset::new(task, split_name, records, unlabeled)
}

fn parse_jsonl(text: &str, columns: &ColumnMap, task: &TaskSpec) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine { line: lineno, message };
        let obj: Map<String, Value> = match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(malformed("expected a JSON object".into())),
            Err(e) => return Err(malformed(e.to_string())),
        };
        let get = |col: &Option<Column>| -> Result<Option<&Value>> {
            match col {
                None => Ok(None),
                Some(Column::Name(n)) => Ok(obj.get(n).filter(|v| !v.is_null())),
                Some(Column::Index(_)) => Err(malformed("JSONL columns must be named".into())),
            }
        };
        let as_string = |v: Option<&Value>, field: &str| -> Result<Option<String>> {
            match v {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(Value::Number(n)) => Ok(Some(n.to_string())),
                Some(other) => Err(malformed(format!("{field}: expected string, got {other}"))),
            }
        };
        let uid = as_string(get(&columns.uid)?, "uid")?.unwrap_or_else(|| format!("line-{lineno}"));
        let text_a = as_string(get(&Some(columns.text_a.clone()))?, "text_a")?
            .ok_or_else(|| malformed("missing text_a".into()))?;
        let text_b = as_string(get(&columns.text_b)?, "text_b")?;
        let language = as_string(get(&columns.language)?, "language")?;
        let label = match get(&columns.label)? {
            None => None,
            Some(v) => Some(label_from_json(v, task).map_err(|e| match e {
                Error::UnknownLabel(_) => e,
                other => malformed(other.to_string()),
            })?),
        };
        out.push(Record {
            uid,
            text_a,
            text_b,
            label,
            language,
        });
    }
    Ok(out)
}

fn parse_tsv(text: &str, columns: &ColumnMap, task: &TaskSpec) -> Result<Vec<Record>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<String> = if columns.has_header {
        match lines.next() {
            Some((_, h)) => h.split('\t').map(|s| s.trim().to_string()).collect(),
            None => return Ok(Vec::new()),
        }
    } else {
        Vec::new()
    };
    let resolve = |col: &Column| -> Result<usize> {
        match col {
            Column::Index(i) => Ok(*i),
            Column::Name(n) => header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::precondition(format!("TSV header has no column {n:?}"))),
        }
    };
    let uid_col = columns.uid.as_ref().map(resolve).transpose()?;
    let text_a_col = resolve(&columns.text_a)?;
    let text_b_col = columns.text_b.as_ref().map(resolve).transpose()?;
    let label_col = columns.label.as_ref().map(resolve).transpose()?;
    let language_col = columns.language.as_ref().map(resolve).transpose()?;

    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let field = |col: usize| -> Result<&str> {
            fields.get(col).copied().ok_or_else(|| Error::MalformedLine {
                line: lineno,
                message: format!("expected at least {} columns, found {}", col + 1, fields.len()),
            })
        };
        let uid = match uid_col {
            Some(c) => field(c)?.to_string(),
            None => format!("line-{lineno}"),
        };
        let text_a = field(text_a_col)?.to_string();
        let text_b = text_b_col.map(field).transpose()?.map(str::to_string);
        let language = language_col
            .map(field)
            .transpose()?
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let label = match label_col {
            None => None,
            Some(c) => {
                let raw = field(c)?.trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(label_from_str(raw, task).map_err(|e| match e {
                        Error::UnknownLabel(_) => e,
                        other => Error::MalformedLine {
                            line: lineno,
                            message: other.to_string(),
                        },
                    })?)
                }
            }
        };
        out.push(Record {
            uid,
            text_a,
            text_b,
            label,
            language,
        });
    }
    Ok(out)
}

fn label_from_json(v: &Value, task: &TaskSpec) -> Result<Label> {
    match v {
        Value::String(s) => label_from_str(s, task),
        Value::Bool(b) => label_from_str(if *b { "true" } else { "false" }, task),
        Value::Number(n) => {
            if task.kind == TaskKind::Regression {
                n.as_f64()
                    .map(Label::Score)
                    .ok_or_else(|| Error::precondition(format!("bad score {n}")))
            } else {
                label_from_str(&n.to_string(), task)
            }
        }
        other => Err(Error::precondition(format!("bad label value {other}"))),
    }
}

/// Resolves a label by class name; for classification tasks a bare integer
/// that is not a class name is accepted as a class id.
fn label_from_str(s: &str, task: &TaskSpec) -> Result<Label> {
    if task.kind == TaskKind::Regression {
        return s
            .parse::<f64>()
            .map(Label::Score)
            .map_err(|_| Error::precondition(format!("bad score {s:?}")));
    }
    if let Some(id) = task.class_id(s) {
        return Ok(Label::Class(id));
    }
    match s.parse::<usize>() {
        Ok(id) if id < task.n_classes() => Ok(Label::Class(id)),
        _ => Err(Error::UnknownLabel(s.to_string())),
    }
}

fn record_to_json(r: &Record, task: &TaskSpec) -> Value {
    let label = match r.label {
        None => Value::Null,
        Some(Label::Class(c)) => Value::String(task.class_name(c).unwrap_or_default().to_string()),
        Some(Label::Score(s)) => serde_json::json!(s),
    };
    serde_json::json!({
        "uid": r.uid,
        "text_a": r.text_a,
        "text_b": r.text_b,
        "label": label,
        "language": r.language,
    })
}

/// Writes the canonical JSONL form of `dataset`.
pub fn write_records<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for r in &dataset.records {
        let line = serde_json::to_string(&record_to_json(r, &dataset.task))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn records_to_jsonl(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_records(dataset, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn save_records(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, records_to_jsonl(dataset)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sst2_like() -> Arc<TaskSpec> {
        Arc::new(TaskSpec {
            name: "sst2".into(),
            kind: TaskKind::SingleSentence,
            labels: vec![
                LabelDef { class_id: 0, class_name: "negative".into() },
                LabelDef { class_id: 1, class_name: "positive".into() },
            ],
            descriptions: [(0, "It was terrible".to_string()), (1, "It was great".to_string())]
                .into_iter()
                .collect(),
            metric: MetricKind::Accuracy,
            score_range: None,
        })
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jsonl_label_name_maps_to_class_id() {
        let f = write_tmp("{\"uid\":\"a1\",\"text_a\":\"good movie\",\"label\":\"positive\"}\n");
        let ds = load_records(f.path(), InputFormat::Jsonl, &ColumnMap::default(), sst2_like(), "train", false)
            .unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].label, Some(Label::Class(1)));
        assert_eq!(ds.records[0].text_a, "good movie");
    }

    #[test]
    fn empty_file_gives_empty_dataset() {
        let f = write_tmp("");
        let ds = load_records(f.path(), InputFormat::Jsonl, &ColumnMap::default(), sst2_like(), "train", false)
            .unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn tsv_with_header_counts_lines_minus_one() {
        let fixture = "id\tsentence\tlabel\n\
                       s1\ta fine film\t1\n\
                       s2\tdull and slow\t0\n\
                       s3\twonderful cast\tpositive\n\
                       s4\tnot worth it\tnegative\n";
        let line_count = fixture.lines().count();
        let f = write_tmp(fixture);
        let map = ColumnMap::parse("uid=0,text_a=1,label=2", true).unwrap();
        let ds = load_records(f.path(), InputFormat::Tsv, &map, sst2_like(), "train", false).unwrap();
        assert_eq!(ds.len(), line_count - 1);
        assert_eq!(ds.records[2].label, Some(Label::Class(1)));
        assert_eq!(ds.records[3].label, Some(Label::Class(0)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_tmp("{\"uid\":\"a\",\"text_a\":\"x\",\"label\":\"positive\"}\n{not json\n");
        let err = load_records(f.path(), InputFormat::Jsonl, &ColumnMap::default(), sst2_like(), "train", false)
            .unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_label_is_named() {
        let f = write_tmp("{\"uid\":\"a\",\"text_a\":\"x\",\"label\":\"meh\"}\n");
        let err = load_records(f.path(), InputFormat::Jsonl, &ColumnMap::default(), sst2_like(), "train", false)
            .unwrap_err();
        assert!(err.to_string().contains("meh"));
    }

    #[test]
    fn missing_label_rejected_unless_unlabeled() {
        let f = write_tmp("{\"uid\":\"a\",\"text_a\":\"x\"}\n");
        let cols = ColumnMap::default();
        assert!(load_records(f.path(), InputFormat::Jsonl, &cols, sst2_like(), "test", false).is_err());
        let ds = load_records(f.path(), InputFormat::Jsonl, &cols, sst2_like(), "test", true).unwrap();
        assert_eq!(ds.records[0].label, None);
    }

    #[test]
    fn duplicate_uid_rejected() {
        let f = write_tmp(
            "{\"uid\":\"a\",\"text_a\":\"x\",\"label\":\"positive\"}\n{\"uid\":\"a\",\"text_a\":\"y\",\"label\":\"negative\"}\n",
        );
        let err = load_records(f.path(), InputFormat::Jsonl, &ColumnMap::default(), sst2_like(), "train", false)
            .unwrap_err();
        assert!(err.to_string().contains("duplicate uid"));
    }

    #[test]
    fn regression_score_checked_against_range() {
        let task = Arc::new(TaskSpec {
            name: "stsb".into(),
            kind: TaskKind::Regression,
            labels: vec![],
            descriptions: BTreeMap::new(),
            metric: MetricKind::Pearson,
            score_range: Some((0.0, 5.0)),
        });
        let f = write_tmp("{\"uid\":\"a\",\"text_a\":\"x\",\"text_b\":\"y\",\"label\":5.5}\n");
        assert!(load_records(f.path(), InputFormat::Jsonl, &ColumnMap::default(), task, "train", false).is_err());
    }

    #[test]
    fn spec_validation_lists_failures() {
        let mut spec = (*sst2_like()).clone();
        spec.descriptions.remove(&0);
        spec.score_range = Some((0.0, 1.0));
        match spec.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }
}
