//! Client side of the bridge wire protocol.
//!
//! Requests and replies are single-line JSON objects exchanged over the
//! child's stdin/stdout. Training instances travel as a JSONL file whose path
//! is sent in the request.

use std::env;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::{check_targets, Backend, BackendConfig, BackendKind, Hyperparams, ModelHandle, TextPair, TrainExample};

pub const BRIDGE_CMD_VAR: &str = "EFL_BRIDGE_CMD";

/// Operations understood by a bridge server.
pub const OPS: [&str; 6] = ["train", "continue_train", "score", "save", "load", "shutdown"];

/// Hyperparameters as they appear on the wire; omitted fields take the
/// few-shot defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WireHyperparams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl WireHyperparams {
    pub fn resolve(&self) -> Hyperparams {
        let d = Hyperparams::few_shot();
        Hyperparams {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            warmup_ratio: self.warmup_ratio.unwrap_or(d.warmup_ratio),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

impl From<Hyperparams> for WireHyperparams {
    fn from(h: Hyperparams) -> Self {
        Self {
            learning_rate: Some(h.learning_rate),
            batch_size: Some(h.batch_size),
            max_epochs: Some(h.max_epochs),
            warmup_ratio: Some(h.warmup_ratio),
            weight_decay: Some(h.weight_decay),
            seed: Some(h.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Train {
        instances_path: String,
        head_size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hyperparams: Option<WireHyperparams>,
    },
    ContinueTrain {
        model_id: String,
        instances_path: String,
        head_size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hyperparams: Option<WireHyperparams>,
    },
    Score {
        model_id: String,
        pairs: Vec<(String, String)>,
    },
    Save {
        model_id: String,
        path: String,
    },
    Load {
        path: String,
    },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Reply {
    pub fn success(payload: Value) -> Self {
        Self {
            ok: true,
            payload: Some(payload),
            error: None,
        }
    }

    pub fn failure(error: impl Into<String>) -> Self {
        Self {
            ok: false,
            payload: None,
            error: Some(error.into()),
        }
    }
}

/// One line of the instance file sent with train requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireInstance {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    pub target: f64,
}

impl WireInstance {
    pub fn from_example(ex: &TrainExample) -> Self {
        Self {
            uid: ex.uid.clone(),
            premise: ex.premise.clone(),
            hypothesis: ex.hypothesis.clone(),
            target: ex.target.wire_value(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct TrainPayload {
    model_id: String,
}

#[derive(Debug, Deserialize)]
struct ScorePayload {
    probs: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct LoadPayload {
    model_id: String,
    head_size: usize,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    reader: Box<dyn BufRead + Send>,
    child: Option<Child>,
}

/// Backend that delegates to an external process. Requests are serialized
/// through a mutex, so at most one is in flight per connection.
pub struct BridgeBackend {
    conn: Mutex<Connection>,
    work_dir: PathBuf,
    counter: AtomicU64,
}

impl BridgeBackend {
    /// Launches `command` (whitespace-separated program and arguments).
    pub fn spawn(command: &str, work_dir: &Path) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Transport("empty bridge command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start bridge `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::with_streams(Box::new(stdin), Box::new(BufReader::new(stdout)), Some(child), work_dir)
    }

    /// Launches the command named by `EFL_BRIDGE_CMD`.
    pub fn from_env(work_dir: &Path) -> Result<Self> {
        let cmd = env::var(BRIDGE_CMD_VAR)
            .map_err(|_| Error::Transport(format!("{BRIDGE_CMD_VAR} is not set")))?;
        Self::spawn(&cmd, work_dir)
    }

    /// Uses already-connected streams, e.g. an in-process server.
    pub fn with_streams(
        writer: Box<dyn Write + Send>,
        reader: Box<dyn BufRead + Send>,
        child: Option<Child>,
        work_dir: &Path,
    ) -> Result<Self> {
        fs::create_dir_all(work_dir).map_err(|e| Error::io(work_dir, e))?;
        let work_dir = work_dir.canonicalize().map_err(|e| Error::io(work_dir, e))?;
        Ok(Self {
            conn: Mutex::new(Connection { writer, reader, child }),
            work_dir,
            counter: AtomicU64::new(0),
        })
    }

    pub fn request(&self, req: &Request) -> Result<Value> {
        let line = serde_json::to_string(req)?;
        let mut conn = self.conn.lock().map_err(|_| Error::Transport("bridge lock poisoned".into()))?;
        let transport = |e: std::io::Error| Error::Transport(e.to_string());
        conn.writer.write_all(line.as_bytes()).map_err(transport)?;
        conn.writer.write_all(b"\n").map_err(transport)?;
        conn.writer.flush().map_err(transport)?;
        let mut reply = String::new();
        if conn.reader.read_line(&mut reply).map_err(transport)? == 0 {
            return Err(Error::Transport("bridge closed the connection".into()));
        }
        let reply: Reply = serde_json::from_str(reply.trim_end())
            .map_err(|e| Error::Transport(format!("malformed reply: {e}")))?;
        if reply.ok {
            Ok(reply.payload.unwrap_or(Value::Null))
        } else {
            Err(Error::Backend(reply.error.unwrap_or_else(|| "unspecified bridge error".into())))
        }
    }

    fn write_instances(&self, examples: &[TrainExample]) -> Result<PathBuf> {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let path = self.work_dir.join(format!("instances-{n}.jsonl"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for ex in examples {
            serde_json::to_writer(&mut out, &WireInstance::from_example(ex))?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn model_id(handle: &ModelHandle) -> Result<String> {
        handle
            .model_id()
            .map(str::to_string)
            .ok_or_else(|| Error::Backend("handle does not belong to the bridge backend".into()))
    }

    pub fn save(&self, handle: &ModelHandle, path: &str) -> Result<()> {
        self.request(&Request::Save {
            model_id: Self::model_id(handle)?,
            path: path.to_string(),
        })
        .map(|_| ())
    }

    pub fn load(&self, path: &str) -> Result<ModelHandle> {
        let payload = self.request(&Request::Load { path: path.to_string() })?;
        let p: LoadPayload = serde_json::from_value(payload)?;
        Ok(ModelHandle::bridge(p.model_id, p.head_size))
    }

    pub fn shutdown(&self) -> Result<()> {
        self.request(&Request::Shutdown).map(|_| ())
    }
}

impl Drop for BridgeBackend {
    fn drop(&mut self) {
        let has_child = self.conn.get_mut().map(|c| c.child.is_some()).unwrap_or(false);
        if has_child {
            let _ = self.shutdown();
            if let Ok(conn) = self.conn.get_mut() {
                if let Some(mut child) = conn.child.take() {
                    let _ = child.wait();
                }
            }
        }
    }
}

impl Backend for BridgeBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Bridge
    }

    fn train(&self, examples: &[TrainExample], config: &BackendConfig) -> Result<ModelHandle> {
        if examples.is_empty() {
            return Err(Error::precondition("cannot train on zero instances"));
        }
        config.validate()?;
        check_targets(examples, config.head_size)?;
        let path = self.write_instances(examples)?;
        let payload = self.request(&Request::Train {
            instances_path: path.to_string_lossy().into_owned(),
            head_size: config.head_size,
            hyperparams: Some(config.hyperparams.into()),
        })?;
        let p: TrainPayload = serde_json::from_value(payload)?;
        Ok(ModelHandle::bridge(p.model_id, config.head_size))
    }

    fn continue_train(
        &self,
        handle: &ModelHandle,
        examples: &[TrainExample],
        config: &BackendConfig,
    ) -> Result<ModelHandle> {
        let model_id = Self::model_id(handle)?;
        if examples.is_empty() {
            return Ok(handle.clone());
        }
        config.validate()?;
        check_targets(examples, config.head_size)?;
        let path = self.write_instances(examples)?;
        let payload = self.request(&Request::ContinueTrain {
            model_id,
            instances_path: path.to_string_lossy().into_owned(),
            head_size: config.head_size,
            hyperparams: Some(config.hyperparams.into()),
        })?;
        let p: TrainPayload = serde_json::from_value(payload)?;
        Ok(ModelHandle::bridge(p.model_id, config.head_size))
    }

    fn score(&self, handle: &ModelHandle, pairs: &[TextPair]) -> Result<Vec<Vec<f64>>> {
        let payload = self.request(&Request::Score {
            model_id: Self::model_id(handle)?,
            pairs: pairs.to_vec(),
        })?;
        let p: ScorePayload = serde_json::from_value(payload)?;
        if p.probs.len() != pairs.len() {
            return Err(Error::Transport(format!(
                "expected {} score rows, got {}",
                pairs.len(),
                p.probs.len()
            )));
        }
        if let Some(row) = p.probs.iter().find(|r| r.len() != handle.head_size()) {
            return Err(Error::Transport(format!(
                "score row of length {} for a {}-way head",
                row.len(),
                handle.head_size()
            )));
        }
        Ok(p.probs)
    }
}
