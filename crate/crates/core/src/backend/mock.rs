//! Reference bridge server backed by the builtin backend.
//!
//! Speaks the full wire protocol so the client can be exercised without an
//! external runtime. Every failure becomes an `{"ok":false}` reply; the loop
//! only stops on `shutdown` or end of input.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::bridge::{Reply, Request, WireHyperparams, WireInstance, OPS};
use super::builtin::BuiltinBackend;
use super::{Backend, BackendConfig, BackendKind, ModelHandle, Target, TrainExample};

const MODEL_FILE: &str = "model.bin";

pub struct MockServer {
    root: PathBuf,
    models: BTreeMap<String, ModelHandle>,
    next_id: u64,
}

impl MockServer {
    /// Relative paths in requests resolve against `root`.
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            models: BTreeMap::new(),
            next_id: 1,
        }
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn read_instances(&self, path: &str, head_size: usize) -> Result<Vec<TrainExample>> {
        let path = self.resolve(path);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let wire: Vec<WireInstance> = crate::reformulator::read_jsonl(BufReader::new(file))?;
        Ok(wire
            .into_iter()
            .map(|w| {
                let target = if head_size == 1 {
                    Target::Scalar(w.target)
                } else if w.target.fract() == 0.0 && w.target >= 0.0 {
                    Target::Class(w.target as usize)
                } else {
                    Target::Soft(w.target)
                };
                TrainExample {
                    uid: w.uid,
                    premise: w.premise,
                    hypothesis: w.hypothesis,
                    target,
                }
            })
            .collect())
    }

    fn store(&mut self, handle: ModelHandle) -> String {
        let id = format!("m{}", self.next_id);
        self.next_id += 1;
        self.models.insert(id.clone(), handle);
        id
    }

    fn model(&self, id: &str) -> Result<&ModelHandle> {
        self.models
            .get(id)
            .ok_or_else(|| Error::Backend(format!("unknown model id {id}")))
    }

    fn train_reply(&mut self, handle: ModelHandle, hyper: &WireHyperparams) -> Value {
        let head_size = handle.head_size();
        let id = self.store(handle);
        json!({
            "model_id": id,
            "head_size": head_size,
            "hyperparams": hyper.resolve(),
        })
    }

    fn dispatch(&mut self, req: Request) -> Result<Value> {
        match req {
            Request::Train {
                instances_path,
                head_size,
                hyperparams,
            } => {
                let hyper = hyperparams.unwrap_or_default();
                let examples = self.read_instances(&instances_path, head_size)?;
                let config = BackendConfig::new(BackendKind::Builtin, hyper.resolve(), head_size);
                let handle = BuiltinBackend.train(&examples, &config)?;
                Ok(self.train_reply(handle, &hyper))
            }
            Request::ContinueTrain {
                model_id,
                instances_path,
                head_size,
                hyperparams,
            } => {
                let hyper = hyperparams.unwrap_or_default();
                let base = self.model(&model_id)?.clone();
                let examples = self.read_instances(&instances_path, head_size)?;
                let config = BackendConfig::new(BackendKind::Builtin, hyper.resolve(), head_size);
                let handle = BuiltinBackend.continue_train(&base, &examples, &config)?;
                Ok(self.train_reply(handle, &hyper))
            }
            Request::Score { model_id, pairs } => {
                let probs = BuiltinBackend.score(self.model(&model_id)?, &pairs)?;
                Ok(json!({ "probs": probs }))
            }
            Request::Save { model_id, path } => {
                let handle = self.model(&model_id)?;
                let dir = self.resolve(&path);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                handle.save(&dir.join(MODEL_FILE))?;
                Ok(json!({ "path": path }))
            }
            Request::Load { path } => {
                let file = self.resolve(&path).join(MODEL_FILE);
                let handle = ModelHandle::load(&file, BackendKind::Builtin)?;
                let head_size = handle.head_size();
                let id = self.store(handle);
                Ok(json!({ "model_id": id, "head_size": head_size }))
            }
            Request::Shutdown => Ok(json!({})),
        }
    }

    /// Handles one request line and returns the reply line (no newline).
    pub fn handle_line(&mut self, line: &str) -> (String, bool) {
        let mut shutdown = false;
        let reply = match serde_json::from_str::<Value>(line) {
            Err(e) => Reply::failure(format!("malformed request: {e}")),
            Ok(value) => {
                let op = value.get("op").and_then(Value::as_str).unwrap_or_default().to_string();
                if !OPS.contains(&op.as_str()) {
                    Reply::failure("unknown op")
                } else {
                    match serde_json::from_value::<Request>(value) {
                        Err(e) => Reply::failure(format!("bad {op} request: {e}")),
                        Ok(req) => {
                            shutdown = req == Request::Shutdown;
                            match self.dispatch(req) {
                                Ok(payload) => Reply::success(payload),
                                Err(e) => Reply::failure(e.to_string()),
                            }
                        }
                    }
                }
            }
        };
        let text = serde_json::to_string(&reply).expect("replies always serialize");
        (text, shutdown)
    }
}

/// Serves requests from `input` until `shutdown` or end of input.
pub fn serve<R: BufRead, W: Write>(input: R, mut output: W, root: &Path) -> Result<()> {
    let mut server = MockServer::new(root);
    for line in input.lines() {
        let line = line.map_err(|e| Error::Transport(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (reply, stop) = server.handle_line(&line);
        writeln!(output, "{reply}").map_err(|e| Error::Transport(e.to_string()))?;
        output.flush().map_err(|e| Error::Transport(e.to_string()))?;
        if stop {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_op_keeps_serving() {
        let dir = tempfile::tempdir().unwrap();
        let input = "{\"op\":\"explode\"}\nnot json\n{\"op\":\"shutdown\"}\n{\"op\":\"shutdown\"}\n";
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, dir.path()).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], r#"{"ok":false,"error":"unknown op"}"#);
        assert!(lines[1].starts_with(r#"{"ok":false"#));
        assert_eq!(lines[2], r#"{"ok":true,"payload":{}}"#);
    }

    #[test]
    fn scoring_an_unknown_model_fails_softly() {
        let dir = tempfile::tempdir().unwrap();
        let mut server = MockServer::new(dir.path());
        let (reply, stop) = server.handle_line(r#"{"op":"score","model_id":"m9","pairs":[]}"#);
        assert!(!stop);
        assert!(reply.contains("unknown model id m9"));
    }
}
