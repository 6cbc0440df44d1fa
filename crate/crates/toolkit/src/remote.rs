//! Client side of the model-serving wire protocol.
//!
//! Newline-delimited JSON over TCP or a child process's standard streams.
//! The server opens with a handshake line
//! `{"vocab_size", "model_name", "compatibilized"}`; each request
//! `{"id", "entries": [[pos, tok], ...], "target_pos"}` is answered by
//! `{"id", "logprobs": [...]}` or `{"id", "error": "..."}`. Two extension
//! operations carry tokenization: `{"id", "op": "tokenize", "text"}` →
//! `{"id", "ids", "spans"}` and `{"id", "op": "decode", "ids"}` →
//! `{"id", "text"}`.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use code_rationales_core::model::{ContextSubset, Distribution, LanguageModel, ModelError, TokenCodec, VocabId};
use code_rationales_core::token::Span;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Environment variable naming the default remote endpoint.
pub const ENDPOINT_ENV: &str = "CODE_RATIONALES_ENDPOINT";

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("endpoint `{0}` is neither tcp://HOST:PORT nor stdio:COMMAND")]
    BadEndpoint(String),
    #[error("connecting to {endpoint}: {source}")]
    Connect { endpoint: String, source: std::io::Error },
    #[error("handshake: {0}")]
    Handshake(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub vocab_size: usize,
    pub model_name: String,
    pub compatibilized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eos: Option<u32>,
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    next_id: u64,
}

impl Connection {
    fn send(&mut self, requests: &[Value]) -> Result<(), ModelError> {
        for r in requests {
            let mut line = r.to_string();
            line.push('\n');
            self.writer.write_all(line.as_bytes()).map_err(|e| backend(format!("send: {e}")))?;
        }
        self.writer.flush().map_err(|e| backend(format!("send: {e}")))
    }

    fn receive(&mut self) -> Result<Value, ModelError> {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(|e| backend(format!("receive: {e}")))?;
        if n == 0 {
            return Err(backend("server closed the connection".into()));
        }
        serde_json::from_str(&line).map_err(|e| backend(format!("malformed response: {e}")))
    }

    /// Sends all requests, then reads one response per request in order.
    fn round_trip(&mut self, mut requests: Vec<Value>) -> Result<Vec<Value>, ModelError> {
        let first = self.next_id;
        for (i, r) in requests.iter_mut().enumerate() {
            r["id"] = json!(first + i as u64);
        }
        self.next_id += requests.len() as u64;
        self.send(&requests)?;
        let mut out = Vec::with_capacity(requests.len());
        for i in 0..requests.len() as u64 {
            let resp = self.receive()?;
            let id = resp.get("id").and_then(Value::as_u64);
            if id != Some(first + i) {
                return Err(backend(format!("response id {id:?} does not match request {}", first + i)));
            }
            if let Some(err) = resp.get("error") {
                return Err(backend(format!("server error: {}", err.as_str().unwrap_or(&err.to_string()))));
            }
            out.push(resp);
        }
        Ok(out)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn backend(msg: String) -> ModelError {
    ModelError::Backend(msg)
}

/// A model served by another process.
pub struct RemoteModel {
    handshake: Handshake,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for RemoteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteModel").field("handshake", &self.handshake).finish_non_exhaustive()
    }
}

impl RemoteModel {
    /// Connects to `tcp://host:port` or spawns `stdio:command args...`.
    pub fn connect(endpoint: &str) -> Result<Self, RemoteError> {
        let connect_err = |source| RemoteError::Connect { endpoint: endpoint.to_string(), source };
        if let Some(addr) = endpoint.strip_prefix("tcp://") {
            let stream = TcpStream::connect(addr).map_err(connect_err)?;
            let reader = BufReader::new(stream.try_clone().map_err(connect_err)?);
            Self::from_streams(Box::new(reader), Box::new(stream), None)
        } else if let Some(cmd) = endpoint.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace();
            let program = parts.next().ok_or_else(|| RemoteError::BadEndpoint(endpoint.to_string()))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(connect_err)?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Self::from_streams(Box::new(BufReader::new(stdout)), Box::new(stdin), Some(child))
        } else {
            Err(RemoteError::BadEndpoint(endpoint.to_string()))
        }
    }

    /// Endpoint from [`ENDPOINT_ENV`].
    pub fn from_env() -> Result<Self, RemoteError> {
        let endpoint =
            std::env::var(ENDPOINT_ENV).map_err(|_| RemoteError::BadEndpoint(format!("${ENDPOINT_ENV} unset")))?;
        Self::connect(&endpoint)
    }

    pub fn from_streams(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
    ) -> Result<Self, RemoteError> {
        let mut conn = Connection { reader, writer, child, next_id: 0 };
        let hello = conn.receive().map_err(|e| RemoteError::Handshake(e.to_string()))?;
        let handshake: Handshake =
            serde_json::from_value(hello).map_err(|e| RemoteError::Handshake(format!("bad handshake: {e}")))?;
        if handshake.vocab_size == 0 {
            return Err(RemoteError::Handshake("server declares an empty vocabulary".into()));
        }
        Ok(Self { handshake, conn: Mutex::new(conn) })
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    fn round_trip(&self, requests: Vec<Value>) -> Result<Vec<Value>, ModelError> {
        let mut conn = self.conn.lock().map_err(|_| backend("connection poisoned".into()))?;
        conn.round_trip(requests)
    }

    fn distribution(&self, resp: &Value) -> Result<Distribution, ModelError> {
        let logprobs: Vec<Option<f64>> = resp
            .get("logprobs")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| backend("response lacks a logprobs array".into()))?;
        if logprobs.len() != self.handshake.vocab_size {
            return Err(backend(format!(
                "logprobs has {} entries, vocabulary has {}",
                logprobs.len(),
                self.handshake.vocab_size
            )));
        }
        // null stands for log 0
        let lp: Vec<f64> = logprobs.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect();
        Distribution::from_logprobs(&lp)
    }
}

pub fn request(subset: &ContextSubset) -> Value {
    let entries: Vec<[u64; 2]> = subset.entries().iter().map(|&(p, t)| [p as u64, t.0 as u64]).collect();
    json!({"entries": entries, "target_pos": subset.target_position()})
}

impl LanguageModel for RemoteModel {
    fn vocab_size(&self) -> usize {
        self.handshake.vocab_size
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        self.check_subset(subset)?;
        let resp = self.round_trip(vec![request(subset)])?;
        self.distribution(&resp[0])
    }

    fn evaluate_batch(&self, subsets: &[ContextSubset]) -> Result<Vec<Distribution>, ModelError> {
        for s in subsets {
            self.check_subset(s)?;
        }
        let resp = self.round_trip(subsets.iter().map(request).collect())?;
        resp.iter().map(|r| self.distribution(r)).collect()
    }

    fn eos(&self) -> Option<VocabId> {
        self.handshake.eos.map(VocabId)
    }
}

impl TokenCodec for RemoteModel {
    fn encode(&self, text: &str) -> Result<Vec<(VocabId, Span)>, ModelError> {
        let resp = self.round_trip(vec![json!({"op": "tokenize", "text": text})])?;
        let ids: Vec<u32> =
            serde_json::from_value(resp[0]["ids"].clone()).map_err(|e| backend(format!("tokenize response: {e}")))?;
        let spans: Vec<(usize, usize)> =
            serde_json::from_value(resp[0]["spans"].clone()).map_err(|e| backend(format!("tokenize response: {e}")))?;
        if ids.len() != spans.len() {
            return Err(backend("tokenize returned mismatched ids and spans".into()));
        }
        let mut at = 0;
        for &(s, e) in &spans {
            if s != at || e < s || e > text.len() || !text.is_char_boundary(e) {
                return Err(backend(format!("tokenize spans do not partition the text at byte {at}")));
            }
            at = e;
        }
        if at != text.len() {
            return Err(backend("tokenize spans stop before the end of the text".into()));
        }
        ids.into_iter()
            .zip(spans)
            .map(|(id, (s, e))| {
                if id as usize >= self.handshake.vocab_size {
                    return Err(ModelError::UnknownToken { id, vocab_size: self.handshake.vocab_size });
                }
                Ok((VocabId(id), Span::new(s, e)))
            })
            .collect()
    }

    fn decode(&self, id: VocabId) -> Result<String, ModelError> {
        let resp = self.round_trip(vec![json!({"op": "decode", "ids": [id.0]})])?;
        resp[0]["text"].as_str().map(str::to_string).ok_or_else(|| backend("decode response lacks text".into()))
    }
}
