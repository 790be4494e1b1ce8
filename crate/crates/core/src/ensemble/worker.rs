//! Line-oriented JSON protocol between the toolkit and a scoring process.
//!
//! The worker prints `{"ready": true}` once, then answers every request line
//! `{"id", "texts"}` with `{"id", "scores"}` or `{"id", "error"}`. Responses
//! may come back in any order.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::dataset::ReconstructedInput;
use crate::error::{Error, Result};
use crate::scorer::{score_input, ToyScorerParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerRequest {
    pub id: String,
    pub texts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorkerResponse {
    Scores { id: String, scores: Vec<f64> },
    Failure { id: String, error: String },
    Ready { ready: bool },
}

fn protocol(message: impl Into<String>) -> Error {
    Error::Protocol(message.into())
}

fn next_line<R: BufRead>(reader: &mut R, line: &mut String) -> Result<bool> {
    loop {
        line.clear();
        let n = reader.read_line(line).map_err(|e| protocol(format!("read failed: {e}")))?;
        if n == 0 {
            return Ok(false);
        }
        if !line.trim().is_empty() {
            return Ok(true);
        }
    }
}

fn parse_response(line: &str) -> Result<WorkerResponse> {
    serde_json::from_str(line.trim()).map_err(|e| protocol(format!("bad response {:?}: {e}", line.trim())))
}

/// Waits for readiness, sends every request and collects one score list per
/// request id.
///
/// Requests are written from a separate thread so a worker that answers
/// while still reading cannot deadlock on full pipes. The writer is dropped
/// after the last request, which closes the worker's input.
pub fn exchange<R, W>(mut reader: R, writer: W, requests: &[WorkerRequest]) -> Result<BTreeMap<String, Vec<f64>>>
where
    R: BufRead,
    W: Write + Send + 'static,
{
    let mut arity = BTreeMap::new();
    for r in requests {
        if arity.insert(r.id.clone(), r.texts.len()).is_some() {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }

    let mut line = String::new();
    if !next_line(&mut reader, &mut line)? {
        return Err(protocol("worker closed its output before signalling ready"));
    }
    match parse_response(&line)? {
        WorkerResponse::Ready { ready: true } => {}
        other => return Err(protocol(format!("expected {{\"ready\": true}}, got {other:?}"))),
    }

    let lines = requests
        .iter()
        .map(|r| serde_json::to_string(r).map_err(|e| protocol(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let sender = thread::spawn(move || -> std::io::Result<()> {
        let mut writer = BufWriter::new(writer);
        for l in lines {
            writer.write_all(l.as_bytes())?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    });

    let mut scores = BTreeMap::new();
    while scores.len() < arity.len() {
        if !next_line(&mut reader, &mut line)? {
            let missing: Vec<_> = arity.keys().filter(|id| !scores.contains_key(*id)).cloned().collect();
            return Err(protocol(format!(
                "worker closed its output with {} requests unanswered: {}",
                missing.len(),
                missing.join(", ")
            )));
        }
        match parse_response(&line)? {
            WorkerResponse::Scores { id, scores: s } => {
                let Some(&expected) = arity.get(&id) else {
                    return Err(protocol(format!("response for unknown id {id:?}")));
                };
                if s.len() != expected {
                    return Err(protocol(format!("{id}: {} scores for {expected} texts", s.len())));
                }
                if scores.insert(id.clone(), s).is_some() {
                    return Err(protocol(format!("second response for id {id:?}")));
                }
            }
            WorkerResponse::Failure { id, error } => {
                return Err(protocol(format!("worker failed on {id:?}: {error}")));
            }
            WorkerResponse::Ready { .. } => return Err(protocol("unexpected ready line")),
        }
    }

    match sender.join() {
        Ok(Ok(())) => Ok(scores),
        Ok(Err(e)) => Err(protocol(format!("write failed: {e}"))),
        Err(_) => Err(protocol("request writer panicked")),
    }
}

/// A worker child process with piped standard streams.
pub struct WorkerClient {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl WorkerClient {
    pub fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) =
            command.split_first().ok_or_else(|| Error::InvalidInput("empty worker command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::io(program, e))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Self { child, stdin, stdout })
    }

    /// Runs one exchange; the worker's input is closed afterwards, so a
    /// client scores exactly one batch.
    pub fn score(&mut self, requests: &[WorkerRequest]) -> Result<BTreeMap<String, Vec<f64>>> {
        let stdin = self.stdin.take().ok_or_else(|| protocol("worker input already closed"))?;
        let result = exchange(&mut self.stdout, stdin, requests);
        if result.is_err() {
            let _ = self.child.kill();
        }
        result
    }

    /// Waits for the worker to exit and fails on a nonzero status.
    pub fn finish(mut self) -> Result<()> {
        drop(self.stdin.take());
        let status = self.child.wait().map_err(|e| protocol(format!("wait failed: {e}")))?;
        if status.success() {
            Ok(())
        } else {
            Err(protocol(format!("worker exited with {status}")))
        }
    }
}

impl Drop for WorkerClient {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// Worker side of the protocol backed by the toy scorer, in eval mode.
///
/// Texts are scored as given, markers included. Malformed request lines are
/// answered with an error response and do not stop the loop.
pub fn serve_toy<R: BufRead, W: Write>(params: &ToyScorerParams, mut reader: R, mut writer: W) -> Result<()> {
    let io = |e: std::io::Error| protocol(format!("worker stream: {e}"));
    writeln!(writer, "{}", serde_json::json!({ "ready": true })).map_err(io)?;
    writer.flush().map_err(io)?;
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let mut line = String::new();
    while next_line(&mut reader, &mut line)? {
        let response = match serde_json::from_str::<WorkerRequest>(line.trim()) {
            Ok(request) => {
                let scores = request
                    .texts
                    .iter()
                    .enumerate()
                    .map(|(i, text)| {
                        let input = ReconstructedInput {
                            text: text.clone(),
                            begin_marker: params.template.begin_marker.clone(),
                            end_marker: params.template.end_marker.clone(),
                            source_sample_id: request.id.clone(),
                            choice_index: i,
                        };
                        score_input(params, &input, None, &mut rng)
                    })
                    .collect();
                WorkerResponse::Scores { id: request.id, scores }
            }
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line.trim())
                    .ok()
                    .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(String::from))
                    .unwrap_or_default();
                WorkerResponse::Failure { id, error: e.to_string() }
            }
        };
        let out = serde_json::to_string(&response).map_err(|e| protocol(e.to_string()))?;
        writeln!(writer, "{out}").map_err(io)?;
        writer.flush().map_err(io)?;
    }
    Ok(())
}
