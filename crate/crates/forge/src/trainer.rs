//! Out-of-process trainers and embedding providers, plus the reference
//! implementations behind the hidden `trainer` and `embedder` subcommands.
//!
//! Trainer protocol: the command is started with `--eval <file> --out <file>`
//! appended to its argv. Each phase arrives on stdin as a framed batch stream
//! (see [`crate::wire`]). After the last phase stdin is closed; the trainer
//! then reads one input per line from the eval file and writes exactly one
//! prediction per line to the out file before exiting with status 0.
//!
//! Embedder protocol: one request per line on stdin, `{"tokens":[…]}`, one
//! response per line on stdout, `{"vectors":[[…],…]}`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use mtlforge_core::metrics::{EmbeddedTokens, HashingEmbedder};
use mtlforge_core::{Batch, Embedder, Phase, Trainer};
use serde::{Deserialize, Serialize};

use crate::config::Hyperparameters;
use crate::error::{Error, Result};
use crate::wire::{self, BatchReader, BatchWriter, Frame};

type Sink = BufWriter<ChildStdin>;

fn trainer_err(e: impl std::fmt::Display) -> mtlforge_core::Error {
    mtlforge_core::Error::Trainer(e.to_string())
}

/// One line per item; embedded line breaks become spaces.
pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l.replace(['\r', '\n'], " "));
        text.push('\n');
    }
    crate::dataset::write_file(path, text.as_bytes())
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub struct ProcessTrainer {
    id: String,
    child: Child,
    stdin: Option<Sink>,
    writer: Option<BatchWriter<Sink>>,
    hyperparameters: Hyperparameters,
    eval_path: PathBuf,
    out_path: PathBuf,
    phase: Phase,
    seen: [u64; 2],
}

impl ProcessTrainer {
    /// Starts `argv` with the eval and out files placed in `workdir`.
    pub fn spawn(argv: &[String], workdir: &Path, hyperparameters: &Hyperparameters) -> Result<Self> {
        let (program, args) = argv.split_first().ok_or_else(|| Error::Protocol("empty trainer command".into()))?;
        fs::create_dir_all(workdir).map_err(Error::io(workdir))?;
        let eval_path = workdir.join("eval_inputs.txt");
        let out_path = workdir.join("trainer_predictions.txt");
        let mut child = Command::new(program)
            .args(args)
            .arg("--eval")
            .arg(&eval_path)
            .arg("--out")
            .arg(&out_path)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start `{program}`: {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("stdin is piped"));
        let name = Path::new(program).file_name().map_or(program.clone(), |n| n.to_string_lossy().into_owned());
        let id = std::iter::once(name).chain(args.iter().cloned()).collect::<Vec<_>>().join(" ");
        Ok(Self {
            id: format!("process:{id}"),
            child,
            stdin: Some(stdin),
            writer: None,
            hyperparameters: hyperparameters.clone(),
            eval_path,
            out_path,
            phase: Phase::PreFinetune,
            seen: [0; 2],
        })
    }

    fn broken(&mut self, what: &str, e: std::io::Error) -> mtlforge_core::Error {
        match self.child.try_wait() {
            Ok(Some(status)) => trainer_err(format!("trainer exited ({status}) while {what}")),
            _ => trainer_err(format!("{what}: {e}")),
        }
    }
}

impl Trainer for ProcessTrainer {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn begin_phase(&mut self, phase: Phase, total_batches: u64, manifest_digest: &str) -> mtlforge_core::Result<()> {
        let stdin = self.stdin.take().ok_or_else(|| trainer_err("phase already open or stream closed"))?;
        let header = wire::header(phase, total_batches, manifest_digest, &self.hyperparameters);
        let writer = BatchWriter::begin(stdin, &header).map_err(|e| self.broken("sending header", e))?;
        self.writer = Some(writer);
        self.phase = phase;
        Ok(())
    }

    fn consume(&mut self, batch: &Batch) -> mtlforge_core::Result<()> {
        let mut writer = self.writer.take().ok_or_else(|| trainer_err("batch outside a phase"))?;
        let sent = writer.write(batch);
        self.writer = Some(writer);
        sent.map_err(|e| self.broken("sending batch", e))?;
        self.seen[self.phase as usize] += 1;
        Ok(())
    }

    fn end_phase(&mut self) -> mtlforge_core::Result<()> {
        let writer = self.writer.take().ok_or_else(|| trainer_err("no open phase"))?;
        let (stdin, _) = writer.finish().map_err(|e| self.broken("closing phase", e))?;
        self.stdin = Some(stdin);
        Ok(())
    }

    fn predict(&mut self, inputs: &[String]) -> mtlforge_core::Result<Vec<String>> {
        if self.writer.is_some() {
            return Err(trainer_err("predict called inside an open phase"));
        }
        write_lines(&self.eval_path, inputs).map_err(trainer_err)?;
        if let Some(mut stdin) = self.stdin.take() {
            stdin.flush().map_err(|e| self.broken("flushing stream", e))?;
        }
        let status = self.child.wait().map_err(trainer_err)?;
        if !status.success() {
            return Err(trainer_err(format!("trainer exited with {status}")));
        }
        let out = read_lines(&self.out_path).map_err(trainer_err)?;
        if out.len() != inputs.len() {
            return Err(trainer_err(format!(
                "{}: {} predictions for {} inputs",
                self.out_path.display(),
                out.len(),
                inputs.len()
            )));
        }
        Ok(out)
    }

    fn batches_seen(&self, phase: Phase) -> u64 {
        self.seen[phase as usize]
    }
}

impl Drop for ProcessTrainer {
    fn drop(&mut self) {
        if matches!(self.child.try_wait(), Ok(None)) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// What the reference trainer received.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Session {
    pub pre_finetune: u64,
    pub finetune: u64,
    pub hyperparameters: Option<Hyperparameters>,
    pub manifest_digests: Vec<String>,
}

/// Reference trainer: validates the stream, reports progress on `log`
/// every `heartbeat` batches, and writes lead-`n` predictions.
pub fn serve_lead(
    input: impl BufRead,
    eval: &Path,
    out: &Path,
    n: usize,
    heartbeat: u64,
    log: &mut dyn Write,
) -> Result<Session> {
    let mut lead = mtlforge_core::lead_n_trainer(n)?;
    let mut reader = BatchReader::new(input);
    let mut session = Session::default();
    let mut phase = Phase::PreFinetune;
    while let Some(frame) = reader.next_frame()? {
        match frame {
            Frame::Begin(h) => {
                if session.hyperparameters.is_none() {
                    let json = serde_json::to_string(&h.hyperparameters).expect("hyperparameters serialize");
                    let _ = writeln!(log, "hyperparameters {json}");
                }
                phase = h.phase;
                session.hyperparameters = Some(h.hyperparameters);
                session.manifest_digests.push(h.manifest_digest);
            }
            Frame::Batch(_) => {
                let count = match phase {
                    Phase::PreFinetune => &mut session.pre_finetune,
                    Phase::Finetune => &mut session.finetune,
                };
                *count += 1;
                if heartbeat > 0 && *count % heartbeat == 0 {
                    let _ = writeln!(log, "heartbeat {} {count}", phase.name());
                }
            }
            Frame::End(t) => {
                let _ = writeln!(log, "end {} {}", t.end.name(), t.batches);
            }
        }
    }
    let inputs = read_lines(eval)?;
    let predictions = lead.predict(&inputs)?;
    write_lines(out, &predictions)?;
    let _ = writeln!(log, "consumed pre_finetune={} finetune={}", session.pre_finetune, session.finetune);
    Ok(session)
}

#[derive(Serialize, Deserialize)]
struct EmbedRequest {
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Embedding provider in a child process; requests are serialized.
pub struct ProcessEmbedder {
    io: Mutex<(Child, BufWriter<ChildStdin>, BufReader<ChildStdout>)>,
}

impl ProcessEmbedder {
    pub fn spawn(argv: &[String]) -> Result<Self> {
        let (program, args) = argv.split_first().ok_or_else(|| Error::Protocol("empty embedder command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start `{program}`: {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped"));
        let stdout = BufReader::new(child.stdout.take().expect("piped"));
        Ok(Self { io: Mutex::new((child, stdin, stdout)) })
    }
}

impl Embedder for ProcessEmbedder {
    fn embed(&self, tokens: &[String]) -> mtlforge_core::Result<EmbeddedTokens> {
        let fail = |m: String| mtlforge_core::Error::Embedder(m);
        let mut guard = self.io.lock().map_err(|_| fail("embedder lock poisoned".into()))?;
        let (_, stdin, stdout) = &mut *guard;
        let req = serde_json::to_string(&EmbedRequest { tokens: tokens.to_vec() }).expect("request serializes");
        writeln!(stdin, "{req}").and_then(|_| stdin.flush()).map_err(|e| fail(e.to_string()))?;
        let mut line = String::new();
        if stdout.read_line(&mut line).map_err(|e| fail(e.to_string()))? == 0 {
            return Err(fail("embedder closed its output".into()));
        }
        let resp: EmbedResponse = serde_json::from_str(&line).map_err(|e| fail(format!("malformed response: {e}")))?;
        EmbeddedTokens::normalized(tokens.to_vec(), resp.vectors)
    }
}

impl Drop for ProcessEmbedder {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.1.flush();
            let _ = io.0.kill();
            let _ = io.0.wait();
        }
    }
}

/// Reference embedding provider over [`HashingEmbedder`].
pub fn serve_hashing(input: impl BufRead, mut output: impl Write, dim: usize) -> Result<u64> {
    let embedder = HashingEmbedder { dim };
    let mut served = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Protocol(e.to_string()))?;
        let req: EmbedRequest =
            serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("line {}: {e}", i + 1)))?;
        let vectors = embedder.embed(&req.tokens)?.vectors().to_vec();
        let resp = serde_json::to_string(&EmbedResponse { vectors }).expect("response serializes");
        writeln!(output, "{resp}").and_then(|_| output.flush()).map_err(|e| Error::Protocol(e.to_string()))?;
        served += 1;
    }
    Ok(served)
}
