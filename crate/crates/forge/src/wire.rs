//! The batch stream handed to trainers.
//!
//! A phase is framed as a header line, one JSON object per batch, and a
//! trailer:
//!
//! ```text
//! {"protocol":"mtlforge-batch","version":1,"phase":"pre_finetune","batches":2,"manifest_digest":"…","hyperparameters":{…}}
//! {"stage":0,"task":"imdb","homogeneous":true,"examples":[{"input":"text: …","target":"positive","task":"imdb"}]}
//! {"stage":0,"task":"imdb","homogeneous":true,"examples":[…]}
//! {"end":"pre_finetune","batches":2,"digest":"<sha256 of the batch lines>"}
//! ```
//!
//! The trailer digest covers the batch lines exactly as sent, newline included.

use std::io::{BufRead, Write};

use mtlforge_core::{Batch, Phase, TextPair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Hyperparameters;
use crate::error::{Error, Result};

pub const PROTOCOL: &str = "mtlforge-batch";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub protocol: String,
    pub version: u32,
    pub phase: Phase,
    pub batches: u64,
    pub manifest_digest: String,
    pub hyperparameters: Hyperparameters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trailer {
    pub end: Phase,
    pub batches: u64,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireExample {
    input: String,
    target: String,
    task: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBatch {
    stage: u32,
    task: Option<String>,
    homogeneous: bool,
    examples: Vec<WireExample>,
}

impl From<&Batch> for WireBatch {
    fn from(b: &Batch) -> Self {
        WireBatch {
            stage: b.stage,
            task: b.task.clone(),
            homogeneous: b.homogeneous,
            examples: b
                .examples
                .iter()
                .map(|p| WireExample {
                    input: p.input_text.clone(),
                    target: p.target_text.clone(),
                    task: p.task_name.clone(),
                })
                .collect(),
        }
    }
}

impl From<WireBatch> for Batch {
    fn from(b: WireBatch) -> Self {
        Batch {
            stage: b.stage,
            task: b.task,
            homogeneous: b.homogeneous,
            examples: b
                .examples
                .into_iter()
                .map(|e| TextPair { input_text: e.input, target_text: e.target, task_name: e.task })
                .collect(),
        }
    }
}

/// One batch as a wire line, without the newline.
pub fn encode_batch(batch: &Batch) -> String {
    serde_json::to_string(&WireBatch::from(batch)).expect("batch serializes")
}

pub struct BatchWriter<W: Write> {
    out: W,
    phase: Phase,
    expected: u64,
    written: u64,
    hasher: Sha256,
}

impl<W: Write> BatchWriter<W> {
    pub fn begin(mut out: W, header: &Header) -> std::io::Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(Self { out, phase: header.phase, expected: header.batches, written: 0, hasher: Sha256::new() })
    }

    pub fn write(&mut self, batch: &Batch) -> std::io::Result<()> {
        let mut line = encode_batch(batch).into_bytes();
        line.push(b'\n');
        self.hasher.update(&line);
        self.out.write_all(&line)?;
        self.written += 1;
        Ok(())
    }

    /// Writes the trailer and hands back the sink.
    pub fn finish(mut self) -> std::io::Result<(W, Trailer)> {
        if self.written != self.expected {
            return Err(std::io::Error::other(format!(
                "header announced {} batches but {} were written",
                self.expected, self.written
            )));
        }
        let trailer = Trailer { end: self.phase, batches: self.written, digest: hex::encode(self.hasher.finalize()) };
        serde_json::to_writer(&mut self.out, &trailer)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok((self.out, trailer))
    }
}

pub fn header(phase: Phase, batches: u64, manifest_digest: &str, hyperparameters: &Hyperparameters) -> Header {
    Header {
        protocol: PROTOCOL.into(),
        version: VERSION,
        phase,
        batches,
        manifest_digest: manifest_digest.into(),
        hyperparameters: hyperparameters.clone(),
    }
}

/// Item of a [`BatchReader`].
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Begin(Header),
    Batch(Batch),
    End(Trailer),
}

/// Parses frames from a stream, checking framing, counts and digests.
/// Errors carry the 1-based line number.
pub struct BatchReader<R: BufRead> {
    input: R,
    line: usize,
    open: Option<(Header, u64, Sha256)>,
    buf: String,
}

impl<R: BufRead> BatchReader<R> {
    pub fn new(input: R) -> Self {
        Self { input, line: 0, open: None, buf: String::new() }
    }

    pub fn line(&self) -> usize {
        self.line
    }

    fn err(&self, message: impl std::fmt::Display) -> Error {
        Error::Protocol(format!("line {}: {message}", self.line))
    }

    /// The next frame, or `None` at a clean end of input.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        self.buf.clear();
        let n = self.input.read_line(&mut self.buf).map_err(|e| Error::Protocol(format!("read failed: {e}")))?;
        if n == 0 {
            return match &self.open {
                Some((h, ..)) => Err(self.err(format!("stream ended inside phase {}", h.phase.name()))),
                None => Ok(None),
            };
        }
        self.line += 1;
        let raw = std::mem::take(&mut self.buf);
        let text = raw.strip_suffix('\n').unwrap_or(&raw);
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| self.err(format!("malformed line: {e}")))?;
        let frame = match self.open.take() {
            None => {
                let header: Header =
                    serde_json::from_value(value).map_err(|e| self.err(format!("expected a header: {e}")))?;
                if header.protocol != PROTOCOL {
                    return Err(self.err(format!("unknown protocol `{}`", header.protocol)));
                }
                if header.version != VERSION {
                    return Err(self.err(format!("protocol version {} (expected {VERSION})", header.version)));
                }
                self.open = Some((header.clone(), 0, Sha256::new()));
                Frame::Begin(header)
            }
            Some((header, seen, mut hasher)) if value.get("end").is_some() => {
                let trailer: Trailer = serde_json::from_value(value).map_err(|e| self.err(format!("bad trailer: {e}")))?;
                if trailer.end != header.phase {
                    return Err(self.err(format!("trailer closes {} inside {}", trailer.end.name(), header.phase.name())));
                }
                if seen != header.batches || trailer.batches != seen {
                    return Err(self.err(format!(
                        "batch count mismatch: header {}, trailer {}, received {seen}",
                        header.batches, trailer.batches
                    )));
                }
                let digest = hex::encode(std::mem::take(&mut hasher).finalize());
                if digest != trailer.digest {
                    return Err(self.err("stream digest mismatch"));
                }
                Frame::End(trailer)
            }
            Some((header, seen, mut hasher)) => {
                let batch: WireBatch = serde_json::from_value(value).map_err(|e| self.err(format!("bad batch: {e}")))?;
                if batch.homogeneous != batch.task.is_some() {
                    return Err(self.err("`task` must be set exactly when `homogeneous` is true"));
                }
                hasher.update(raw.as_bytes());
                if !raw.ends_with('\n') {
                    hasher.update(b"\n");
                }
                self.open = Some((header, seen + 1, hasher));
                Frame::Batch(batch.into())
            }
        };
        Ok(Some(frame))
    }
}
