//! Append-only line logs with a hash chain.
//!
//! Every line is `{"seq":n,"prev":"<sha256 of line n-1>","record":{…}}`; the
//! first line's `prev` is 64 zeros. The chain is verified before every append,
//! so an edited or truncated earlier entry is reported instead of extended.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry<T> {
    seq: u64,
    prev: String,
    record: T,
}

fn line_hash(line: &str) -> String {
    hex::encode(Sha256::digest(line.as_bytes()))
}

pub struct RunLog {
    path: PathBuf,
    next_seq: u64,
    last: String,
}

fn verify<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, String)> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), GENESIS.into())),
        Err(e) => return Err(Error::io(path)(e)),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(Error::RunLog { path: path.into(), message: "last entry is incomplete".into() });
    }
    let mut prev = GENESIS.to_string();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let entry: Entry<T> = serde_json::from_str(line).map_err(|e| Error::line(path, i + 1, e))?;
        if entry.seq != i as u64 || entry.prev != prev {
            return Err(Error::RunLog { path: path.into(), message: format!("hash chain broken at line {}", i + 1) });
        }
        prev = line_hash(line);
        records.push(entry.record);
    }
    Ok((records, prev))
}

/// Reads every record after verifying the chain. A missing file is empty.
pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(verify(path)?.0)
}

impl RunLog {
    /// Opens (or starts) a log, verifying what is already there.
    pub fn open<T: DeserializeOwned>(path: &Path) -> Result<Self> {
        let (records, last) = verify::<T>(path)?;
        Ok(Self { path: path.into(), next_seq: records.len() as u64, last })
    }

    pub fn len(&self) -> u64 {
        self.next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.next_seq == 0
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let entry = Entry { seq: self.next_seq, prev: self.last.clone(), record };
        let line = serde_json::to_string(&entry).map_err(|e| Error::RunLog { path: self.path.clone(), message: e.to_string() })?;
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(Error::io(&self.path))?;
        f.write_all(format!("{line}\n").as_bytes()).map_err(Error::io(&self.path))?;
        self.last = line_hash(&line);
        self.next_seq += 1;
        Ok(())
    }
}
