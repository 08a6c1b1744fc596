//! Line-oriented manifest files: a header object carrying the config block,
//! then one `{stage, task, batches}` record per stage entry.

use std::fs;
use std::path::Path;

use mtlforge_core::schedule::{Provenance, StageEntry, StagePlan};
use mtlforge_core::{FamilyId, SamplingDistribution, ScheduleManifest, SchemeConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT: &str = "mtlforge-manifest";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    rng: String,
    config: SchemeConfig,
    families: Vec<FamilyId>,
    provenance: Provenance,
    distribution: SamplingDistribution,
    /// `(stage number, entry count)` for every stage, in order.
    stages: Vec<(u32, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    stage: u32,
    task: Option<String>,
    batches: u64,
}

pub fn encode(manifest: &ScheduleManifest) -> Vec<u8> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        rng: manifest.provenance.rng.clone(),
        config: manifest.config.clone(),
        families: manifest.families.clone(),
        provenance: manifest.provenance.clone(),
        distribution: manifest.distribution.clone(),
        stages: manifest.stages.iter().map(|s| (s.stage, s.entries.len())).collect(),
    };
    let mut out = serde_json::to_vec(&header).expect("manifest header serializes");
    out.push(b'\n');
    for stage in &manifest.stages {
        for e in &stage.entries {
            let r = Record { stage: stage.stage, task: e.task.clone(), batches: e.batches };
            serde_json::to_writer(&mut out, &r).expect("manifest record serializes");
            out.push(b'\n');
        }
    }
    out
}

/// Parses a manifest file; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<ScheduleManifest> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::format(path, "empty manifest"))?;
    let header: Header = serde_json::from_str(first).map_err(|e| Error::line(path, 1, e))?;
    if header.format != FORMAT {
        return Err(Error::line(path, 1, format!("not a manifest (format `{}`)", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::line(path, 1, format!("unsupported manifest version {}", header.version)));
    }
    let mut stages = Vec::with_capacity(header.stages.len());
    for &(stage, count) in &header.stages {
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = lines.next().ok_or_else(|| Error::format(path, format!("truncated in stage {stage}")))?;
            let r: Record = serde_json::from_str(line).map_err(|e| Error::line(path, n, e))?;
            if r.stage != stage {
                return Err(Error::line(path, n, format!("record for stage {} where stage {stage} was expected", r.stage)));
            }
            entries.push(StageEntry { task: r.task, batches: r.batches });
        }
        stages.push(StagePlan { stage, entries });
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::line(path, n, "records beyond the stage table"));
    }
    Ok(ScheduleManifest {
        config: header.config,
        families: header.families,
        distribution: header.distribution,
        provenance: header.provenance,
        stages,
    })
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the manifest and returns its digest.
pub fn write(path: &Path, manifest: &ScheduleManifest) -> Result<String> {
    let bytes = encode(manifest);
    crate::dataset::write_file(path, &bytes)?;
    Ok(digest(&bytes))
}

/// Reads a manifest, returning it with the digest of the bytes read.
pub fn read(path: &Path) -> Result<(ScheduleManifest, String)> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok((decode(&bytes, path)?, digest(&bytes)))
}
