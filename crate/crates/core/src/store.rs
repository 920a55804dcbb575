//! Session persistence and final-joke export.
//!
//! Each session lives in `<root>/sessions/<id>.json` as a [`SessionEnvelope`].
//! Saves write a temp file in the same directory and rename it over the old
//! envelope, so a reader sees either the old or the new file, never a mix.

use std::fmt::Write as _;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::model::{check_invariants, Session, SessionId, WorkflowStage};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnvelope {
    pub format_version: u32,
    pub saved_at: DateTime<Utc>,
    pub session: Session,
}

fn io(e: std::io::Error) -> Error {
    Error::IoFailure(e.to_string())
}

/// A fully written envelope that has not replaced the live file yet.
pub struct StagedSave {
    temp: NamedTempFile,
    target: PathBuf,
}

impl StagedSave {
    pub fn temp_path(&self) -> &Path {
        self.temp.path()
    }

    /// Renames the temp file over the live envelope.
    pub fn commit(self) -> Result<PathBuf> {
        self.temp.persist(&self.target).map_err(|e| io(e.error))?;
        Ok(self.target)
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let dir = root.as_ref().join("sessions");
        fs::create_dir_all(&dir).map_err(io)?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, id: &SessionId) -> Result<PathBuf> {
        if !id.is_path_safe() {
            return Err(Error::IoFailure(format!("session id {id:?} is not a safe file name")));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    /// Writes the envelope to a temp file without touching the live one.
    /// Dropping the result discards the temp file.
    pub fn stage(&self, session: &Session) -> Result<StagedSave> {
        let violations = check_invariants(session);
        if !violations.is_empty() {
            return Err(Error::InvariantViolation(violations));
        }
        let target = self.path_for(&session.id)?;
        let envelope = SessionEnvelope {
            format_version: FORMAT_VERSION,
            saved_at: Utc::now(),
            session: session.clone(),
        };
        let mut temp = NamedTempFile::new_in(&self.dir).map_err(io)?;
        serde_json::to_writer_pretty(&mut temp, &envelope).map_err(|e| Error::IoFailure(e.to_string()))?;
        temp.write_all(b"\n").map_err(io)?;
        temp.as_file().sync_all().map_err(io)?;
        Ok(StagedSave { temp, target })
    }

    pub fn save(&self, session: &Session) -> Result<PathBuf> {
        self.stage(session)?.commit()
    }

    pub fn load_envelope(&self, id: &SessionId) -> Result<SessionEnvelope> {
        let path = self.path_for(id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(Error::UnknownSession(id.clone())),
            Err(e) => return Err(io(e)),
        };
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| Error::CorruptEnvelope(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptEnvelope("missing format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::UnsupportedVersion(version.try_into().unwrap_or(u32::MAX)));
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptEnvelope(e.to_string()))
    }

    pub fn load(&self, id: &SessionId) -> Result<Session> {
        let session = self.load_envelope(id)?.session;
        if &session.id != id {
            return Err(Error::CorruptEnvelope(format!("envelope holds session {}", session.id)));
        }
        let violations = check_invariants(&session);
        if !violations.is_empty() {
            return Err(Error::InvariantViolation(violations));
        }
        Ok(session)
    }

    /// Ids of all stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<SessionId>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(SessionId::new(stem));
                }
            }
        }
        ids.sort_by(|a, b| a.as_str().cmp(b.as_str()));
        Ok(ids)
    }
}

/// Plain-text export of the finalized joke:
///
/// ```text
/// TITLE
/// <title>
///
/// SETUP
/// <setup>
///
/// PUNCHLINE
/// <punchline>
///
/// VERSION
/// <n> of <current_version>
///
/// SOURCES
/// [1] <block text>
///     <url>
/// ```
pub fn export_final(session: &Session) -> Result<String> {
    if session.stage != WorkflowStage::FinalSynthesis {
        return Err(Error::NotFinalized);
    }
    let id = session.final_map_id.as_ref().ok_or(Error::NotFinalized)?;
    let map = session.map(id)?;
    let p = map.current().ok_or_else(|| Error::NoPrototype(id.clone()))?;
    let mut out = String::new();
    let _ = write!(
        out,
        "TITLE\n{}\n\nSETUP\n{}\n\nPUNCHLINE\n{}\n\nVERSION\n{} of {}\n\nSOURCES\n",
        p.title, p.setup, p.punchline, p.version, map.current_version
    );
    for (i, block_id) in p.informed_by.iter().enumerate() {
        let Some(block) = map.block(block_id) else { continue };
        let _ = writeln!(out, "[{}] {}", i + 1, block.text);
        for e in &block.evidence {
            let _ = writeln!(out, "    {}", e.url);
        }
    }
    Ok(out)
}
