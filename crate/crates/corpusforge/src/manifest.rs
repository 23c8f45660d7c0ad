//! JSONL manifests. Rows keep fields they do not know about, so a rewrite
//! never drops another tool's annotations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use corpusforge_core::corpus::UtteranceRecord;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(flatten)]
    pub record: UtteranceRecord,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Row {
    pub fn new(record: UtteranceRecord) -> Self {
        Self { record, extra: Map::new() }
    }

    /// Still in play: not rejected and not set aside with a reason.
    pub fn is_live(&self) -> bool {
        !self.record.status.is_rejected() && self.record.reason.is_none()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io { path: path.display().to_string(), source }
}

pub fn parse(text: &str, origin: &str) -> Result<Vec<Row>, ManifestError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line).map_err(|e| ManifestError::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<Vec<Row>, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse(&text, &path.display().to_string())
}

pub fn to_string(rows: &[Row]) -> Result<String, ManifestError> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).map_err(|e| ManifestError::Encode(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes `<path>.partial` and leaves it there.
pub fn write_partial(path: impl AsRef<Path>, rows: &[Row]) -> Result<PathBuf, ManifestError> {
    let partial = partial_path(path.as_ref());
    write_bytes(&partial, to_string(rows)?.as_bytes())?;
    Ok(partial)
}

/// Atomic: the rows go to `<path>.partial`, which is then renamed.
pub fn write(path: impl AsRef<Path>, rows: &[Row]) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let partial = write_partial(path, rows)?;
    fs::rename(&partial, path).map_err(io_err(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ManifestError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

/// Audio paths in a manifest are relative to the manifest's directory
/// unless absolute.
pub fn resolve(manifest: &Path, audio_path: &str) -> PathBuf {
    let p = Path::new(audio_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(p)
    }
}
