//! Little-endian binary files: embeddings (`CFEB`), SVM models (`CFSV`)
//! and CTC emissions (`CFEM`).

use std::path::Path;

use corpusforge_core::decode::{DecodeError, EmissionMatrix};
use corpusforge_core::gender::SvmModel;
use corpusforge_core::speaker::Embedding;
use serde::{Deserialize, Serialize};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"CFEB";
pub const MODEL_MAGIC: &[u8; 4] = b"CFSV";
pub const EMISSION_MAGIC: &[u8; 4] = b"CFEM";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not an embedding file")]
    NotEmbeddingFile,
    #[error("not a model file")]
    NotModelFile,
    #[error("not an emissions file")]
    NotEmissionFile,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("truncated")]
    Truncated,
    #[error("dim disagreement: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("{0} does not fit the format")]
    TooLarge(&'static str),
    #[error("invalid UTF-8 in {0}")]
    Utf8(&'static str),
    #[error("symbol {0:?} is not a single character")]
    Symbol(String),
    #[error("bad model header: {0}")]
    Header(String),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or(FormatError::Truncated)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let raw = self.take(n.checked_mul(4).ok_or(FormatError::Truncated)?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn string16(&mut self, what: &'static str) -> Result<String, FormatError> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| FormatError::Utf8(what))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn at_end(&self) -> bool {
        self.remaining() == 0
    }
}

fn put_string16(out: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), FormatError> {
    let n = u16::try_from(s.len()).map_err(|_| FormatError::TooLarge(what))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &'static str) -> Result<(), FormatError> {
    let v = u32::try_from(v).map_err(|_| FormatError::TooLarge(what))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Serializes embeddings; all must share one dimension. An empty list is
/// written with dimension 0.
pub fn encode_embeddings(embeddings: &[Embedding]) -> Result<Vec<u8>, FormatError> {
    let dim = embeddings.first().map_or(0, Embedding::dim);
    let mut out = Vec::with_capacity(16 + embeddings.len() * (8 + 4 * dim));
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, dim, "dimension")?;
    put_u32(&mut out, embeddings.len(), "embedding count")?;
    for e in embeddings {
        if e.dim() != dim {
            return Err(FormatError::DimMismatch { expected: dim, found: e.dim() });
        }
        put_string16(&mut out, &e.utt_id, "utterance id")?;
        for v in &e.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn parse_embeddings(c: &mut Cursor<'_>) -> Result<Vec<Embedding>, FormatError> {
    if c.take(4).map_err(|_| FormatError::NotEmbeddingFile)? != EMBEDDING_MAGIC {
        return Err(FormatError::NotEmbeddingFile);
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let dim = c.u32()? as usize;
    let count = c.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(c.remaining() / (2 + 4 * dim).max(2)));
    for _ in 0..count {
        let id = c.string16("utterance id")?;
        out.push(Embedding::new(id, c.f32s(dim)?));
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<Vec<Embedding>, FormatError> {
    let mut c = Cursor::new(bytes);
    let out = parse_embeddings(&mut c)?;
    if !c.at_end() {
        return Err(FormatError::Trailing(c.remaining()));
    }
    Ok(out)
}

pub fn save_embeddings(path: impl AsRef<Path>, embeddings: &[Embedding]) -> Result<(), FormatError> {
    write_file(path.as_ref(), &encode_embeddings(embeddings)?)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>, FormatError> {
    decode_embeddings(&read_file(path.as_ref())?)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    gamma: f64,
    c: f64,
    bias: f64,
    coefficients: Vec<f64>,
}

/// `CFSV`, version, JSON header length and header, then the support vectors
/// as an embedded `CFEB` block.
pub fn encode_model(model: &SvmModel) -> Result<Vec<u8>, FormatError> {
    let header = ModelHeader {
        gamma: model.gamma,
        c: model.c,
        bias: model.bias,
        coefficients: model.coefficients.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| FormatError::Header(e.to_string()))?;
    let svs: Vec<Embedding> = model
        .support_vectors
        .iter()
        .enumerate()
        .map(|(i, v)| Embedding::new(format!("sv{i}"), v.clone()))
        .collect();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, json.len(), "model header")?;
    out.extend_from_slice(&json);
    out.extend(encode_embeddings(&svs)?);
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<SvmModel, FormatError> {
    let mut c = Cursor::new(bytes);
    if c.take(4).map_err(|_| FormatError::NotModelFile)? != MODEL_MAGIC {
        return Err(FormatError::NotModelFile);
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let n = c.u32()? as usize;
    let header: ModelHeader = serde_json::from_slice(c.take(n)?).map_err(|e| FormatError::Header(e.to_string()))?;
    let svs = parse_embeddings(&mut c)?;
    if !c.at_end() {
        return Err(FormatError::Trailing(c.remaining()));
    }
    if svs.len() != header.coefficients.len() {
        return Err(FormatError::Header(format!(
            "{} coefficients for {} support vectors",
            header.coefficients.len(),
            svs.len()
        )));
    }
    Ok(SvmModel {
        gamma: header.gamma,
        c: header.c,
        bias: header.bias,
        support_vectors: svs.into_iter().map(|e| e.vector).collect(),
        coefficients: header.coefficients,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &SvmModel) -> Result<(), FormatError> {
    write_file(path.as_ref(), &encode_model(model)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, FormatError> {
    decode_model(&read_file(path.as_ref())?)
}

/// One `CFEM` record: `T`, `V+1`, `V` length-prefixed symbols (the blank is
/// the implicit last column), then `T x (V+1)` f32 natural-log probabilities.
pub fn encode_emissions(em: &EmissionMatrix) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::with_capacity(12 + em.data().len() * 4);
    out.extend_from_slice(EMISSION_MAGIC);
    put_u32(&mut out, em.frames(), "frame count")?;
    put_u32(&mut out, em.width(), "width")?;
    let mut buf = [0u8; 4];
    for s in em.symbols() {
        put_string16(&mut out, s.encode_utf8(&mut buf), "symbol")?;
    }
    for v in em.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Reads every record of a file holding one or more concatenated `CFEM`
/// records.
pub fn decode_emissions(bytes: &[u8]) -> Result<Vec<EmissionMatrix>, FormatError> {
    let mut c = Cursor::new(bytes);
    let mut out = Vec::new();
    while !c.at_end() || out.is_empty() {
        if c.take(4).map_err(|_| FormatError::NotEmissionFile)? != EMISSION_MAGIC {
            return Err(FormatError::NotEmissionFile);
        }
        let frames = c.u32()? as usize;
        let width = c.u32()? as usize;
        let mut symbols = Vec::with_capacity(width.saturating_sub(1));
        for _ in 1..width {
            let s = c.string16("symbol")?;
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(ch), None) => symbols.push(ch),
                _ => return Err(FormatError::Symbol(s)),
            }
        }
        let data = c.f32s(frames.checked_mul(width).ok_or(FormatError::Truncated)?)?;
        out.push(EmissionMatrix::from_flat(symbols, data.into_iter().map(f64::from).collect())?);
    }
    Ok(out)
}

pub fn save_emissions(path: impl AsRef<Path>, records: &[EmissionMatrix]) -> Result<(), FormatError> {
    let mut bytes = Vec::new();
    for em in records {
        bytes.extend(encode_emissions(em)?);
    }
    write_file(path.as_ref(), &bytes)
}

pub fn load_emissions(path: impl AsRef<Path>) -> Result<Vec<EmissionMatrix>, FormatError> {
    decode_emissions(&read_file(path.as_ref())?)
}
