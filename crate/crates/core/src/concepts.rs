//! Concept lists and the embedding file formats.
//!
//! Two on-disk variants share one logical schema:
//!
//! * `EMB1`: a JSON manifest `<name>.emb.json` with `format`, `dtype`, `dim`,
//!   `count` and optional `labels`, next to a headerless sidecar `<name>.emb`
//!   holding `count * dim` little-endian `f32` values, row-major.
//! * `EMB1-JSON`: a single file (conventionally `.embjson`) with the vectors
//!   inline as shortest round-trip decimals.
//!
//! JSON output has sorted keys and a trailing newline, so saving the same
//! file twice yields identical bytes.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FORMAT_BINARY: &str = "EMB1";
pub const FORMAT_JSON: &str = "EMB1-JSON";
pub const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Binary,
    Json,
}

impl EmbeddingFormat {
    pub fn tag(self) -> &'static str {
        match self {
            EmbeddingFormat::Binary => FORMAT_BINARY,
            EmbeddingFormat::Json => FORMAT_JSON,
        }
    }

    /// `.embjson` selects the single-file variant; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        if path.extension().is_some_and(|e| e == "embjson") {
            EmbeddingFormat::Json
        } else {
            EmbeddingFormat::Binary
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub format: EmbeddingFormat,
    pub dim: usize,
    pub labels: Option<Vec<String>>,
    pub vectors: Vec<Vec<f32>>,
    /// Free-form provenance tag, e.g. the generator that produced the vectors.
    pub generator: Option<String>,
}

impl EmbeddingFile {
    pub fn new(dim: usize, vectors: Vec<Vec<f32>>, labels: Option<Vec<String>>) -> Self {
        Self { format: EmbeddingFormat::Json, dim, labels, vectors, generator: None }
    }

    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Format("dim must be positive".into()));
        }
        if self.vectors.is_empty() {
            return Err(Error::Format("embedding file has no vectors".into()));
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::Format(format!(
                    "vector {i} has length {}, expected {}",
                    v.len(),
                    self.dim
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidData(format!("vector {i} has non-finite values")));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.count() {
                return Err(Error::Format(format!(
                    "{} labels for {} vectors",
                    labels.len(),
                    self.count()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawHeader {
    format: String,
    #[serde(default)]
    dtype: Option<String>,
    dim: usize,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    vectors: Option<Vec<Vec<serde_json::Number>>>,
    #[serde(default)]
    generator: Option<String>,
}

// Field order is alphabetical: serde writes struct fields in declaration order.
#[derive(Serialize)]
struct CanonicalOut<'a> {
    count: usize,
    dim: usize,
    dtype: &'static str,
    format: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<&'a [String]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vectors: Option<&'a [Vec<f32>]>,
}

/// Manifest and payload paths for the binary variant.
///
/// `x.emb.json` and `x.emb` both resolve to the pair (`x.emb.json`, `x.emb`).
pub fn binary_paths(path: &Path) -> (PathBuf, PathBuf) {
    let s = path.as_os_str().to_string_lossy();
    match s.strip_suffix(".json") {
        Some(stem) => (path.to_path_buf(), PathBuf::from(stem)),
        None => (PathBuf::from(format!("{s}.json")), path.to_path_buf()),
    }
}

/// Loads either variant. A `.emb` path names a binary payload whose manifest
/// sits next to it; any other path is parsed as JSON (an `EMB1-JSON` file or
/// an `EMB1` manifest).
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let json_path = if path.extension().is_some_and(|e| e == "emb") {
        binary_paths(path).0
    } else {
        path.to_path_buf()
    };
    let bytes = fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    load_json(&json_path, &bytes)
}

/// Parses an in-memory `EMB1-JSON` document. `EMB1` manifests are rejected
/// because their payload lives in a separate file.
pub fn parse_json_embeddings(text: &str) -> Result<EmbeddingFile> {
    let raw: RawHeader = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if raw.format != FORMAT_JSON {
        return Err(Error::Format(format!("expected an {FORMAT_JSON} document, got {:?}", raw.format)));
    }
    from_raw(raw, Path::new("<memory>"))
}

fn load_json(path: &Path, bytes: &[u8]) -> Result<EmbeddingFile> {
    let raw: RawHeader = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    from_raw(raw, path)
}

fn from_raw(raw: RawHeader, path: &Path) -> Result<EmbeddingFile> {
    if let Some(dtype) = &raw.dtype {
        if dtype != DTYPE_F32LE {
            return Err(Error::Format(format!("unsupported dtype {dtype:?}")));
        }
    }
    let file = match raw.format.as_str() {
        FORMAT_JSON => {
            let rows = raw
                .vectors
                .ok_or_else(|| Error::Format("EMB1-JSON file lacks `vectors`".into()))?;
            let vectors = rows
                .iter()
                .map(|row| row.iter().map(parse_f32).collect::<Result<Vec<f32>>>())
                .collect::<Result<Vec<_>>>()?;
            if let Some(count) = raw.count {
                if count != vectors.len() {
                    return Err(Error::Format(format!(
                        "count {count} does not match {} vectors",
                        vectors.len()
                    )));
                }
            }
            EmbeddingFile {
                format: EmbeddingFormat::Json,
                dim: raw.dim,
                labels: raw.labels,
                vectors,
                generator: raw.generator,
            }
        }
        FORMAT_BINARY => {
            if raw.vectors.is_some() {
                return Err(Error::Format("EMB1 manifest must not inline vectors".into()));
            }
            let count = raw.count.ok_or_else(|| Error::Format("EMB1 manifest lacks `count`".into()))?;
            let (_, payload_path) = binary_paths(path);
            let payload = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
            let expected = count
                .checked_mul(raw.dim)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Format("count * dim overflows".into()))?;
            if payload.len() != expected {
                return Err(Error::Format(format!(
                    "{}: payload is {} bytes, expected {expected} ({count} x {} x 4)",
                    payload_path.display(),
                    payload.len(),
                    raw.dim
                )));
            }
            let values: Vec<f32> = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let vectors = if raw.dim == 0 {
                Vec::new()
            } else {
                values.chunks(raw.dim).map(<[f32]>::to_vec).collect()
            };
            EmbeddingFile {
                format: EmbeddingFormat::Binary,
                dim: raw.dim,
                labels: raw.labels,
                vectors,
                generator: raw.generator,
            }
        }
        other => return Err(Error::Format(format!("unknown format tag {other:?}"))),
    };
    file.validate()?;
    Ok(file)
}

/// Parses the literal decimal text straight to `f32` so that a shortest
/// round-trip rendering comes back bit-exact.
fn parse_f32(n: &serde_json::Number) -> Result<f32> {
    let text = n.to_string();
    let v: f32 = text
        .parse()
        .map_err(|_| Error::Format(format!("bad number {text:?}")))?;
    if !v.is_finite() {
        return Err(Error::InvalidData(format!("{text} is not representable as a finite f32")));
    }
    Ok(v)
}

/// Canonical JSON text (sorted keys, trailing newline) for the given variant.
/// The binary variant's text is the manifest.
pub fn to_canonical_json(e: &EmbeddingFile, variant: EmbeddingFormat) -> Result<String> {
    e.validate()?;
    let out = CanonicalOut {
        count: e.count(),
        dim: e.dim,
        dtype: DTYPE_F32LE,
        format: variant.tag(),
        generator: e.generator.as_deref(),
        labels: e.labels.as_deref(),
        vectors: (variant == EmbeddingFormat::Json).then_some(e.vectors.as_slice()),
    };
    let mut s = serde_json::to_string(&out).map_err(|err| Error::Format(err.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Row-major little-endian payload of the binary variant.
pub fn binary_payload(e: &EmbeddingFile) -> Vec<u8> {
    e.vectors.iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `e` in the requested variant. For the binary variant `path` may name
/// either the manifest or the payload; both files are written.
pub fn save_embeddings(e: &EmbeddingFile, path: impl AsRef<Path>, variant: EmbeddingFormat) -> Result<()> {
    let path = path.as_ref();
    let text = to_canonical_json(e, variant)?;
    match variant {
        EmbeddingFormat::Json => write_atomic(path, text.as_bytes()),
        EmbeddingFormat::Binary => {
            let (manifest, payload) = binary_paths(path);
            write_atomic(&payload, &binary_payload(e))?;
            write_atomic(&manifest, text.as_bytes())
        }
    }
}

/// Writes to a sibling temp file and renames it into place, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Toxic,
    Clean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub label: String,
    pub embedding: Vec<f32>,
}

/// Labeled concept embeddings with a role; the columns of `C` or `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptList {
    role: Role,
    dim: usize,
    entries: Vec<Concept>,
}

impl ConceptList {
    pub fn new(role: Role, entries: Vec<Concept>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidData(format!("{role:?} concept list is empty")))?;
        let dim = first.embedding.len();
        if dim == 0 {
            return Err(Error::InvalidData("concept embeddings must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &entries {
            if c.label.is_empty() {
                return Err(Error::InvalidData("concept label must be non-empty".into()));
            }
            if !seen.insert(c.label.as_str()) {
                return Err(Error::InvalidData(format!("duplicate concept label {:?}", c.label)));
            }
            if c.embedding.len() != dim {
                return Err(Error::Dimension { expected: dim, got: c.embedding.len() });
            }
            if c.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidData(format!("concept {:?} has non-finite values", c.label)));
            }
        }
        Ok(Self { role, dim, entries })
    }

    /// Builds a list from a file; labels are mandatory for concepts.
    pub fn from_file(file: &EmbeddingFile, role: Role) -> Result<Self> {
        let labels = file
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidData("concept files must carry labels".into()))?;
        let entries = labels
            .iter()
            .zip(&file.vectors)
            .map(|(label, v)| Concept { label: label.clone(), embedding: v.clone() })
            .collect();
        let list = Self::new(role, entries)?;
        if list.dim != file.dim {
            return Err(Error::Dimension { expected: file.dim, got: list.dim });
        }
        Ok(list)
    }

    pub fn load(path: impl AsRef<Path>, role: Role) -> Result<Self> {
        Self::from_file(&load_embeddings(path)?, role)
    }

    pub fn to_file(&self) -> EmbeddingFile {
        EmbeddingFile::new(
            self.dim,
            self.entries.iter().map(|c| c.embedding.clone()).collect(),
            Some(self.entries.iter().map(|c| c.label.clone()).collect()),
        )
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Concept] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// D x K matrix with the k-th concept as the k-th column.
    pub fn assemble_matrix(&self) -> Matrix {
        let cols: Vec<Vec<f64>> = self
            .entries
            .iter()
            .map(|c| c.embedding.iter().map(|&x| f64::from(x)).collect())
            .collect();
        Matrix::from_columns(self.dim, &cols).expect("validated concept list")
    }
}

/// One prompt token: optional surface text plus its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: Option<String>,
    pub embedding: Vec<f32>,
}

/// Ordered per-token embeddings of a prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedPrompt {
    dim: usize,
    tokens: Vec<Token>,
}

impl TokenizedPrompt {
    pub fn new(dim: usize, tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidData("prompt has no tokens".into()));
        }
        for t in &tokens {
            if t.embedding.len() != dim {
                return Err(Error::Dimension { expected: dim, got: t.embedding.len() });
            }
            if t.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidData("token embedding has non-finite values".into()));
            }
        }
        Ok(Self { dim, tokens })
    }

    /// Labels, when present, become the token texts.
    pub fn from_file(file: &EmbeddingFile) -> Result<Self> {
        let tokens = file
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| Token {
                text: file.labels.as_ref().map(|l| l[i].clone()),
                embedding: v.clone(),
            })
            .collect();
        Self::new(file.dim, tokens)
    }

    /// Token texts become labels only if every token has one.
    pub fn to_file(&self) -> EmbeddingFile {
        let labels: Option<Vec<String>> = self.tokens.iter().map(|t| t.text.clone()).collect();
        EmbeddingFile::new(self.dim, self.tokens.iter().map(|t| t.embedding.clone()).collect(), labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
