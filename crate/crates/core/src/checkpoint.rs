//! Model checkpoints and training loss logs.
//!
//! A checkpoint is `ANACKPT1`, a little-endian u32 format version, a u64
//! header length, a JSON header (model kind, configuration, tensor names
//! and shapes), then every tensor as little-endian f64 in header order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::nn::{Params, Tensor};

pub const MAGIC: &[u8; 8] = b"ANACKPT1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}: not a checkpoint")]
    BadMagic(PathBuf),
    #[error("{path}: unsupported checkpoint version {version}")]
    Version { path: PathBuf, version: u32 },
    #[error("{path}: bad header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("checkpoint holds a `{found}` model, expected `{expected}`")]
    WrongKind { expected: String, found: String },
    #[error("tensor layout differs from the model: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: String,
    config: serde_json::Value,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(CheckpointError::WrongKind { expected: kind.into(), found: self.kind.clone() })
        }
    }

    /// Copies the stored tensors into `params`, which must have the same
    /// names and shapes in the same order.
    pub fn restore(&self, params: &mut Params) -> Result<(), CheckpointError> {
        if self.tensors.len() != params.tensors().len() {
            return Err(CheckpointError::Shape(format!(
                "{} tensors stored, model has {}",
                self.tensors.len(),
                params.tensors().len()
            )));
        }
        for (dst, src) in params.tensors_mut().iter_mut().zip(&self.tensors) {
            if dst.name != src.name || dst.rows != src.rows || dst.cols != src.cols {
                return Err(CheckpointError::Shape(format!(
                    "{} {}x{} vs stored {} {}x{}",
                    dst.name, dst.rows, dst.cols, src.name, src.rows, src.cols
                )));
            }
            dst.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}

pub fn save(path: &Path, kind: &str, config: &impl Serialize, params: &Params) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io { path: path.into(), source };
    let header = Header {
        kind: kind.into(),
        config: serde_json::to_value(config).expect("config serializes"),
        tensors: params
            .tensors()
            .iter()
            .map(|t| TensorInfo { name: t.name.clone(), rows: t.rows, cols: t.cols })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut buf = Vec::with_capacity(20 + json.len() + 8 * params.scalar_count());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in params.tensors() {
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.into(), source })?;
    let bad = |reason: &str| CheckpointError::Header { path: path.into(), reason: reason.into() };
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic(path.into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::Version { path: path.into(), version });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let json = bytes.get(20..20 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
    let mut offset = 20 + len;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for info in header.tensors {
        let n = info.rows * info.cols;
        let raw = bytes.get(offset..offset + 8 * n).ok_or_else(|| bad("truncated tensor data"))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        offset += 8 * n;
        tensors.push(Tensor { name: info.name, rows: info.rows, cols: info.cols, data });
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(Checkpoint { kind: header.kind, config: header.config, tensors })
}

/// Per-epoch loss components; row 0 holds the loss before training.
#[derive(Debug, Clone, PartialEq)]
pub struct LossLog {
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl LossLog {
    pub fn new(columns: &[&str]) -> Self {
        LossLog { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, epoch: usize, values: Vec<f64>) {
        assert_eq!(values.len(), self.columns.len());
        self.rows.push((epoch, values));
    }

    /// Last column of the given row (the total loss by convention).
    pub fn total(&self, row: usize) -> f64 {
        *self.rows[row].1.last().expect("non-empty row")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,{}\n", self.columns.join(","));
        for (epoch, values) in &self.rows {
            let cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{epoch},{}\n", cells.join(",")));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next()?.split(',').collect();
        if head.first() != Some(&"epoch") {
            return None;
        }
        let mut log = LossLog::new(&head[1..]);
        for line in lines {
            let mut cells = line.split(',');
            let epoch = cells.next()?.parse().ok()?;
            let values = cells.map(|c| c.parse().ok()).collect::<Option<Vec<f64>>>()?;
            if values.len() != log.columns.len() {
                return None;
            }
            log.rows.push((epoch, values));
        }
        Some(log)
    }
}
