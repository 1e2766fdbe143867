//! Artifact container: a directory holding `manifest.json`, binary arrays and
//! JSON documents.
//!
//! Array files start with a 16-byte header: magic `STRB`, `u16` dtype code
//! (1 = f64, 2 = i64), `u16` rank, then two `u32` dimensions (unused ones are
//! 1). Data follow in little-endian row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StrobeError};

pub const MAGIC: &[u8; 4] = b"STRB";
pub const SCHEMA_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    I64,
}

impl Dtype {
    fn code(self) -> u16 {
        match self {
            Dtype::F64 => 1,
            Dtype::I64 => 2,
        }
    }

    fn from_code(c: u16) -> Result<Self> {
        match c {
            1 => Ok(Dtype::F64),
            2 => Ok(Dtype::I64),
            _ => Err(StrobeError::Format(format!("unknown dtype code {c}"))),
        }
    }
}

/// A rank-1 or rank-2 array.
#[derive(Clone, Debug, PartialEq)]
pub enum Array {
    F64 { shape: Vec<usize>, data: Vec<f64> },
    I64 { shape: Vec<usize>, data: Vec<i64> },
}

impl Array {
    pub fn vector(v: Vec<f64>) -> Self {
        Array::F64 { shape: vec![v.len()], data: v }
    }

    /// Rows of equal length; an empty list gives a `0 x 0` matrix.
    pub fn matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let ncol = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncol) {
            return Err(StrobeError::Format("ragged rows".into()));
        }
        Ok(Array::F64 { shape: vec![rows.len(), ncol], data: rows.concat() })
    }

    pub fn index_matrix(rows: &[Vec<i64>]) -> Result<Self> {
        let ncol = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncol) {
            return Err(StrobeError::Format("ragged rows".into()));
        }
        Ok(Array::I64 { shape: vec![rows.len(), ncol], data: rows.concat() })
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Array::F64 { .. } => Dtype::F64,
            Array::I64 { .. } => Dtype::I64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Array::F64 { shape, .. } | Array::I64 { shape, .. } => shape,
        }
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match self {
            Array::F64 { data, .. } => Ok(data),
            Array::I64 { .. } => Err(StrobeError::Format("expected an f64 array".into())),
        }
    }

    /// Rows of a rank-2 f64 array (a rank-1 array is one row).
    pub fn rows(&self) -> Result<Vec<Vec<f64>>> {
        let data = self.as_f64()?;
        match self.shape() {
            [n] => Ok(vec![data[..*n].to_vec()]),
            [r, c] => Ok((0..*r).map(|i| data[i * c..(i + 1) * c].to_vec()).collect()),
            s => Err(StrobeError::Format(format!("unsupported shape {s:?}"))),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let shape = self.shape();
        if shape.is_empty() || shape.len() > 2 {
            return Err(StrobeError::Format(format!("rank {} not supported", shape.len())));
        }
        let dims: Vec<u32> = shape
            .iter()
            .map(|&d| u32::try_from(d).map_err(|_| StrobeError::Format(format!("dimension {d} too large"))))
            .collect::<Result<_>>()?;
        let count: usize = shape.iter().product();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * count);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.dtype().code().to_le_bytes());
        out.extend_from_slice(&(shape.len() as u16).to_le_bytes());
        out.extend_from_slice(&dims[0].to_le_bytes());
        out.extend_from_slice(&dims.get(1).copied().unwrap_or(1).to_le_bytes());
        match self {
            Array::F64 { data, .. } => {
                check_count(data.len(), count)?;
                data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            }
            Array::I64 { data, .. } => {
                check_count(data.len(), count)?;
                data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(StrobeError::Format("truncated array header".into()));
        }
        if &bytes[0..4] != MAGIC {
            return Err(StrobeError::Format("bad array magic".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as usize;
        let dtype = Dtype::from_code(u16_at(4))?;
        let rank = u16_at(6) as usize;
        let shape = match rank {
            1 => vec![u32_at(8)],
            2 => vec![u32_at(8), u32_at(12)],
            r => return Err(StrobeError::Format(format!("rank {r} not supported"))),
        };
        let count: usize = shape.iter().product();
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * count {
            return Err(StrobeError::Format(format!("expected {} data bytes, found {}", 8 * count, body.len())));
        }
        let words = body.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8"));
        Ok(match dtype {
            Dtype::F64 => Array::F64 { shape, data: words.map(f64::from_le_bytes).collect() },
            Dtype::I64 => Array::I64 { shape, data: words.map(i64::from_le_bytes).collect() },
        })
    }
}

fn check_count(len: usize, count: usize) -> Result<()> {
    if len != count {
        return Err(StrobeError::Format(format!("{len} values for shape of size {count}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub file: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub model: String,
    pub mesh_hash: String,
    pub train_mu: Vec<Vec<f64>>,
    pub test_mu: Vec<Vec<f64>>,
    /// Free-form settings (the experiment configuration).
    pub settings: serde_json::Value,
    pub arrays: BTreeMap<String, ArrayEntry>,
    pub documents: BTreeMap<String, String>,
    /// Seconds since the epoch at which each entry was last written.
    pub timestamps: BTreeMap<String, u64>,
}

impl Manifest {
    pub fn new(model: &str, mesh_hash: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: model.into(),
            mesh_hash: mesh_hash.into(),
            train_mu: Vec::new(),
            test_mu: Vec::new(),
            settings: serde_json::Value::Null,
            arrays: BTreeMap::new(),
            documents: BTreeMap::new(),
            timestamps: BTreeMap::new(),
        }
    }

    /// Manifest JSON with the timestamps removed.
    pub fn without_timestamps(&self) -> Self {
        Self { timestamps: BTreeMap::new(), ..self.clone() }
    }
}

fn valid_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
        return Err(StrobeError::Format(format!("invalid entry name '{name}'")));
    }
    Ok(())
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// An open container directory. Writes update the manifest on disk at once.
#[derive(Debug)]
pub struct Container {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Container {
    pub fn create(root: impl AsRef<Path>, manifest: Manifest) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("arrays"))?;
        fs::create_dir_all(root.join("docs"))?;
        let c = Self { root, manifest };
        c.save_manifest()?;
        Ok(c)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let bytes = fs::read(root.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(StrobeError::Format(format!("unsupported schema version {}", manifest.schema_version)));
        }
        Ok(Self { root, manifest })
    }

    /// Opens and checks the mesh hash.
    pub fn open_for_mesh(root: impl AsRef<Path>, mesh_hash: &str) -> Result<Self> {
        let c = Self::open(root)?;
        if c.manifest.mesh_hash != mesh_hash {
            return Err(StrobeError::Format("container was written for a different mesh".into()));
        }
        Ok(c)
    }

    pub fn save_manifest(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn has_array(&self, name: &str) -> bool {
        self.manifest.arrays.contains_key(name)
    }

    pub fn has_document(&self, name: &str) -> bool {
        self.manifest.documents.contains_key(name)
    }

    pub fn write_array(&mut self, name: &str, array: &Array) -> Result<()> {
        valid_name(name)?;
        let file = format!("arrays/{name}.bin");
        fs::write(self.root.join(&file), array.to_bytes()?)?;
        let entry = ArrayEntry { file, dtype: array.dtype(), shape: array.shape().to_vec() };
        self.manifest.arrays.insert(name.into(), entry);
        self.manifest.timestamps.insert(format!("array:{name}"), now());
        self.save_manifest()
    }

    pub fn read_array(&self, name: &str) -> Result<Array> {
        let entry = self
            .manifest
            .arrays
            .get(name)
            .ok_or_else(|| StrobeError::Format(format!("no array '{name}' in the container")))?;
        let a = Array::from_bytes(&fs::read(self.root.join(&entry.file))?)?;
        if a.dtype() != entry.dtype || a.shape() != entry.shape.as_slice() {
            return Err(StrobeError::Format(format!("array '{name}' does not match its manifest entry")));
        }
        Ok(a)
    }

    pub fn write_document<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        valid_name(name)?;
        let file = format!("docs/{name}.json");
        fs::write(self.root.join(&file), serde_json::to_vec(value)?)?;
        self.manifest.documents.insert(name.into(), file);
        self.manifest.timestamps.insert(format!("doc:{name}"), now());
        self.save_manifest()
    }

    pub fn read_document<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let file = self
            .manifest
            .documents
            .get(name)
            .ok_or_else(|| StrobeError::Format(format!("no document '{name}' in the container")))?;
        Ok(serde_json::from_slice(&fs::read(self.root.join(file))?)?)
    }

    /// Sha-256 of the manifest without timestamps.
    pub fn manifest_hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(&self.manifest.without_timestamps())?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
