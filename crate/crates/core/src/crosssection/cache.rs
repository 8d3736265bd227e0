//! Compact binary cache for matrices keyed by a hash of the input panel.
//!
//! Layout: magic `SFMX`, u32 rows, u32 cols, then row-major little-endian f64.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::ReturnPanel;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SFMX";

/// Hex sha256 over asset ids, timestamps and the matrix bits.
pub fn panel_key(panel: &ReturnPanel) -> String {
    let mut h = Sha256::new();
    for id in panel.asset_ids() {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id.as_bytes());
    }
    for t in panel.timestamps() {
        h.update(t.to_le_bytes());
    }
    for v in panel.matrix().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn encode(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::InvalidInput("not a matrix cache blob".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != rows * cols * 8 {
        return Err(Error::InvalidInput(format!(
            "cache blob truncated: {} bytes for {rows}x{cols}",
            body.len()
        )));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &vals))
}

pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{key}.bin"))
    }

    pub fn load(&self, kind: &str, key: &str) -> Result<Option<DMatrix<f64>>> {
        let p = self.path(kind, key);
        match fs::read(&p) {
            Ok(b) => decode(&b).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&p, e)),
        }
    }

    pub fn store(&self, kind: &str, key: &str, m: &DMatrix<f64>) -> Result<PathBuf> {
        let p = self.path(kind, key);
        write_atomic(&p, &encode(m))?;
        Ok(p)
    }

    /// Cached value for `kind` of this panel, computing and storing on a miss.
    pub fn get_or_compute(
        &self,
        kind: &str,
        panel: &ReturnPanel,
        f: impl FnOnce(&ReturnPanel) -> Result<DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        let key = panel_key(panel);
        if let Some(m) = self.load(kind, &key)? {
            return Ok(m);
        }
        let m = f(panel)?;
        self.store(kind, &key, &m)?;
        Ok(m)
    }
}

/// Writes to a sibling temp file then renames, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
