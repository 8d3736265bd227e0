use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{fmt_bound, Report};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
const FILE_PREFIX: &str = "sha256:";

/// `key=value` lines; file checksums are keyed `sha256:<relative path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

impl Manifest {
    pub(crate) fn build(report: &Report, dir: &Path, files: &[PathBuf]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        entries.insert("config_hash".into(), report.config_hash.clone());
        entries.insert("seed".into(), report.seed.to_string());
        entries.insert("window_from".into(), fmt_bound(report.window.from));
        entries.insert("window_to".into(), fmt_bound(report.window.to));
        entries.insert("rows".into(), report.assets.len().to_string());
        entries.insert("failed_rows".into(), report.failed().len().to_string());
        entries.insert("engine_version".into(), env!("CARGO_PKG_VERSION").into());
        for f in files {
            let rel = f
                .strip_prefix(dir)
                .map_err(|_| Error::InvalidInput(format!("{} is outside the report", f.display())))?;
            let key = format!("{FILE_PREFIX}{}", rel.to_string_lossy().replace('\\', "/"));
            entries.insert(key, sha256_file(f)?);
        }
        Ok(Self { entries })
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: "expected key=value".into(),
            })?;
            entries.insert(k.to_string(), v.to_string());
        }
        Ok(Self { entries })
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<()> {
        let p = dir.join(MANIFEST_FILE);
        std::fs::write(&p, self.to_text()).map_err(|e| Error::io(&p, e))
    }

    pub fn files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(FILE_PREFIX).map(|f| (f, v.as_str())))
    }
}

/// Re-hashes every file listed in `dir/manifest.txt`.
pub fn verify_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let m = Manifest::parse(&text)?;
    for (file, expected) in m.files() {
        let actual = sha256_file(&dir.join(file))?;
        if actual != expected {
            return Err(Error::InvalidInput(format!(
                "checksum mismatch for {file}: manifest {expected}, file {actual}"
            )));
        }
    }
    Ok(m)
}
