use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coding::CodingScheme;
use crate::error::{Error, Result};
use crate::hmsm::{HmsmEnsemble, Predictor};
use crate::sha256_hex;

use super::head::HeadModel;

pub const ENSEMBLE_FORMAT: &str = "pixcode-ensemble";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadEntry {
    pub scheme: CodingScheme,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
}

/// Lists the head model files of an ensemble, in selection order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format: String,
    pub version: u32,
    pub heads: Vec<HeadEntry>,
}

impl EnsembleManifest {
    pub fn new(heads: Vec<HeadEntry>) -> Self {
        EnsembleManifest {
            format: ENSEMBLE_FORMAT.into(),
            version: 1,
            heads,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        std::fs::write(path, v).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        let m: EnsembleManifest = serde_json::from_slice(&bytes)?;
        if m.format != ENSEMBLE_FORMAT || m.version != 1 {
            return Err(Error::InvariantViolation(format!(
                "{} is not a v1 ensemble manifest",
                path.display()
            )));
        }
        Ok(m)
    }

    /// Loads every head, checking digests and schemes against the manifest.
    pub fn load_heads(&self, base: &Path) -> Result<Vec<HeadModel>> {
        self.heads
            .iter()
            .map(|entry| {
                let path = base.join(&entry.path);
                let bytes = std::fs::read(&path).map_err(|e| Error::file(&path, e))?;
                let digest = sha256_hex(&bytes);
                if digest != entry.sha256 {
                    return Err(Error::InvariantViolation(format!(
                        "{} has digest {digest}, manifest lists {}",
                        path.display(),
                        entry.sha256
                    )));
                }
                let text = String::from_utf8(bytes)
                    .map_err(|_| Error::parse(1, "header", "model file is not UTF-8"))?;
                let head = HeadModel::from_text(&text)?;
                if head.scheme() != entry.scheme {
                    return Err(Error::InvariantViolation(format!(
                        "{} holds a {} head, manifest says {}",
                        path.display(),
                        head.scheme(),
                        entry.scheme
                    )));
                }
                Ok(head)
            })
            .collect()
    }
}

/// Reads a manifest and builds the ensemble it describes.
pub fn load_ensemble(manifest: &Path) -> Result<HmsmEnsemble> {
    let m = EnsembleManifest::load(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let heads = m
        .load_heads(base)?
        .into_iter()
        .map(|h| Arc::new(h) as Arc<dyn Predictor>)
        .collect();
    HmsmEnsemble::new(heads)
}
