use std::path::{Path, PathBuf};

use pixcode::{sha256_hex, Error, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Serialize)]
pub struct Context {
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
}

/// Everything needed to rerun a command: its flags, input and output digests.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, A: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub context: &'a Context,
    pub args: &'a A,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl<'a, A: Serialize> RunManifest<'a, A> {
    pub fn new(context: &'a Context, command: &'static str, args: &'a A) -> Self {
        RunManifest {
            tool: "pixcode",
            version: env!("CARGO_PKG_VERSION"),
            command,
            context,
            args,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Writes `<command>.manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        std::fs::write(&path, v).map_err(|e| Error::File { path: path.clone(), source: e })?;
        Ok(path)
    }
}
