//! Run directory and manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub config_hash: String,
}

/// A fresh `run-<unix seconds>-seed<seed>` directory under `base`.
pub struct RunDir {
    path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(base: &Path, seed: u64) -> CliResult<Self> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        std::fs::create_dir_all(base).map_err(|e| CliError::io(base, e))?;
        let stem = format!("run-{stamp}-seed{seed}");
        for k in 0.. {
            let name = if k == 0 { stem.clone() } else { format!("{stem}-{k}") };
            let path = base.join(name);
            match std::fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        files: Vec::new(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(CliError::io(&path, e)),
            }
        }
        unreachable!()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Opens `name` for writing and records it in the manifest.
    pub fn file(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> CliResult<()>) -> CliResult<()> {
        let mut w = self.file(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(self.path.join(name), e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::io(name, e.into()))?;
            w.write_all(b"\n").map_err(|e| CliError::io(name, e))
        })
    }

    pub fn finish(self, command: &str, seed: u64, config_hash: String) -> CliResult<PathBuf> {
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            files: self.files,
            config_hash,
        };
        let path = self.path.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(&path, e.into()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(self.path)
    }
}
