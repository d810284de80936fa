//! Output directories written through a staging area, so that a failed
//! command leaves no partial files behind.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const STAGING: &str = ".celldesc-staging";

pub struct OutputDir {
    dir: PathBuf,
    staging: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let staging = dir.join(STAGING);
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        }
        std::fs::create_dir(&staging).map_err(|e| CliError::io(&staging, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staging,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Staging path for `name`; the file is moved into place on commit.
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.staging.join(name)
    }

    pub fn writer(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut out = self.writer(name)?;
        serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::validation(e.to_string()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    /// SHA-256 of every staged file, keyed by name.
    pub fn digests(&self) -> CliResult<BTreeMap<String, String>> {
        self.files
            .iter()
            .map(|name| Ok((name.clone(), sha256_file(&self.staging.join(name))?)))
            .collect()
    }

    /// Moves every staged file into the output directory.
    pub fn commit(mut self) -> CliResult<BTreeMap<String, String>> {
        let digests = self.digests()?;
        for name in &self.files {
            let from = self.staging.join(name);
            let to = self.dir.join(name);
            std::fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
        }
        std::fs::remove_dir_all(&self.staging).map_err(|e| CliError::io(&self.staging, e))?;
        self.committed = true;
        Ok(digests)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.staging);
        }
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::validation(e.to_string()))?;
    println!("{text}");
    Ok(())
}
