//! Binary persistence: `PPRS` magic, `u32` version, `u64` term count, then
//! row-major `f64` values, all little-endian. Term ids live in a sidecar TSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::SimilarityMatrix;
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"PPRS";
pub const MATRIX_VERSION: u32 = 1;

pub fn write_matrix(matrix: &SimilarityMatrix, mut out: impl Write) -> Result<()> {
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&MATRIX_VERSION.to_le_bytes())?;
    out.write_all(&(matrix.len() as u64).to_le_bytes())?;
    for v in matrix.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads the binary body; `ids` must have the stored term count.
pub fn read_matrix(mut input: impl Read, ids: Vec<String>) -> Result<SimilarityMatrix> {
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::parse(1, "truncated similarity matrix header"))?;
    if &header[..4] != MATRIX_MAGIC {
        return Err(Error::parse(1, "not a similarity matrix file (bad magic)"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(Error::parse(1, format!("unsupported matrix version {version}")));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    if n != ids.len() {
        return Err(Error::invalid(format!(
            "matrix holds {n} terms but the sidecar lists {}",
            ids.len()
        )));
    }
    let mut values = Vec::with_capacity(n * n);
    let mut buf = [0u8; 8];
    for _ in 0..n * n {
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::parse(1, "truncated similarity matrix body"))?;
        values.push(f64::from_le_bytes(buf));
    }
    if input.read(&mut buf)? != 0 {
        return Err(Error::parse(1, "trailing bytes after similarity matrix body"));
    }
    SimilarityMatrix::new(ids, values)
}

/// `similarity.pprs` -> `similarity.terms.tsv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("terms.tsv")
}

impl SimilarityMatrix {
    /// Writes the binary file and its term-id sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        write_matrix(self, &mut out)?;
        out.flush().map_err(|e| Error::io(path, e))?;

        let sidecar = sidecar_path(path);
        let mut ids = String::new();
        for id in self.ids() {
            ids.push_str(id);
            ids.push('\n');
        }
        std::fs::write(&sidecar, ids).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let sidecar = sidecar_path(path);
        let ids_file = File::open(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let mut ids = Vec::new();
        for line in BufReader::new(ids_file).lines() {
            let line = line?;
            let id = line.split('\t').next().unwrap_or("").trim();
            if !id.is_empty() {
                ids.push(id.to_string());
            }
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        read_matrix(BufReader::new(file), ids)
    }
}
