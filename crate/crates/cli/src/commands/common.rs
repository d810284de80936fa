use std::path::{Path, PathBuf};

use celldesc::pathway::{read_dense_csv, read_matrix_market, ExpressionMatrix, MatrixOrientation};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct ExpressionArgs {
    /// Expression matrix in MatrixMarket coordinate format.
    #[arg(long, requires_all = ["cells", "genes"], conflicts_with = "dense")]
    pub mtx: Option<PathBuf>,
    /// Cell ids, one per line (first column), in matrix order.
    #[arg(long)]
    pub cells: Option<PathBuf>,
    /// Gene symbols, one per line (first column), in matrix order.
    #[arg(long)]
    pub genes: Option<PathBuf>,
    /// The MatrixMarket rows are cells (default: rows are genes).
    #[arg(long)]
    #[serde(default)]
    pub cells_are_rows: bool,
    /// Dense CSV with header `cell_id,<gene>,...`.
    #[arg(long)]
    pub dense: Option<PathBuf>,
}

impl ExpressionArgs {
    pub fn load(&self) -> CliResult<ExpressionMatrix> {
        match (&self.mtx, &self.dense) {
            (Some(mtx), None) => {
                let (cells, genes) = match (&self.cells, &self.genes) {
                    (Some(c), Some(g)) => (c, g),
                    _ => return Err(CliError::usage("--mtx needs --cells and --genes")),
                };
                let orientation = if self.cells_are_rows {
                    MatrixOrientation::CellsByGenes
                } else {
                    MatrixOrientation::GenesByCells
                };
                Ok(read_matrix_market(mtx, cells, genes, orientation)?)
            }
            (None, Some(dense)) => Ok(read_dense_csv(dense)?),
            _ => Err(CliError::usage("give exactly one of --mtx or --dense")),
        }
    }

    pub fn paths(&self) -> Vec<&Path> {
        [&self.mtx, &self.cells, &self.genes, &self.dense]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path)
            .collect()
    }
}

/// Parses `a,b,c` ratios that must sum to one.
pub fn parse_ratios(text: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("bad ratios `{text}`")))?;
    <[f64; 3]>::try_from(parts).map_err(|_| CliError::usage(format!("need three ratios, got `{text}`")))
}

/// Field delimiter by extension: `.csv` is comma separated, anything else tab.
pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}
