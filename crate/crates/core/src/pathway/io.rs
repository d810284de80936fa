use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{ActivityMatrix, ExpressionMatrix, GeneSet};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Which matrix axis holds the cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixOrientation {
    /// Genes are rows and cells are columns (the 10x convention).
    #[default]
    GenesByCells,
    CellsByGenes,
}

/// First tab-separated column of each nonblank line.
pub fn read_sidecar_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut ids = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        ids.push(line.split('\t').next().unwrap_or("").trim().to_string());
    }
    Ok(ids)
}

/// Coordinate-format MatrixMarket (`real`, `integer` or `pattern`,
/// `general`). Indices are 1-based.
pub fn parse_matrix_market<R: BufRead>(
    reader: R,
    cells: Vec<String>,
    genes: Vec<String>,
    orientation: MatrixOrientation,
) -> Result<ExpressionMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty MatrixMarket file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::parse(1, format!("unsupported format `{}`", tokens[2])));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(Error::parse(1, format!("unsupported field `{other}`"))),
    };
    if tokens[4] != "general" {
        return Err(Error::parse(1, format!("unsupported symmetry `{}`", tokens[4])));
    }

    let (n_rows, n_cols) = match orientation {
        MatrixOrientation::GenesByCells => (genes.len(), cells.len()),
        MatrixOrientation::CellsByGenes => (cells.len(), genes.len()),
    };
    let mut size: Option<usize> = None;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cells.len()];
    let mut seen = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(lineno, format!("bad integer `{s}`")))
        };
        let Some(nnz) = size else {
            if fields.len() != 3 {
                return Err(Error::parse(lineno, "size line needs rows, columns and entry count"));
            }
            let (r, c) = (num(fields[0])?, num(fields[1])?);
            if (r, c) != (n_rows, n_cols) {
                return Err(Error::schema(
                    lineno,
                    format!("matrix is {r}x{c} but sidecars give {n_rows}x{n_cols}"),
                ));
            }
            size = Some(num(fields[2])?);
            continue;
        };
        let expected = if pattern { 2 } else { 3 };
        if fields.len() != expected {
            return Err(Error::parse(lineno, format!("expected {expected} fields per entry")));
        }
        let (r, c) = (num(fields[0])?, num(fields[1])?);
        if r == 0 || c == 0 || r > n_rows || c > n_cols {
            return Err(Error::parse(lineno, format!("entry ({r}, {c}) out of bounds")));
        }
        let value: f64 = if pattern {
            1.0
        } else {
            fields[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad value `{}`", fields[2])))?
        };
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::schema(lineno, format!("negative or non-finite value {value}")));
        }
        let (cell, gene) = match orientation {
            MatrixOrientation::GenesByCells => (c - 1, r - 1),
            MatrixOrientation::CellsByGenes => (r - 1, c - 1),
        };
        rows[cell].push((gene, value));
        seen += 1;
        if seen > nnz {
            return Err(Error::parse(lineno, format!("more than the declared {nnz} entries")));
        }
    }
    match size {
        None => return Err(Error::parse(1, "missing size line")),
        Some(nnz) if nnz != seen => {
            return Err(Error::parse(1, format!("declared {nnz} entries, found {seen}")))
        }
        _ => {}
    }
    ExpressionMatrix::from_sparse_rows(cells, genes, rows)
}

pub fn read_matrix_market(
    matrix: impl AsRef<Path>,
    cells: impl AsRef<Path>,
    genes: impl AsRef<Path>,
    orientation: MatrixOrientation,
) -> Result<ExpressionMatrix> {
    let cells = read_sidecar_ids(cells)?;
    let genes = read_sidecar_ids(genes)?;
    let path = matrix.as_ref();
    parse_matrix_market(open(path)?, cells, genes, orientation)
}

/// Dense CSV with a header `cell_id,<gene>,<gene>,...` and one row per cell.
pub fn parse_dense_csv<R: std::io::Read>(reader: R) -> Result<ExpressionMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(Error::schema(1, "header needs a cell id column and at least one gene"));
    }
    let genes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut cells = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        cells.push(record[0].to_string());
        let row = record
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad value `{v}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    ExpressionMatrix::from_dense(cells, genes, values)
}

pub fn read_dense_csv(path: impl AsRef<Path>) -> Result<ExpressionMatrix> {
    let path = path.as_ref();
    parse_dense_csv(open(path)?)
}

/// GMT gene sets: `set_id\tdescription\tgene1\tgene2...`.
pub fn parse_gmt<R: BufRead>(reader: R) -> Result<Vec<GeneSet>> {
    let mut sets = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(lineno, "GMT line needs an id, a description and genes"));
        }
        let id = fields[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::schema(lineno, "empty gene set id"));
        }
        let genes: BTreeSet<String> = fields[2..]
            .iter()
            .map(|g| g.trim())
            .filter(|g| !g.is_empty())
            .map(String::from)
            .collect();
        if genes.is_empty() {
            return Err(Error::schema(lineno, format!("gene set {id} is empty")));
        }
        if !ids.insert(id.clone()) {
            return Err(Error::schema(lineno, format!("duplicate gene set {id}")));
        }
        sets.push(GeneSet {
            id,
            name: fields[1].trim().to_string(),
            genes,
        });
    }
    Ok(sets)
}

pub fn read_gmt(path: impl AsRef<Path>) -> Result<Vec<GeneSet>> {
    let path = path.as_ref();
    parse_gmt(open(path)?)
}

/// CSV with header `cell_id,<pathway>,...`.
pub fn write_activity_csv<W: Write>(activity: &ActivityMatrix, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::invalid(e.to_string());
    wtr.write_record(std::iter::once("cell_id").chain(activity.pathways.iter().map(String::as_str)))
        .map_err(to_err)?;
    for (c, cell) in activity.cells.iter().enumerate() {
        let mut record = vec![cell.clone()];
        record.extend(activity.row(c).iter().map(|v| v.to_string()));
        wtr.write_record(&record).map_err(to_err)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn matrix_market_both_orientations() {
        let mtx = "%%MatrixMarket matrix coordinate integer general\n% comment\n3 2 3\n1 1 5\n3 1 2\n2 2 7\n";
        let m = parse_matrix_market(mtx.as_bytes(), ids("c", 2), ids("g", 3), MatrixOrientation::GenesByCells).unwrap();
        assert_eq!(m.dense_row(0), vec![5.0, 0.0, 2.0]);
        assert_eq!(m.dense_row(1), vec![0.0, 7.0, 0.0]);
        let t = parse_matrix_market(mtx.as_bytes(), ids("c", 3), ids("g", 2), MatrixOrientation::CellsByGenes).unwrap();
        assert_eq!(t.dense_row(2), vec![2.0, 0.0]);
    }

    #[test]
    fn matrix_market_errors() {
        let bad_header = "%%MatrixMarket matrix array real general\n1 1\n1\n";
        assert!(parse_matrix_market(bad_header.as_bytes(), ids("c", 1), ids("g", 1), Default::default()).is_err());
        let wrong_shape = "%%MatrixMarket matrix coordinate real general\n2 2 0\n";
        assert!(matches!(
            parse_matrix_market(wrong_shape.as_bytes(), ids("c", 1), ids("g", 1), Default::default()),
            Err(Error::Schema { line: 2, .. })
        ));
        let short = "%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.0\n";
        assert!(parse_matrix_market(short.as_bytes(), ids("c", 1), ids("g", 1), Default::default()).is_err());
        let negative = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 -1\n";
        assert!(parse_matrix_market(negative.as_bytes(), ids("c", 1), ids("g", 1), Default::default()).is_err());
        let oob = "%%MatrixMarket matrix coordinate real general\n1 1 1\n2 1 1\n";
        assert!(matches!(
            parse_matrix_market(oob.as_bytes(), ids("c", 1), ids("g", 1), Default::default()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn dense_csv() {
        let m = parse_dense_csv("cell_id,A,B\nc1,1,0\nc2,0,2.5\n".as_bytes()).unwrap();
        assert_eq!(m.genes(), ["A", "B"]);
        assert_eq!(m.dense_row(1), vec![0.0, 2.5]);
        assert!(parse_dense_csv("cell_id,A\nc1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn gmt_parsing() {
        let sets = parse_gmt("HALLMARK_A\thttp://x\tG1\tG2\nHALLMARK_B\tdesc\tG3\n".as_bytes()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].genes.len(), 2);
        assert!(parse_gmt("A\td\t\n".as_bytes()).is_err());
        assert!(parse_gmt("A\td\tG\nA\td\tH\n".as_bytes()).is_err());
    }

    #[test]
    fn activity_csv_output() {
        let a = ActivityMatrix {
            cells: vec!["c1".into()],
            pathways: vec!["P".into(), "Q".into()],
            values: vec![0.5, 0.0],
        };
        let mut buf = Vec::new();
        write_activity_csv(&a, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cell_id,P,Q\nc1,0.5,0\n");
    }
}
