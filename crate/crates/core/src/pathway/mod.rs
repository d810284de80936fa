//! AUCell-style pathway activity, highly variable gene selection, top-k
//! pathway extraction and prevalence filtering.

mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use io::{
    parse_dense_csv, parse_gmt, parse_matrix_market, read_dense_csv, read_gmt, read_matrix_market,
    read_sidecar_ids, write_activity_csv, MatrixOrientation,
};

pub const DEFAULT_TOP_FRACTION: f64 = 0.05;
pub const DEFAULT_PREVALENCE_THRESHOLD: f64 = 0.005;
pub const HVG_MEAN_BINS: usize = 20;

/// Cells by genes, stored as one sparse row per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    cells: Vec<String>,
    genes: Vec<String>,
    /// Per cell, `(gene index, value)` sorted by gene index, zeros omitted.
    rows: Vec<Vec<(usize, f64)>>,
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} `{id}`")));
        }
    }
    Ok(())
}

impl ExpressionMatrix {
    pub fn from_sparse_rows(
        cells: Vec<String>,
        genes: Vec<String>,
        mut rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        check_unique(&cells, "cell id")?;
        check_unique(&genes, "gene symbol")?;
        if rows.len() != cells.len() {
            return Err(Error::invalid(format!(
                "{} rows for {} cells",
                rows.len(),
                cells.len()
            )));
        }
        for (cell, row) in cells.iter().zip(rows.iter_mut()) {
            row.retain(|&(_, v)| v != 0.0);
            row.sort_by_key(|&(g, _)| g);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::invalid(format!("cell {cell}: gene {} given twice", genes[w[0].0])));
                }
            }
            for &(g, v) in row.iter() {
                if g >= genes.len() {
                    return Err(Error::invalid(format!("cell {cell}: gene index {g} out of range")));
                }
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "cell {cell}: invalid expression {v} for {}",
                        genes[g]
                    )));
                }
            }
        }
        Ok(Self { cells, genes, rows })
    }

    pub fn from_dense(cells: Vec<String>, genes: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let mut rows = Vec::with_capacity(values.len());
        for (i, row) in values.into_iter().enumerate() {
            if row.len() != genes.len() {
                return Err(Error::invalid(format!(
                    "row {i} has {} values for {} genes",
                    row.len(),
                    genes.len()
                )));
            }
            rows.push(row.into_iter().enumerate().collect());
        }
        Self::from_sparse_rows(cells, genes, rows)
    }

    pub fn cells(&self) -> &[String] {
        &self.cells
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn row(&self, cell: usize) -> &[(usize, f64)] {
        &self.rows[cell]
    }

    pub fn dense_row(&self, cell: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.genes.len()];
        for &(g, v) in &self.rows[cell] {
            out[g] = v;
        }
        out
    }

    /// Keeps the given cells, in the given order.
    pub fn select_cells(&self, cells: &[usize]) -> Self {
        Self {
            cells: cells.iter().map(|&c| self.cells[c].clone()).collect(),
            genes: self.genes.clone(),
            rows: cells.iter().map(|&c| self.rows[c].clone()).collect(),
        }
    }

    /// Keeps the given genes, in the given order.
    pub fn select_genes(&self, genes: &[usize]) -> Self {
        let remap: HashMap<usize, usize> = genes.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut r: Vec<(usize, f64)> =
                    row.iter().filter_map(|&(g, v)| remap.get(&g).map(|&n| (n, v))).collect();
                r.sort_by_key(|&(g, _)| g);
                r
            })
            .collect();
        Self {
            cells: self.cells.clone(),
            genes: genes.iter().map(|&g| self.genes[g].clone()).collect(),
            rows,
        }
    }

    pub fn cell_index(&self) -> HashMap<&str, usize> {
        self.cells.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneSet {
    pub id: String,
    pub name: String,
    pub genes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HvgGene {
    pub gene: String,
    pub mean: f64,
    pub dispersion: f64,
    pub bin: usize,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HvgSelection {
    /// Selected genes, highest z-score first.
    pub genes: Vec<HvgGene>,
    /// Genes with nonzero variance that entered the ranking.
    pub informative: usize,
    pub warnings: Vec<String>,
}

impl HvgSelection {
    pub fn gene_indices(&self, expr: &ExpressionMatrix) -> Vec<usize> {
        let index: HashMap<&str, usize> =
            expr.genes().iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        let mut idx: Vec<usize> = self.genes.iter().map(|g| index[g.gene.as_str()]).collect();
        idx.sort_unstable();
        idx
    }
}

/// Binned-dispersion HVG selection. Per gene: mean, sample variance and
/// dispersion `variance / mean`. Genes with zero variance are dropped, the
/// rest are split into equal-frequency bins by mean (ties by symbol), and
/// dispersions are z-scored within each bin using the sample standard
/// deviation. A bin whose dispersions do not vary gives z = 0.
pub fn select_hvg(expr: &ExpressionMatrix, n_top: usize) -> Result<HvgSelection> {
    if n_top == 0 {
        return Err(Error::invalid("n_top must be positive"));
    }
    let n = expr.n_cells();
    if n < 2 {
        return Err(Error::invalid("HVG selection needs at least two cells"));
    }
    let g = expr.n_genes();
    let mut sum = vec![0.0; g];
    for row in &expr.rows {
        for &(j, v) in row {
            sum[j] += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; g];
    let mut nnz = vec![0usize; g];
    for row in &expr.rows {
        for &(j, v) in row {
            sq[j] += (v - mean[j]).powi(2);
            nnz[j] += 1;
        }
    }
    let variance: Vec<f64> = (0..g)
        .map(|j| (sq[j] + (n - nnz[j]) as f64 * mean[j] * mean[j]) / (n - 1) as f64)
        .collect();

    let mut informative: Vec<usize> = (0..g).filter(|&j| variance[j] > 0.0).collect();
    informative.sort_by(|&a, &b| mean[a].total_cmp(&mean[b]).then_with(|| expr.genes[a].cmp(&expr.genes[b])));
    let m = informative.len();
    if m == 0 {
        return Err(Error::Degenerate("every gene has zero variance".into()));
    }
    let bins = HVG_MEAN_BINS.min(m);
    let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (rank, &j) in informative.iter().enumerate() {
        by_bin[rank * bins / m].push(j);
    }

    let mut scored = Vec::with_capacity(m);
    for (bin, members) in by_bin.iter().enumerate() {
        let disp: Vec<f64> = members.iter().map(|&j| variance[j] / mean[j]).collect();
        let k = disp.len() as f64;
        let mu = disp.iter().sum::<f64>() / k;
        let sd = if disp.len() > 1 {
            (disp.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        for (&j, &d) in members.iter().zip(&disp) {
            scored.push(HvgGene {
                gene: expr.genes[j].clone(),
                mean: mean[j],
                dispersion: d,
                bin,
                z_score: if sd > 0.0 { (d - mu) / sd } else { 0.0 },
            });
        }
    }
    scored.sort_by(|a, b| b.z_score.total_cmp(&a.z_score).then_with(|| a.gene.cmp(&b.gene)));

    let mut warnings = Vec::new();
    if m < n_top {
        let w = format!("only {m} genes have nonzero variance, fewer than the {n_top} requested");
        log::warn!("{w}");
        warnings.push(w);
    }
    scored.truncate(n_top);
    Ok(HvgSelection {
        genes: scored,
        informative: m,
        warnings,
    })
}

/// Number of top-ranked genes inside the AUC window.
pub fn auc_window(n_genes: usize, top_fraction: f64) -> Result<usize> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::invalid(format!("top fraction must lie in (0, 1], got {top_fraction}")));
    }
    Ok(((top_fraction * n_genes as f64).ceil() as usize).min(n_genes))
}

/// Area under the recovery curve within the top `window` ranks, normalized
/// by the area reached when every set member ranks first:
/// `sum_{r<=R} hits(r) / sum_{r<=R} min(r, K)`.
fn auc_from_hits(is_member: impl Fn(usize) -> bool, ranking: &[usize], members: usize) -> f64 {
    if members == 0 || ranking.is_empty() {
        return 0.0;
    }
    let (mut hits, mut area, mut max_area) = (0usize, 0usize, 0usize);
    for (r, &gene) in ranking.iter().enumerate() {
        if is_member(gene) {
            hits += 1;
        }
        area += hits;
        max_area += (r + 1).min(members);
    }
    area as f64 / max_area as f64
}

/// Order of genes by symbol, used to break expression ties.
struct SymbolOrder {
    rank: Vec<usize>,
    sorted: Vec<usize>,
}

impl SymbolOrder {
    fn new(genes: &[String]) -> Self {
        let mut sorted: Vec<usize> = (0..genes.len()).collect();
        sorted.sort_by(|&a, &b| genes[a].cmp(&genes[b]));
        let mut rank = vec![0; genes.len()];
        for (r, &g) in sorted.iter().enumerate() {
            rank[g] = r;
        }
        Self { rank, sorted }
    }

    /// The first `window` genes by descending expression, then symbol.
    fn top_genes(&self, row: &[(usize, f64)], window: usize) -> Vec<usize> {
        let mut nonzero: Vec<(usize, f64)> = row.to_vec();
        nonzero.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| self.rank[a.0].cmp(&self.rank[b.0])));
        let mut top: Vec<usize> = nonzero.iter().take(window).map(|&(g, _)| g).collect();
        if top.len() < window {
            let present: BTreeSet<usize> = row.iter().map(|&(g, _)| g).collect();
            top.extend(
                self.sorted
                    .iter()
                    .filter(|g| !present.contains(g))
                    .take(window - top.len()),
            );
        }
        top
    }
}

/// AUC of one gene set in one cell given as a dense row over `genes`.
pub fn aucell_score(values: &[f64], genes: &[String], gene_set: &GeneSet, top_fraction: f64) -> Result<f64> {
    if values.len() != genes.len() {
        return Err(Error::invalid("expression row and gene list differ in length"));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("invalid expression value {v}")));
    }
    let window = auc_window(genes.len(), top_fraction)?;
    let members: Vec<bool> = genes.iter().map(|g| gene_set.genes.contains(g)).collect();
    let k = members.iter().filter(|&&m| m).count();
    if k == 0 {
        log::warn!("gene set {} shares no genes with the matrix", gene_set.id);
        return Ok(0.0);
    }
    let order = SymbolOrder::new(genes);
    let row: Vec<(usize, f64)> = values.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect();
    let ranking = order.top_genes(&row, window);
    Ok(auc_from_hits(|g| members[g], &ranking, k))
}

/// Cells by pathways AUC matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityMatrix {
    pub cells: Vec<String>,
    pub pathways: Vec<String>,
    /// Row-major, one row per cell.
    pub values: Vec<f64>,
}

impl ActivityMatrix {
    pub fn row(&self, cell: usize) -> &[f64] {
        let p = self.pathways.len();
        &self.values[cell * p..(cell + 1) * p]
    }

    pub fn get(&self, cell: usize, pathway: usize) -> f64 {
        self.values[cell * self.pathways.len() + pathway]
    }

    /// Keeps only the named pathways, in their current column order.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Self {
        let cols: Vec<usize> = (0..self.pathways.len()).filter(|&j| keep.contains(&self.pathways[j])).collect();
        Self {
            cells: self.cells.clone(),
            pathways: cols.iter().map(|&j| self.pathways[j].clone()).collect(),
            values: (0..self.cells.len())
                .flat_map(|i| cols.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.get(i, j))
                .collect(),
        }
    }
}

/// Scores every gene set in every cell. Cells are processed in parallel and
/// written back by index, so the output does not depend on scheduling.
pub fn score_matrix(expr: &ExpressionMatrix, gene_sets: &[GeneSet], top_fraction: f64) -> Result<ActivityMatrix> {
    let window = auc_window(expr.n_genes(), top_fraction)?;
    let gene_index: HashMap<&str, usize> =
        expr.genes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let memberships: Vec<(Vec<bool>, usize)> = gene_sets
        .iter()
        .map(|set| {
            let mut mask = vec![false; expr.n_genes()];
            let mut k = 0;
            for g in &set.genes {
                if let Some(&i) = gene_index.get(g.as_str()) {
                    mask[i] = true;
                    k += 1;
                }
            }
            if k == 0 {
                log::warn!("gene set {} shares no genes with the matrix", set.id);
            }
            (mask, k)
        })
        .collect();
    let order = SymbolOrder::new(&expr.genes);
    let rows: Vec<Vec<f64>> = (0..expr.n_cells())
        .into_par_iter()
        .map(|c| {
            let ranking = order.top_genes(&expr.rows[c], window);
            memberships
                .iter()
                .map(|(mask, k)| auc_from_hits(|g| mask[g], &ranking, *k))
                .collect()
        })
        .collect();
    Ok(ActivityMatrix {
        cells: expr.cells.clone(),
        pathways: gene_sets.iter().map(|s| s.id.clone()).collect(),
        values: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPathway {
    pub pathway: String,
    pub score: f64,
}

/// Per cell, the `k` highest-scoring pathways; equal scores are ordered by id.
pub fn top_k_pathways(activity: &ActivityMatrix, k: usize) -> Result<Vec<Vec<RankedPathway>>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok((0..activity.cells.len())
        .map(|c| {
            let mut ranked: Vec<RankedPathway> = activity
                .pathways
                .iter()
                .zip(activity.row(c))
                .map(|(p, &s)| RankedPathway {
                    pathway: p.clone(),
                    score: s,
                })
                .collect();
            ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pathway.cmp(&b.pathway)));
            ranked.truncate(k);
            ranked
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceReport {
    pub threshold: f64,
    pub cells: usize,
    /// Fraction of cells listing each pathway in its top-k.
    pub prevalence: BTreeMap<String, f64>,
    pub retained: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

/// Removes pathways active (listed in the top-k) in a fraction of cells
/// strictly below `threshold`.
pub fn prevalence_filter(
    top_lists: &[Vec<RankedPathway>],
    universe: &[String],
    threshold: f64,
) -> Result<PrevalenceReport> {
    if top_lists.is_empty() {
        return Err(Error::invalid("prevalence filter needs at least one cell"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let mut counts: BTreeMap<String, usize> = universe.iter().map(|p| (p.clone(), 0)).collect();
    for list in top_lists {
        let distinct: BTreeSet<&str> = list.iter().map(|r| r.pathway.as_str()).collect();
        for p in distinct {
            *counts.entry(p.to_string()).or_default() += 1;
        }
    }
    let n = top_lists.len() as f64;
    let mut report = PrevalenceReport {
        threshold,
        cells: top_lists.len(),
        prevalence: BTreeMap::new(),
        retained: BTreeSet::new(),
        removed: BTreeSet::new(),
    };
    for (p, c) in counts {
        let fraction = c as f64 / n;
        if fraction < threshold {
            report.removed.insert(p.clone());
        } else {
            report.retained.insert(p.clone());
        }
        report.prevalence.insert(p, fraction);
    }
    Ok(report)
}
