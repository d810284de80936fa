//! Personalized PageRank over the ontology graph and the log-scaled,
//! row-normalized similarity matrix derived from it.

mod distribution;
mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::OntologyGraph;

pub use distribution::{
    empirical_cdf, export_cdf, fit_heavy_tail, heavy_tail_fit, similarity_stats, summarize,
    DistributionStats, PowerLawFit, HISTOGRAM_BINS,
};
pub use io::{read_matrix, sidecar_path, write_matrix, MATRIX_MAGIC, MATRIX_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PprConfig {
    /// Probability of following an edge instead of returning to the source.
    ///
    /// Below (sqrt(5) - 1) / 2 every source outranks all other nodes in its
    /// own PPR vector on trees; at 0.85 a leaf's neighbor outranks the leaf.
    pub damping: f64,
    /// L1 change between iterates below which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Scale applied to PPR scores inside `log(1 + p / tau)`.
    pub tau: f64,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            damping: 0.6,
            tolerance: 1e-10,
            max_iterations: 10_000,
            tau: 0.1,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::invalid(format!("damping must lie in (0, 1), got {}", self.damping)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("tolerance must be nonnegative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PprVector {
    pub source: String,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration for `v <- d * W v + (1 - d) * e_source`, where `W` is the
/// column-stochastic random walk over undirected neighbors.
///
/// Mass sitting on a node without neighbors is sent back to the source, so
/// an isolated source keeps all of its mass.
pub fn personalized_pagerank(
    graph: &OntologyGraph,
    source: &str,
    config: &PprConfig,
) -> Result<PprVector> {
    config.validate()?;
    let s = graph
        .node(source)
        .ok_or_else(|| Error::invalid(format!("source `{source}` is not a graph node")))?;
    let (scores, iterations, converged) = ppr_from(graph, s, config);
    Ok(PprVector {
        source: source.to_string(),
        scores,
        iterations,
        converged,
    })
}

fn ppr_from(graph: &OntologyGraph, source: usize, config: &PprConfig) -> (Vec<f64>, usize, bool) {
    let n = graph.node_count();
    let d = config.damping;
    let mut current = vec![0.0; n];
    current[source] = 1.0;
    let mut next = vec![0.0; n];

    for iteration in 1..=config.max_iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut returned = 1.0 - d;
        for (u, &mass) in current.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let neighbors = graph.neighbors(u);
            if neighbors.is_empty() {
                returned += d * mass;
            } else {
                let share = d * mass / neighbors.len() as f64;
                for &w in neighbors {
                    next[w] += share;
                }
            }
        }
        next[source] += returned;

        let change: f64 = next.iter().zip(&current).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut current, &mut next);
        if change < config.tolerance {
            return (current, iteration, true);
        }
    }
    (current, config.max_iterations, false)
}

/// `log(1 + p_j / tau) / log(1 + p_source / tau)`, clipped to `[0, 1]`, with
/// the source entry pinned to exactly 1.
pub(crate) fn scale_row(scores: &[f64], source: usize, tau: f64) -> Result<Vec<f64>> {
    let self_score = scores[source];
    if !(self_score > 0.0) {
        return Err(Error::Degenerate(format!(
            "PPR self-score of node {source} is {self_score}"
        )));
    }
    let denom = (self_score / tau).ln_1p();
    let mut row: Vec<f64> = scores
        .iter()
        .map(|&p| ((p / tau).ln_1p() / denom).clamp(0.0, 1.0))
        .collect();
    row[source] = 1.0;
    Ok(row)
}

/// One row of the similarity matrix, entry `j` = `S(source, j)`.
pub fn similarity_row(graph: &OntologyGraph, source: &str, config: &PprConfig) -> Result<Vec<f64>> {
    let ppr = personalized_pagerank(graph, source, config)?;
    let s = graph.node(source).expect("checked by personalized_pagerank");
    scale_row(&ppr.scores, s, config.tau)
}

/// Dense `n x n` similarity matrix indexed like the graph's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "matrix of {} values does not match {n} terms",
                values.len()
            )));
        }
        Ok(Self { ids, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        // ids are sorted when built from a graph, but loaded sidecars may not be
        match self.ids.binary_search_by(|x| x.as_str().cmp(id)) {
            Ok(i) => Some(i),
            Err(_) => self.ids.iter().position(|x| x == id),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.len();
        &self.values[row * n..(row + 1) * n]
    }

    /// `S(from, to)` by term id.
    pub fn similarity(&self, from: &str, to: &str) -> Option<f64> {
        Some(self.get(self.index_of(from)?, self.index_of(to)?))
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (i + 1..n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Replaces each off-diagonal pair by its mean.
    pub fn symmetrized(&self) -> Self {
        let n = self.len();
        let mut values = self.values.clone();
        for i in 0..n {
            for j in i + 1..n {
                let mean = (self.get(i, j) + self.get(j, i)) / 2.0;
                values[i * n + j] = mean;
                values[j * n + i] = mean;
            }
        }
        Self {
            ids: self.ids.clone(),
            values,
        }
    }

    /// All `(i, j)` entries with `i != j`, row-major.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1));
        for i in 0..n {
            out.extend(
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v),
            );
        }
        out
    }
}

/// Stacks [`similarity_row`] over every node. Rows are computed in parallel
/// and placed by node index, so the result does not depend on scheduling.
pub fn similarity_matrix(
    graph: &OntologyGraph,
    config: &PprConfig,
    symmetrize: bool,
) -> Result<SimilarityMatrix> {
    config.validate()?;
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::invalid("graph has no nodes"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let (scores, iterations, converged) = ppr_from(graph, s, config);
            if !converged {
                log::warn!(
                    "PPR from {} stopped after {iterations} iterations without converging",
                    graph.id(s)
                );
            }
            scale_row(&scores, s, config.tau)
        })
        .collect::<Result<_>>()?;
    let matrix = SimilarityMatrix::new(graph.ids().to_vec(), rows.concat())?;
    Ok(if symmetrize { matrix.symmetrized() } else { matrix })
}
