use std::io::{BufReader, Write};
use std::path::PathBuf;

use celldesc::ontology::{build_graph, read_obo, OntologyGraph};
use celldesc::similarity::{export_cdf, heavy_tail_fit, similarity_matrix, similarity_stats, PprConfig, SimilarityMatrix};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::{print_json, OutputDir};

pub const MATRIX_FILE: &str = "similarity.pprs";

/// Compute the PageRank similarity matrix and its distribution statistics.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct SimilarityArgs {
    /// Ontology to build the graph from.
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    pub obo: Option<PathBuf>,
    /// Edge list `child\tparent` as written by `celldesc ontology`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Extra node ids (first column) for isolated terms; used with --graph.
    #[arg(long, requires = "graph")]
    pub nodes: Option<PathBuf>,
    #[arg(long, default_value_t = PprConfig::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = PprConfig::default().damping)]
    pub damping: f64,
    #[arg(long, default_value_t = PprConfig::default().tolerance)]
    pub tolerance: f64,
    #[arg(long, default_value_t = PprConfig::default().max_iterations)]
    pub max_iterations: usize,
    /// Write the symmetrized matrix (pairwise mean) instead of the directed one.
    #[arg(long)]
    #[serde(default)]
    pub symmetrize: bool,
    /// Also write the empirical CDF of off-diagonal values.
    #[arg(long)]
    #[serde(default)]
    pub cdf: bool,
    /// Round CDF values up to a grid of this many steps.
    #[arg(long)]
    pub cdf_resolution: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn load_graph(args: &SimilarityArgs) -> CliResult<OntologyGraph> {
    match (&args.obo, &args.graph) {
        (Some(obo), None) => {
            let build = build_graph(&read_obo(obo)?, false);
            if !build.warnings.is_empty() {
                log::warn!("{} graph warnings (see `celldesc ontology`)", build.warnings.len());
            }
            Ok(build.graph)
        }
        (None, Some(path)) => {
            let extra = match &args.nodes {
                Some(nodes) => celldesc::pathway::read_sidecar_ids(nodes)?,
                None => Vec::new(),
            };
            let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            Ok(OntologyGraph::read_edge_tsv(BufReader::new(file), extra)?)
        }
        _ => Err(CliError::usage("give exactly one of --obo or --graph")),
    }
}

fn or_error<T: Serialize>(result: celldesc::Result<T>) -> Value {
    match result {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Summary statistics and heavy-tail fit of the off-diagonal entries.
pub fn variant_report(matrix: &SimilarityMatrix) -> Value {
    json!({
        "stats": or_error(similarity_stats(matrix)),
        "heavy_tail": or_error(heavy_tail_fit(matrix)),
    })
}

pub fn run(args: SimilarityArgs) -> CliResult<()> {
    let config = PprConfig {
        damping: args.damping,
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        tau: args.tau,
    };
    config.validate()?;
    let graph = load_graph(&args)?;
    let directed = similarity_matrix(&graph, &config, false)?;
    let symmetric = directed.symmetrized();
    let written = if args.symmetrize { &symmetric } else { &directed };

    let mut out = OutputDir::create(&args.out_dir)?;
    let matrix_path = out.path(MATRIX_FILE);
    out.path(&format!("{}.terms.tsv", MATRIX_FILE.trim_end_matches(".pprs")));
    written.save(&matrix_path)?;
    if args.cdf {
        let mut cdf = out.writer("cdf.tsv")?;
        export_cdf(written, args.cdf_resolution, &mut cdf)?;
        cdf.flush()?;
    }
    let stats = json!({
        "config": config,
        "nodes": graph.node_count(),
        "edges": graph.edge_count(),
        "matrix": if args.symmetrize { "symmetrized" } else { "directed" },
        "directed": variant_report(&directed),
        "symmetrized": variant_report(&symmetric),
    });
    out.write_json("stats.json", &stats)?;
    out.commit()?;
    print_json(&stats)
}
