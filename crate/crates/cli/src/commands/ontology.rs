use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use celldesc::ontology::{build_graph, read_obo, GraphWarning, OntologyGraph};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliResult;
use crate::output::{print_json, OutputDir};

/// Parse an OBO file and write its `is_a` graph.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct OntologyArgs {
    #[arg(long)]
    pub obo: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Keep obsolete terms as graph nodes.
    #[arg(long)]
    #[serde(default)]
    pub include_obsolete: bool,
}

/// Sizes of connected components, largest first.
pub fn component_sizes(graph: &OntologyGraph) -> Vec<usize> {
    let mut seen = vec![false; graph.node_count()];
    let mut sizes = Vec::new();
    for start in 0..graph.node_count() {
        if seen[start] {
            continue;
        }
        let component = graph.component_of(start);
        for &v in &component {
            seen[v] = true;
        }
        sizes.push(component.len());
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

fn warning_kind(w: &GraphWarning) -> &'static str {
    match w {
        GraphWarning::DanglingParent { .. } => "dangling_parent",
        GraphWarning::ObsoleteParent { .. } => "obsolete_parent",
        GraphWarning::SelfLoop { .. } => "self_loop",
    }
}

pub fn run(args: OntologyArgs) -> CliResult<()> {
    let ontology = read_obo(&args.obo)?;
    let build = build_graph(&ontology, args.include_obsolete);
    for w in &build.warnings {
        log::warn!("{w}");
    }
    let graph = &build.graph;
    let mut out = OutputDir::create(&args.out_dir)?;

    let mut edges = out.writer("graph.tsv")?;
    graph.write_edge_tsv(&mut edges)?;
    edges.flush()?;

    let mut terms = out.writer("terms.tsv")?;
    writeln!(terms, "id\tname\tobsolete\tin_graph\tdegree")?;
    for t in ontology.terms() {
        let node = graph.node(&t.id);
        writeln!(
            terms,
            "{}\t{}\t{}\t{}\t{}",
            t.id,
            t.name,
            t.obsolete,
            node.is_some(),
            node.map_or(0, |n| graph.degree(n))
        )?;
    }
    terms.flush()?;

    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for w in &build.warnings {
        *by_kind.entry(warning_kind(w)).or_default() += 1;
    }
    let components = component_sizes(graph);
    let summary = json!({
        "terms": ontology.len(),
        "obsolete_terms": ontology.terms().iter().filter(|t| t.obsolete).count(),
        "nodes": graph.node_count(),
        "edges": graph.edge_count(),
        "components": components.len(),
        "largest_component": components.first().copied().unwrap_or(0),
        "warning_count": build.warnings.len(),
        "warnings_by_kind": by_kind,
        "warnings": build.warnings,
    });
    out.write_json("summary.json", &summary)?;
    out.commit()?;
    print_json(&summary)
}
