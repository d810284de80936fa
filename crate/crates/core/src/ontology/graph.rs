use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::Serialize;

use super::Ontology;
use crate::error::{Error, Result};

/// Undirected simple graph over ontology term ids.
///
/// Nodes are sorted by term id. `edges` keeps one `(child, parent)` pair per
/// undirected edge, and `neighbors` holds both directions in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphWarning {
    /// `is_a` target that is not a `[Term]` in the file.
    DanglingParent { child: String, parent: String },
    /// `is_a` target excluded from the graph because it is obsolete.
    ObsoleteParent { child: String, parent: String },
    SelfLoop { term: String },
}

impl fmt::Display for GraphWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphWarning::DanglingParent { child, parent } => {
                write!(f, "{child} is_a unknown term {parent}")
            }
            GraphWarning::ObsoleteParent { child, parent } => {
                write!(f, "{child} is_a obsolete term {parent}")
            }
            GraphWarning::SelfLoop { term } => write!(f, "{term} is_a itself"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: OntologyGraph,
    pub warnings: Vec<GraphWarning>,
}

/// Builds the undirected `is_a` graph. Obsolete terms are left out unless
/// `include_obsolete` is set.
pub fn build_graph(ontology: &Ontology, include_obsolete: bool) -> GraphBuild {
    let keep = |obsolete: bool| include_obsolete || !obsolete;
    let nodes: Vec<&str> = ontology
        .terms()
        .iter()
        .filter(|t| keep(t.obsolete))
        .map(|t| t.id.as_str())
        .collect();

    let mut warnings = BTreeSet::new();
    let mut edges = Vec::new();
    for term in ontology.terms().iter().filter(|t| keep(t.obsolete)) {
        for parent in &term.is_a_parents {
            if *parent == term.id {
                warnings.insert(GraphWarning::SelfLoop {
                    term: term.id.clone(),
                });
                continue;
            }
            match ontology.get(parent) {
                None => {
                    warnings.insert(GraphWarning::DanglingParent {
                        child: term.id.clone(),
                        parent: parent.clone(),
                    });
                }
                Some(p) if !keep(p.obsolete) => {
                    warnings.insert(GraphWarning::ObsoleteParent {
                        child: term.id.clone(),
                        parent: parent.clone(),
                    });
                }
                Some(_) => edges.push((term.id.as_str(), parent.as_str())),
            }
        }
    }
    let graph = OntologyGraph::from_edges(nodes, edges)
        .expect("edge endpoints were checked against the node set");
    GraphBuild {
        graph,
        warnings: warnings.into_iter().collect(),
    }
}

impl OntologyGraph {
    /// Builds a graph from node ids and `(child, parent)` pairs.
    ///
    /// Self-loops and repeated edges (in either orientation) collapse; every
    /// endpoint must be one of `nodes`.
    pub fn from_edges<N, E, S>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut ids: Vec<String> = nodes.into_iter().map(|s| s.as_ref().to_string()).collect();
        ids.sort();
        ids.dedup();
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();

        let resolve = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::invalid(format!("edge endpoint `{id}` is not a graph node")))
        };

        let mut seen = BTreeSet::new();
        let mut directed = Vec::new();
        for (child, parent) in edges {
            let (c, p) = (resolve(child.as_ref())?, resolve(parent.as_ref())?);
            if c == p {
                continue;
            }
            if seen.insert((c.min(p), c.max(p))) {
                directed.push((c, p));
            }
        }
        directed.sort_unstable();

        let mut neighbors = vec![Vec::new(); ids.len()];
        for &(c, p) in &directed {
            neighbors[c].push(p);
            neighbors[p].push(c);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            ids,
            index,
            neighbors,
            edges: directed,
        })
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    /// `(child, parent)` node pairs, one per undirected edge.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Nodes reachable from `start`, in ascending order.
    pub fn component_of(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        (0..self.node_count()).filter(|&i| seen[i]).collect()
    }

    /// Writes `child_id\tparent_id` lines.
    pub fn write_edge_tsv(&self, mut out: impl Write) -> Result<()> {
        for &(c, p) in &self.edges {
            writeln!(out, "{}\t{}", self.ids[c], self.ids[p])?;
        }
        Ok(())
    }

    /// Reads an edge TSV. `extra_nodes` adds nodes with no edges (isolated terms).
    pub fn read_edge_tsv(
        reader: impl BufRead,
        extra_nodes: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let mut nodes: Vec<String> = extra_nodes.into_iter().collect();
        let mut edges = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(c), Some(p), None) if !c.is_empty() && !p.is_empty() => {
                    nodes.push(c.to_string());
                    nodes.push(p.to_string());
                    edges.push((c.to_string(), p.to_string()));
                }
                _ => return Err(Error::parse(i + 1, "expected `child_id\\tparent_id`")),
            }
        }
        Self::from_edges(nodes, edges)
    }
}
