//! Cell ontology terms and the undirected `is_a` graph built over them.

mod graph;
mod obo;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::{build_graph, GraphBuild, GraphWarning, OntologyGraph};
pub use obo::{parse_obo, read_obo, write_obo};

const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyTerm {
    pub id: String,
    pub name: String,
    pub definition: Option<String>,
    pub synonyms: Vec<String>,
    pub is_a_parents: Vec<String>,
    pub obsolete: bool,
}

impl OntologyTerm {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            definition: None,
            synonyms: Vec::new(),
            is_a_parents: Vec::new(),
            obsolete: false,
        }
    }
}

/// Term table of a parsed ontology with case-insensitive name and synonym indexes.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    terms: Vec<OntologyTerm>,
    by_id: HashMap<String, usize>,
    by_name: HashMap<String, Vec<usize>>,
    by_synonym: HashMap<String, Vec<usize>>,
}

impl Ontology {
    /// Builds the table, rejecting duplicate ids.
    pub fn from_terms(terms: Vec<OntologyTerm>) -> Result<Self> {
        let mut ontology = Ontology {
            terms: Vec::with_capacity(terms.len()),
            ..Default::default()
        };
        for term in terms {
            ontology.insert(term)?;
        }
        Ok(ontology)
    }

    pub(crate) fn insert(&mut self, term: OntologyTerm) -> Result<()> {
        if self.by_id.contains_key(&term.id) {
            return Err(Error::invalid(format!("duplicate term id `{}`", term.id)));
        }
        let idx = self.terms.len();
        self.by_id.insert(term.id.clone(), idx);
        if !term.name.is_empty() {
            self.by_name
                .entry(term.name.to_lowercase())
                .or_default()
                .push(idx);
        }
        for synonym in &term.synonyms {
            let key = synonym.to_lowercase();
            let slot = self.by_synonym.entry(key).or_default();
            if !slot.contains(&idx) {
                slot.push(idx);
            }
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn terms(&self) -> &[OntologyTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&OntologyTerm> {
        self.by_id.get(id).map(|&i| &self.terms[i])
    }

    /// Resolves an id, exact name or exact synonym to a single term.
    ///
    /// Names and synonyms match case-insensitively. Names take precedence over
    /// synonyms; within one tier a live term beats an obsolete one, and two
    /// remaining matches are reported as ambiguous.
    pub fn lookup_term(&self, query: &str) -> Result<&OntologyTerm> {
        let query = query.trim();
        if let Some(term) = self.get(query) {
            return Ok(term);
        }
        let key = query.to_lowercase();
        for index in [&self.by_name, &self.by_synonym] {
            if let Some(hits) = index.get(&key) {
                return self.pick(query, hits);
            }
        }
        Err(Error::TermNotFound {
            query: query.to_string(),
            candidates: self.nearest_names(&key),
        })
    }

    fn pick(&self, query: &str, hits: &[usize]) -> Result<&OntologyTerm> {
        let live: Vec<usize> = hits
            .iter()
            .copied()
            .filter(|&i| !self.terms[i].obsolete)
            .collect();
        let pool = if live.is_empty() { hits } else { &live[..] };
        match pool {
            [one] => Ok(&self.terms[*one]),
            _ => {
                let mut ids: Vec<String> = pool.iter().map(|&i| self.terms[i].id.clone()).collect();
                ids.sort();
                Err(Error::AmbiguousTerm {
                    query: query.to_string(),
                    ids,
                })
            }
        }
    }

    fn nearest_names(&self, key: &str) -> Vec<String> {
        let mut scored: Vec<(f64, &OntologyTerm)> = self
            .terms
            .iter()
            .filter(|t| !t.obsolete && !t.name.is_empty())
            .map(|t| (strsim::normalized_levenshtein(key, &t.name.to_lowercase()), t))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        scored
            .into_iter()
            .take(MAX_CANDIDATES)
            .map(|(_, t)| format!("{} ({})", t.name, t.id))
            .collect()
    }

    /// Case-insensitive name/synonym match returning the term, or `None`.
    pub(crate) fn match_name_or_synonym(&self, raw: &str) -> Option<&OntologyTerm> {
        let key = raw.trim().to_lowercase();
        [&self.by_name, &self.by_synonym]
            .into_iter()
            .find_map(|index| index.get(&key))
            .and_then(|hits| self.pick(raw, hits).ok())
    }
}
