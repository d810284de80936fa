//! Single-label classification, multi-label pathway and ontology-aware
//! (PageRank similarity) metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::similarity::SimilarityMatrix;

/// Class assigned to predictions that could not be extracted.
pub const ABSENT_CLASS: &str = "∅";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelPair {
    pub cell_id: String,
    pub predicted: Option<String>,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSetPair {
    pub cell_id: String,
    pub predicted: BTreeSet<String>,
    pub reference: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub total: usize,
    /// Pairs whose prediction was absent.
    pub absent: usize,
    pub per_class: BTreeMap<String, ClassScores>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentPolicy {
    /// Absent predictions form their own class and are always wrong.
    #[default]
    CountAsWrong,
    /// Pairs with absent predictions are left out.
    Drop,
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, per-class precision/recall/F1 and F1 weighted by reference support.
pub fn classification_report(pairs: &[LabelPair], policy: AbsentPolicy) -> Result<ClassificationReport> {
    let absent = pairs.iter().filter(|p| p.predicted.is_none()).count();
    let kept: Vec<(&str, &str)> = pairs
        .iter()
        .filter(|p| policy == AbsentPolicy::CountAsWrong || p.predicted.is_some())
        .map(|p| (p.predicted.as_deref().unwrap_or(ABSENT_CLASS), p.reference.as_str()))
        .collect();
    if kept.is_empty() {
        return Err(Error::invalid("no label pairs to score"));
    }
    if let Some(p) = pairs.iter().find(|p| p.reference.is_empty()) {
        return Err(Error::invalid(format!("cell {}: empty reference label", p.cell_id)));
    }

    #[derive(Default)]
    struct Counts {
        tp: usize,
        predicted: usize,
        support: usize,
    }
    let mut counts: BTreeMap<&str, Counts> = BTreeMap::new();
    let mut correct = 0;
    for &(pred, reference) in &kept {
        // An absent prediction never matches, even a reference spelled "∅".
        let hit = pred == reference && pred != ABSENT_CLASS;
        counts.entry(pred).or_default().predicted += 1;
        let entry = counts.entry(reference).or_default();
        entry.support += 1;
        if hit {
            entry.tp += 1;
            correct += 1;
        }
    }
    let n = kept.len();
    let mut weighted_f1 = 0.0;
    let per_class = counts
        .into_iter()
        .map(|(class, c)| {
            let precision = ratio(c.tp, c.predicted);
            let recall = ratio(c.tp, c.support);
            let scores = ClassScores {
                precision,
                recall,
                f1: f1(precision, recall),
                support: c.support,
            };
            weighted_f1 += scores.f1 * c.support as f64 / n as f64;
            (class.to_string(), scores)
        })
        .collect();
    Ok(ClassificationReport {
        accuracy: correct as f64 / n as f64,
        weighted_f1,
        total: n,
        absent,
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiLabelReport {
    pub subset_accuracy: f64,
    pub jaccard: f64,
    pub weighted_f1: f64,
    pub total: usize,
}

/// Intersection over union; two empty sets count as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Subset accuracy, mean Jaccard, and one-vs-rest F1 per label weighted by
/// how often the label occurs in reference sets. When no reference set
/// contains any label the weighted F1 is 1 if nothing was predicted, else 0.
pub fn multilabel_report(pairs: &[LabelSetPair]) -> Result<MultiLabelReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no label-set pairs to score"));
    }
    let n = pairs.len() as f64;
    let subset_accuracy = pairs.iter().filter(|p| p.predicted == p.reference).count() as f64 / n;
    let jaccard_mean = pairs.iter().map(|p| jaccard(&p.predicted, &p.reference)).sum::<f64>() / n;

    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for p in pairs {
        for l in &p.reference {
            *support.entry(l).or_default() += 1;
            if p.predicted.contains(l) {
                *tp.entry(l).or_default() += 1;
            }
        }
        for l in &p.predicted {
            *predicted.entry(l).or_default() += 1;
        }
    }
    let total_support: usize = support.values().sum();
    let weighted_f1 = if total_support == 0 {
        if predicted.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        support
            .iter()
            .map(|(label, &s)| {
                let t = tp.get(label).copied().unwrap_or(0);
                let precision = ratio(t, predicted.get(label).copied().unwrap_or(0));
                let recall = ratio(t, s);
                f1(precision, recall) * s as f64 / total_support as f64
            })
            .sum()
    };
    Ok(MultiLabelReport {
        subset_accuracy,
        jaccard: jaccard_mean,
        weighted_f1,
        total: pairs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSimilarity {
    pub cell_id: String,
    pub reference_id: String,
    pub predicted_id: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageRankSimilarityReport {
    /// Mean score with unresolvable predictions scored 0, in `[0, 1]`.
    pub mean: f64,
    /// Mean over resolvable predictions only; `None` when there are none.
    pub mean_resolved: Option<f64>,
    pub total: usize,
    pub unresolved: usize,
    pub pairs: Vec<PairSimilarity>,
}

/// Ontology-aware credit `S(reference, prediction)` per pair. References must
/// resolve to a term in the matrix; predictions that do not resolve (absent,
/// unknown, ambiguous, or outside the matrix) score 0 and are counted.
pub fn pagerank_similarity_score(
    pairs: &[LabelPair],
    matrix: &SimilarityMatrix,
    ontology: &Ontology,
) -> Result<PageRankSimilarityReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no label pairs to score"));
    }
    let resolve = |label: &str| -> Option<String> {
        let term = ontology.lookup_term(label).ok()?;
        matrix.index_of(&term.id).map(|_| term.id.clone())
    };
    let mut scored = Vec::with_capacity(pairs.len());
    let mut unresolved = 0;
    for pair in pairs {
        let term = ontology.lookup_term(&pair.reference).map_err(|e| {
            Error::invalid(format!("cell {}: reference label: {e}", pair.cell_id))
        })?;
        if matrix.index_of(&term.id).is_none() {
            return Err(Error::invalid(format!(
                "cell {}: reference term {} is not in the similarity matrix",
                pair.cell_id, term.id
            )));
        }
        let predicted_id = pair.predicted.as_deref().and_then(resolve);
        let score = match &predicted_id {
            Some(id) => matrix.similarity(&term.id, id).unwrap_or(0.0),
            None => {
                unresolved += 1;
                0.0
            }
        };
        scored.push(PairSimilarity {
            cell_id: pair.cell_id.clone(),
            reference_id: term.id.clone(),
            predicted_id,
            score,
        });
    }
    let total = scored.len();
    let sum: f64 = scored.iter().map(|p| p.score).sum();
    let resolved = total - unresolved;
    Ok(PageRankSimilarityReport {
        mean: sum / total as f64,
        mean_resolved: (resolved > 0).then(|| sum / resolved as f64),
        total,
        unresolved,
        pairs: scored,
    })
}

/// Reads `cell_id\tpredicted\treference` rows (header optional). An empty
/// prediction field means the prediction is absent.
pub fn parse_label_pairs<R: BufRead>(reader: R) -> Result<Vec<LabelPair>> {
    let mut out = Vec::new();
    for_each_row(reader, |line, fields| {
        if fields[2].trim().is_empty() {
            return Err(Error::schema(line, "empty reference label"));
        }
        out.push(LabelPair {
            cell_id: fields[0].to_string(),
            predicted: Some(fields[1].trim().to_string()).filter(|p| !p.is_empty()),
            reference: fields[2].trim().to_string(),
        });
        Ok(())
    })?;
    Ok(out)
}

/// Reads `cell_id\tpred1;pred2\tref1;ref2` rows (header optional).
pub fn parse_label_set_pairs<R: BufRead>(reader: R) -> Result<Vec<LabelSetPair>> {
    let split = |s: &str| -> BTreeSet<String> {
        s.split(';').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
    };
    let mut out = Vec::new();
    for_each_row(reader, |_, fields| {
        out.push(LabelSetPair {
            cell_id: fields[0].to_string(),
            predicted: split(fields[1]),
            reference: split(fields[2]),
        });
        Ok(())
    })?;
    Ok(out)
}

fn for_each_row<R: BufRead>(
    reader: R,
    mut f: impl FnMut(usize, &[&str]) -> Result<()>,
) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::schema(
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if lineno == 1 && fields[0] == "cell_id" {
            continue;
        }
        f(lineno, &fields)?;
    }
    Ok(())
}

pub fn read_label_pairs(path: impl AsRef<Path>) -> Result<Vec<LabelPair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_label_pairs(std::io::BufReader::new(file))
}

pub fn read_label_set_pairs(path: impl AsRef<Path>) -> Result<Vec<LabelSetPair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_label_set_pairs(std::io::BufReader::new(file))
}
