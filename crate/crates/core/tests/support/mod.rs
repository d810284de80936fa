//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use celldesc::ontology::OntologyGraph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense solve of `(I - d W) v = (1 - d) e_source`, dangling columns
/// returning to the source.
pub fn direct_ppr(n: usize, edges: &[(usize, usize)], source: usize, damping: f64) -> Vec<f64> {
    let mut adj = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in edges {
        adj[(a, b)] = 1.0;
        adj[(b, a)] = 1.0;
    }
    let mut walk = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let degree: f64 = adj.column(j).sum();
        if degree == 0.0 {
            walk[(source, j)] = 1.0;
        } else {
            for i in 0..n {
                walk[(i, j)] = adj[(i, j)] / degree;
            }
        }
    }
    let system = DMatrix::<f64>::identity(n, n) - walk * damping;
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[source] = 1.0 - damping;
    system.lu().solve(&rhs).expect("nonsingular").iter().copied().collect()
}

pub fn name(i: usize) -> String {
    format!("N{i:02}")
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(name).collect()
}

pub fn graph(n: usize, edges: &[(usize, usize)]) -> OntologyGraph {
    let ids = names(n);
    OntologyGraph::from_edges(
        ids.clone(),
        edges.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())),
    )
    .unwrap()
}

pub fn path(n: usize) -> OntologyGraph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    graph(n, &edges)
}

/// Random spanning tree plus random chords.
pub fn random_connected(rng: &mut ChaCha8Rng, max_nodes: usize) -> (usize, Vec<(usize, usize)>) {
    let n = rng.random_range(1..=max_nodes);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.2) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}


fn occurrences(tokens: &[String], gram: &[String]) -> usize {
    if gram.len() > tokens.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| &tokens[i..i + gram.len()] == gram)
        .count()
}

/// Distinct n-grams of `tokens`, kept in first-occurrence order.
fn distinct_grams(tokens: &[String], n: usize) -> Vec<&[String]> {
    let mut out: Vec<&[String]> = Vec::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            let g = &tokens[i..i + n];
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// BLEU by direct n-gram scanning, with the same zero-precision floor and
/// brevity penalty conventions.
pub fn bleu_oracle(pred: &[String], reference: &[String], max_n: usize) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 1..=max_n {
        let total = if pred.len() >= n { pred.len() - n + 1 } else { 0 };
        let clipped: usize = distinct_grams(pred, n)
            .into_iter()
            .map(|g| occurrences(pred, g).min(occurrences(reference, g)))
            .sum();
        let p = if clipped > 0 {
            clipped as f64 / total as f64
        } else {
            1.0 / (2.0 * total.max(1) as f64)
        };
        log_p += p.ln();
    }
    let (c, r) = (pred.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_p / max_n as f64).exp()
}

pub fn rouge_n_oracle(pred: &[String], reference: &[String], n: usize) -> f64 {
    let grams = distinct_grams(reference, n);
    let total: usize = grams.iter().map(|g| occurrences(reference, g)).sum();
    if total == 0 {
        return 0.0;
    }
    let hit: usize = grams
        .iter()
        .map(|g| occurrences(reference, g).min(occurrences(pred, g)))
        .sum();
    hit as f64 / total as f64
}

fn is_subsequence(needle: &[&String], haystack: &[String]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// LCS length by enumerating every subsequence of `a` (|a| <= 16).
pub fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 16);
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

pub fn rouge_l_oracle(pred: &[String], reference: &[String], beta: f64) -> f64 {
    let lcs = lcs_oracle(pred, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / pred.len() as f64;
    let r = lcs / reference.len() as f64;
    (1.0 + beta * beta) * p * r / (r + beta * beta * p)
}

/// (subset accuracy, mean Jaccard, prevalence-weighted F1) by enumerating
/// the label universe and every item per label.
pub fn multilabel_oracle(pairs: &[(BTreeSet<String>, BTreeSet<String>)]) -> (f64, f64, f64) {
    let n = pairs.len() as f64;
    let subset = pairs.iter().filter(|(p, r)| p == r).count() as f64 / n;
    let universe: BTreeSet<&String> = pairs.iter().flat_map(|(p, r)| p.iter().chain(r)).collect();
    let mut jac = 0.0;
    for (p, r) in pairs {
        let (mut inter, mut union) = (0, 0);
        for l in &universe {
            let (a, b) = (p.contains(*l), r.contains(*l));
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        jac += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    }
    let mut weighted = 0.0;
    let mut weight_total = 0.0;
    let mut any_pred = false;
    for l in &universe {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (p, r) in pairs {
            match (p.contains(*l), r.contains(*l)) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        any_pred |= tp + fp > 0.0;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        let support = tp + fn_;
        weighted += f1 * support;
        weight_total += support;
    }
    let wf1 = if weight_total == 0.0 {
        if any_pred { 0.0 } else { 1.0 }
    } else {
        weighted / weight_total
    };
    (subset, jac / n, wf1)
}

/// (accuracy, support-weighted F1) for single-label pairs; `None` never matches.
pub fn classification_oracle(pairs: &[(Option<String>, String)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let acc = pairs.iter().filter(|(p, r)| p.as_ref() == Some(r)).count() as f64 / n;
    let classes: BTreeSet<&String> = pairs.iter().map(|(_, r)| r).collect();
    let mut wf1 = 0.0;
    for c in classes {
        let tp = pairs.iter().filter(|(p, r)| r == c && p.as_ref() == Some(c)).count() as f64;
        let fp = pairs.iter().filter(|(p, r)| r != c && p.as_ref() == Some(c)).count() as f64;
        let fn_ = pairs.iter().filter(|(p, r)| r == c && p.as_ref() != Some(c)).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        wf1 += f1 * (tp + fn_) / n;
    }
    (acc, wf1)
}

pub fn random_tokens(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize, vocab: &[&str]) -> Vec<String> {
    let len = rng.random_range(min_len..=max_len);
    (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect()
}

pub fn random_label_set(rng: &mut ChaCha8Rng, labels: &[&str]) -> BTreeSet<String> {
    labels.iter().filter(|_| rng.random_bool(0.4)).map(|s| s.to_string()).collect()
}

/// AUC by ranking every gene (descending value, then symbol), walking the
/// whole recovery curve and summing the first `ceil(f * G)` points.
pub fn aucell_oracle(values: &[f64], genes: &[String], set: &BTreeSet<String>, top_fraction: f64) -> f64 {
    let mut order: Vec<usize> = (0..genes.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(genes[a].cmp(&genes[b])));
    let k = genes.iter().filter(|g| set.contains(*g)).count();
    if k == 0 {
        return 0.0;
    }
    let window = (top_fraction * genes.len() as f64).ceil() as usize;
    let curve: Vec<usize> = (1..=genes.len())
        .map(|r| order[..r].iter().filter(|&&g| set.contains(&genes[g])).count())
        .collect();
    let ideal: Vec<usize> = (1..=genes.len()).map(|r| r.min(k)).collect();
    let area: usize = curve[..window].iter().sum();
    let max_area: usize = ideal[..window].iter().sum();
    area as f64 / max_area as f64
}
