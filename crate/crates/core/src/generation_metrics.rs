//! Lexical (exact match, BLEU, ROUGE) and embedding-alignment metrics for
//! generated descriptions.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercased word and punctuation tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::invalid("token sequences cannot contain empty tokens"));
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).filter(|t: &String| !t.is_empty()).collect())
    }
}

/// Runs of alphanumeric characters form words; every other non-space
/// character is a token of its own.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSequence(tokens)
}

pub fn exact_match(pred: &str, reference: &str) -> f64 {
    if pred == reference {
        1.0
    } else {
        0.0
    }
}

pub fn corpus_exact_match<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<f64> {
    let (mut hits, mut n) = (0.0, 0usize);
    for (p, r) in pairs {
        hits += exact_match(p, r);
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("no pairs to score"));
    }
    Ok(hits / n as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate n-gram totals for one sentence pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub pred_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn collect(pred: &TokenSequence, reference: &TokenSequence, max_n: usize) -> Self {
        let mut stats = BleuStats {
            pred_len: pred.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=max_n {
            let cand = ngram_counts(pred.tokens(), n);
            let refs = ngram_counts(reference.tokens(), n);
            let clipped = cand
                .iter()
                .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
                .sum();
            stats.matches.push(clipped);
            stats.totals.push(pred.len().saturating_sub(n - 1));
        }
        stats
    }

    fn merge(&mut self, other: &BleuStats) {
        if self.matches.is_empty() {
            self.matches = vec![0; other.matches.len()];
            self.totals = vec![0; other.totals.len()];
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.pred_len += other.pred_len;
        self.ref_len += other.ref_len;
    }

    /// `BP * exp(sum_k log(p_k) / max_n)`. A zero precision is floored at
    /// `1 / (2 * max(total_k, 1))` before the log.
    pub fn score(&self) -> f64 {
        if self.pred_len == 0 {
            return 0.0;
        }
        let max_n = self.matches.len() as f64;
        let log_sum: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| {
                let p = if m > 0 {
                    m as f64 / t as f64
                } else {
                    1.0 / (2.0 * t.max(1) as f64)
                };
                p.ln() / max_n
            })
            .sum();
        let bp = if self.pred_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.pred_len as f64).exp()
        };
        bp * log_sum.exp()
    }
}

/// Sentence-level BLEU with uniform weights over 1..=max_n grams.
pub fn bleu(pred: &TokenSequence, reference: &TokenSequence, max_n: usize) -> Result<f64> {
    if max_n == 0 {
        return Err(Error::invalid("BLEU needs max_n >= 1"));
    }
    if pred.is_empty() {
        log::warn!("BLEU of an empty prediction is 0");
        return Ok(0.0);
    }
    Ok(BleuStats::collect(pred, reference, max_n).score())
}

/// ROUGE-n recall with clipped counts. A reference shorter than `n` has no
/// n-grams to recall and scores 0.
pub fn rouge_n(pred: &TokenSequence, reference: &TokenSequence, n: usize) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("ROUGE is undefined for an empty reference"));
    }
    if n == 0 {
        return Err(Error::invalid("ROUGE-n needs n >= 1"));
    }
    let refs = ngram_counts(reference.tokens(), n);
    let total: usize = refs.values().sum();
    if total == 0 {
        return Ok(0.0);
    }
    let cand = ngram_counts(pred.tokens(), n);
    let overlap: usize = refs
        .iter()
        .map(|(gram, &c)| c.min(cand.get(gram).copied().unwrap_or(0)))
        .sum();
    Ok(overlap as f64 / total as f64)
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const DEFAULT_ROUGE_L_BETA: f64 = 1.2;

/// LCS F-measure `(1 + b^2) P R / (R + b^2 P)`.
pub fn rouge_l(pred: &TokenSequence, reference: &TokenSequence, beta: f64) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("ROUGE is undefined for an empty reference"));
    }
    let lcs = lcs_len(pred.tokens(), reference.tokens());
    if lcs == 0 {
        return Ok(0.0);
    }
    let p = lcs as f64 / pred.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    Ok((1.0 + b2) * p * r / (r + b2 * p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn unit_rows(rows: &[Vec<f64>], which: &str) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::invalid(format!("{which} embedding row {i} has zero norm")));
            }
            Ok(row.iter().map(|x| x / norm).collect())
        })
        .collect()
}

/// Greedy cosine alignment of token embeddings. Each token's best cosine is
/// floored at 0 so the scores stay in `[0, 1]`.
pub fn embedding_score(pred: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<EmbeddingScore> {
    if pred.is_empty() || reference.is_empty() {
        return Err(Error::invalid("embedding matrices must be nonempty"));
    }
    let dim = pred[0].len();
    if dim == 0 || pred.iter().chain(reference).any(|row| row.len() != dim) {
        return Err(Error::invalid("embedding rows must share one nonzero dimensionality"));
    }
    let p = unit_rows(pred, "prediction")?;
    let r = unit_rows(reference, "reference")?;
    let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let best_mean = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|a| {
                to.iter()
                    .map(|b| cos(a, b))
                    .fold(f64::NEG_INFINITY, f64::max)
                    .clamp(0.0, 1.0)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    let precision = best_mean(&p, &r);
    let recall = best_mean(&r, &p);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EmbeddingScore {
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BleuPooling {
    /// Mean of sentence-level scores.
    #[default]
    Sentence,
    /// Counts pooled over the corpus before scoring.
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub pairs: usize,
    pub exact_match: f64,
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    /// Embedding scores keyed by encoder label (for example `RBT`, `BBT`).
    pub embedding: BTreeMap<String, EmbeddingScore>,
}

impl GenerationReport {
    /// Table-style view: percentages keyed `Exct`, `B-2`, ..., `<label>-f1`.
    pub fn table(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (key, value) in [
            ("Exct", self.exact_match),
            ("B-2", self.bleu2),
            ("B-4", self.bleu4),
            ("R-1", self.rouge1),
            ("R-2", self.rouge2),
            ("R-L", self.rouge_l),
        ] {
            out.insert(key.to_string(), value * 100.0);
        }
        for (label, score) in &self.embedding {
            out.insert(format!("{label}-precision"), score.precision * 100.0);
            out.insert(format!("{label}-recall"), score.recall * 100.0);
            out.insert(format!("{label}-f1"), score.f1 * 100.0);
        }
        out
    }
}

/// Corpus scores over `(prediction, reference)` texts.
pub fn generation_report(
    pairs: &[(String, String)],
    pooling: BleuPooling,
    rouge_l_beta: f64,
) -> Result<GenerationReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to score"));
    }
    let n = pairs.len() as f64;
    let mut report = GenerationReport {
        pairs: pairs.len(),
        exact_match: corpus_exact_match(pairs.iter().map(|(p, r)| (p.as_str(), r.as_str())))?,
        bleu2: 0.0,
        bleu4: 0.0,
        rouge1: 0.0,
        rouge2: 0.0,
        rouge_l: 0.0,
        embedding: BTreeMap::new(),
    };
    let mut pooled2 = BleuStats::default();
    let mut pooled4 = BleuStats::default();
    for (p, r) in pairs {
        let (pt, rt) = (tokenize(p), tokenize(r));
        let s2 = BleuStats::collect(&pt, &rt, 2);
        let s4 = BleuStats::collect(&pt, &rt, 4);
        report.bleu2 += s2.score() / n;
        report.bleu4 += s4.score() / n;
        pooled2.merge(&s2);
        pooled4.merge(&s4);
        report.rouge1 += rouge_n(&pt, &rt, 1)? / n;
        report.rouge2 += rouge_n(&pt, &rt, 2)? / n;
        report.rouge_l += rouge_l(&pt, &rt, rouge_l_beta)? / n;
    }
    if pooling == BleuPooling::Corpus {
        report.bleu2 = pooled2.score();
        report.bleu4 = pooled4.score();
    }
    Ok(report)
}

/// Mean per-pair embedding scores.
pub fn corpus_embedding_score<'a>(
    pairs: impl IntoIterator<Item = (&'a [Vec<f64>], &'a [Vec<f64>])>,
) -> Result<EmbeddingScore> {
    let (mut p, mut r, mut f, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (pred, reference) in pairs {
        let s = embedding_score(pred, reference)?;
        p += s.precision;
        r += s.recall;
        f += s.f1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("no embedding pairs"));
    }
    let n = n as f64;
    Ok(EmbeddingScore {
        precision: p / n,
        recall: r / n,
        f1: f / n,
    })
}
