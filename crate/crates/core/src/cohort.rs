//! Metadata diversity, assay exclusion, diversity-seeking stratified
//! sampling and donor-level train/val/test splits.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::description::CellRecord;
use crate::error::{Error, Result};

/// Categorical metadata columns of a cohort table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    CellType,
    Tissue,
    Disease,
    Assay,
    DonorId,
}

impl Column {
    pub const OBJECTIVES: [Column; 3] = [Column::CellType, Column::Tissue, Column::Disease];

    pub fn value(self, record: &CellRecord) -> &str {
        match self {
            Column::CellType => &record.cell_type_id,
            Column::Tissue => &record.tissue,
            Column::Disease => &record.disease,
            Column::Assay => &record.assay,
            Column::DonorId => &record.donor_id,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Column::CellType => "cell_type",
            Column::Tissue => "tissue",
            Column::Disease => "disease",
            Column::Assay => "assay",
            Column::DonorId => "donor_id",
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "cell_type" => Column::CellType,
            "tissue" => Column::Tissue,
            "disease" => Column::Disease,
            "assay" => Column::Assay,
            "donor_id" => Column::DonorId,
            other => return Err(Error::invalid(format!("unknown column `{other}`"))),
        })
    }
}

/// Entropy of the observed categories divided by `ln K`; zero counts are
/// ignored and a single category has diversity 0.
pub fn shannon_diversity(counts: &[u64]) -> Result<f64> {
    let positive: Vec<f64> = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect();
    if positive.is_empty() {
        return Err(Error::invalid("diversity of an empty distribution is undefined"));
    }
    if positive.len() == 1 {
        return Ok(0.0);
    }
    let total: f64 = positive.iter().sum();
    let h: f64 = positive.iter().map(|c| -(c / total) * (c / total).ln()).sum();
    Ok((h / (positive.len() as f64).ln()).clamp(0.0, 1.0))
}

pub fn category_counts<'a>(records: impl IntoIterator<Item = &'a CellRecord>, column: Column) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(column.value(r).to_string()).or_insert(0) += 1;
    }
    counts
}

/// Normalized diversity per column.
pub fn diversity_report(records: &[CellRecord], columns: &[Column]) -> Result<BTreeMap<Column, f64>> {
    columns
        .iter()
        .map(|&c| {
            let counts: Vec<u64> = category_counts(records, c).into_values().collect();
            Ok((c, shannon_diversity(&counts)?))
        })
        .collect()
}

pub const DEFAULT_EXCLUDED_ASSAYS: &[(&str, &str)] = &[
    ("Smart-seq family", r"smart[\s-]*seq"),
    ("Quartz-seq", r"quartz[\s-]*seq"),
    ("GEXSCOPE", r"gexscope"),
    ("BD Rhapsody targeted mRNA", r"bd\s+rhapsody\s+targeted\s+mrna"),
    ("10x Flex", r"10x\b.*\bflex\b"),
];

/// Named case-insensitive pattern over assay labels.
#[derive(Debug, Clone)]
pub struct AssayPattern {
    pub name: String,
    regex: Regex,
}

impl AssayPattern {
    pub fn new(name: impl Into<String>, pattern: &str) -> Result<Self> {
        let regex = RegexBuilder::new(pattern)
            .case_insensitive(true)
            .build()
            .map_err(|e| Error::invalid(format!("bad assay pattern `{pattern}`: {e}")))?;
        Ok(Self { name: name.into(), regex })
    }

    pub fn defaults() -> Vec<Self> {
        DEFAULT_EXCLUDED_ASSAYS
            .iter()
            .map(|(name, pattern)| Self::new(*name, pattern).expect("built-in pattern compiles"))
            .collect()
    }

    pub fn matches(&self, assay: &str) -> bool {
        self.regex.is_match(assay)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AssayFilterReport {
    pub input: usize,
    pub kept: usize,
    /// Removed rows per assay label.
    pub removed: BTreeMap<String, usize>,
}

/// Drops rows whose assay matches any pattern.
pub fn assay_filter(records: Vec<CellRecord>, patterns: &[AssayPattern]) -> (Vec<CellRecord>, AssayFilterReport) {
    let mut report = AssayFilterReport {
        input: records.len(),
        ..Default::default()
    };
    let kept: Vec<CellRecord> = records
        .into_iter()
        .filter(|r| {
            let excluded = patterns.iter().any(|p| p.matches(&r.assay));
            if excluded {
                *report.removed.entry(r.assay.clone()).or_default() += 1;
            }
            !excluded
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}

/// Running `sum c ln c` and total for one column, so that entropy after
/// adding one row can be evaluated in constant time.
struct EntropyTracker {
    counts: HashMap<u32, u64>,
    total: u64,
    sum_c_ln_c: f64,
    /// `ln K` with K the number of categories in the input table.
    norm: f64,
}

fn c_ln_c(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 * (c as f64).ln()
    }
}

impl EntropyTracker {
    fn entropy_with(&self, category: u32) -> f64 {
        if self.norm == 0.0 {
            return 0.0;
        }
        let c = self.counts.get(&category).copied().unwrap_or(0);
        let n = (self.total + 1) as f64;
        let s = self.sum_c_ln_c - c_ln_c(c) + c_ln_c(c + 1);
        (n.ln() - s / n) / self.norm
    }

    fn add(&mut self, category: u32) {
        let c = self.counts.entry(category).or_insert(0);
        self.sum_c_ln_c += c_ln_c(*c + 1) - c_ln_c(*c);
        *c += 1;
        self.total += 1;
    }
}

/// Greedy diversity-seeking sample of `target_n` rows.
///
/// Rows are grouped into joint strata over `columns`. Each step draws the
/// next row (in seeded shuffled order) from the stratum whose addition most
/// increases the summed entropy of the sample across columns, each column
/// normalized by the log of its category count in the input. Equal gains go
/// to the stratum with the higher seeded priority. Returns row indices in
/// ascending order.
pub fn stratified_sample(records: &[CellRecord], target_n: usize, columns: &[Column], seed: u64) -> Result<Vec<usize>> {
    if target_n == 0 {
        return Err(Error::invalid("target_n must be positive"));
    }
    if target_n > records.len() {
        return Err(Error::invalid(format!(
            "target_n {target_n} exceeds the {} available rows",
            records.len()
        )));
    }
    if columns.is_empty() {
        return Err(Error::invalid("at least one objective column is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Category codes per column, assigned in sorted label order.
    let mut codes: Vec<BTreeMap<&str, u32>> = Vec::with_capacity(columns.len());
    for &col in columns {
        let mut labels: Vec<&str> = records.iter().map(|r| col.value(r)).collect();
        labels.sort_unstable();
        labels.dedup();
        codes.push(labels.into_iter().enumerate().map(|(i, l)| (l, i as u32)).collect());
    }
    let mut strata: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let key: Vec<u32> = columns.iter().zip(&codes).map(|(c, m)| m[c.value(r)]).collect();
        strata.entry(key).or_default().push(i);
    }
    let mut strata: Vec<(Vec<u32>, Vec<usize>, u64)> = strata
        .into_iter()
        .map(|(key, mut rows)| {
            rows.shuffle(&mut rng);
            rows.reverse(); // popped from the back
            (key, rows, 0)
        })
        .collect();
    for s in strata.iter_mut() {
        s.2 = rng.random();
    }

    let mut trackers: Vec<EntropyTracker> = codes
        .iter()
        .map(|m| EntropyTracker {
            counts: HashMap::new(),
            total: 0,
            sum_c_ln_c: 0.0,
            norm: if m.len() > 1 { (m.len() as f64).ln() } else { 0.0 },
        })
        .collect();

    let mut chosen = Vec::with_capacity(target_n);
    while chosen.len() < target_n {
        let mut best: Option<(f64, u64, usize)> = None;
        for (s, (key, rows, priority)) in strata.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let score: f64 = trackers.iter().zip(key).map(|(t, &k)| t.entropy_with(k)).sum();
            let better = match best {
                None => true,
                Some((bs, bp, _)) => score > bs || (score == bs && *priority > bp),
            };
            if better {
                best = Some((score, *priority, s));
            }
        }
        let (_, _, s) = best.expect("target_n <= rows guarantees a nonempty stratum");
        let row = strata[s].1.pop().expect("nonempty stratum");
        for (t, &k) in trackers.iter_mut().zip(&strata[s].0) {
            t.add(k);
        }
        chosen.push(row);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub donors: usize,
    pub cells: usize,
    pub target_ratio: f64,
    pub achieved_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAssignment {
    pub donors: BTreeMap<String, Split>,
    pub summary: BTreeMap<Split, SplitSummary>,
}

impl SplitAssignment {
    pub fn split_of(&self, donor: &str) -> Option<Split> {
        self.donors.get(donor).copied()
    }

    /// `donor_id\tsplit` lines sorted by donor.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "donor_id\tsplit")?;
        for (donor, split) in &self.donors {
            writeln!(out, "{donor}\t{split}")?;
        }
        Ok(())
    }
}

/// Reads `donor_id\tsplit` lines (header optional).
pub fn parse_split_tsv<R: BufRead>(reader: R) -> Result<BTreeMap<String, Split>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || (lineno == 1 && line == "donor_id\tsplit") {
            continue;
        }
        let (donor, split) = line
            .split_once('\t')
            .ok_or_else(|| Error::schema(lineno, "expected donor_id<TAB>split"))?;
        let split = split.parse().map_err(|e: Error| Error::schema(lineno, e.to_string()))?;
        if out.insert(donor.to_string(), split).is_some() {
            return Err(Error::schema(lineno, format!("donor {donor} listed twice")));
        }
    }
    Ok(out)
}

pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Assigns whole donors to train/val/test, balancing cell counts.
///
/// Donors are visited in seeded random order and each goes to the split
/// furthest below its target cell count (ties in train, val, test order).
/// A split with a positive ratio that ends up without donors then takes the
/// smallest donor (earliest visited on ties) of the split holding the most
/// donors.
pub fn donor_split(records: &[CellRecord], ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios must be in [0, 1] and sum to 1, got {ratios:?}")));
    }
    let mut cells_per_donor: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if r.donor_id.trim().is_empty() {
            return Err(Error::invalid(format!("cell {} has no donor_id", r.cell_id)));
        }
        *cells_per_donor.entry(&r.donor_id).or_default() += 1;
    }
    if cells_per_donor.len() < 3 {
        return Err(Error::invalid(format!(
            "donor split needs at least 3 donors, found {}",
            cells_per_donor.len()
        )));
    }
    let mut order: Vec<(&str, usize)> = cells_per_donor.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let total = records.len() as f64;
    let mut cells = [0usize; 3];
    let mut assigned = vec![0usize; order.len()];
    for (d, &(_, n)) in order.iter().enumerate() {
        let deficit = |s: usize| ratios[s] * total - cells[s] as f64;
        let target = (0..3)
            .reduce(|a, b| if deficit(b) > deficit(a) { b } else { a })
            .expect("three splits");
        cells[target] += n;
        assigned[d] = target;
    }
    for empty in 0..3 {
        if ratios[empty] == 0.0 || assigned.contains(&empty) {
            continue;
        }
        let count = |s: usize| assigned.iter().filter(|&&a| a == s).count();
        let donor_split = (0..3).reduce(|a, b| if count(b) > count(a) { b } else { a }).expect("three splits");
        let moved = (0..order.len())
            .filter(|&d| assigned[d] == donor_split)
            .min_by_key(|&d| order[d].1)
            .expect("a split with the most donors is nonempty");
        cells[donor_split] -= order[moved].1;
        cells[empty] += order[moved].1;
        assigned[moved] = empty;
    }

    let mut donors_in = [0usize; 3];
    let mut donors = BTreeMap::new();
    for (d, &(donor, _)) in order.iter().enumerate() {
        donors_in[assigned[d]] += 1;
        donors.insert(donor.to_string(), Split::ALL[assigned[d]]);
    }
    let summary = Split::ALL
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            (
                s,
                SplitSummary {
                    donors: donors_in[i],
                    cells: cells[i],
                    target_ratio: ratios[i],
                    achieved_ratio: cells[i] as f64 / total,
                },
            )
        })
        .collect();
    Ok(SplitAssignment { donors, summary })
}

pub fn read_split_tsv(path: impl AsRef<Path>) -> Result<BTreeMap<String, Split>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_split_tsv(std::io::BufReader::new(file))
}
