use std::io::Write;
use std::path::{Path, PathBuf};

use celldesc::cohort::{assay_filter, diversity_report, stratified_sample, AssayFilterReport, AssayPattern, Column};
use celldesc::description::{read_records, write_records, CellRecord};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::delimiter_for;
use crate::error::{CliError, CliResult};
use crate::output::{print_json, OutputDir};

/// Filter assays and draw a diversity-maximizing subsample.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct SampleArgs {
    /// Cell metadata table (TSV, or CSV by extension).
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub target_n: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub filter: AssayFilterArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
pub struct AssayFilterArgs {
    /// Columns whose diversity the sample maximizes.
    #[arg(long, value_delimiter = ',', default_value = "cell_type,tissue,disease")]
    pub columns: Vec<String>,
    /// Keep every assay.
    #[arg(long)]
    #[serde(default)]
    pub no_assay_filter: bool,
    /// Extra assay exclusions as NAME=REGEX (case-insensitive).
    #[arg(long = "exclude-assay", value_name = "NAME=REGEX")]
    #[serde(default)]
    pub exclude_assay: Vec<String>,
}

impl AssayFilterArgs {
    pub fn columns(&self) -> CliResult<Vec<Column>> {
        let cols: Vec<Column> = self
            .columns
            .iter()
            .map(|c| c.parse().map_err(|e: celldesc::Error| CliError::usage(e.to_string())))
            .collect::<CliResult<_>>()?;
        if cols.is_empty() {
            return Err(CliError::usage("--columns needs at least one column"));
        }
        Ok(cols)
    }

    pub fn patterns(&self) -> CliResult<Vec<AssayPattern>> {
        let mut patterns = if self.no_assay_filter { Vec::new() } else { AssayPattern::defaults() };
        for raw in &self.exclude_assay {
            let (name, regex) = raw
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--exclude-assay expects NAME=REGEX, got `{raw}`")))?;
            patterns.push(AssayPattern::new(name, regex).map_err(|e| CliError::usage(e.to_string()))?);
        }
        Ok(patterns)
    }

    pub fn apply(&self, records: Vec<CellRecord>) -> CliResult<(Vec<CellRecord>, AssayFilterReport)> {
        let (kept, report) = assay_filter(records, &self.patterns()?);
        if kept.is_empty() {
            return Err(CliError::validation("no cells left after the assay filter"));
        }
        Ok((kept, report))
    }
}

pub fn write_cohort(out: &mut OutputDir, name: &str, records: &[CellRecord]) -> CliResult<()> {
    let mut w = out.writer(name)?;
    write_records(records, &mut w, delimiter_for(Path::new(name)))?;
    w.flush()?;
    Ok(())
}

pub fn run(args: SampleArgs) -> CliResult<()> {
    let columns = args.filter.columns()?;
    let records = read_records(&args.cohort)?;
    let input_diversity = diversity_report(&records, &columns)?;
    let (kept, filter) = args.filter.apply(records)?;
    let picked = stratified_sample(&kept, args.target_n, &columns, args.seed)?;
    let sampled: Vec<CellRecord> = picked.iter().map(|&i| kept[i].clone()).collect();
    let report = json!({
        "seed": args.seed,
        "target_n": args.target_n,
        "sampled": sampled.len(),
        "assay_filter": filter,
        "diversity_input": input_diversity,
        "diversity_filtered": diversity_report(&kept, &columns)?,
        "diversity_sampled": diversity_report(&sampled, &columns)?,
    });
    let mut out = OutputDir::create(&args.out_dir)?;
    write_cohort(&mut out, "sample.tsv", &sampled)?;
    out.write_json("sample_report.json", &report)?;
    out.commit()?;
    print_json(&report)
}
