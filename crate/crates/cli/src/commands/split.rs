use std::io::Write;
use std::path::PathBuf;

use celldesc::cohort::{donor_split, DEFAULT_SPLIT_RATIOS};
use celldesc::description::read_records;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::parse_ratios;
use crate::error::CliResult;
use crate::output::{print_json, OutputDir};

/// Assign donors to train, validation and test splits.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct SplitArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Target cell fractions for train,val,test.
    #[arg(long, default_value_t = default_ratios())]
    pub ratios: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn default_ratios() -> String {
    DEFAULT_SPLIT_RATIOS.map(|r| r.to_string()).join(",")
}

pub fn run(args: SplitArgs) -> CliResult<()> {
    let ratios = parse_ratios(&args.ratios)?;
    let records = read_records(&args.cohort)?;
    let assignment = donor_split(&records, ratios, args.seed)?;
    let mut out = OutputDir::create(&args.out_dir)?;
    let mut w = out.writer("split.tsv")?;
    assignment.write_tsv(&mut w)?;
    w.flush()?;
    let report = json!({ "seed": args.seed, "ratios": ratios, "summary": assignment.summary });
    out.write_json("split.json", &report)?;
    out.commit()?;
    print_json(&report)
}
