use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::PathBuf;

use celldesc::cohort::{diversity_report, donor_split, stratified_sample};
use celldesc::description::{
    read_records, render_description, write_description_lines, CellRecord, DescriptionLine,
    DescriptionParser, PathwayCatalog, PathwayEntry,
};
use celldesc::ontology::read_obo;
use celldesc::pathway::{read_gmt, GeneSet};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::{parse_ratios, ExpressionArgs};
use super::pathways::{score, write_scored, ScoringArgs};
use super::sample::{write_cohort, AssayFilterArgs};
use super::split::default_ratios;
use crate::error::{CliError, CliResult};
use crate::output::{print_json, sha256_file, OutputDir};

/// Cohort filtering and sampling, pathway scoring, description rendering
/// and donor splitting in one reproducible run.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct PipelineArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub expression: ExpressionArgs,
    #[arg(long)]
    pub gmt: PathBuf,
    #[arg(long)]
    pub ontology: PathBuf,
    /// Pathway catalog; without one, GMT descriptions serve as definitions.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Subsample to this many cells; all filtered cells are kept otherwise.
    #[arg(long)]
    pub target_n: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub filter: AssayFilterArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, default_value_t = default_ratios())]
    pub ratios: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Catalog built from GMT descriptions, falling back to the set id when the
/// description is empty or a link.
fn catalog_from_gmt(sets: &[GeneSet]) -> CliResult<PathwayCatalog> {
    Ok(PathwayCatalog::from_entries(sets.iter().map(|s| {
        let text = if s.name.is_empty() || s.name.starts_with("http") || s.name.starts_with('>') {
            s.id.replace('_', " ")
        } else {
            s.name.clone()
        };
        PathwayEntry {
            id: s.id.clone(),
            display_name: text.clone(),
            definition: text,
        }
    }))?)
}

/// True when parsing `text` recovers every field of `record`.
fn round_trips(parser: &DescriptionParser, record: &CellRecord, text: &str) -> bool {
    let labels = parser.parse(text);
    labels.cell_type.as_deref() == Some(record.cell_type_name.trim())
        && labels.tissue.as_deref() == Some(record.tissue.trim())
        && labels.disease.as_deref() == Some(record.disease.trim())
        && labels.sex.as_deref() == Some(record.sex.as_str())
        && labels.development_stage.as_deref() == Some(record.development_stage.trim())
        && labels.pathway_labels() == record.pathways
}

pub fn run(args: PipelineArgs) -> CliResult<()> {
    let columns = args.filter.columns()?;
    let ratios = parse_ratios(&args.ratios)?;
    let ontology = read_obo(&args.ontology)?;
    let gene_sets = read_gmt(&args.gmt)?;
    let catalog = match &args.catalog {
        Some(path) => PathwayCatalog::read_tsv(path)?,
        None => catalog_from_gmt(&gene_sets)?,
    };
    for set in &gene_sets {
        if catalog.get(&set.id).is_none() {
            return Err(CliError::validation(format!("gene set {} has no catalog entry", set.id)));
        }
    }

    let records = read_records(&args.cohort)?;
    let diversity_input = diversity_report(&records, &columns)?;
    let (filtered, filter_report) = args.filter.apply(records)?;
    let mut cohort: Vec<CellRecord> = match args.target_n {
        Some(n) => stratified_sample(&filtered, n, &columns, args.seed)?
            .into_iter()
            .map(|i| filtered[i].clone())
            .collect(),
        None => filtered.clone(),
    };
    let diversity_sampled = diversity_report(&cohort, &columns)?;

    let expr = args.expression.load()?;
    let index = expr.cell_index();
    let rows: Vec<usize> = cohort
        .iter()
        .map(|r| {
            index.get(r.cell_id.as_str()).copied().ok_or_else(|| {
                CliError::validation(format!("cell {} has no expression profile", r.cell_id))
            })
        })
        .collect::<CliResult<_>>()?;
    let expr = expr.select_cells(&rows);
    let scored = score(&expr, &gene_sets, &args.scoring)?;

    for (record, top) in cohort.iter_mut().zip(&scored.top) {
        record.pathways = top.iter().map(|r| r.pathway.clone()).collect();
    }
    let parser = DescriptionParser::new().with_ontology(&ontology).with_catalog(&catalog);
    let mut lines = Vec::with_capacity(cohort.len());
    let mut render_warnings = 0;
    let mut round_trip_failures = Vec::new();
    for record in &cohort {
        let rendered = render_description(record, &ontology, &catalog)?;
        render_warnings += rendered.warnings.len();
        if !round_trips(&parser, record, &rendered.text) {
            round_trip_failures.push(record.cell_id.clone());
        }
        lines.push(DescriptionLine {
            cell_id: record.cell_id.clone(),
            text: rendered.text,
        });
    }
    if !round_trip_failures.is_empty() {
        log::warn!(
            "{} descriptions do not parse back to their records (first: {})",
            round_trip_failures.len(),
            round_trip_failures[0]
        );
    }
    let split = donor_split(&cohort, ratios, args.seed)?;

    let mut out = OutputDir::create(&args.out_dir)?;
    write_cohort(&mut out, "cohort_sampled.tsv", &cohort)?;
    write_scored(&mut out, &scored)?;
    let mut w = out.writer("descriptions.jsonl")?;
    write_description_lines(&lines, &mut w)?;
    w.flush()?;
    let mut w = out.writer("split.tsv")?;
    split.write_tsv(&mut w)?;
    w.flush()?;

    let mut inputs = BTreeMap::new();
    let mut input_paths = vec![&args.cohort, &args.gmt, &args.ontology];
    input_paths.extend(args.catalog.as_ref());
    for path in input_paths.into_iter().map(PathBuf::as_path).chain(args.expression.paths()) {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
    }
    let pathway_counts: HashMap<usize, usize> = scored.top.iter().fold(HashMap::new(), |mut m, t| {
        *m.entry(t.len()).or_default() += 1;
        m
    });
    let manifest = json!({
        "seed": args.seed,
        "params": &args,
        "inputs": inputs,
        "counts": {
            "input_cells": filter_report.input,
            "after_assay_filter": filter_report.kept,
            "sampled": cohort.len(),
            "genes": expr.n_genes(),
            "hvg": scored.hvg.as_ref().map(|h| h.genes.len()),
            "gene_sets": gene_sets.len(),
            "retained_pathways": scored.prevalence.retained.len(),
            "cells_with_two_pathways": pathway_counts.get(&2).copied().unwrap_or(0),
            "cells_with_one_pathway": pathway_counts.get(&1).copied().unwrap_or(0),
            "cells_without_pathways": pathway_counts.get(&0).copied().unwrap_or(0),
            "render_warnings": render_warnings,
            "round_trip_failures": round_trip_failures.len(),
        },
        "assay_filter": filter_report,
        "diversity": {
            "input": diversity_input,
            "sampled": diversity_sampled,
        },
        "split": split.summary,
        "outputs": out.digests()?,
    });
    out.write_json("manifest.json", &manifest)?;
    out.commit()?;
    print_json(&manifest["counts"])
}
