use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use celldesc::pathway::{
    prevalence_filter, read_gmt, score_matrix, select_hvg, top_k_pathways, write_activity_csv,
    ActivityMatrix, ExpressionMatrix, GeneSet, HvgSelection, PrevalenceReport, RankedPathway,
    DEFAULT_PREVALENCE_THRESHOLD, DEFAULT_TOP_FRACTION,
};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::ExpressionArgs;
use crate::error::CliResult;
use crate::output::{print_json, OutputDir};

/// Pathways kept per cell.
pub const TOP_K: usize = 2;

/// Score pathway activity per cell and pick each cell's top pathways.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct PathwaysArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub expression: ExpressionArgs,
    /// Gene sets in GMT format.
    #[arg(long)]
    pub gmt: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct ScoringArgs {
    /// Number of highly variable genes to rank within; 0 uses every gene.
    #[arg(long, default_value_t = 2000)]
    pub n_hvg: usize,
    /// Fraction of the ranked genes inside the recovery window.
    #[arg(long, default_value_t = DEFAULT_TOP_FRACTION)]
    pub top_fraction: f64,
    /// Minimum fraction of cells listing a pathway among their top ones.
    #[arg(long, default_value_t = DEFAULT_PREVALENCE_THRESHOLD)]
    pub prevalence: f64,
}

pub struct Scored {
    pub hvg: Option<HvgSelection>,
    pub activity: ActivityMatrix,
    pub prevalence: PrevalenceReport,
    /// Per cell, up to [`TOP_K`] retained pathways with positive activity.
    pub top: Vec<Vec<RankedPathway>>,
}

/// HVG restriction, AUC scoring, top-k selection, prevalence filtering and a
/// second top-k pass over the retained pathways.
pub fn score(expr: &ExpressionMatrix, gene_sets: &[GeneSet], args: &ScoringArgs) -> CliResult<Scored> {
    let (hvg, ranked_expr) = if args.n_hvg > 0 {
        let selection = select_hvg(expr, args.n_hvg)?;
        for w in &selection.warnings {
            log::warn!("{w}");
        }
        let restricted = expr.select_genes(&selection.gene_indices(expr));
        (Some(selection), restricted)
    } else {
        (None, expr.clone())
    };
    let activity = score_matrix(&ranked_expr, gene_sets, args.top_fraction)?;
    let first = top_k_pathways(&activity, TOP_K)?;
    let prevalence = prevalence_filter(&first, &activity.pathways, args.prevalence)?;
    let retained = activity.restrict(&prevalence.retained);
    let top = if retained.pathways.is_empty() {
        vec![Vec::new(); retained.cells.len()]
    } else {
        top_k_pathways(&retained, TOP_K)?
            .into_iter()
            .map(|list| list.into_iter().filter(|r| r.score > 0.0).collect())
            .collect()
    };
    Ok(Scored {
        hvg,
        activity,
        prevalence,
        top,
    })
}

pub fn write_top(cells: &[String], top: &[Vec<RankedPathway>], mut out: impl Write) -> CliResult<()> {
    writeln!(out, "cell_id\trank\tpathway_id\tauc")?;
    for (cell, list) in cells.iter().zip(top) {
        for (rank, r) in list.iter().enumerate() {
            writeln!(out, "{cell}\t{}\t{}\t{}", rank + 1, r.pathway, r.score)?;
        }
    }
    Ok(())
}

pub fn write_hvg(selection: &HvgSelection, mut out: impl Write) -> CliResult<()> {
    writeln!(out, "gene\tmean\tdispersion\tbin\tz_score")?;
    for g in &selection.genes {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", g.gene, g.mean, g.dispersion, g.bin, g.z_score)?;
    }
    Ok(())
}

/// Writes activity.csv, top_pathways.tsv, prevalence.json and hvg.tsv.
pub fn write_scored(out: &mut OutputDir, scored: &Scored) -> CliResult<()> {
    let mut w = out.writer("activity.csv")?;
    write_activity_csv(&scored.activity, &mut w)?;
    w.flush()?;
    let mut w = out.writer("top_pathways.tsv")?;
    write_top(&scored.activity.cells, &scored.top, &mut w)?;
    w.flush()?;
    out.write_json("prevalence.json", &scored.prevalence)?;
    if let Some(hvg) = &scored.hvg {
        let mut w = out.writer("hvg.tsv")?;
        write_hvg(hvg, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn run(args: PathwaysArgs) -> CliResult<()> {
    let expr = args.expression.load()?;
    let gene_sets = read_gmt(&args.gmt)?;
    let scored = score(&expr, &gene_sets, &args.scoring)?;
    let mut out = OutputDir::create(&args.out_dir)?;
    write_scored(&mut out, &scored)?;
    let digests = out.commit()?;
    let without: usize = scored.top.iter().filter(|l| l.is_empty()).count();
    let used: BTreeSet<&str> = scored.top.iter().flatten().map(|r| r.pathway.as_str()).collect();
    print_json(&json!({
        "cells": expr.n_cells(),
        "genes": expr.n_genes(),
        "gene_sets": gene_sets.len(),
        "hvg": scored.hvg.as_ref().map(|h| h.genes.len()),
        "retained_pathways": scored.prevalence.retained.len(),
        "removed_pathways": scored.prevalence.removed.len(),
        "pathways_in_use": used.len(),
        "cells_without_pathways": without,
        "outputs": digests,
    }))
}
