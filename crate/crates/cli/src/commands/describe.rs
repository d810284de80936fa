use std::io::Write;
use std::path::PathBuf;

use celldesc::description::{
    read_description_lines, read_records, render_description, write_description_lines,
    DescriptionLine, DescriptionParser, ExtractedLabels, PathwayCatalog,
};
use celldesc::ontology::read_obo;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{print_json, OutputDir};

/// Render descriptions from cell records, or parse descriptions back into labels.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct DescribeArgs {
    /// Cell records to render into descriptions.jsonl.
    #[arg(long, conflicts_with = "descriptions", required_unless_present = "descriptions")]
    pub records: Option<PathBuf>,
    /// Descriptions (JSON lines) to parse into labels.jsonl.
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Pathway catalog TSV `pathway_id\tdisplay_name\tdefinition`.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct LabelLine<'a> {
    cell_id: &'a str,
    #[serde(flatten)]
    labels: &'a ExtractedLabels,
}

pub fn run(args: DescribeArgs) -> CliResult<()> {
    let ontology = args.ontology.as_ref().map(read_obo).transpose()?;
    let catalog = match &args.catalog {
        Some(path) => PathwayCatalog::read_tsv(path)?,
        None => PathwayCatalog::default(),
    };
    let mut out = OutputDir::create(&args.out_dir)?;
    let summary = if let Some(path) = &args.records {
        let ontology = ontology.ok_or_else(|| CliError::usage("rendering needs --ontology"))?;
        let records = read_records(path)?;
        let mut lines = Vec::with_capacity(records.len());
        let mut warnings = 0;
        for r in &records {
            let rendered = render_description(r, &ontology, &catalog)?;
            warnings += rendered.warnings.len();
            lines.push(DescriptionLine {
                cell_id: r.cell_id.clone(),
                text: rendered.text,
            });
        }
        let mut w = out.writer("descriptions.jsonl")?;
        write_description_lines(&lines, &mut w)?;
        w.flush()?;
        json!({ "rendered": lines.len(), "warnings": warnings })
    } else {
        let path = args.descriptions.as_ref().expect("clap requires one input");
        let mut parser = DescriptionParser::new().with_catalog(&catalog);
        if let Some(o) = &ontology {
            parser = parser.with_ontology(o);
        }
        let lines = read_description_lines(path)?;
        let mut w = out.writer("labels.jsonl")?;
        let mut incomplete = 0;
        for line in &lines {
            let labels = parser.parse(&line.text);
            if !labels.diagnostics.is_empty() {
                incomplete += 1;
            }
            let record = LabelLine {
                cell_id: &line.cell_id,
                labels: &labels,
            };
            serde_json::to_writer(&mut w, &record).map_err(|e| CliError::validation(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        json!({ "parsed": lines.len(), "with_diagnostics": incomplete })
    };
    out.commit()?;
    print_json(&summary)
}
