//! Rendering cell records into the fixed description template and parsing
//! descriptions (reference or generated) back into labels.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            "unknown" | "" => Ok(Sex::Unknown),
            other => Err(Error::invalid(format!("unrecognised sex `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: String,
    pub cell_type_id: String,
    pub cell_type_name: String,
    pub tissue: String,
    pub disease: String,
    pub sex: Sex,
    pub development_stage: String,
    pub donor_id: String,
    pub assay: String,
    /// At most two pathway ids, most enriched first.
    pub pathways: Vec<String>,
}

impl CellRecord {
    pub fn validate(&self) -> Result<()> {
        if self.pathways.len() > 2 {
            return Err(Error::invalid(format!(
                "cell {}: at most two pathways, got {}",
                self.cell_id,
                self.pathways.len()
            )));
        }
        if self.pathways.len() == 2 && self.pathways[0] == self.pathways[1] {
            return Err(Error::invalid(format!(
                "cell {}: duplicate pathway {}",
                self.cell_id, self.pathways[0]
            )));
        }
        for (field, value) in [
            ("cell_type_name", &self.cell_type_name),
            ("tissue", &self.tissue),
            ("disease", &self.disease),
            ("development_stage", &self.development_stage),
        ] {
            if value.trim().is_empty() {
                return Err(Error::invalid(format!("cell {}: empty {field}", self.cell_id)));
            }
            if value.contains('\n') {
                return Err(Error::invalid(format!("cell {}: newline in {field}", self.cell_id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayEntry {
    pub id: String,
    pub display_name: String,
    pub definition: String,
}

/// Pathway id to display name and human-readable definition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathwayCatalog {
    entries: BTreeMap<String, PathwayEntry>,
}

const CATALOG_HEADER: [&str; 3] = ["pathway_id", "display_name", "definition"];

impl PathwayCatalog {
    pub fn from_entries(entries: impl IntoIterator<Item = PathwayEntry>) -> Result<Self> {
        let mut catalog = PathwayCatalog::default();
        for (i, entry) in entries.into_iter().enumerate() {
            catalog.insert(entry, i + 1)?;
        }
        Ok(catalog)
    }

    fn insert(&mut self, entry: PathwayEntry, line: usize) -> Result<()> {
        if entry.id.is_empty() {
            return Err(Error::schema(line, "empty pathway id"));
        }
        if entry.definition.trim().is_empty() {
            return Err(Error::schema(line, format!("pathway {} has an empty definition", entry.id)));
        }
        if self.entries.contains_key(&entry.id) {
            return Err(Error::schema(line, format!("duplicate pathway id {}", entry.id)));
        }
        self.entries.insert(entry.id.clone(), entry);
        Ok(())
    }

    /// Reads `pathway_id\tdisplay_name\tdefinition` rows; the header row is optional.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut catalog = PathwayCatalog::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if lineno == 1 && fields == CATALOG_HEADER {
                continue;
            }
            if fields.len() != 3 {
                return Err(Error::schema(
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            catalog.insert(
                PathwayEntry {
                    id: fields[0].trim().to_string(),
                    display_name: fields[1].trim().to_string(),
                    definition: fields[2].trim().to_string(),
                },
                lineno,
            )?;
        }
        Ok(catalog)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(std::io::BufReader::new(file))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", CATALOG_HEADER.join("\t"))?;
        for e in self.entries.values() {
            writeln!(out, "{}\t{}\t{}", e.id, e.display_name, e.definition)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&PathwayEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &PathwayEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn sentence_body(text: &str) -> &str {
    text.trim().trim_end_matches('.').trim_end()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub warnings: Vec<String>,
}

/// Renders the fixed template. The cell-type definition comes from the
/// ontology; without one the first sentence carries the name only.
pub fn render_description(
    record: &CellRecord,
    ontology: &Ontology,
    catalog: &PathwayCatalog,
) -> Result<Rendered> {
    record.validate()?;
    let mut warnings = Vec::new();
    let definition = match ontology.get(&record.cell_type_id) {
        Some(term) => term.definition.as_deref().map(sentence_body).filter(|d| !d.is_empty()),
        None => {
            warnings.push(format!(
                "cell {}: cell type {} not in ontology, rendering name only",
                record.cell_id, record.cell_type_id
            ));
            None
        }
    };
    if definition.is_none() && ontology.get(&record.cell_type_id).is_some() {
        warnings.push(format!(
            "cell {}: cell type {} has no definition, rendering name only",
            record.cell_id, record.cell_type_id
        ));
    }
    let mut pathway_defs = Vec::with_capacity(record.pathways.len());
    for id in &record.pathways {
        let entry = catalog
            .get(id)
            .ok_or_else(|| Error::invalid(format!("cell {}: unknown pathway id {id}", record.cell_id)))?;
        pathway_defs.push(sentence_body(&entry.definition));
    }

    let mut text = format!("This sample consists of a {}", record.cell_type_name.trim());
    if let Some(def) = definition {
        text.push_str(", ");
        text.push_str(def);
    }
    text.push_str(&format!(
        ". It originates from the {} of a {} {} during {}.",
        record.tissue.trim(),
        record.disease.trim(),
        record.sex,
        record.development_stage.trim()
    ));
    if let Some(first) = pathway_defs.first() {
        text.push_str(&format!(" This cell is associated with {first}."));
    }
    if let Some(second) = pathway_defs.get(1) {
        text.push_str(&format!(" Additionally, it involves {second}."));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Rendered { text, warnings })
}

/// Template cues the parser looks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cue {
    CellType,
    Origin,
    PrimaryPathway,
    SecondaryPathway,
}

impl fmt::Display for Cue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cue::CellType => "consists of a",
            Cue::Origin => "originates from the ... of a ... during",
            Cue::PrimaryPathway => "associated with",
            Cue::SecondaryPathway => "Additionally, it involves",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractedPathway {
    pub definition: String,
    /// Catalog id when the definition was recognised.
    pub id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractedLabels {
    pub cell_type: Option<String>,
    pub tissue: Option<String>,
    pub disease: Option<String>,
    pub sex: Option<String>,
    pub development_stage: Option<String>,
    pub pathways: Vec<ExtractedPathway>,
    /// Cues that could not be matched.
    pub diagnostics: Vec<Cue>,
}

impl ExtractedLabels {
    /// Label for a named field (`cell_type`, `tissue`, `disease`, `sex`,
    /// `development_stage`).
    pub fn field(&self, name: &str) -> Option<&str> {
        match name {
            "cell_type" => self.cell_type.as_deref(),
            "tissue" => self.tissue.as_deref(),
            "disease" => self.disease.as_deref(),
            "sex" => self.sex.as_deref(),
            "development_stage" => self.development_stage.as_deref(),
            _ => None,
        }
    }

    /// Pathway ids when resolved, definitions otherwise.
    pub fn pathway_labels(&self) -> Vec<String> {
        self.pathways
            .iter()
            .map(|p| p.id.clone().unwrap_or_else(|| p.definition.clone()))
            .collect()
    }
}

static CELL_TYPE_CUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)consists of an? ").unwrap());
static ORIGIN_CUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^originates from the ([^\n]+) of an? ([^\n]+?) (male|female|unknown) during ([^\n]+?)\.(?:\s|$)",
    )
    .unwrap()
});
static ORIGIN_START: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)originates from the ").unwrap());
static PRIMARY_CUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)associated with ").unwrap());
static SECONDARY_CUE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)Additionally, it involves ").unwrap());
static SENTENCE_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\.(?:\s+[A-Z]|\s*$)").unwrap());

/// Pattern-based extractor. Known cell-type names and a pathway catalog make
/// captures exact where free-text delimiters would be ambiguous (names with
/// commas, definitions with internal periods).
#[derive(Debug, Clone, Default)]
pub struct DescriptionParser {
    cell_types: Vec<String>,
    definitions: Vec<(String, String)>,
}

impl DescriptionParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_cell_types<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        let mut names: Vec<String> = names.into_iter().map(Into::into).filter(|n| !n.is_empty()).collect();
        names.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        names.dedup();
        self.cell_types = names;
        self
    }

    /// Uses every live term name of the ontology as the cell-type vocabulary.
    pub fn with_ontology(self, ontology: &Ontology) -> Self {
        self.with_cell_types(
            ontology
                .terms()
                .iter()
                .filter(|t| !t.obsolete)
                .map(|t| t.name.clone()),
        )
    }

    pub fn with_catalog(mut self, catalog: &PathwayCatalog) -> Self {
        let mut defs: Vec<(String, String)> = catalog
            .entries()
            .map(|e| (sentence_body(&e.definition).to_string(), e.id.clone()))
            .collect();
        defs.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        self.definitions = defs;
        self
    }

    /// Never fails; unmatched cues are listed in `diagnostics`.
    pub fn parse(&self, text: &str) -> ExtractedLabels {
        let mut labels = ExtractedLabels::default();

        if let Some(m) = CELL_TYPE_CUE.find(text) {
            labels.cell_type = self.capture_cell_type(&text[m.end()..]);
        }
        if labels.cell_type.is_none() {
            labels.diagnostics.push(Cue::CellType);
        }

        // The cell-type definition may itself mention an origin, so the last
        // origin sentence wins.
        let mut pathway_start = 0;
        let origin = ORIGIN_START
            .find_iter(text)
            .map(|m| m.start())
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .find_map(|start| ORIGIN_CUE.captures(&text[start..]).map(|caps| (start, caps)));
        match origin {
            Some((start, caps)) => {
                let field = |i: usize| Some(caps[i].trim().to_string()).filter(|s| !s.is_empty());
                labels.tissue = field(1);
                labels.disease = field(2);
                labels.sex = Some(caps[3].to_ascii_lowercase());
                labels.development_stage = field(4);
                pathway_start = start + caps.get(0).map_or(0, |m| m.end());
            }
            None => labels.diagnostics.push(Cue::Origin),
        }

        let tail = &text[pathway_start..];
        for (cue, re) in [(Cue::PrimaryPathway, &*PRIMARY_CUE), (Cue::SecondaryPathway, &*SECONDARY_CUE)] {
            match re.find(tail).and_then(|m| self.capture_pathway(&tail[m.end()..])) {
                Some(p) => labels.pathways.push(p),
                None => labels.diagnostics.push(cue),
            }
        }
        labels
    }

    fn capture_cell_type(&self, rest: &str) -> Option<String> {
        let ends_field = |s: &str| s.is_empty() || s.starts_with(',') || s.starts_with('.');
        for name in &self.cell_types {
            if rest.len() >= name.len()
                && rest.is_char_boundary(name.len())
                && rest[..name.len()].eq_ignore_ascii_case(name)
                && ends_field(&rest[name.len()..])
            {
                return Some(name.clone());
            }
        }
        let end = rest.find([',', '.', '\n']).unwrap_or(rest.len());
        Some(rest[..end].trim().to_string()).filter(|s| !s.is_empty())
    }

    fn capture_pathway(&self, rest: &str) -> Option<ExtractedPathway> {
        for (definition, id) in &self.definitions {
            if rest.starts_with(definition.as_str()) {
                return Some(ExtractedPathway {
                    definition: definition.clone(),
                    id: Some(id.clone()),
                });
            }
        }
        let end = SENTENCE_END.find(rest).map_or(rest.len(), |m| m.start());
        let definition = rest[..end].trim();
        (!definition.is_empty()).then(|| ExtractedPathway {
            definition: definition.to_string(),
            id: None,
        })
    }
}

/// Parse with no vocabulary or catalog.
pub fn parse_description(text: &str) -> ExtractedLabels {
    DescriptionParser::new().parse(text)
}

/// Case-insensitive vocabulary match, then an ontology name or synonym match
/// mapped back onto the vocabulary. No fuzzy matching.
pub fn canonicalize_label(raw: &str, vocabulary: &[String], ontology: Option<&Ontology>) -> Option<String> {
    let key = raw.trim();
    if key.is_empty() {
        return None;
    }
    if let Some(hit) = vocabulary.iter().find(|v| v.trim().eq_ignore_ascii_case(key)) {
        return Some(hit.clone());
    }
    let ontology = ontology?;
    let term = ontology.match_name_or_synonym(key)?;
    vocabulary
        .iter()
        .find(|v| {
            v.trim().eq_ignore_ascii_case(&term.name)
                || ontology.match_name_or_synonym(v).is_some_and(|t| t.id == term.id)
        })
        .cloned()
}

#[derive(Debug, Deserialize, Serialize)]
struct RecordRow {
    cell_id: String,
    cell_type_id: String,
    cell_type_name: String,
    tissue: String,
    disease: String,
    sex: String,
    development_stage: String,
    donor_id: String,
    assay: String,
    #[serde(default)]
    pathways: String,
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}

/// Reads records from a headed CSV (`.csv`) or TSV file. `pathways` holds
/// up to two ids separated by `;`.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<CellRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(file, delimiter_for(path))
}

pub fn parse_records<R: std::io::Read>(reader: R, delimiter: u8) -> Result<Vec<CellRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.deserialize::<RecordRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::schema(line, e.to_string()))?;
        let record = CellRecord {
            sex: row.sex.parse().map_err(|e: Error| Error::schema(line, e.to_string()))?,
            pathways: row
                .pathways
                .split(';')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(String::from)
                .collect(),
            cell_id: row.cell_id,
            cell_type_id: row.cell_type_id,
            cell_type_name: row.cell_type_name,
            tissue: row.tissue,
            disease: row.disease,
            development_stage: row.development_stage,
            donor_id: row.donor_id,
            assay: row.assay,
        };
        record.validate().map_err(|e| Error::schema(line, e.to_string()))?;
        if !seen.insert(record.cell_id.clone()) {
            return Err(Error::schema(line, format!("duplicate cell_id {}", record.cell_id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_records<W: Write>(records: &[CellRecord], out: W, delimiter: u8) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    for r in records {
        wtr.serialize(RecordRow {
            cell_id: r.cell_id.clone(),
            cell_type_id: r.cell_type_id.clone(),
            cell_type_name: r.cell_type_name.clone(),
            tissue: r.tissue.clone(),
            disease: r.disease.clone(),
            sex: r.sex.to_string(),
            development_stage: r.development_stage.clone(),
            donor_id: r.donor_id.clone(),
            assay: r.assay.clone(),
            pathways: r.pathways.join(";"),
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionLine {
    pub cell_id: String,
    pub text: String,
}

/// Malformed JSON is a parse error; well-formed JSON of the wrong shape is
/// a schema error.
pub fn json_line_error(line: usize, err: serde_json::Error) -> Error {
    match err.classify() {
        serde_json::error::Category::Data => Error::schema(line, err.to_string()),
        _ => Error::parse(line, err.to_string()),
    }
}

pub fn parse_description_lines<R: BufRead>(reader: R) -> Result<Vec<DescriptionLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| json_line_error(i + 1, e))?);
    }
    Ok(out)
}

pub fn read_description_lines(path: impl AsRef<Path>) -> Result<Vec<DescriptionLine>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_description_lines(std::io::BufReader::new(file))
}

pub fn write_description_lines<W: Write>(lines: &[DescriptionLine], mut out: W) -> Result<()> {
    for line in lines {
        serde_json::to_writer(&mut out, line).map_err(|e| Error::invalid(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::OntologyTerm;

    const EXAMPLE: &str = "This sample consists of a ciliated columnar cell of tracheobronchial tree, multi-ciliated epithelial cell located in the trachea and bronchi, characterized by a columnar shape and motile cilia on its apical surface. These cilia facilitate mucociliary clearance by moving mucus and trapped particles toward the pharynx. It originates from the lung parenchyma of a normal male during elderly stage. This cell is associated with Genes mediating programmed cell death (apoptosis) by activation of caspases. Additionally, it involves Genes down-regulated in response to ultraviolet (UV) radiation.";

    fn fixture() -> (Ontology, PathwayCatalog, CellRecord) {
        let mut term = OntologyTerm::new("CL:0002145", "ciliated columnar cell of tracheobronchial tree");
        term.definition = Some("multi-ciliated epithelial cell located in the trachea and bronchi, characterized by a columnar shape and motile cilia on its apical surface. These cilia facilitate mucociliary clearance by moving mucus and trapped particles toward the pharynx.".into());
        let ontology = Ontology::from_terms(vec![term]).unwrap();
        let catalog = PathwayCatalog::from_entries([
            PathwayEntry {
                id: "HALLMARK_APOPTOSIS".into(),
                display_name: "Apoptosis".into(),
                definition: "Genes mediating programmed cell death (apoptosis) by activation of caspases.".into(),
            },
            PathwayEntry {
                id: "HALLMARK_UV_RESPONSE_DN".into(),
                display_name: "UV response down".into(),
                definition: "Genes down-regulated in response to ultraviolet (UV) radiation.".into(),
            },
        ])
        .unwrap();
        let record = CellRecord {
            cell_id: "c1".into(),
            cell_type_id: "CL:0002145".into(),
            cell_type_name: "ciliated columnar cell of tracheobronchial tree".into(),
            tissue: "lung parenchyma".into(),
            disease: "normal".into(),
            sex: Sex::Male,
            development_stage: "elderly stage".into(),
            donor_id: "d1".into(),
            assay: "10x 3' v3".into(),
            pathways: vec!["HALLMARK_APOPTOSIS".into(), "HALLMARK_UV_RESPONSE_DN".into()],
        };
        (ontology, catalog, record)
    }

    #[test]
    fn renders_the_worked_example_verbatim() {
        let (ontology, catalog, record) = fixture();
        let rendered = render_description(&record, &ontology, &catalog).unwrap();
        assert_eq!(rendered.text, EXAMPLE);
        assert!(rendered.text.contains("of a normal male during elderly stage"));
        assert!(rendered.warnings.is_empty());
    }

    #[test]
    fn parses_the_worked_example_without_vocabulary() {
        let labels = parse_description(EXAMPLE);
        assert_eq!(labels.cell_type.as_deref(), Some("ciliated columnar cell of tracheobronchial tree"));
        assert_eq!(labels.tissue.as_deref(), Some("lung parenchyma"));
        assert_eq!(labels.disease.as_deref(), Some("normal"));
        assert_eq!(labels.sex.as_deref(), Some("male"));
        assert_eq!(labels.development_stage.as_deref(), Some("elderly stage"));
        assert_eq!(labels.pathways.len(), 2);
        assert_eq!(
            labels.pathways[1].definition,
            "Genes down-regulated in response to ultraviolet (UV) radiation"
        );
        assert!(labels.diagnostics.is_empty());
    }

    #[test]
    fn catalog_resolves_pathway_ids() {
        let (_, catalog, _) = fixture();
        let labels = DescriptionParser::new().with_catalog(&catalog).parse(EXAMPLE);
        assert_eq!(labels.pathway_labels(), ["HALLMARK_APOPTOSIS", "HALLMARK_UV_RESPONSE_DN"]);
    }

    #[test]
    fn zero_pathways_end_after_origin() {
        let (ontology, catalog, mut record) = fixture();
        record.pathways.clear();
        let text = render_description(&record, &ontology, &catalog).unwrap().text;
        assert!(text.ends_with("during elderly stage."));
        let labels = parse_description(&text);
        assert!(labels.pathways.is_empty());
        assert_eq!(labels.diagnostics, [Cue::PrimaryPathway, Cue::SecondaryPathway]);
    }

    #[test]
    fn unknown_pathway_is_an_error() {
        let (ontology, catalog, mut record) = fixture();
        record.pathways = vec!["NOPE".into()];
        assert!(render_description(&record, &ontology, &catalog).is_err());
    }

    #[test]
    fn missing_cell_type_renders_name_only_with_warning() {
        let (ontology, catalog, mut record) = fixture();
        record.cell_type_id = "CL:9999999".into();
        let rendered = render_description(&record, &ontology, &catalog).unwrap();
        assert!(rendered.text.starts_with(
            "This sample consists of a ciliated columnar cell of tracheobronchial tree. It originates"
        ));
        assert_eq!(rendered.warnings.len(), 1);
    }

    #[test]
    fn no_cues_means_all_absent() {
        let labels = parse_description("hello world");
        assert_eq!(labels.cell_type, None);
        assert_eq!(labels.tissue, None);
        assert!(labels.pathways.is_empty());
        assert_eq!(
            labels.diagnostics,
            [Cue::CellType, Cue::Origin, Cue::PrimaryPathway, Cue::SecondaryPathway]
        );
    }

    #[test]
    fn tolerates_drift_and_reordered_pathways() {
        let text = "Honestly, this sample consists of an alveolar macrophage, a phagocyte. \
                    It originates from the lung of a COVID-19 female during adult stage. \
                    Additionally, it involves Genes B. This cell is associated with Genes A.";
        let labels = parse_description(text);
        assert_eq!(labels.cell_type.as_deref(), Some("alveolar macrophage"));
        assert_eq!(labels.disease.as_deref(), Some("COVID-19"));
        assert_eq!(labels.sex.as_deref(), Some("female"));
        let defs: Vec<_> = labels.pathways.iter().map(|p| p.definition.as_str()).collect();
        assert_eq!(defs, ["Genes A", "Genes B"]);
    }

    #[test]
    fn vocabulary_handles_names_with_commas() {
        let text = "This sample consists of a CD4-positive, alpha-beta T cell, a T cell. \
                    It originates from the blood of a normal male during adult stage.";
        let bare = parse_description(text);
        assert_eq!(bare.cell_type.as_deref(), Some("CD4-positive"));
        let parser = DescriptionParser::new().with_cell_types(["T cell", "CD4-positive, alpha-beta T cell"]);
        assert_eq!(parser.parse(text).cell_type.as_deref(), Some("CD4-positive, alpha-beta T cell"));
    }

    #[test]
    fn canonicalize_case_and_synonym() {
        let mut t = OntologyTerm::new("CL:0000084", "T cell");
        t.synonyms = vec!["T-lymphocyte".into()];
        let ontology = Ontology::from_terms(vec![t, OntologyTerm::new("CL:0000127", "astrocyte")]).unwrap();
        let vocab = vec!["T cell".to_string()];
        assert_eq!(canonicalize_label("t cell", &vocab, None).as_deref(), Some("T cell"));
        assert_eq!(canonicalize_label("T-lymphocyte", &vocab, None), None);
        assert_eq!(canonicalize_label("T-lymphocyte", &vocab, Some(&ontology)).as_deref(), Some("T cell"));
        assert_eq!(canonicalize_label("astrocyte", &vocab, Some(&ontology)), None);
        assert_eq!(canonicalize_label("T cels", &vocab, Some(&ontology)), None);
    }

    #[test]
    fn catalog_tsv_round_trip_and_validation() {
        let (_, catalog, _) = fixture();
        let mut buf = Vec::new();
        catalog.write_tsv(&mut buf).unwrap();
        assert_eq!(PathwayCatalog::parse_tsv(&buf[..]).unwrap(), catalog);
        let headerless = "A\tA name\tdef a\nB\tB name\tdef b\n";
        assert_eq!(PathwayCatalog::parse_tsv(headerless.as_bytes()).unwrap().len(), 2);
        let dup = "A\tx\td\nA\ty\te\n";
        assert!(matches!(PathwayCatalog::parse_tsv(dup.as_bytes()), Err(Error::Schema { line: 2, .. })));
        assert!(PathwayCatalog::parse_tsv("A\tx\t \n".as_bytes()).is_err());
    }

    #[test]
    fn records_round_trip_through_tsv_and_csv() {
        let (_, _, record) = fixture();
        let mut other = record.clone();
        other.cell_id = "c2".into();
        other.pathways = vec![];
        other.sex = Sex::Unknown;
        let records = vec![record, other];
        for delim in [b'\t', b','] {
            let mut buf = Vec::new();
            write_records(&records, &mut buf, delim).unwrap();
            assert_eq!(parse_records(&buf[..], delim).unwrap(), records);
        }
    }

    #[test]
    fn record_validation() {
        let (_, _, mut record) = fixture();
        record.pathways = vec!["A".into(), "A".into()];
        assert!(record.validate().is_err());
        record.pathways = vec!["A".into(), "B".into(), "C".into()];
        assert!(record.validate().is_err());
    }

    #[test]
    fn description_lines_round_trip() {
        let lines = vec![DescriptionLine { cell_id: "c1".into(), text: EXAMPLE.into() }];
        let mut buf = Vec::new();
        write_description_lines(&lines, &mut buf).unwrap();
        assert_eq!(parse_description_lines(&buf[..]).unwrap(), lines);
        assert!(matches!(parse_description_lines("{".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_description_lines("\n{\"cell_id\": \"c\"}".as_bytes()),
            Err(Error::Schema { line: 2, .. })
        ));
    }
}
