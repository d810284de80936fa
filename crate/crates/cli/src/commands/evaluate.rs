use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use celldesc::description::{
    canonicalize_label, json_line_error, read_description_lines, DescriptionParser, ExtractedLabels,
    PathwayCatalog,
};
use celldesc::generation_metrics::{corpus_embedding_score, generation_report, BleuPooling};
use celldesc::label_metrics::{
    classification_report, multilabel_report, pagerank_similarity_score, read_label_pairs,
    read_label_set_pairs, AbsentPolicy, LabelPair, LabelSetPair,
};
use celldesc::ontology::{read_obo, Ontology};
use celldesc::similarity::SimilarityMatrix;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::output::{print_json, OutputDir};

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Exact match, BLEU, ROUGE and embedding scores of description texts.
    Generation,
    /// Accuracy and weighted F1 of single labels.
    Classify,
    /// Subset accuracy, Jaccard and weighted F1 of pathway sets.
    Pathways,
    /// Average PageRank similarity of cell-type predictions.
    Ps,
    /// Every task above on one pair of description files.
    All,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Sentence,
    Corpus,
}

/// Score predictions against references.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Label pairs TSV: `cell_id\tpredicted\treference` (`;`-separated sets for pathways).
    #[arg(long, conflicts_with_all = ["predictions", "references"])]
    pub pairs: Option<PathBuf>,
    /// Generated descriptions, JSON lines `{cell_id, text}`.
    #[arg(long, requires = "references")]
    pub predictions: Option<PathBuf>,
    /// Reference descriptions, JSON lines `{cell_id, text}`.
    #[arg(long, requires = "predictions")]
    pub references: Option<PathBuf>,
    /// Label field(s) to classify: cell_type, tissue, disease, sex, development_stage.
    #[arg(long = "field")]
    #[serde(default)]
    pub fields: Vec<String>,
    /// Also report scores after mapping predictions onto reference labels by
    /// case and ontology synonyms.
    #[arg(long)]
    #[serde(default)]
    pub canonicalize: bool,
    /// Also report scores with unparseable predictions left out.
    #[arg(long)]
    #[serde(default)]
    pub drop_unparsed: bool,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Pathway catalog TSV, used to map pathway sentences back to ids.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Similarity matrix written by `celldesc similarity`.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Token embeddings as NAME=PATH; JSON lines `{cell_id, pred_vectors, ref_vectors}`
    /// (token fields, if present, are ignored).
    #[arg(long = "embeddings", value_name = "NAME=PATH")]
    #[serde(default)]
    pub embeddings: Vec<String>,
    #[arg(long, value_enum, default_value = "sentence")]
    pub pooling: Pooling,
    #[arg(long, default_value_t = celldesc::generation_metrics::DEFAULT_ROUGE_L_BETA)]
    pub rouge_beta: f64,
    /// Also write the report to `<out-dir>/evaluation.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

const DEFAULT_FIELDS: [&str; 3] = ["cell_type", "tissue", "disease"];
const KNOWN_FIELDS: [&str; 5] = ["cell_type", "tissue", "disease", "sex", "development_stage"];

/// Reference descriptions with the matching predictions (if any).
struct Corpus {
    cell_ids: Vec<String>,
    references: Vec<String>,
    predictions: Vec<Option<String>>,
}

fn load_corpus(pred_path: &Path, ref_path: &Path) -> CliResult<Corpus> {
    let refs = read_description_lines(ref_path)?;
    let preds = read_description_lines(pred_path)?;
    let mut by_id: HashMap<String, String> = HashMap::new();
    for p in preds {
        if by_id.insert(p.cell_id.clone(), p.text).is_some() {
            return Err(CliError::validation(format!("{}: duplicate cell_id {}", pred_path.display(), p.cell_id)));
        }
    }
    let mut seen = HashSet::new();
    let mut corpus = Corpus {
        cell_ids: Vec::new(),
        references: Vec::new(),
        predictions: Vec::new(),
    };
    for r in refs {
        if !seen.insert(r.cell_id.clone()) {
            return Err(CliError::validation(format!("{}: duplicate cell_id {}", ref_path.display(), r.cell_id)));
        }
        corpus.predictions.push(by_id.remove(&r.cell_id));
        corpus.cell_ids.push(r.cell_id);
        corpus.references.push(r.text);
    }
    if corpus.cell_ids.is_empty() {
        return Err(CliError::validation(format!("{}: no references", ref_path.display())));
    }
    let missing = corpus.predictions.iter().filter(|p| p.is_none()).count();
    if missing > 0 {
        log::warn!("{missing} references have no prediction; they score as empty text");
    }
    if !by_id.is_empty() {
        log::warn!("{} predictions have no reference and are ignored", by_id.len());
    }
    Ok(corpus)
}

struct Parsed {
    references: Vec<ExtractedLabels>,
    predictions: Vec<Option<ExtractedLabels>>,
}

fn parse_corpus(corpus: &Corpus, parser: &DescriptionParser) -> Parsed {
    Parsed {
        references: corpus.references.iter().map(|t| parser.parse(t)).collect(),
        predictions: corpus
            .predictions
            .iter()
            .map(|p| p.as_deref().map(|t| parser.parse(t)))
            .collect(),
    }
}

fn field_pairs(corpus: &Corpus, parsed: &Parsed, field: &str) -> CliResult<Vec<LabelPair>> {
    (0..corpus.cell_ids.len())
        .map(|i| {
            let reference = parsed.references[i].field(field).ok_or_else(|| {
                CliError::validation(format!(
                    "cell {}: reference description has no {field}",
                    corpus.cell_ids[i]
                ))
            })?;
            Ok(LabelPair {
                cell_id: corpus.cell_ids[i].clone(),
                predicted: parsed.predictions[i]
                    .as_ref()
                    .and_then(|l| l.field(field))
                    .map(String::from),
                reference: reference.to_string(),
            })
        })
        .collect()
}

fn pct(x: f64) -> f64 {
    x * 100.0
}

fn classification_block(pairs: &[LabelPair], args: &EvaluateArgs, ontology: Option<&Ontology>) -> CliResult<Value> {
    let report = classification_report(pairs, AbsentPolicy::CountAsWrong)?;
    let mut block = json!({
        "Acc": pct(report.accuracy),
        "F1": pct(report.weighted_f1),
        "total": report.total,
        "unparsed": report.absent,
        "per_class": report.per_class,
    });
    if args.drop_unparsed {
        block["excluding_unparsed"] = match classification_report(pairs, AbsentPolicy::Drop) {
            Ok(r) => json!({ "Acc": pct(r.accuracy), "F1": pct(r.weighted_f1), "total": r.total }),
            Err(e) => json!({ "error": e.to_string() }),
        };
    }
    if args.canonicalize {
        let vocabulary: Vec<String> = pairs
            .iter()
            .map(|p| p.reference.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut remapped = 0;
        let canonical: Vec<LabelPair> = pairs
            .iter()
            .map(|p| {
                let predicted = p.predicted.as_ref().map(|raw| {
                    match canonicalize_label(raw, &vocabulary, ontology) {
                        Some(label) => {
                            if &label != raw {
                                remapped += 1;
                            }
                            label
                        }
                        None => raw.clone(),
                    }
                });
                LabelPair { predicted, ..p.clone() }
            })
            .collect();
        let r = classification_report(&canonical, AbsentPolicy::CountAsWrong)?;
        block["canonicalized"] = json!({
            "Acc": pct(r.accuracy),
            "F1": pct(r.weighted_f1),
            "remapped": remapped,
        });
    }
    Ok(block)
}

fn ps_block(pairs: &[LabelPair], matrix: &SimilarityMatrix, ontology: &Ontology) -> CliResult<Value> {
    let ps = pagerank_similarity_score(pairs, matrix, ontology)?;
    let acc = classification_report(pairs, AbsentPolicy::CountAsWrong)?.accuracy;
    Ok(json!({
        "PS": pct(ps.mean),
        "PS_resolved": ps.mean_resolved.map(pct),
        "Acc": pct(acc),
        "unresolved": ps.unresolved,
        "total": ps.total,
    }))
}

fn pathway_block(pairs: &[LabelSetPair]) -> CliResult<Value> {
    let r = multilabel_report(pairs)?;
    Ok(json!({
        "Acc": pct(r.subset_accuracy),
        "Jac": pct(r.jaccard),
        "F1": pct(r.weighted_f1),
        "total": r.total,
    }))
}

fn corpus_set_pairs(corpus: &Corpus, parsed: &Parsed) -> Vec<LabelSetPair> {
    (0..corpus.cell_ids.len())
        .map(|i| LabelSetPair {
            cell_id: corpus.cell_ids[i].clone(),
            predicted: parsed.predictions[i]
                .as_ref()
                .map(|l| l.pathway_labels().into_iter().collect())
                .unwrap_or_default(),
            reference: parsed.references[i].pathway_labels().into_iter().collect(),
        })
        .collect()
}

#[derive(Deserialize)]
struct EmbeddingLine {
    cell_id: String,
    pred_vectors: Vec<Vec<f64>>,
    ref_vectors: Vec<Vec<f64>>,
}

/// Per cell, prediction and reference token vectors.
type Embeddings = HashMap<String, (Vec<Vec<f64>>, Vec<Vec<f64>>)>;

fn read_embeddings(path: &Path) -> CliResult<Embeddings> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: EmbeddingLine = serde_json::from_str(&line).map_err(|e| {
            let err: CliError = json_line_error(i + 1, e).into();
            CliError {
                message: format!("{}: {}", path.display(), err.message),
                ..err
            }
        })?;
        out.insert(entry.cell_id, (entry.pred_vectors, entry.ref_vectors));
    }
    Ok(out)
}

fn generation_block(corpus: &Corpus, args: &EvaluateArgs) -> CliResult<Value> {
    let pairs: Vec<(String, String)> = corpus
        .predictions
        .iter()
        .zip(&corpus.references)
        .map(|(p, r)| (p.clone().unwrap_or_default(), r.clone()))
        .collect();
    let pooling = match args.pooling {
        Pooling::Sentence => BleuPooling::Sentence,
        Pooling::Corpus => BleuPooling::Corpus,
    };
    let mut report = generation_report(&pairs, pooling, args.rouge_beta)?;
    for raw in &args.embeddings {
        let (name, path) = raw
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--embeddings expects NAME=PATH, got `{raw}`")))?;
        let vectors = read_embeddings(Path::new(path))?;
        let mut aligned = Vec::with_capacity(corpus.cell_ids.len());
        for id in &corpus.cell_ids {
            let (p, r) = vectors
                .get(id)
                .ok_or_else(|| CliError::validation(format!("{path}: no embeddings for cell {id}")))?;
            aligned.push((p.as_slice(), r.as_slice()));
        }
        let score = corpus_embedding_score(aligned).map_err(|e| CliError::validation(format!("{name}: {e}")))?;
        report.embedding.insert(name.to_string(), score);
    }
    let mut block: Map<String, Value> = report
        .table()
        .into_iter()
        .map(|(k, v)| (k, json!(v)))
        .collect();
    block.insert("pairs".into(), json!(report.pairs));
    Ok(Value::Object(block))
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str, task: &str) -> CliResult<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| CliError::usage(format!("--task {task} needs {flag}")))
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    for f in &args.fields {
        if !KNOWN_FIELDS.contains(&f.as_str()) {
            return Err(CliError::usage(format!("unknown field `{f}`; expected one of {KNOWN_FIELDS:?}")));
        }
    }
    let ontology = args.ontology.as_ref().map(read_obo).transpose()?;
    let catalog = args.catalog.as_ref().map(PathwayCatalog::read_tsv).transpose()?;
    let mut parser = DescriptionParser::new();
    if let Some(o) = &ontology {
        parser = parser.with_ontology(o);
    }
    if let Some(c) = &catalog {
        parser = parser.with_catalog(c);
    }
    let corpus = match (&args.predictions, &args.references) {
        (Some(p), Some(r)) => Some(load_corpus(p, r)?),
        _ => None,
    };
    let parsed = corpus.as_ref().map(|c| parse_corpus(c, &parser));
    let fields: Vec<String> = if args.fields.is_empty() {
        DEFAULT_FIELDS.iter().map(|s| s.to_string()).collect()
    } else {
        args.fields.clone()
    };

    let mut report = Map::new();
    report.insert("task".into(), json!(args.task));
    let needs_corpus = |task: &str| CliError::usage(format!("--task {task} needs --predictions and --references"));

    if matches!(args.task, Task::Generation | Task::All) {
        let corpus = corpus.as_ref().ok_or_else(|| needs_corpus("generation"))?;
        report.insert("generation".into(), generation_block(corpus, &args)?);
    }
    if matches!(args.task, Task::Classify | Task::All) {
        let mut blocks = BTreeMap::new();
        match (&args.pairs, &corpus, &parsed) {
            (Some(path), _, _) if args.task == Task::Classify => {
                let name = fields.first().filter(|_| !args.fields.is_empty()).cloned().unwrap_or_else(|| "label".into());
                blocks.insert(name, classification_block(&read_label_pairs(path)?, &args, ontology.as_ref())?);
            }
            (_, Some(corpus), Some(parsed)) => {
                for field in &fields {
                    let pairs = field_pairs(corpus, parsed, field)?;
                    blocks.insert(field.clone(), classification_block(&pairs, &args, ontology.as_ref())?);
                }
            }
            _ => return Err(CliError::usage("--task classify needs --pairs or --predictions/--references")),
        }
        report.insert("classification".into(), json!(blocks));
    }
    if matches!(args.task, Task::Pathways | Task::All) {
        let pairs = match (&args.pairs, &corpus, &parsed) {
            (Some(path), _, _) if args.task == Task::Pathways => read_label_set_pairs(path)?,
            (_, Some(corpus), Some(parsed)) => corpus_set_pairs(corpus, parsed),
            _ => return Err(CliError::usage("--task pathways needs --pairs or --predictions/--references")),
        };
        report.insert("pathways".into(), pathway_block(&pairs)?);
    }
    if matches!(args.task, Task::Ps | Task::All) {
        let matrix_path = require(&args.matrix, "--matrix", "ps")?;
        let ontology = ontology
            .as_ref()
            .ok_or_else(|| CliError::usage("--task ps needs --ontology"))?;
        let matrix = SimilarityMatrix::load(matrix_path)?;
        let pairs = match (&args.pairs, &corpus, &parsed) {
            (Some(path), _, _) if args.task == Task::Ps => read_label_pairs(path)?,
            (_, Some(corpus), Some(parsed)) => field_pairs(corpus, parsed, "cell_type")?,
            _ => return Err(CliError::usage("--task ps needs --pairs or --predictions/--references")),
        };
        report.insert("pagerank_similarity".into(), ps_block(&pairs, &matrix, ontology)?);
    }

    let report = Value::Object(report);
    if let Some(dir) = &args.out_dir {
        let mut out = OutputDir::create(dir)?;
        out.write_json("evaluation.json", &report)?;
        out.commit()?;
    }
    print_json(&report)
}
