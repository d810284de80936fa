#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.stdout)
            .unwrap_or_else(|e| panic!("stdout is not JSON ({e}):\n{}\nstderr:\n{}", self.stdout, self.stderr))
    }
}

pub fn celldesc<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_celldesc"))
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Small ontology: a root with two branches, one of them two levels deep.
pub const OBO: &str = "format-version: 1.2

[Term]
id: T:0
name: cell
def: \"A material entity of anatomical origin.\" []

[Term]
id: T:1
name: T cell
def: \"A lymphocyte with a T cell receptor, found in blood.\" []
synonym: \"T-lymphocyte\" EXACT []
is_a: T:0

[Term]
id: T:2
name: B cell
def: \"A lymphocyte that makes antibodies.\" []
is_a: T:0

[Term]
id: T:3
name: CD4-positive T cell
def: \"A T cell expressing CD4.\" []
is_a: T:1

[Term]
id: T:4
name: neuron
def: \"The basic cellular unit of nervous tissue.\" []
is_a: T:0
";

/// Three-term chain A - B - C.
pub const CHAIN_OBO: &str = "[Term]\nid: C:0\nname: a\n\n[Term]\nid: C:1\nname: b\nis_a: C:0\n\n[Term]\nid: C:2\nname: c\nis_a: C:1\n";

pub const COHORT_HEADER: &str =
    "cell_id\tcell_type_id\tcell_type_name\ttissue\tdisease\tsex\tdevelopment_stage\tdonor_id\tassay\tpathways\n";

const TYPES: [(&str, &str); 4] = [
    ("T:1", "T cell"),
    ("T:2", "B cell"),
    ("T:3", "CD4-positive T cell"),
    ("T:4", "neuron"),
];
const TISSUES: [&str; 3] = ["blood", "lung", "brain"];
const DISEASES: [&str; 2] = ["normal", "influenza"];
const SEXES: [&str; 3] = ["male", "female", "unknown"];

/// `n` cells over ten donors; the last `excluded` cells use a full-length assay.
pub fn cohort_tsv(n: usize, excluded: usize) -> String {
    let mut out = String::from(COHORT_HEADER);
    for i in 0..n {
        let (id, name) = TYPES[i % TYPES.len()];
        let assay = if i + excluded >= n { "Smart-seq2" } else { "10x 3' v3" };
        out.push_str(&format!(
            "c{i:03}\t{id}\t{name}\t{}\t{}\t{}\t{}-year-old stage\td{}\t{assay}\t\n",
            TISSUES[i % TISSUES.len()],
            DISEASES[(i / 3) % DISEASES.len()],
            SEXES[i % SEXES.len()],
            20 + i % 5,
            i % 10,
        ));
    }
    out
}

pub const N_GENES: usize = 40;

/// Dense expression CSV with a deterministic pattern; the cell type drives
/// which block of genes is high.
pub fn expression_csv(n: usize) -> String {
    let mut out = String::from("cell_id");
    for g in 0..N_GENES {
        out.push_str(&format!(",G{g:02}"));
    }
    out.push('\n');
    for i in 0..n {
        out.push_str(&format!("c{i:03}"));
        let block = i % TYPES.len();
        for g in 0..N_GENES {
            let base = ((i * 31 + g * 17) % 13) as f64 / 4.0;
            let boost = if g / 10 == block { 6.0 + ((i + g) % 5) as f64 } else { 0.0 };
            out.push_str(&format!(",{}", base + boost));
        }
        out.push('\n');
    }
    out
}

/// One gene set per block of ten genes.
pub fn gmt() -> String {
    let mut out = String::new();
    for (k, name) in ["INTERFERON", "GLYCOLYSIS", "APOPTOSIS", "HYPOXIA"].iter().enumerate() {
        let genes: Vec<String> = (k * 10..k * 10 + 10).map(|g| format!("G{g:02}")).collect();
        out.push_str(&format!("HALLMARK_{name}\thttp://example.org/{name}\t{}\n", genes.join("\t")));
    }
    out
}

pub const CATALOG: &str = "pathway_id\tdisplay_name\tdefinition
HALLMARK_INTERFERON\tinterferon response\tgenes up-regulated in response to interferon signaling
HALLMARK_GLYCOLYSIS\tglycolysis\tgenes encoding proteins involved in glycolysis and gluconeogenesis
HALLMARK_APOPTOSIS\tapoptosis\tgenes mediating programmed cell death by activation of caspases
HALLMARK_HYPOXIA\thypoxia\tgenes up-regulated in response to low oxygen levels
";

/// Writes the pipeline inputs for `n` cells and returns the argument list
/// (without `--out-dir`).
pub fn pipeline_inputs(dir: &Path, n: usize, gmt_text: &str) -> Vec<String> {
    let paths = [
        write(dir, "cohort.tsv", &cohort_tsv(n, 0)),
        write(dir, "expr.csv", &expression_csv(n)),
        write(dir, "sets.gmt", gmt_text),
        write(dir, "onto.obo", OBO),
        write(dir, "catalog.tsv", CATALOG),
    ];
    let p = |i: usize| paths[i].display().to_string();
    vec![
        "pipeline".into(),
        "--cohort".into(),
        p(0),
        "--dense".into(),
        p(1),
        "--gmt".into(),
        p(2),
        "--ontology".into(),
        p(3),
        "--catalog".into(),
        p(4),
        "--seed".into(),
        "7".into(),
        "--n-hvg".into(),
        "30".into(),
        "--top-fraction".into(),
        "0.25".into(),
    ]
}
