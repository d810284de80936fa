//! Reader and writer for the `[Term]` subset of the OBO flat-file format.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Ontology, OntologyTerm};
use crate::error::{Error, Result};

pub fn read_obo(path: impl AsRef<Path>) -> Result<Ontology> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_obo(BufReader::new(file))
}

enum Stanza {
    Header,
    Term(TermBuilder),
    Skipped,
}

struct TermBuilder {
    line: usize,
    id: Option<String>,
    term: OntologyTerm,
}

impl TermBuilder {
    fn new(line: usize) -> Self {
        Self {
            line,
            id: None,
            term: OntologyTerm::new("", ""),
        }
    }

    fn apply(&mut self, line: usize, tag: &str, value: &str) -> Result<()> {
        match tag {
            "id" => {
                if self.id.is_some() {
                    return Err(Error::parse(line, "second `id` tag in stanza"));
                }
                let id = strip_comment(value);
                if id.is_empty() {
                    return Err(Error::parse(line, "empty `id`"));
                }
                self.id = Some(id.to_string());
            }
            "name" => self.term.name = value.to_string(),
            "def" => self.term.definition = Some(quoted(line, value)?),
            "synonym" => self.term.synonyms.push(quoted(line, value)?),
            "is_a" => {
                let target = strip_comment(value);
                if target.is_empty() {
                    return Err(Error::parse(line, "empty `is_a` target"));
                }
                self.term.is_a_parents.push(target.to_string());
            }
            "is_obsolete" => self.term.obsolete = value.trim() == "true",
            _ => {}
        }
        Ok(())
    }

    fn finish(self) -> Result<(usize, OntologyTerm)> {
        let Some(id) = self.id else {
            return Err(Error::parse(self.line, "[Term] stanza without `id`"));
        };
        let mut term = self.term;
        term.id = id;
        Ok((self.line, term))
    }
}

/// Drops a trailing `! comment` and `{qualifier}` block from an identifier value.
fn strip_comment(value: &str) -> &str {
    let value = value.split('!').next().unwrap_or("");
    let value = match value.find('{') {
        Some(pos) => &value[..pos],
        None => value,
    };
    value.trim()
}

/// Extracts the leading quoted string of a `def:` or `synonym:` value.
fn quoted(line: usize, value: &str) -> Result<String> {
    let mut chars = value.trim_start().chars();
    if chars.next() != Some('"') {
        return Err(Error::parse(line, "expected a quoted string"));
    }
    let mut out = String::new();
    while let Some(c) = chars.next() {
        match c {
            '"' => return Ok(out),
            '\\' => match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => break,
            },
            other => out.push(other),
        }
    }
    Err(Error::parse(line, "unterminated quoted string"))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

/// Parses OBO 1.2/1.4 text, keeping only `[Term]` stanzas.
pub fn parse_obo(reader: impl BufRead) -> Result<Ontology> {
    let mut ontology = Ontology::default();
    let mut stanza = Stanza::Header;

    let close = |stanza: Stanza, ontology: &mut Ontology| -> Result<()> {
        if let Stanza::Term(builder) = stanza {
            let (line, term) = builder.finish()?;
            if ontology.get(&term.id).is_some() {
                return Err(Error::parse(line, format!("duplicate term id `{}`", term.id)));
            }
            ontology.insert(term)?;
        }
        Ok(())
    };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::parse(lineno, format!("malformed stanza header `{line}`")));
            }
            let previous = std::mem::replace(&mut stanza, Stanza::Skipped);
            close(previous, &mut ontology)?;
            if line == "[Term]" {
                stanza = Stanza::Term(TermBuilder::new(lineno));
            }
            continue;
        }
        let Some((tag, value)) = line.split_once(':') else {
            return Err(Error::parse(lineno, format!("expected `tag: value`, got `{line}`")));
        };
        if let Stanza::Term(builder) = &mut stanza {
            builder.apply(lineno, tag.trim(), value.trim())?;
        }
    }
    close(stanza, &mut ontology)?;
    Ok(ontology)
}

/// Serializes the term table back to OBO 1.2.
pub fn write_obo(ontology: &Ontology, mut out: impl Write) -> Result<()> {
    writeln!(out, "format-version: 1.2")?;
    for term in ontology.terms() {
        writeln!(out, "\n[Term]\nid: {}", term.id)?;
        if !term.name.is_empty() {
            writeln!(out, "name: {}", term.name)?;
        }
        if let Some(def) = &term.definition {
            writeln!(out, "def: \"{}\" []", escape(def))?;
        }
        for synonym in &term.synonyms {
            writeln!(out, "synonym: \"{}\" EXACT []", escape(synonym))?;
        }
        for parent in &term.is_a_parents {
            match ontology.get(parent).filter(|p| !p.name.is_empty()) {
                Some(p) => writeln!(out, "is_a: {parent} ! {}", p.name)?,
                None => writeln!(out, "is_a: {parent}")?,
            }
        }
        if term.obsolete {
            writeln!(out, "is_obsolete: true")?;
        }
    }
    Ok(())
}
