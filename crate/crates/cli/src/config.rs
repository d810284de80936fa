//! `--config` run files. Values in the file override command-line flags.
//!
//! Top-level keys apply to every subcommand that has a flag of that name;
//! a table named after the subcommand applies to it alone and wins over
//! top-level keys. Dashes and underscores in keys are interchangeable.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult, EXIT_PARSE};

fn load(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |msg: String| CliError {
        code: EXIT_PARSE,
        message: format!("{}: {msg}", path.display()),
    };
    let value: Value = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?,
        _ => {
            let table: toml::Table = toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            serde_json::to_value(table).map_err(|e| parse_err(e.to_string()))?
        }
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(parse_err("run file must be a table of settings".into())),
    }
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

/// Overlays the run file at `path` onto parsed flags `args`.
pub fn apply<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>, section: &str) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(args);
    };
    let file = load(path)?;
    let Value::Object(mut current) =
        serde_json::to_value(&args).map_err(|e| CliError::usage(e.to_string()))?
    else {
        return Err(CliError::usage("arguments do not form a table"));
    };

    for (key, value) in &file {
        let key = normalize(key);
        if current.contains_key(&key) {
            current.insert(key, value.clone());
        } else if !value.is_object() {
            log::warn!("{}: `{key}` is not a setting of `{section}`, ignored", path.display());
        }
    }
    let section_key = file.keys().find(|k| normalize(k) == normalize(section)).cloned();
    if let Some(Value::Object(table)) = section_key.and_then(|k| file.get(&k)) {
        for (key, value) in table {
            let key = normalize(key);
            if !current.contains_key(&key) {
                return Err(CliError::usage(format!(
                    "{}: unknown setting `{key}` for `{section}`",
                    path.display()
                )));
            }
            current.insert(key, value.clone());
        }
    }
    serde_json::from_value(Value::Object(current))
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
