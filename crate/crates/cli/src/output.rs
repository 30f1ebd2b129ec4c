//! CSV and JSON-lines emission with every float written as `{:.16e}`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

fn number(n: &serde_json::Number) -> String {
    if n.is_f64() {
        let x = n.as_f64().expect("checked f64");
        format!("{x:.16e}")
    } else {
        n.to_string()
    }
}

/// JSON with floats in fixed 17-significant-digit exponent form.
pub fn json_text(value: &Value) -> String {
    let mut out = String::new();
    write_json(value, &mut out);
    out
}

fn write_json(value: &Value, out: &mut String) {
    match value {
        Value::Number(n) => out.push_str(&number(n)),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_json(v, out);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn csv_cell(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::Number(n) => number(n),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => json_text(value),
    }
}

fn to_object<T: Serialize>(record: &T) -> Map<String, Value> {
    match serde_json::to_value(record).expect("records serialize to JSON") {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("value".into(), other);
            map
        }
    }
}

/// Renders records as CSV (header row, LF endings) or JSON lines.
pub fn render<T: Serialize>(records: &[T], format: Format) -> String {
    let objects: Vec<Map<String, Value>> = records.iter().map(to_object).collect();
    let mut out = String::new();
    match format {
        Format::Json => {
            for object in &objects {
                out.push_str(&json_text(&Value::Object(object.clone())));
                out.push('\n');
            }
        }
        Format::Csv => {
            let Some(first) = objects.first() else {
                return out;
            };
            let header: Vec<&String> = first.keys().collect();
            let _ = writeln!(
                out,
                "{}",
                header
                    .iter()
                    .map(|k| k.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            for object in &objects {
                let cells: Vec<String> = header
                    .iter()
                    .map(|k| object.get(*k).map_or_else(String::new, csv_cell))
                    .collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
        }
    }
    out
}

/// Collects the files of one run; everything is written from one thread.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, format: Format) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: String, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// `<stem>.csv` or `<stem>.jsonl`.
    pub fn records<T: Serialize>(&mut self, stem: &str, records: &[T]) -> CliResult<()> {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        };
        self.write(format!("{stem}.{ext}"), &render(records, self.format))
    }

    /// `<stem>.json`, a single object.
    pub fn summary<T: Serialize>(&mut self, stem: &str, summary: &T) -> CliResult<()> {
        let value = serde_json::to_value(summary).expect("summaries serialize to JSON");
        self.write(format!("{stem}.json"), &(json_text(&value) + "\n"))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        #[serde(rename = "Z")]
        z: f64,
        label: &'static str,
        count: u32,
        missing: Option<f64>,
    }

    #[test]
    fn csv_uses_fixed_precision() {
        let rows = [Row {
            z: 0.1,
            label: "a",
            count: 3,
            missing: None,
        }];
        let text = render(&rows, Format::Csv);
        assert_eq!(text, "Z,label,count,missing\n1.0000000000000001e-1,a,3,\n");
    }

    #[test]
    fn json_lines_round_trip() {
        let rows = [Row {
            z: -7.687e-1,
            label: "b",
            count: 1,
            missing: Some(2.5),
        }];
        let text = render(&rows, Format::Json);
        assert!(text.ends_with('\n') && text.lines().count() == 1);
        let back: Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back["Z"].as_f64(), Some(-7.687e-1));
        assert_eq!(back["label"], "b");
    }
}
