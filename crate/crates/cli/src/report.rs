//! Tabular reports rendered as JSON or CSV.

use cbs_core::{Error, Result};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Rows of named columns; `json` replaces the default object rendering.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub json: Option<Value>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    /// Single-row report from ordered key/value pairs.
    pub fn record(fields: Vec<(&str, Value)>) -> Self {
        let (columns, row): (Vec<&str>, Vec<Value>) = fields.into_iter().unzip();
        let mut report = Self::new(&columns);
        report.rows.push(row);
        report
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn with_json(mut self, json: Value) -> Self {
        self.json = Some(json);
        self
    }

    fn objects(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|row| {
                let map: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().cloned()).collect();
                Value::Object(map)
            })
            .collect()
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let value = match &self.json {
                    Some(v) => v.clone(),
                    None if self.rows.len() == 1 => self.objects().remove(0),
                    None => Value::Array(self.objects()),
                };
                Ok(format!("{value}\n"))
            }
            Format::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| Error::Io(e.to_string());
                writer.write_record(&self.columns).map_err(io)?;
                for row in &self.rows {
                    writer.write_record(row.iter().map(cell)).map_err(io)?;
                }
                let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
            }
        }
    }
}

fn cell(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn record_renders_both_ways() {
        let r = Report::record(vec![("b", json!(1.5)), ("a", json!([1, 2])), ("c", json!("x"))]);
        assert_eq!(r.render(Format::Json).unwrap(), "{\"b\":1.5,\"a\":[1,2],\"c\":\"x\"}\n");
        assert_eq!(r.render(Format::Csv).unwrap(), "b,a,c\n1.5,1;2,x\n");
    }

    #[test]
    fn tables_become_arrays() {
        let mut r = Report::new(&["k"]);
        r.push(vec![json!(1)]);
        r.push(vec![json!(null)]);
        assert_eq!(r.render(Format::Json).unwrap(), "[{\"k\":1},{\"k\":null}]\n");
        assert_eq!(r.render(Format::Csv).unwrap(), "k\n1\n\"\"\n");
    }
}
