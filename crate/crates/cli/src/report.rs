use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A rectangular table of numbers; missing or undefined cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ReportTable {
    pub fn new(title: impl Into<String>, row_header: impl Into<String>, columns: Vec<String>) -> Self {
        Self { title: title.into(), row_header: row_header.into(), columns, rows: Vec::new(), cells: Vec::new() }
    }

    /// Non-finite values are stored as `None`.
    pub fn push(&mut self, label: impl Into<String>, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.columns.len(), "row width must match the header");
        self.rows.push(label.into());
        self.cells.push(values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect());
    }

    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        self.cells[r][c]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once(self.row_header.as_str()).chain(self.columns.iter().map(String::as_str)).collect();
        w.write_record(&header).expect("in-memory write");
        for (label, row) in self.rows.iter().zip(&self.cells) {
            let rec: Vec<String> = std::iter::once(label.clone())
                .chain(row.iter().map(|v| v.map_or(String::new(), |x| format!("{x}"))))
                .collect();
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json() + "\n",
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Data(e.to_string()))
    }

    /// Writes `<dir>/<name>.<ext>` and returns the rendered text.
    pub fn write(&self, dir: &Path, name: &str, format: Format) -> Result<String, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let text = self.render(format);
        let path = dir.join(format!("{name}.{}", format.extension()));
        std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        Ok(text)
    }
}
