//! CSV datasets with a `# key: value` metadata header.
//!
//! Fields are kept as text, so parsing an emitted file and writing it again
//! reproduces it byte for byte.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed metadata line {line}: `{text}`")]
    Metadata { line: usize, text: String },
    #[error("row {row} has {found} fields, header has {expected}")]
    RowWidth { row: usize, found: usize, expected: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn num_list(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

pub fn int_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl Dataset {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: vec![],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.to_string(), value.into()));
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Result<usize, DatasetError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    }

    /// Parsed values of a column; blanks and non-numbers become `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>, DatasetError> {
        let j = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[j].parse().ok()).collect())
    }

    pub fn text(&self, name: &str) -> Result<Vec<&str>, DatasetError> {
        let j = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, DatasetError> {
        let mut buf = vec![];
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("dataset text is UTF-8"))
    }

    pub fn write_file(&self, path: &Path) -> Result<(), DatasetError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut metadata = vec![];
        let mut body_start = 0;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            let entry = rest.trim_end_matches('\n').strip_prefix(' ').and_then(|r| r.split_once(": "));
            match entry {
                Some((k, v)) => metadata.push((k.to_string(), v.to_string())),
                None => {
                    return Err(DatasetError::Metadata {
                        line: i + 1,
                        text: line.trim_end().to_string(),
                    })
                }
            }
            body_start += line.len();
        }
        let mut reader = csv::ReaderBuilder::new().from_reader(&text.as_bytes()[body_start..]);
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = vec![];
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != columns.len() {
                return Err(DatasetError::RowWidth {
                    row: i + 1,
                    found: record.len(),
                    expected: columns.len(),
                });
            }
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Self { metadata, columns, rows })
    }

    pub fn read_file(path: &Path) -> Result<Self, DatasetError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
