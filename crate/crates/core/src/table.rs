//! Comma-separated point tables with `#` comment lines.
//!
//! Every text format the toolkit reads or writes shares the same layout: any
//! number of comment lines starting with `#` (those of the form
//! `# key=value` carry metadata), one header row naming the columns, then one
//! numeric row per point.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing header row")]
    MissingHeader,
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: cannot parse '{value}' as a number")]
    BadNumber { line: usize, value: String },
    #[error("header {found:?} does not match expected columns {expected:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
}

/// A parsed table: metadata from `# key=value` comments, column names and rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut table = Table::default();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once('=') {
                    let key = k.trim();
                    if !key.is_empty() && !key.contains(char::is_whitespace) {
                        table.metadata.insert(key.to_string(), v.trim().to_string());
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !header_seen {
                table.columns = fields.iter().map(|f| f.to_string()).collect();
                header_seen = true;
                continue;
            }
            if fields.len() != table.columns.len() {
                return Err(TableError::ColumnCount {
                    line: lineno + 1,
                    expected: table.columns.len(),
                    found: fields.len(),
                });
            }
            let row = fields
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| TableError::BadNumber {
                        line: lineno + 1,
                        value: f.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.rows.push(row);
        }
        if !header_seen {
            return Err(TableError::MissingHeader);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), TableError> {
        std::fs::write(path, self.to_csv()).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Checks that the header starts with `required` and that any extra
    /// columns are drawn from `optional`, in order.
    pub fn expect_columns(&self, required: &[&str], optional: &[&str]) -> Result<(), TableError> {
        let ok = self.columns.len() >= required.len()
            && self.columns.len() <= required.len() + optional.len()
            && self.columns.iter().zip(required.iter().chain(optional)).all(|(a, b)| a == b);
        if ok {
            Ok(())
        } else {
            Err(TableError::HeaderMismatch {
                expected: required.iter().chain(optional).map(|s| s.to_string()).collect(),
                found: self.columns.clone(),
            })
        }
    }

    /// Rows as `(x, y, sigma)` triples for a three-column point file.
    pub fn triples(&self) -> Vec<(f64, f64, f64)> {
        self.rows.iter().map(|r| (r[0], r[1], r[2])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_metadata_header_and_rows() {
        let text = "# axis_kind=wavelength_nm\n# a note without equals\n#temperature_K = 4\naxis,intensity,sigma\n800,1.5,0.1\n\n801,2,0.2\n";
        let t = Table::parse(text).unwrap();
        assert_eq!(t.metadata["axis_kind"], "wavelength_nm");
        assert_eq!(t.metadata["temperature_K"], "4");
        assert_eq!(t.columns, vec!["axis", "intensity", "sigma"]);
        assert_eq!(t.rows, vec![vec![800.0, 1.5, 0.1], vec![801.0, 2.0, 0.2]]);
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = Table::parse("a,b\n1,2\n3\n").unwrap_err();
        assert!(matches!(err, TableError::ColumnCount { line: 3, .. }));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(&["x", "y"]);
        t.metadata.insert("true_tau_ns".into(), "1.74".into());
        t.rows.push(vec![0.1 + 0.2, 1.0 / 3.0]);
        let back = Table::parse(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }
}
