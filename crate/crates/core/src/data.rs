//! Tabular input data: UTF-8 comma-separated files with a header row, `.`
//! decimal separator, no thousands separators. Blank cells are absent
//! optional values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One input table. Row numbers reported in errors are 1-based data rows
/// (the header is row 0).
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    headers: Vec<String>,
    header_index: BTreeMap<String, usize>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str], rows: Vec<Vec<String>>) -> Table {
        let headers: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        let header_index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        Table {
            name: name.to_string(),
            headers,
            header_index,
            rows,
        }
    }

    pub fn from_csv_path(name: &str, path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            rows.push(record.iter().map(|c| c.to_string()).collect());
        }
        let header_index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        Ok(Table {
            name: name.to_string(),
            headers,
            header_index,
            rows,
        })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_ids(&self) -> impl Iterator<Item = usize> {
        0..self.rows.len()
    }

    fn err(&self, row: usize, message: String) -> Error {
        Error::InputError {
            table: self.name.clone(),
            row: row + 1,
            message,
        }
    }

    fn cell(&self, row: usize, column: &str) -> Result<Option<&str>> {
        let Some(&c) = self.header_index.get(column) else {
            return Err(self.err(row, format!("missing column `{column}`")));
        };
        let v = self.rows[row].get(c).map(|s| s.as_str()).unwrap_or("");
        Ok(if v.is_empty() { None } else { Some(v) })
    }

    pub fn get(&self, row: usize, column: &str) -> Result<&str> {
        self.cell(row, column)?
            .ok_or_else(|| self.err(row, format!("column `{column}` is blank")))
    }

    pub fn get_opt(&self, row: usize, column: &str) -> Option<&str> {
        self.header_index
            .get(column)
            .and_then(|&c| self.rows[row].get(c))
            .map(|s| s.as_str())
            .filter(|s| !s.is_empty())
    }

    pub fn get_f64(&self, row: usize, column: &str) -> Result<f64> {
        let raw = self.get(row, column)?;
        raw.parse::<f64>()
            .map_err(|_| self.err(row, format!("column `{column}`: `{raw}` is not a number")))
    }

    pub fn get_f64_opt(&self, row: usize, column: &str) -> Result<Option<f64>> {
        match self.get_opt(row, column) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.err(row, format!("column `{column}`: `{raw}` is not a number"))),
        }
    }

    pub fn get_f64_or(&self, row: usize, column: &str, default: f64) -> Result<f64> {
        Ok(self.get_f64_opt(row, column)?.unwrap_or(default))
    }

    pub fn get_i64(&self, row: usize, column: &str) -> Result<i64> {
        let raw = self.get(row, column)?;
        raw.parse::<i64>()
            .map_err(|_| self.err(row, format!("column `{column}`: `{raw}` is not an integer")))
    }

    pub fn get_usize(&self, row: usize, column: &str) -> Result<usize> {
        let raw = self.get(row, column)?;
        raw.parse::<usize>().map_err(|_| {
            self.err(
                row,
                format!("column `{column}`: `{raw}` is not a nonnegative integer"),
            )
        })
    }

    pub fn get_bool_or(&self, row: usize, column: &str, default: bool) -> Result<bool> {
        match self.get_opt(row, column) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(raw) => Err(self.err(
                row,
                format!("column `{column}`: `{raw}` is not a boolean (true/false/1/0)"),
            )),
        }
    }
}

/// All tables available to one scenario run, keyed by table name (the file
/// name without `.csv`).
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    tables: BTreeMap<String, Table>,
    source_dir: Option<PathBuf>,
}

impl Dataset {
    pub fn new() -> Dataset {
        Dataset::default()
    }

    /// Reads the named tables from `dir`; absent files simply stay absent so
    /// callers distinguish required from optional tables.
    pub fn from_dir(dir: &Path, table_names: &[&str]) -> Result<Dataset> {
        let mut tables = BTreeMap::new();
        for name in table_names {
            let path = dir.join(format!("{name}.csv"));
            if path.is_file() {
                tables.insert(name.to_string(), Table::from_csv_path(name, &path)?);
            }
        }
        Ok(Dataset {
            tables,
            source_dir: Some(dir.to_path_buf()),
        })
    }

    pub fn source_dir(&self) -> Option<&Path> {
        self.source_dir.as_deref()
    }

    pub fn insert(&mut self, table: Table) {
        self.tables.insert(table.name.clone(), table);
    }

    pub fn get(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    /// Fetches a mandatory table on behalf of `module`.
    pub fn require(&self, module: &str, name: &str) -> Result<&Table> {
        self.tables.get(name).ok_or_else(|| Error::MissingInput {
            module: module.to_string(),
            table: format!("{name}.csv"),
        })
    }
}
