//! Tabular view of persons: one row per person, typed columns with optional
//! cells and a binary target. CSV uses `__NA__` for a missing cell.

use serde::{Deserialize, Serialize};

pub use crate::inventory::AttributeKind;

pub const MISSING: &str = "__NA__";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<Column>,
    ids: Vec<usize>,
    cells: Vec<Vec<Option<String>>>,
    target: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed table: {0}")]
    Malformed(String),
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Table {
            columns,
            ids: Vec::new(),
            cells: Vec::new(),
            target: Vec::new(),
        }
    }

    /// Panics when the row width does not match the column count.
    pub fn push_row(&mut self, id: usize, cells: Vec<Option<String>>, target: u8) {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        self.ids.push(id);
        self.cells.push(cells);
        self.target.push(target);
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.cells[row][col].as_deref()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["person_id".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.push("target".into());
        w.write_record(&header).expect("in-memory write");
        for (r, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend(
                self.cells[r]
                    .iter()
                    .map(|c| c.clone().unwrap_or_else(|| MISSING.to_string())),
            );
            rec.push(self.target[r].to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Column kinds are recovered from the attribute names.
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 2 || &header[0] != "person_id" || &header[n - 1] != "target" {
            return Err(TableError::Malformed("header must be person_id,...,target".into()));
        }
        let columns = header
            .iter()
            .skip(1)
            .take(n - 2)
            .map(|name| Column {
                name: name.to_string(),
                kind: crate::inventory::attribute_kind(name),
            })
            .collect();
        let mut t = Table::new(columns);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| TableError::Malformed(format!("row {}: bad {what}", line + 1));
            let id = rec[0].parse().map_err(|_| bad("person_id"))?;
            let target = rec[n - 1].parse().map_err(|_| bad("target"))?;
            let cells = (1..n - 1)
                .map(|i| (&rec[i] != MISSING).then(|| rec[i].to_string()))
                .collect();
            t.push_row(id, cells, target);
        }
        Ok(t)
    }
}
