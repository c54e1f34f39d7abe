//! Columnar in-memory relations with per-attribute hash indexes.
//!
//! A [`Table`] is a set of equal-length `i64` columns. Rows are append-only;
//! deletion is logical (tombstones) so that row positions stay stable for
//! indexes and filters built on top. A [`Catalog`] owns tables together with
//! their indexes and keeps the indexes up to date on append.
//!
//! Tables and indexes are single-writer: build or append from one thread,
//! then share freely for reads.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub values: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    columns: Vec<Column>,
    deleted: HashSet<u32>,
    version: u64,
}

impl Table {
    pub fn new(name: impl Into<String>, column_names: &[&str]) -> Table {
        Table {
            name: name.into(),
            columns: column_names
                .iter()
                .map(|n| Column {
                    name: (*n).to_string(),
                    values: Vec::new(),
                })
                .collect(),
            deleted: HashSet::new(),
            version: 0,
        }
    }

    pub fn from_columns(name: impl Into<String>, columns: Vec<Column>) -> Result<Table> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.clone()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        if let Some(first) = columns.first() {
            let len = first.values.len();
            if columns.iter().any(|c| c.values.len() != len) {
                return Err(Error::Schema("columns differ in length".into()));
            }
        }
        Ok(Table {
            name: name.into(),
            columns,
            deleted: HashSet::new(),
            version: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Total number of appended rows, including tombstoned ones.
    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn live_count(&self) -> usize {
        self.row_count() - self.deleted.len()
    }

    /// Bumped on every append or delete; sieves record it to detect staleness.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn column_index(&self, attribute: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == attribute)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "table `{}` has no attribute `{}`",
                    self.name, attribute
                ))
            })
    }

    pub fn column(&self, attribute: &str) -> Result<&Column> {
        self.column_index(attribute).map(|i| &self.columns[i])
    }

    #[inline]
    pub fn value(&self, column: usize, row: usize) -> i64 {
        self.columns[column].values[row]
    }

    #[inline]
    pub fn is_live(&self, row: usize) -> bool {
        self.deleted.is_empty() || !self.deleted.contains(&(row as u32))
    }

    pub fn has_deletes(&self) -> bool {
        !self.deleted.is_empty()
    }

    pub fn live_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.row_count()).filter(|&p| self.is_live(p))
    }

    /// Appends a row and returns its position.
    pub fn append_row(&mut self, row: &[i64]) -> Result<usize> {
        if row.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "table `{}` expects {} values per row, got {}",
                self.name,
                self.columns.len(),
                row.len()
            )));
        }
        let pos = self.row_count();
        for (col, v) in self.columns.iter_mut().zip(row) {
            col.values.push(*v);
        }
        self.version += 1;
        Ok(pos)
    }

    /// Tombstones a row. The position stays valid but is skipped by scans.
    pub fn delete_row(&mut self, row: usize) -> Result<()> {
        if row >= self.row_count() {
            return Err(Error::Param(format!(
                "row {} out of range for table `{}`",
                row, self.name
            )));
        }
        if !self.deleted.insert(row as u32) {
            return Err(Error::Param(format!(
                "row {} of table `{}` is already deleted",
                row, self.name
            )));
        }
        self.version += 1;
        Ok(())
    }

    /// Exact distinct count and value set of a column, live rows only.
    pub fn distinct_values(&self, attribute: &str) -> Result<(usize, HashSet<i64>)> {
        let col = self.column_index(attribute)?;
        let values = &self.columns[col].values;
        let mut set = HashSet::new();
        for row in 0..values.len() {
            if self.is_live(row) {
                set.insert(values[row]);
            }
        }
        Ok((set.len(), set))
    }
}

/// Value -> row positions map over one attribute.
///
/// Every appended position is present under the row's value, tombstoned or
/// not; callers that care about liveness filter through [`Table::is_live`]
/// (or use [`HashIndex::lookup_live`]).
#[derive(Debug, Clone)]
pub struct HashIndex {
    pub table: String,
    pub attribute: String,
    map: HashMap<i64, Vec<u32>>,
}

impl HashIndex {
    pub fn build(table: &Table, attribute: &str) -> Result<HashIndex> {
        let col = table.column_index(attribute)?;
        let values = &table.columns()[col].values;
        let mut map: HashMap<i64, Vec<u32>> = HashMap::new();
        for (row, v) in values.iter().enumerate() {
            map.entry(*v).or_default().push(row as u32);
        }
        Ok(HashIndex {
            table: table.name().to_string(),
            attribute: attribute.to_string(),
            map,
        })
    }

    pub fn lookup(&self, value: i64) -> &[u32] {
        self.map.get(&value).map_or(&[], |v| v.as_slice())
    }

    pub fn lookup_live<'a>(
        &'a self,
        table: &'a Table,
        value: i64,
    ) -> impl Iterator<Item = usize> + 'a {
        self.lookup(value)
            .iter()
            .map(|&p| p as usize)
            .filter(move |&p| table.is_live(p))
    }

    pub fn distinct_count(&self) -> usize {
        self.map.len()
    }

    pub fn values(&self) -> impl Iterator<Item = (&i64, &Vec<u32>)> {
        self.map.iter()
    }

    fn add_row(&mut self, value: i64, row: usize) {
        self.map.entry(value).or_default().push(row as u32);
    }
}

/// Tables plus their indexes. Appends routed through the catalog keep the
/// indexes consistent.
#[derive(Debug, Default)]
pub struct Catalog {
    tables: HashMap<String, Table>,
    indexes: HashMap<(String, String), HashIndex>,
}

impl Catalog {
    pub fn new() -> Catalog {
        Catalog::default()
    }

    pub fn add_table(&mut self, table: Table) {
        self.tables.insert(table.name().to_string(), table);
    }

    pub fn table(&self, name: &str) -> Result<&Table> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::Schema(format!("unknown table `{name}`")))
    }

    pub fn table_mut(&mut self, name: &str) -> Result<&mut Table> {
        self.tables
            .get_mut(name)
            .ok_or_else(|| Error::Schema(format!("unknown table `{name}`")))
    }

    pub fn table_names(&self) -> impl Iterator<Item = &String> {
        self.tables.keys()
    }

    pub fn build_index(&mut self, table: &str, attribute: &str) -> Result<()> {
        let t = self.table(table)?;
        let idx = HashIndex::build(t, attribute)?;
        self.indexes
            .insert((table.to_string(), attribute.to_string()), idx);
        Ok(())
    }

    pub fn index(&self, table: &str, attribute: &str) -> Option<&HashIndex> {
        self.indexes
            .get(&(table.to_string(), attribute.to_string()))
    }

    /// Appends a row, updating every index on the table.
    pub fn append_row(&mut self, table: &str, row: &[i64]) -> Result<usize> {
        let t = self
            .tables
            .get_mut(table)
            .ok_or_else(|| Error::Schema(format!("unknown table `{table}`")))?;
        let pos = t.append_row(row)?;
        for ((tname, attr), idx) in self.indexes.iter_mut() {
            if tname == table {
                let col = t.column_index(attr)?;
                idx.add_row(t.value(col, pos), pos);
            }
        }
        Ok(pos)
    }

    pub fn delete_row(&mut self, table: &str, row: usize) -> Result<()> {
        self.table_mut(table)?.delete_row(row)
    }
}

/// Loads a comma-separated file of 64-bit integers.
///
/// `#`-prefixed lines are comments and blank lines are ignored. When
/// `has_header` is set the first data line is skipped. The table is named
/// after the file stem.
pub fn load_csv(path: &Path, schema: &[String], has_header: bool) -> Result<Table> {
    load_delimited(path, Some(schema), has_header, &[','])
}

/// Loads a CSV whose first line names the columns.
pub fn load_csv_with_header(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header line".into(),
        })?;
    let schema: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    load_delimited(path, Some(&schema), true, &[','])
}

pub(crate) fn load_delimited(
    path: &Path,
    schema: Option<&[String]>,
    has_header: bool,
    separators: &[char],
) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".to_string());

    let mut columns: Option<Vec<Column>> = schema.map(|s| {
        s.iter()
            .map(|n| Column {
                name: n.clone(),
                values: Vec::new(),
            })
            .collect()
    });
    let mut skipped_header = !has_header;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !skipped_header {
            skipped_header = true;
            continue;
        }
        let fields: Vec<&str> = if separators.len() == 1 {
            trimmed.split(separators[0]).collect()
        } else {
            trimmed
                .split(|c: char| separators.contains(&c) || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect()
        };
        let cols = columns.get_or_insert_with(|| {
            (0..fields.len())
                .map(|i| Column {
                    name: format!("c{i}"),
                    values: Vec::new(),
                })
                .collect()
        });
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        for (col, field) in cols.iter_mut().zip(&fields) {
            let field = field.trim();
            match field.parse::<i64>() {
                Ok(v) => col.values.push(v),
                Err(e) => {
                    use std::num::IntErrorKind::*;
                    return Err(match e.kind() {
                        PosOverflow | NegOverflow => Error::Range {
                            path: path.to_path_buf(),
                            line: lineno,
                            value: field.to_string(),
                        },
                        _ => Error::Parse {
                            path: path.to_path_buf(),
                            line: lineno,
                            message: format!("not a 64-bit integer: `{field}`"),
                        },
                    });
                }
            }
        }
    }

    let columns = columns.unwrap_or_default();
    Table::from_columns(stem, columns)
}

/// Writes the live rows of a table as CSV.
pub fn write_csv(table: &Table, path: &Path, header: bool) -> Result<()> {
    let mut out = String::new();
    if header {
        let names: Vec<&str> = table.columns().iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "{}", names.join(","));
    }
    for row in table.live_positions() {
        let mut first = true;
        for col in table.columns() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{}", col.values[row]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
