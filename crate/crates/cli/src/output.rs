//! Reports and their JSON and CSV renderings.
//!
//! Every float is printed with 17 significant digits so that a value read
//! back from the output is the value that was computed.

use std::io::Write;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    List(Vec<f64>),
    Null,
}

impl Cell {
    /// CSV text; lists are joined with `;`.
    pub fn text(&self) -> String {
        match self {
            Cell::Num(x) => format_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::List(v) => v.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(";"),
            Cell::Null => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<Vec<f64>> for Cell {
    fn from(v: Vec<f64>) -> Self {
        Cell::List(v)
    }
}

/// `{:.16e}`, which is 17 significant digits; non-finite values print as `nan`/`inf`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string().to_lowercase()
    }
}

struct JsonNum(f64);

impl Serialize for JsonNum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format_f64(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) => JsonNum(*x).serialize(s),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Str(v) => s.serialize_str(v),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::List(v) => {
                let mut seq = s.serialize_seq(Some(v.len()))?;
                for x in v {
                    seq.serialize_element(&JsonNum(*x))?;
                }
                seq.end()
            }
            Cell::Null => s.serialize_none(),
        }
    }
}

/// How a report's table appears in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableJson {
    Omit,
    /// `"rows": [{col: value, ...}, ...]`
    Rows,
    /// One array per column, keyed by column name.
    Columns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Value at `column` of the only row, if there is exactly one.
    pub fn single(&self, column: &str) -> Option<&Cell> {
        let [row] = self.rows.as_slice() else { return None };
        self.columns.iter().position(|c| c == column).map(|i| &row[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub fields: Vec<(String, Cell)>,
    pub table: Option<Table>,
    pub table_json: TableJson,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), fields: Vec::new(), table: None, table_json: TableJson::Omit }
    }

    pub fn field(mut self, name: &str, value: impl Into<Cell>) -> Self {
        self.fields.push((name.to_string(), value.into()));
        self
    }

    pub fn with_table(mut self, table: Table, json: TableJson) -> Self {
        self.table = Some(table);
        self.table_json = json;
        self
    }

    /// A field, or the column of a one-row table.
    pub fn lookup(&self, name: &str) -> Option<&Cell> {
        self.fields
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v)
            .or_else(|| self.table.as_ref().and_then(|t| t.single(name)))
    }

    pub fn write_json(&self, out: &mut dyn Write) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut *out, self)?;
        writeln!(out)
    }

    /// The table if there is one, otherwise the scalar fields as a single row.
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        match &self.table {
            Some(t) => write_table_csv(t, out),
            None => {
                let scalars: Vec<&(String, Cell)> = self.fields.iter().filter(|(_, v)| !matches!(v, Cell::List(_))).collect();
                let mut t = Table::new(scalars.iter().map(|(k, _)| k.as_str()));
                t.rows.push(scalars.iter().map(|(_, v)| v.clone()).collect());
                write_table_csv(&t, out)
            }
        }
    }
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("dw_version", env!("CARGO_PKG_VERSION"))?;
        map.serialize_entry("command", &self.command)?;
        for (k, v) in &self.fields {
            map.serialize_entry(k, v)?;
        }
        if let Some(t) = &self.table {
            match self.table_json {
                TableJson::Omit => {}
                TableJson::Rows => map.serialize_entry("rows", &RowObjects(t))?,
                TableJson::Columns => {
                    for (i, c) in t.columns.iter().enumerate() {
                        let column: Vec<&Cell> = t.rows.iter().map(|r| &r[i]).collect();
                        map.serialize_entry(c, &column)?;
                    }
                }
            }
        }
        map.end()
    }
}

struct RowObjects<'a>(&'a Table);

impl Serialize for RowObjects<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.rows.len()))?;
        for row in &self.0.rows {
            seq.serialize_element(&RowObject(&self.0.columns, row))?;
        }
        seq.end()
    }
}

struct RowObject<'a>(&'a [String], &'a [Cell]);

impl Serialize for RowObject<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

pub fn write_table_csv(t: &Table, out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&t.columns)?;
    for row in &t.rows {
        w.write_record(row.iter().map(Cell::text))?;
    }
    w.flush()
}
