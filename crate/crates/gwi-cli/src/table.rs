//! Column-oriented result tables with stable headers, written as CSV
//! (default) or JSON rows. All numeric formatting is locale-free and
//! deterministic.

use std::io::{self, Write};

use crate::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    UInt(u64),
    Num(f64),
    Bool(bool),
    Str(String),
    Missing,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Shortest-deterministic float formatting: plain decimal in the sane
/// range, scientific outside it (Display for f64 never uses exponents,
/// which turns 1e-300 into a wall of zeros).
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return String::from("0");
    }
    if !x.is_finite() {
        return if x.is_nan() {
            String::from("NaN")
        } else if x > 0.0 {
            String::from("inf")
        } else {
            String::from("-inf")
        };
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::UInt(v) => format!("{v}"),
            Cell::Num(v) => fmt_f64(*v),
            Cell::Bool(b) => format!("{b}"),
            Cell::Str(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::UInt(v) => format!("{v}"),
            Cell::Num(v) if v.is_finite() => fmt_f64(*v),
            Cell::Num(_) => String::from("null"),
            Cell::Bool(b) => format!("{b}"),
            Cell::Str(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Cell::Missing => String::from("null"),
        }
    }
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: OutputFormat, out: &mut dyn Write) -> io::Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(out),
            OutputFormat::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "[")?;
        for (i, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row.iter())
                .map(|(c, v)| format!("\"{}\":{}", c, v.json()))
                .collect();
            let comma = if i + 1 < self.rows.len() { "," } else { "" };
            writeln!(out, "  {{{}}}{comma}", fields.join(","))?;
        }
        writeln!(out, "]")
    }
}
