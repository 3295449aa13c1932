//! Tabular output in CSV, JSON lines or markdown.

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    JsonLines,
    Markdown,
}

/// A table cell. Numbers carry an optional fixed number of decimals; without
/// one they print in shortest round-trip form.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64, Option<usize>),
    Empty,
}

impl Cell {
    pub fn full(v: f64) -> Cell {
        Cell::Num(v, None)
    }

    pub fn fixed(v: f64, decimals: usize) -> Cell {
        Cell::Num(v, Some(decimals))
    }

    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v, None) => format!("{v}"),
            Cell::Num(v, Some(d)) => format!("{v:.d$}"),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            // full precision regardless of display rounding, so values re-ingest exactly
            Cell::Num(v, _) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: Vec<&'static str>) -> Table {
        Table { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.headers.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::JsonLines => self.json_lines(),
            Format::Markdown => self.markdown(),
        }
    }

    pub fn csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    fn json_lines(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let obj: Map<String, Value> = self.headers.iter().map(|h| h.to_string()).zip(row.iter().map(Cell::json)).collect();
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    fn markdown(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|c| c.text().replace('|', "\\|")).collect()).collect();
        let mut out = format!("| {} |\n", self.headers.join(" | "));
        out.push_str(&format!("|{}\n", self.headers.iter().map(|_| "---|").collect::<String>()));
        for row in cells {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
        out
    }
}
