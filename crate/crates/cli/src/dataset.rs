//! Tabular sweep output.

use std::io::{self, Write};

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(if b { "true" } else { "false" }.into())
    }
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&format_f64(*x)),
            Cell::Int(n) => write!(f, "{n}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

/// Rows in grid order plus `# key: value` summary lines written after them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, String)>,
    /// Number of points that failed.
    pub failures: usize,
}

impl Dataset {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    /// Appends the outputs of one point: `coords` followed by either the
    /// computed values or empty fields and the error code in the last column.
    pub fn push_point(&mut self, coords: Vec<Cell>, outcome: Result<Vec<Cell>, qtherm::Error>) {
        let mut row = coords;
        let width = self.columns.len();
        match outcome {
            Ok(values) => {
                row.extend(values);
                row.push(Cell::Empty);
            }
            Err(e) => {
                log::warn!("point {} failed: {e}", self.rows.len());
                self.failures += 1;
                while row.len() < width - 1 {
                    row.push(Cell::Empty);
                }
                row.push(Cell::Text(e.code().into()));
            }
        }
        debug_assert_eq!(row.len(), width, "row width");
        self.rows.push(row);
    }

    /// Adds a summary line; plain decimals are rewritten like CSV fields.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        let mut text = value.to_string();
        if text.contains('.') {
            if let Ok(x) = text.parse::<f64>() {
                text = format_f64(x);
            }
        }
        self.summary.push((key.to_string(), text));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        let k = self
            .column(name)
            .unwrap_or_else(|| panic!("no column `{name}`"));
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// 0 if every point succeeded, 2 on partial failure, 3 if all failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures == 0 {
            0
        } else if self.failures < self.rows.len() {
            2
        } else {
            3
        }
    }

    /// CSV with LF endings; `timestamp` adds a leading comment line.
    pub fn write_csv<W: Write>(&self, out: W, timestamp: Option<u64>) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        if let Some(t) = timestamp {
            writeln!(out, "# generated-at-unix: {t}")?;
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|c| c.to_string()))?;
            }
            w.flush()?;
        }
        for (k, v) in &self.summary {
            writeln!(out, "# {k}: {v}")?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, None).expect("writing to memory");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}
