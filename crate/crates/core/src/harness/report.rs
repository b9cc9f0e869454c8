use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::io::fmt_real;

/// How an assertion compares its value with the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            relation: Relation::AtMost,
            threshold,
            detail: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            relation: Relation::AtLeast,
            threshold,
            detail: None,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < threshold,
            value,
            relation: Relation::Below,
            threshold,
            detail: None,
        }
    }

    /// A stage that could not run; reported as a failure.
    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: false,
            value: f64::NAN,
            relation: Relation::AtMost,
            threshold: f64::NAN,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Accumulated outcome of one command.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub command: String,
    pub assertions: Vec<Assertion>,
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn new(scenario: &str, command: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn assert(&mut self, a: Assertion) {
        self.assertions.push(a);
    }
}

/// A table of real columns written with 17 significant digits.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Int(usize),
    Real(f64),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Two real columns from parallel vectors.
    pub fn series(header: [&str; 2], xs: &[f64], ys: &[f64]) -> Self {
        let mut t = Self::new(&header);
        for (&x, &y) in xs.iter().zip(ys) {
            t.rows.push(vec![Cell::Real(x), Cell::Real(y)]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Real(v) => fmt_real(*v),
                })
                .collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

pub fn write_table(dir: &Path, file: &str, table: &Table) -> Result<()> {
    let path = dir.join(file);
    fs::write(&path, table.to_csv()).map_err(|e| Error::io(&path, e))
}

/// Writes `summary.json` with sorted keys and a trailing newline.
pub fn emit_report(dir: &Path, summary: &Summary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut value = serde_json::to_value(summary).map_err(|e| Error::invalid(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("passed".into(), serde_json::Value::Bool(summary.passed()));
    }
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let t = Table::series(["t", "value"], &[0.0, 0.5], &[1.0 / 3.0, -2.0]);
        assert_eq!(
            t.to_csv(),
            "t,value\n0.0000000000000000e0,3.3333333333333331e-1\n5.0000000000000000e-1,-2.0000000000000000e0\n"
        );
    }

    #[test]
    fn summary_keys_are_sorted_and_output_is_stable() {
        let mut s = Summary::new("demo", "run");
        s.value("zeta", 1.0);
        s.value("alpha", 2.0);
        s.assert(Assertion::at_most("drift", 1e-4, 1e-3));
        let dir = tempfile::tempdir().unwrap();
        emit_report(dir.path(), &s).unwrap();
        let first = fs::read(dir.path().join("summary.json")).unwrap();
        emit_report(dir.path(), &s).unwrap();
        assert_eq!(first, fs::read(dir.path().join("summary.json")).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(text.find("\"assertions\"").unwrap() < text.find("\"values\"").unwrap());
        assert!(text.contains("\"passed\": true"));
    }
}
