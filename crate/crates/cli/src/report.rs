use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One checked inequality. `anchor` is a stable role name for the inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub anchor: String,
    pub label: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(anchor: &str, label: impl Into<String>, pass: bool) -> Check {
        Check {
            anchor: anchor.into(),
            label: label.into(),
            pass,
            value: None,
            bound: None,
            detail: String::new(),
        }
    }

    pub fn le(anchor: &str, label: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            value: Some(value),
            bound: Some(bound),
            ..Check::new(anchor, label, value <= bound)
        }
    }

    pub fn ge(anchor: &str, label: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            value: Some(value),
            bound: Some(bound),
            ..Check::new(anchor, label, value >= bound)
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Two-column data for plotting; written as `<name>.dat`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config: Value,
    pub checks: Vec<Check>,
    pub results: Value,
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// report.json, one CSV per table, one .dat per curve.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        for t in &self.tables {
            let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", t.name)))?;
            w.write_record(&t.columns)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        for c in &self.curves {
            let mut f = fs::File::create(dir.join(format!("{}.dat", c.name)))?;
            writeln!(f, "# {} {}", c.x, c.y)?;
            for (x, y) in &c.points {
                writeln!(f, "{x} {y}")?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            s.push_str(&format!("{mark} [{}] {}", c.anchor, c.label));
            if let (Some(v), Some(b)) = (c.value, c.bound) {
                s.push_str(&format!(" (value {v}, bound {b})"));
            }
            if !c.detail.is_empty() {
                s.push_str(&format!(": {}", c.detail));
            }
            s.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        s.push_str(&format!(
            "{}: {} checks, {} failed\n",
            self.kind,
            self.checks.len(),
            failed
        ));
        s
    }
}
