//! Run reports and the files written from them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::Result;

/// Shortest round-trip form, so identical numbers give identical files.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// A CSV table; every file starts with a `# columns:` comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Table { name: name.to_string(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = format!("# columns: {}\n", self.columns.join(",")).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        fs::write(path, buf)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One numerical acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtMost, bound, pass: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtLeast, bound, pass: value >= bound }
    }

    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        let tag = if self.pass { "PASS" } else { "FAIL" };
        format!("{tag} {}: {:.3e} {rel} {:.3e}", self.name, self.value, self.bound)
    }
}

/// Everything a pipeline produced, before anything touches the disk.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub subcommand: String,
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
    pub documents: Vec<(String, Value)>,
    pub checks: Vec<Check>,
    /// Wall-clock seconds per stage; kept out of the manifest.
    pub timings: Vec<(String, f64)>,
}

impl Report {
    pub fn new(subcommand: &str) -> Self {
        Report { subcommand: subcommand.to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn document(&self, name: &str) -> Option<&Value> {
        self.documents.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("summary value serializes"));
    }
}

/// Files written for one run; `manifest` is what `manifest.json` holds.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub manifest: Value,
}

/// Writes tables, documents, `summary.json`, `timings.json` and a
/// deterministic `manifest.json` into `dir`.
pub fn write_report(report: &Report, cfg: &RunConfig, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for t in &report.tables {
        let name = format!("{}.csv", t.name);
        t.write(&dir.join(&name))?;
        files.push(name);
    }
    for (n, v) in &report.documents {
        let name = format!("{n}.json");
        fs::write(dir.join(&name), serde_json::to_string_pretty(v)? + "\n")?;
        files.push(name);
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&report.summary)? + "\n")?;
    files.push("summary.json".into());
    let timings: Map<String, Value> = report.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    fs::write(dir.join("timings.json"), serde_json::to_string_pretty(&timings)? + "\n")?;
    files.push("timings.json".into());
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": report.subcommand,
        "config": serde_json::to_value(cfg)?,
        "checks": report.checks,
        "passed": report.passed(),
        "files": files,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    files.push("manifest.json".into());
    Ok(RunArtifacts { dir: dir.to_path_buf(), files, manifest })
}
