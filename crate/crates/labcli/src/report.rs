//! Schema-versioned JSON reports, CSV tables and pretty printing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fiblab::fibration::{CHERN_WEIL_CONSTANT, ENERGY_RATIO_CONSTANT};
use fiblab::oracles::OracleReport;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::scenario::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

/// Name of the only random generator used by experiments.
pub const GENERATOR: &str = "ChaCha8Rng";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a report: {message}")]
    Format { path: String, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported schema version {found}, expected {SCHEMA_VERSION}")]
    Schema { found: u32 },
}

/// The acceptance criteria, one identifier each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
}

impl CriterionId {
    pub const ALL: [CriterionId; 11] = [
        Self::C1,
        Self::C2,
        Self::C3,
        Self::C4,
        Self::C5,
        Self::C6,
        Self::C7,
        Self::C8,
        Self::C9,
        Self::C10,
        Self::C11,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Self::C1 => "FM anti-self-duality",
            Self::C2 => "flat-family exactness",
            Self::C3 => "kernel dimension",
            Self::C4 => "eigenvalue lower bound",
            Self::C5 => "Yang-Mills flow",
            Self::C6 => "gauge fixing",
            Self::C7 => "Poincare ratio",
            Self::C8 => "reduced ASD and kappa identity",
            Self::C9 => "energy identity",
            Self::C10 => "special-Lagrangian residuals",
            Self::C11 => "oscillation decay",
        }
    }
}

impl std::fmt::Display for CriterionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `value <= threshold`
    AtMost,
    /// `value >= threshold`
    AtLeast,
    /// `value` is true (stored as 1 or 0)
    Holds,
}

/// One pinned comparison inside a criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            threshold,
            passed: value >= threshold,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: Relation::Holds,
            threshold: 1.0,
            passed: ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: CriterionId,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Wall-clock budget of the record in seconds, when the criterion has one.
    pub time_budget: Option<f64>,
}

impl CriterionResult {
    pub fn new(id: CriterionId, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            id,
            title: id.title().into(),
            passed,
            checks,
            time_budget: None,
        }
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// One-line summary `PASS C3 kernel dimension` with failing checks appended.
    pub fn summary(&self) -> String {
        let mut line = format!("{} {} {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.title);
        for c in self.failed_checks() {
            let _ = write!(line, "; {} = {:.3e} (limit {:.3e})", c.name, c.value, c.threshold);
        }
        if let Some(b) = self.time_budget {
            let _ = write!(line, "; budget {b} s");
        }
        line
    }
}

/// A CSV table: a header and rows of numbers or labels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// The numeric column `name`, skipping cells that do not parse.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(k) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[k].parse().ok()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|source| ReportError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Render a float for CSV cells without losing bits.
pub fn cell(v: f64) -> String {
    format!("{v:e}")
}

/// The outcome of one experiment step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    /// Fiber areas used by this record.
    pub t: Vec<f64>,
    /// Base resolutions used by this record, coarse to fine.
    pub resolution: Vec<[usize; 2]>,
    pub fiber_resolution: [usize; 2],
    pub metrics: BTreeMap<String, Value>,
    pub oracle_reports: Vec<OracleReport>,
    pub criterion: Option<CriterionResult>,
    /// Solver or setup failure; the criterion then fails.
    pub error: Option<String>,
    /// Written as CSV next to the JSON report, not into it.
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub wall_time: f64,
}

impl Record {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            t: Vec::new(),
            resolution: Vec::new(),
            fiber_resolution: [0, 0],
            metrics: BTreeMap::new(),
            oracle_reports: Vec::new(),
            criterion: None,
            error: None,
            tables: Vec::new(),
            wall_time: 0.0,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metrics.insert(key.into(), v);
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.criterion.as_ref().is_none_or(|c| c.passed)
    }

    /// Fold the wall-clock budget into the criterion verdict.
    pub fn enforce_budget(&mut self, budget: f64) {
        let wall = self.wall_time;
        if let Some(c) = self.criterion.as_mut() {
            c.time_budget = Some(budget);
            c.passed = c.passed && wall <= budget;
        }
    }
}

/// Normalizations and constants fixed per build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub fiber_area: f64,
    pub orientation: String,
    pub holonomy: String,
    pub chern_weil_constant: f64,
    pub energy_ratio_constant: f64,
    pub base_derivatives: String,
    pub generator: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            fiber_area: 1.0,
            orientation: "dx1^dx2^dy1^dy2".into(),
            holonomy: "ordered exponential of +A, earlier points on the left".into(),
            chern_weil_constant: CHERN_WEIL_CONSTANT,
            energy_ratio_constant: ENERGY_RATIO_CONSTANT,
            base_derivatives: "4th-order finite differences on a cell-centred grid".into(),
            generator: GENERATOR.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub seed: u64,
    pub conventions: Conventions,
    pub records: Vec<Record>,
}

/// Process exit status of a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    CriterionFailure,
    SolverError,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::CriterionFailure => 1,
            Self::SolverError => 2,
        }
    }
}

impl Report {
    pub fn new(scenario: &Scenario, records: Vec<Record>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: scenario.scenario.seed,
            scenario: scenario.clone(),
            conventions: Conventions::default(),
            records,
        }
    }

    pub fn verdict(&self) -> Verdict {
        if self.records.iter().any(|r| r.error.is_some()) {
            Verdict::SolverError
        } else if self.records.iter().all(Record::passed) {
            Verdict::Pass
        } else {
            Verdict::CriterionFailure
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ReportError> {
        let report: Report = serde_json::from_str(text).map_err(|e| ReportError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Schema {
                found: report.schema_version,
            });
        }
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Write `<stem>.json` and one `<stem>_<table>.csv` per table; returns the paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, ReportError> {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Write {
            path: dir.display().to_string(),
            source,
        })?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()).map_err(|source| ReportError::Write {
            path: json.display().to_string(),
            source,
        })?;
        let mut written = vec![json];
        let mut merged: BTreeMap<&str, Table> = BTreeMap::new();
        for table in self.records.iter().flat_map(|r| &r.tables) {
            match merged.get_mut(table.name.as_str()) {
                Some(t) if t.columns == table.columns => t.rows.extend(table.rows.iter().cloned()),
                Some(_) => {
                    return Err(ReportError::Format {
                        path: table.name.clone(),
                        message: "tables with the same name have different columns".into(),
                    })
                }
                None => {
                    merged.insert(&table.name, table.clone());
                }
            }
        }
        for (name, table) in merged {
            let path = dir.join(format!("{stem}_{name}.csv"));
            table.write_csv(&path)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Human-readable summary: one line per record and criterion.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {} (seed {}, schema v{})",
            self.scenario.scenario.name, self.seed, self.schema_version
        );
        for r in &self.records {
            let res: Vec<String> = r.resolution.iter().map(|m| format!("{}x{}", m[0], m[1])).collect();
            let _ = writeln!(
                out,
                "- {} t={:?} base=[{}] fiber={}x{} ({:.2} s)",
                r.experiment,
                r.t,
                res.join(", "),
                r.fiber_resolution[0],
                r.fiber_resolution[1],
                r.wall_time
            );
            if let Some(e) = &r.error {
                let _ = writeln!(out, "    ERROR {e}");
            }
            if let Some(c) = &r.criterion {
                let _ = writeln!(out, "    {}", c.summary());
                for check in &c.checks {
                    let _ = writeln!(
                        out,
                        "      {} {:<32} {:>12.4e} {} {:.4e}",
                        if check.passed { "ok  " } else { "FAIL" },
                        check.name,
                        check.value,
                        match check.relation {
                            Relation::AtMost => "<=",
                            Relation::AtLeast => ">=",
                            Relation::Holds => "==",
                        },
                        check.threshold
                    );
                }
            }
            for (k, v) in &r.metrics {
                let _ = writeln!(out, "      {k} = {v}");
            }
        }
        let _ = writeln!(out, "verdict: {:?}", self.verdict());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(passed: bool) -> Record {
        let mut r = Record::new("slag");
        r.criterion = Some(CriterionResult::new(CriterionId::C10, vec![Check::at_most("x", if passed { 0.0 } else { 2.0 }, 1.0)]));
        r
    }

    #[test]
    fn verdict_orders_errors_before_failures() {
        let s = Scenario::default_scenario();
        assert_eq!(Report::new(&s, vec![record(true)]).verdict(), Verdict::Pass);
        assert_eq!(Report::new(&s, vec![record(true), record(false)]).verdict(), Verdict::CriterionFailure);
        let mut broken = record(true);
        broken.error = Some("solver".into());
        assert_eq!(Report::new(&s, vec![record(false), broken]).verdict().exit_code(), 2);
    }

    #[test]
    fn budget_overrun_fails_the_criterion() {
        let mut r = record(true);
        r.wall_time = 3.0;
        r.enforce_budget(2.0);
        assert!(!r.passed());
        assert!(r.criterion.unwrap().summary().contains("budget"));
    }

    #[test]
    fn json_round_trip_and_schema_guard() {
        let s = Scenario::default_scenario();
        let mut r = record(true);
        r.metric("value", 0.1 + 0.2);
        let report = Report::new(&s, vec![r]);
        let path = Path::new("mem.json");
        assert_eq!(Report::from_json(&report.to_json(), path).unwrap(), report);
        let bumped = report.to_json().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        assert!(matches!(Report::from_json(&bumped, path), Err(ReportError::Schema { found: 99 })));
    }
}
