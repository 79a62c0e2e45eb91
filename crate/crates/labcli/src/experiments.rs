//! Experiment runners: each groups the criteria it exercises into records.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use fiblab::convergence::fit_order;
use fiblab::fibration::{
    asd_residual, energy, hol_symplectic, kappa_identity_residual, BaseRegion, ConnectionFamily, SemiFlatGeometry,
    ENERGY_RATIO_CONSTANT,
};
use fiblab::spectral::{slag_residual, FmConnection, SlagForms};
use fiblab::LabError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{self, evaluate, ladder};
use crate::plot::{self, table_series};
use crate::report::{cell, CriterionId, Record, Report, ReportError, Table};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// ASD residuals, flat-family exactness and the reduced equations (C1, C2, C8).
    FmVerify,
    /// Kernel dimension and the eigenvalue scan (C3, C4).
    Spectrum,
    /// Yang-Mills flow and gauge fixing (C5, C6).
    Flow,
    /// Poincaré ratio ensemble (C7).
    PoincareScan,
    /// Energy identity (C9).
    Energy,
    /// Special-Lagrangian residuals (C10).
    Slag,
    /// Oscillation decay (C11).
    Decay,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::FmVerify,
        Self::Spectrum,
        Self::Flow,
        Self::PoincareScan,
        Self::Energy,
        Self::Slag,
        Self::Decay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FmVerify => "fm-verify",
            Self::Spectrum => "spectrum",
            Self::Flow => "flow",
            Self::PoincareScan => "poincare-scan",
            Self::Energy => "energy",
            Self::Slag => "slag",
            Self::Decay => "decay",
        }
    }

    pub fn criteria(self) -> &'static [CriterionId] {
        use CriterionId::*;
        match self {
            Self::FmVerify => &[C1, C2, C8],
            Self::Spectrum => &[C3, C4],
            Self::Flow => &[C5, C6],
            Self::PoincareScan => &[C7],
            Self::Energy => &[C9],
            Self::Slag => &[C10],
            Self::Decay => &[C11],
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error("--t {0} must be positive")]
    BadT(f64),
    #[error("{0} has no resolution parameter to converge")]
    NotConvergeable(Experiment),
}

/// The scenario with its fiber-area list replaced by `t` when given.
fn with_t(s: &Scenario, t: Option<f64>) -> Result<Scenario, RunError> {
    let mut s = s.clone();
    if let Some(t) = t {
        if !(t > 0.0 && t.is_finite()) {
            return Err(RunError::BadT(t));
        }
        s.geometry.t = vec![t];
    }
    Ok(s)
}

/// Run one experiment on a validated scenario.
pub fn run_experiment(scenario: &Scenario, exp: Experiment, t: Option<f64>) -> Result<Report, RunError> {
    let s = with_t(scenario, t)?;
    let tol = s.run.tolerances.clone();
    let name = exp.name();
    let mut records = Vec::new();
    match exp {
        Experiment::FmVerify => {
            for &t in &s.geometry.t {
                let mut r = evaluate(name, CriterionId::C1, |rec| criteria::fm_asd(&s, t, &tol, rec));
                r.enforce_budget(tol.asd_seconds);
                records.push(r);
            }
            records.push(evaluate(name, CriterionId::C2, |rec| criteria::flat_exactness(&s, &tol, rec)));
            records.push(evaluate(name, CriterionId::C8, |rec| criteria::reduced_asd(&s, &tol, rec)));
        }
        Experiment::Spectrum => {
            records.push(evaluate(name, CriterionId::C3, |rec| criteria::kernel_dimension(&s, rec)));
            if s.is_degenerate() {
                let mut r = Record::new(name);
                r.metric("eigenvalue_scan", "not-applicable: coincident spectral points");
                records.push(r);
            } else {
                records.push(evaluate(name, CriterionId::C4, |rec| criteria::eigenvalue_bound(&s, &tol, rec)));
            }
        }
        Experiment::Flow => {
            let mut r = evaluate(name, CriterionId::C5, |rec| criteria::flow(&s, &tol, rec));
            r.enforce_budget(tol.flow_seconds);
            records.push(r);
            records.push(evaluate(name, CriterionId::C6, |rec| criteria::gauge_fixing(&s, &tol, rec)));
        }
        Experiment::PoincareScan => {
            if s.is_degenerate() {
                let mut r = Record::new(name);
                r.metric("poincare_scan", "not-applicable");
                records.push(r);
            } else {
                records.push(evaluate(name, CriterionId::C7, |rec| criteria::poincare(&s, &tol, rec)));
            }
        }
        Experiment::Energy => {
            records.push(evaluate(name, CriterionId::C9, |rec| criteria::energy_identity(&s, &tol, rec)));
        }
        Experiment::Slag => records.push(evaluate(name, CriterionId::C10, |rec| criteria::slag(&s, &tol, rec))),
        Experiment::Decay => records.push(evaluate(name, CriterionId::C11, |rec| criteria::decay(&s, &tol, rec))),
    }
    Ok(Report::new(&s, records))
}

/// Error quantities of one experiment at base resolution `m`.
fn probe(s: &Scenario, exp: Experiment, m: [usize; 2]) -> Result<Vec<(&'static str, f64)>, LabError> {
    let data = s.data()?;
    let t = s.geometry.t[0];
    match exp {
        Experiment::FmVerify => {
            let fm = FmConnection::from_data(&data, s.grid(m, s.geometry.fiber_resolution)?)?;
            let region = BaseRegion::whole(&fm.grid().base);
            let sf = SemiFlatGeometry::new(fm.grid().clone(), t)?;
            let asd = asd_residual(&fm, &sf.omega(), &sf.big_omega(), &region)?;
            let kappa = kappa_identity_residual(&fm, &fm, &region)?;
            Ok(vec![
                ("f_omega_sup", asd.omega.sup),
                ("f_big_omega_sup", asd.big_omega.sup),
                ("kappa_sup", kappa.sup),
            ])
        }
        Experiment::Energy => {
            let fm = FmConnection::from_data(&data, s.grid(m, s.geometry.fiber_resolution)?)?;
            let region = BaseRegion::whole(&fm.grid().base);
            let e = energy(&fm, &fm, &SemiFlatGeometry::new(fm.grid().clone(), t)?, &region)?;
            Ok(vec![("ratio_error", (e.ratio() - ENERGY_RATIO_CONSTANT).abs())])
        }
        Experiment::Slag => {
            let grid = s.grid(m, [4, 4])?;
            let forms = SlagForms::from_big_omega(&hol_symplectic(&grid));
            let worst = (0..data.rank())
                .map(|k| slag_residual(&data, k, &grid, &forms).map(|r| r.max()))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(vec![("holomorphic_residual", worst)])
        }
        _ => unreachable!("filtered by converge"),
    }
}

/// Rerun the error quantities of `exp` at three dyadic base resolutions and fit orders.
pub fn converge(scenario: &Scenario, exp: Experiment) -> Result<Report, RunError> {
    if !matches!(exp, Experiment::FmVerify | Experiment::Energy | Experiment::Slag) {
        return Err(RunError::NotConvergeable(exp));
    }
    let steps = ladder(scenario.geometry.base_resolution);
    let mut rec = Record::new(&format!("converge-{}", exp.name()));
    rec.t = vec![scenario.geometry.t[0]];
    rec.resolution = steps.to_vec();
    rec.fiber_resolution = scenario.geometry.fiber_resolution;
    let start = Instant::now();
    let rows: Result<Vec<_>, LabError> = steps.iter().map(|&m| probe(scenario, exp, m)).collect();
    match rows {
        Ok(rows) => {
            let names: Vec<&str> = rows[0].iter().map(|r| r.0).collect();
            let mut columns = vec!["m1", "m2", "h"];
            columns.extend(&names);
            let mut table = Table::new("convergence", &columns);
            let g = &scenario.geometry;
            let hs: Vec<f64> = steps
                .iter()
                .map(|m| ((g.x1[1] - g.x1[0]) / m[0] as f64).max((g.x2[1] - g.x2[0]) / m[1] as f64))
                .collect();
            for ((m, h), row) in steps.iter().zip(&hs).zip(&rows) {
                let mut cells = vec![m[0].to_string(), m[1].to_string(), cell(*h)];
                cells.extend(row.iter().map(|r| cell(r.1)));
                table.push(cells);
            }
            for (k, name) in names.iter().enumerate() {
                let errs: Vec<f64> = rows.iter().map(|r| r[k].1).collect();
                rec.metric(&format!("order_{name}"), fit_order(&hs, &errs));
            }
            rec.tables.push(table);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    Ok(Report::new(scenario, vec![rec]))
}

/// Write the report, its CSV tables and the plots derived from them.
pub fn write_outputs(report: &Report, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, RunError> {
    let mut paths = report.write(dir, stem)?;
    let tables = || report.records.iter().flat_map(|r| &r.tables);
    for table in tables() {
        let spec: Option<(&str, &str, Vec<&str>, Option<&str>, &str)> = match table.name.as_str() {
            "asd" => Some(("h", "sup residual", vec!["f_omega_sup", "f_big_omega_sup"], Some("t"), "residual-vs-resolution")),
            "reduced" => Some(("h", "sup residual", vec!["r1_sup", "kappa_sup"], None, "reduced-vs-resolution")),
            "convergence" => {
                let cols = table.columns.iter().skip(3).map(String::as_str).collect();
                Some(("h", "error", cols, None, "convergence"))
            }
            "energy" => Some(("t", "energy", vec!["ym", "dirichlet"], None, "energy-vs-t")),
            "decay" => Some(("t", "oscillation", vec!["oscillation", "closed_form"], None, "oscillation-vs-t")),
            _ => None,
        };
        let Some((x, y, cols, group, what)) = spec else { continue };
        let series = table_series(table, x, &cols, group);
        // Exact quantities have nothing positive to draw on a log scale.
        if !series.iter().any(|s| s.points.iter().any(|p| p.0 > 0.0 && p.1 > 0.0 && p.1.is_finite())) {
            continue;
        }
        let path = dir.join(format!("{stem}_{what}.svg"));
        plot::loglog(&path, what, x, y, &series)?;
        paths.push(path);
    }
    Ok(paths)
}
