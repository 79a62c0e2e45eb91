//! Scenario files: a TOML document with the sections `[scenario]`,
//! `[geometry]`, `[spectral]`, `[theta]` and `[run]`. Unknown keys are errors.

use std::fmt;
use std::path::Path;

use fiblab::fibration::{BasePatch, FibrationGrid};
use fiblab::poly::ComplexPoly;
use fiblab::spectral::{fm_transform, SpectralData, ThetaCocycle, DEFAULT_MARGIN};
use fiblab::{LabError, C64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::Tolerances;

/// A complex number written as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Cx(pub C64);

impl From<[f64; 2]> for Cx {
    fn from(v: [f64; 2]) -> Self {
        Cx(C64::new(v[0], v[1]))
    }
}

impl From<Cx> for [f64; 2] {
    fn from(c: Cx) -> Self {
        [c.0.re, c.0.im]
    }
}

fn poly(coeffs: &[Cx]) -> ComplexPoly {
    ComplexPoly::new(coeffs.iter().map(|c| c.0).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    /// Seed of every random draw in every experiment.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    /// Coefficients of `tau(w) = sum_k c_k w^k`.
    pub tau: Vec<Cx>,
    /// Finest base resolution; convergence ladders halve it twice.
    pub base_resolution: [usize; 2],
    pub fiber_resolution: [usize; 2],
    /// Fiber areas.
    pub t: Vec<f64>,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spectral {
    pub rank: usize,
    /// Per sheet, the coefficients of `q_j(w)`.
    pub sheets: Vec<Vec<Cx>>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Accept coincident sheets; only the spectrum experiment is meaningful.
    #[serde(default)]
    pub allow_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Run {
    pub tolerances: Tolerances,
    /// `C^0` size of the Hermitian gauge that starts the flow.
    pub flow_s_c0: f64,
    pub gauge_fix_samples: usize,
    /// `C^0` size of the gauges recovered by gauge fixing.
    pub gauge_fix_c0: f64,
    pub poincare_samples: usize,
    /// Largest `sup |F|` in the Poincaré ensemble.
    pub poincare_cap: f64,
    /// Fiber resolution of the spectrum scan and oracle comparison.
    pub scan_resolution: [usize; 2],
    pub slag_eps: Vec<f64>,
    pub decay_k: u32,
    pub decay_t: Vec<f64>,
}

impl Default for Run {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            flow_s_c0: 0.05,
            gauge_fix_samples: 20,
            gauge_fix_c0: 0.05,
            poincare_samples: 50,
            poincare_cap: 0.05,
            scan_resolution: [16, 16],
            slag_eps: vec![1e-2, 1e-3, 1e-4],
            decay_k: 4,
            decay_t: vec![1e-1, 1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario: Meta,
    pub geometry: Geometry,
    pub spectral: Spectral,
    /// A single chart over the base patch when absent.
    #[serde(default)]
    pub theta: Option<ThetaCocycle>,
    #[serde(default)]
    pub run: Run,
}

/// One violated invariant and where it was found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("scenario is invalid:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
}

/// The scenario shipped as `scenarios/default.toml`.
pub const DEFAULT_SCENARIO: &str = include_str!("../../../scenarios/default.toml");

fn push(issues: &mut Vec<Issue>, location: &str, message: String) {
    issues.push(Issue {
        location: location.into(),
        message,
    });
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The default scenario: `n = 2`, `tau = i + 0.1 w`, `q = +-(0.2 + 0.1 w)`.
    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("the shipped default scenario parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn tau(&self) -> ComplexPoly {
        poly(&self.geometry.tau)
    }

    pub fn sheets(&self) -> Vec<ComplexPoly> {
        self.spectral.sheets.iter().map(|s| poly(s)).collect()
    }

    pub fn base_patch(&self, m: [usize; 2]) -> Result<BasePatch, LabError> {
        let g = &self.geometry;
        BasePatch::new((g.x1[0], g.x1[1]), (g.x2[0], g.x2[1]), m[0], m[1], self.tau())
    }

    pub fn grid(&self, base: [usize; 2], fiber: [usize; 2]) -> Result<FibrationGrid, LabError> {
        FibrationGrid::new(self.base_patch(base)?, fiber[0], fiber[1])
    }

    /// The spectral data without the distinctness check.
    pub fn data(&self) -> Result<SpectralData, LabError> {
        SpectralData::new(self.sheets(), self.spectral.margin)
    }

    pub fn theta(&self, base: &BasePatch) -> ThetaCocycle {
        self.theta.clone().unwrap_or_else(|| ThetaCocycle::trivial(base))
    }

    /// Centre of the base patch.
    pub fn center(&self) -> C64 {
        let g = &self.geometry;
        C64::new(0.5 * (g.x1[0] + g.x1[1]), 0.5 * (g.x2[0] + g.x2[1]))
    }

    /// True when some pair of sheets comes within the margin on the base grid.
    pub fn is_degenerate(&self) -> bool {
        match (self.data(), self.base_patch(self.geometry.base_resolution)) {
            (Ok(d), Ok(b)) => d.min_distance_on(&b) <= d.margin(),
            _ => false,
        }
    }

    /// Every violated invariant, with its location.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let g = &self.geometry;
        if self.scenario.name.trim().is_empty() {
            push(&mut issues, "scenario.name", "must not be empty".into());
        }
        for (key, r) in [("geometry.x1", g.x1), ("geometry.x2", g.x2)] {
            if !(r[0] < r[1]) {
                push(&mut issues, key, format!("interval [{}, {}] is empty", r[0], r[1]));
            }
        }
        if g.tau.is_empty() {
            push(&mut issues, "geometry.tau", "needs at least one coefficient".into());
        }
        for (k, &m) in g.base_resolution.iter().enumerate() {
            if m < 20 {
                push(&mut issues, 
                    "geometry.base_resolution",
                    format!("entry {k} is {m}; the convergence ladder m/4, m/2, m needs m >= 20"),
                );
            }
            if m % 4 != 0 {
                push(&mut issues, "geometry.base_resolution", format!("entry {k} is {m}; must be divisible by 4"));
            }
        }
        for (key, res) in [("geometry.fiber_resolution", g.fiber_resolution), ("run.scan_resolution", self.run.scan_resolution)] {
            for (k, &n) in res.iter().enumerate() {
                if n < 4 {
                    push(&mut issues, key, format!("entry {k} is {n}; fibers need at least 4 points"));
                }
            }
        }
        if g.t.is_empty() {
            push(&mut issues, "geometry.t", "needs at least one fiber area".into());
        }
        for (k, &t) in g.t.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                push(&mut issues, "geometry.t", format!("entry {k} is {t}; fiber areas must be positive"));
            }
        }
        let s = &self.spectral;
        if s.rank == 0 || s.sheets.len() != s.rank {
            push(&mut issues, 
                "spectral.sheets",
                format!("rank is {} but {} sheets are given", s.rank, s.sheets.len()),
            );
        }
        if s.sheets.iter().any(|c| c.is_empty()) {
            push(&mut issues, "spectral.sheets", "every sheet needs at least one coefficient".into());
        }
        let r = &self.run;
        for (key, v) in [
            ("run.flow_s_c0", r.flow_s_c0),
            ("run.gauge_fix_c0", r.gauge_fix_c0),
            ("run.poincare_cap", r.poincare_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                push(&mut issues, key, format!("{v} must be positive"));
            }
        }
        for (key, list) in [("run.slag_eps", &r.slag_eps), ("run.decay_t", &r.decay_t)] {
            if list.len() < 2 || list.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                push(&mut issues, key, "needs at least two positive values".into());
            }
        }
        for issue in r.tolerances.validate() {
            push(&mut issues, "run.tolerances", issue);
        }
        if !issues.is_empty() {
            return issues;
        }
        // Module invariants on the built objects.
        let base = match self.base_patch(g.base_resolution) {
            Ok(b) => b,
            Err(e) => {
                push(&mut issues, "geometry", e.to_string());
                return issues;
            }
        };
        let data = match self.data() {
            Ok(d) => d,
            Err(e) => {
                push(&mut issues, "spectral.sheets", e.to_string());
                return issues;
            }
        };
        if let Err(e) = data.validate_on(&base) {
            match e {
                LabError::NotDistinct { .. } if s.allow_degenerate => {}
                e => push(&mut issues, "spectral", format!("{e} (on the {}x{} base grid)", base.m1, base.m2)),
            }
        }
        if !self.is_degenerate() {
            let grid = FibrationGrid::new(base.clone(), g.fiber_resolution[0], g.fiber_resolution[1]);
            match grid.and_then(|grid| fm_transform(&data, &self.theta(&base), &grid)) {
                Ok(_) => {}
                Err(e) => push(&mut issues, "theta", e.to_string()),
            }
        }
        issues
    }

    /// Parse-time and invariant checks together.
    pub fn validated(self) -> Result<Self, ScenarioError> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        let s = Scenario::default_scenario();
        assert_eq!(s.validate(), vec![]);
        assert_eq!(s.spectral.rank, 2);
        assert!(!s.is_degenerate());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_SCENARIO.replace("[geometry]", "[geometry]\ntua = 3");
        assert!(matches!(Scenario::parse(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn every_issue_is_listed() {
        let mut s = Scenario::default_scenario();
        s.geometry.t = vec![0.1, -1.0];
        s.geometry.x1 = [1.0, -1.0];
        s.spectral.rank = 3;
        let issues = s.validate();
        let locations: Vec<&str> = issues.iter().map(|i| i.location.as_str()).collect();
        assert!(locations.contains(&"geometry.t"));
        assert!(locations.contains(&"geometry.x1"));
        assert!(locations.contains(&"spectral.sheets"));
    }

    #[test]
    fn trace_and_distinctness_are_checked() {
        let mut s = Scenario::default_scenario();
        s.spectral.sheets[1][0] = Cx(C64::new(-0.3, 0.0));
        assert!(s.validate().iter().any(|i| i.location == "spectral.sheets"));
        let mut s = Scenario::default_scenario();
        s.spectral.sheets = vec![vec![Cx(C64::new(0.0, 0.0))], vec![Cx(C64::new(0.0, 0.0))]];
        assert!(s.validate().iter().any(|i| i.message.contains("mod the lattice")));
        s.spectral.allow_degenerate = true;
        assert_eq!(s.validate(), vec![]);
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::default_scenario();
        assert_eq!(Scenario::parse(&s.to_toml()).unwrap(), s);
    }
}
