//! Flat twisting data on the spectral cover: base charts, overlaps and
//! per-sheet constant phases.

use serde::{Deserialize, Serialize};

use crate::fibration::BasePatch;
use crate::{LabError, Result};

/// Tolerance on the phase sum around a triple overlap, in turns.
pub const COCYCLE_TOL: f64 = 1e-12;

/// A region of the base plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChartRegion {
    Rect {
        x1: (f64, f64),
        x2: (f64, f64),
    },
    Disk {
        center: (f64, f64),
        radius: f64,
    },
    /// `r_in <= |x - center| <= r_out` and polar angle in `[start_deg, end_deg]`.
    /// The centre itself belongs to every sector with `r_in = 0`.
    AnnularSector {
        center: (f64, f64),
        r_in: f64,
        r_out: f64,
        start_deg: f64,
        end_deg: f64,
    },
}

impl ChartRegion {
    pub fn contains(&self, x: (f64, f64)) -> bool {
        match *self {
            ChartRegion::Rect { x1, x2 } => (x1.0..=x1.1).contains(&x.0) && (x2.0..=x2.1).contains(&x.1),
            ChartRegion::Disk { center, radius } => (x.0 - center.0).hypot(x.1 - center.1) <= radius,
            ChartRegion::AnnularSector {
                center,
                r_in,
                r_out,
                start_deg,
                end_deg,
            } => {
                let (dx, dy) = (x.0 - center.0, x.1 - center.1);
                let r = dx.hypot(dy);
                if r < r_in || r > r_out {
                    return false;
                }
                if r == 0.0 {
                    return true;
                }
                let ang = dy.atan2(dx).to_degrees();
                (ang - start_deg).rem_euclid(360.0) <= end_deg - start_deg
            }
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ChartRegion::Rect { x1, x2 } => x1.0 < x1.1 && x2.0 < x2.1,
            ChartRegion::Disk { radius, .. } => radius > 0.0,
            ChartRegion::AnnularSector {
                r_in,
                r_out,
                start_deg,
                end_deg,
                ..
            } => r_in >= 0.0 && r_in < r_out && start_deg < end_deg && end_deg - start_deg <= 360.0,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidGeometry(format!("degenerate chart region {self:?}")))
        }
    }
}

/// Which global sheet a chart's local sheet is, and the lattice vector
/// `m + n tau` added to it in this chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetLabel {
    pub source: usize,
    #[serde(default)]
    pub shift: (i64, i64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chart {
    pub name: String,
    pub region: ChartRegion,
    /// Local sheet labels; identity with zero shifts when absent.
    #[serde(default)]
    pub sheets: Option<Vec<SheetLabel>>,
}

impl Chart {
    pub fn labels(&self, n: usize) -> Vec<SheetLabel> {
        self.sheets
            .clone()
            .unwrap_or_else(|| (0..n).map(|source| SheetLabel { source, shift: (0, 0) }).collect())
    }
}

/// A transition from chart `from` to chart `to`: local sheet `i` of `from`
/// continues as sheet `sheet_map[i]` of `to`, with phase `exp(2 pi i phases[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overlap {
    pub from: usize,
    pub to: usize,
    /// Restricts the transition to part of the chart intersection.
    #[serde(default)]
    pub region: Option<ChartRegion>,
    /// Per-sheet phases in turns.
    pub phases: Vec<f64>,
    /// Detected by lattice matching when absent.
    #[serde(default)]
    pub sheet_map: Option<Vec<usize>>,
}

impl Overlap {
    /// Grid points where the transition applies.
    pub fn points(&self, charts: &[Chart], base: &BasePatch) -> Vec<(usize, usize)> {
        let (m1, m2) = base.resolution();
        (0..m1)
            .flat_map(|i| (0..m2).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let x = base.x(i, j);
                charts[self.from].region.contains(x)
                    && charts[self.to].region.contains(x)
                    && self.region.as_ref().is_none_or(|r| r.contains(x))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaCocycle {
    pub charts: Vec<Chart>,
    #[serde(default)]
    pub overlaps: Vec<Overlap>,
}

fn check_permutation(p: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    if p.len() != n {
        return Err(LabError::ShapeMismatch(format!("{what} has {} entries for {n} sheets", p.len())));
    }
    for &k in p {
        if k >= n || std::mem::replace(&mut seen[k], true) {
            return Err(LabError::SheetMismatch(format!("{what} is not a permutation: {p:?}")));
        }
    }
    Ok(())
}

impl ThetaCocycle {
    /// One chart covering `base`, no overlaps.
    pub fn trivial(base: &BasePatch) -> Self {
        Self {
            charts: vec![Chart {
                name: "patch".into(),
                region: ChartRegion::Rect { x1: base.x1, x2: base.x2 },
                sheets: None,
            }],
            overlaps: Vec::new(),
        }
    }

    /// Two sectors `(-100, 100)` and `(80, 280)` degrees around `center`,
    /// glued with zero phases on both overlap wedges.
    pub fn annulus(center: (f64, f64), r_in: f64, r_out: f64, n: usize) -> Self {
        let sector = |start_deg: f64, end_deg: f64| ChartRegion::AnnularSector {
            center,
            r_in,
            r_out,
            start_deg,
            end_deg,
        };
        let chart = |name: &str, region| Chart {
            name: name.into(),
            region,
            sheets: None,
        };
        let overlap = |region| Overlap {
            from: 0,
            to: 1,
            region: Some(region),
            phases: vec![0.0; n],
            sheet_map: None,
        };
        Self {
            charts: vec![chart("east", sector(-100.0, 100.0)), chart("west", sector(80.0, 280.0))],
            overlaps: vec![overlap(sector(80.0, 100.0)), overlap(sector(260.0, 280.0))],
        }
    }

    /// Sheet index and phase after crossing overlap `o` from local sheet `i`,
    /// forwards or backwards.
    pub fn step(&self, o: usize, forward: bool, i: usize) -> (usize, f64) {
        let ov = &self.overlaps[o];
        let n = ov.phases.len();
        let map: Vec<usize> = ov.sheet_map.clone().unwrap_or_else(|| (0..n).collect());
        if forward {
            (map[i], ov.phases[i])
        } else {
            let k = map.iter().position(|&s| s == i).expect("sheet maps are permutations");
            (k, -ov.phases[k])
        }
    }

    /// Check chart, overlap and triple-overlap consistency for rank `n` over
    /// the points of `base`.
    pub fn validate(&self, n: usize, base: &BasePatch) -> Result<()> {
        if self.charts.is_empty() {
            return Err(LabError::InvalidGeometry("the cover has no charts".into()));
        }
        for c in &self.charts {
            c.region.check()?;
            let src: Vec<usize> = c.labels(n).iter().map(|l| l.source).collect();
            check_permutation(&src, n, &format!("chart '{}' labels", c.name))?;
        }
        for (k, o) in self.overlaps.iter().enumerate() {
            if o.from >= self.charts.len() || o.to >= self.charts.len() || o.from == o.to {
                return Err(LabError::InvalidGeometry(format!(
                    "overlap {k} joins charts {} and {}",
                    o.from, o.to
                )));
            }
            if let Some(r) = &o.region {
                r.check()?;
            }
            if o.phases.len() != n || o.phases.iter().any(|p| !p.is_finite()) {
                return Err(LabError::ShapeMismatch(format!("overlap {k} needs {n} finite phases")));
            }
            if let Some(m) = &o.sheet_map {
                check_permutation(m, n, &format!("overlap {k} sheet map"))?;
            }
        }
        self.check_triples(n, base)
    }

    fn check_triples(&self, n: usize, base: &BasePatch) -> Result<()> {
        // Overlaps incident to each chart pair, in either direction.
        let joins = |a: usize, b: usize| -> Vec<(usize, bool)> {
            self.overlaps
                .iter()
                .enumerate()
                .filter_map(|(k, o)| match (o.from, o.to) {
                    (f, t) if f == a && t == b => Some((k, true)),
                    (f, t) if f == b && t == a => Some((k, false)),
                    _ => None,
                })
                .collect()
        };
        let points: Vec<Vec<(usize, usize)>> = self.overlaps.iter().map(|o| o.points(&self.charts, base)).collect();
        let nc = self.charts.len();
        for a in 0..nc {
            for b in a + 1..nc {
                for c in b + 1..nc {
                    for &(o1, f1) in &joins(a, b) {
                        for &(o2, f2) in &joins(b, c) {
                            for &(o3, f3) in &joins(c, a) {
                                let shared = points[o1]
                                    .iter()
                                    .any(|p| points[o2].contains(p) && points[o3].contains(p));
                                if !shared {
                                    continue;
                                }
                                for i in 0..n {
                                    let (j, p1) = self.step(o1, f1, i);
                                    let (k, p2) = self.step(o2, f2, j);
                                    let (back, p3) = self.step(o3, f3, k);
                                    let total = p1 + p2 + p3;
                                    let defect = (total - total.round()).abs();
                                    if back != i || defect > COCYCLE_TOL {
                                        return Err(LabError::CocycleViolation(format!(
                                            "charts ({a}, {b}, {c}), sheet {i}: returns to sheet {back} with phase defect {defect:.3e}"
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The cocycle `g' = s_from g s_to^{-1}` for per-chart, per-local-sheet
    /// phases `s` (turns). It defines an isomorphic twist.
    pub fn cohomologous(&self, s: &[Vec<f64>]) -> Result<Self> {
        if s.len() != self.charts.len() {
            return Err(LabError::ShapeMismatch(format!(
                "{} chart phase vectors for {} charts",
                s.len(),
                self.charts.len()
            )));
        }
        let mut out = self.clone();
        for (k, o) in out.overlaps.iter_mut().enumerate() {
            let n = o.phases.len();
            if s[o.from].len() != n || s[o.to].len() != n {
                return Err(LabError::ShapeMismatch(format!("chart phases do not match overlap {k}")));
            }
            let map: Vec<usize> = o.sheet_map.clone().unwrap_or_else(|| (0..n).collect());
            for i in 0..n {
                o.phases[i] += s[o.from][i] - s[o.to][map[i]];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ComplexPoly;
    use crate::C64;

    fn base() -> BasePatch {
        BasePatch::new((-1.0, 1.0), (-1.0, 1.0), 16, 16, ComplexPoly::constant(C64::new(0.0, 1.0))).unwrap()
    }

    fn three_disks(phases: [f64; 3]) -> ThetaCocycle {
        let disk = |c: (f64, f64)| Chart {
            name: format!("{c:?}"),
            region: ChartRegion::Disk { center: c, radius: 1.2 },
            sheets: None,
        };
        let ov = |from, to, p: f64| Overlap {
            from,
            to,
            region: None,
            phases: vec![p, -p],
            sheet_map: None,
        };
        ThetaCocycle {
            charts: vec![disk((-0.5, 0.0)), disk((0.5, 0.0)), disk((0.0, 0.5))],
            overlaps: vec![ov(0, 1, phases[0]), ov(1, 2, phases[1]), ov(2, 0, phases[2])],
        }
    }

    #[test]
    fn sectors_and_wedges() {
        let t = ThetaCocycle::annulus((0.0, 0.0), 0.0, 10.0, 2);
        assert!(t.charts[0].region.contains((1.0, 0.0)));
        assert!(!t.charts[0].region.contains((-1.0, 0.0)));
        assert!(t.charts[1].region.contains((-1.0, 0.0)));
        assert!(t.overlaps[0].region.as_ref().unwrap().contains((0.0, 1.0)));
        assert!(t.overlaps[1].region.as_ref().unwrap().contains((0.0, -1.0)));
        t.validate(2, &base()).unwrap();
        assert!(!t.overlaps[0].points(&t.charts, &base()).is_empty());
    }

    #[test]
    fn triple_overlaps_enforced() {
        three_disks([0.1, 0.2, -0.3]).validate(2, &base()).unwrap();
        three_disks([0.1, 0.2, 0.7]).validate(2, &base()).unwrap();
        let bad = three_disks([0.1, 0.2, -0.25]);
        assert!(matches!(bad.validate(2, &base()), Err(LabError::CocycleViolation(_))));
    }

    #[test]
    fn cohomologous_twist_stays_a_cocycle() {
        let t = three_disks([0.1, 0.2, -0.3]);
        let s = vec![vec![0.3, -0.1], vec![0.05, 0.2], vec![-0.4, 0.15]];
        t.cohomologous(&s).unwrap().validate(2, &base()).unwrap();
    }

    #[test]
    fn rejects_bad_sheet_map() {
        let mut t = ThetaCocycle::annulus((0.0, 0.0), 0.0, 10.0, 2);
        t.overlaps[0].sheet_map = Some(vec![1, 1]);
        assert!(matches!(t.validate(2, &base()), Err(LabError::SheetMismatch(_))));
    }

    #[test]
    fn config_round_trip() {
        let t = ThetaCocycle::annulus((0.0, 0.0), 0.0, 10.0, 2);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<ThetaCocycle>(&s).unwrap(), t);
    }
}
