//! The Fourier–Mukai connection of local spectral data: per chart, the flat
//! family assembled over the base with no base components, and the diagonal
//! transition functions between charts.

use std::borrow::Cow;
use std::f64::consts::TAU;

use crate::fiber::{FieldFlags, FiberField};
use crate::fibration::{
    AnalyticConnection, BaseDerivative, ConnectionFamily, ConnectionSlice, FibrationGrid, TotalConnection,
};
use crate::linalg::{self, CMat};
use crate::poly::ComplexPoly;
use crate::{LabError, Result, C64};

use super::cocycle::ThetaCocycle;
use super::data::{reduce_mod_lattice, SpectralData, TRACE_TOL};
use super::flat::{chern_components, chern_components_derivative, flat_connection};

/// Largest distance from the lattice accepted when matching sheets.
pub const SHEET_MATCH_TOL: f64 = 1e-9;

/// The diagonal connection `pi W (diag(q) theta_bar - diag(q_bar) theta)` with
/// sheets `q_j(w)` given per chart. Slices are built on demand.
#[derive(Clone, Debug)]
pub struct FmConnection {
    grid: FibrationGrid,
    sheets: Vec<ComplexPoly>,
    flags: FieldFlags,
}

impl FmConnection {
    pub fn new(grid: FibrationGrid, sheets: Vec<ComplexPoly>) -> Self {
        let sum = sheets.iter().fold(ComplexPoly::default(), |acc, p| acc.add(p));
        let traceless = sum.coeffs.iter().all(|c| c.norm() <= TRACE_TOL);
        let flags = FieldFlags {
            anti_hermitian: true,
            traceless,
        };
        Self { grid, sheets, flags }
    }

    /// The single-chart connection of `data`, validated on the whole grid.
    pub fn from_data(data: &SpectralData, grid: FibrationGrid) -> Result<Self> {
        data.validate_on(&grid.base)?;
        Ok(Self::new(grid, data.polys().to_vec()))
    }

    pub fn sheets(&self) -> &[ComplexPoly] {
        &self.sheets
    }

    pub fn sheet_values(&self, w: C64) -> Vec<C64> {
        self.sheets.iter().map(|p| p.eval(w)).collect()
    }

    /// The same sheets over a different grid.
    pub fn on_grid(&self, grid: FibrationGrid) -> Self {
        Self { grid, ..self.clone() }
    }

    /// Store every slice explicitly.
    pub fn materialize(&self) -> Result<TotalConnection> {
        TotalConnection::materialize(self)
    }

    fn diag(&self, entries: impl Iterator<Item = (C64, C64)>) -> [CMat; 2] {
        let n = self.sheets.len();
        let mut out = [CMat::zeros(n, n), CMat::zeros(n, n)];
        for (k, (a1, a2)) in entries.enumerate() {
            out[0][(k, k)] = a1;
            out[1][(k, k)] = a2;
        }
        out
    }
}

impl ConnectionFamily for FmConnection {
    fn grid(&self) -> &FibrationGrid {
        &self.grid
    }

    fn matrix_size(&self) -> usize {
        self.sheets.len()
    }

    fn slice(&self, i: usize, j: usize) -> Result<Cow<'_, ConnectionSlice>> {
        let geom = self.grid.fiber_geometry(i, j)?;
        let a = flat_connection(&self.sheet_values(self.grid.base.w(i, j)), &geom)?.with_flags(self.flags);
        let z = FiberField::zeros(0, self.sheets.len(), geom.resolution())?.with_flags(self.flags);
        Ok(Cow::Owned(ConnectionSlice { a, b: [z.clone(), z] }))
    }
}

impl BaseDerivative for FmConnection {
    fn base_derivative(&self, i: usize, j: usize) -> Result<[FiberField; 2]> {
        let geom = self.grid.fiber_geometry(i, j)?;
        let w = self.grid.base.w(i, j);
        let (tau, dtau) = (geom.tau(), self.grid.base.tau_prime_at(i, j));
        let q = self.sheet_values(w);
        let dq: Vec<C64> = self.sheets.iter().map(|p| p.derivative().eval(w)).collect();
        let mut out = Vec::with_capacity(2);
        for s in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let blocks = self.diag((0..q.len()).map(|k| chern_components_derivative(q[k], tau, dq[k] * s, dtau * s)));
            out.push(FiberField::constant(&geom, 1, &blocks)?.with_flags(self.flags));
        }
        let second = out.pop().expect("two directions");
        let first = out.pop().expect("two directions");
        Ok([first, second])
    }
}

impl AnalyticConnection for FmConnection {
    fn matrix_size(&self) -> usize {
        self.sheets.len()
    }

    fn flags(&self) -> FieldFlags {
        self.flags
    }

    fn eval(&self, x: [f64; 4]) -> [CMat; 4] {
        let w = C64::new(x[0], x[1]);
        let tau = self.grid.base.tau.eval(w);
        let n = self.sheets.len();
        let [a1, a2] = self.diag(self.sheet_values(w).into_iter().map(|q| chern_components(q, tau)));
        [CMat::zeros(n, n), CMat::zeros(n, n), a1, a2]
    }
}

/// One chart of the transform: its grid points and connection.
#[derive(Clone, Debug)]
pub struct ChartConnection {
    pub name: String,
    pub points: Vec<(usize, usize)>,
    pub connection: FmConnection,
}

/// Gluing data on one overlap: local sheet `i` of `from` continues as sheet
/// `sheet_map[i]` of `to`, and the transition is
/// `exp(2 pi i phases[i]) exp(2 pi i (n_i y1 - m_i y2))` with
/// `(m_i, n_i) = shifts[i]` the lattice vector between the two sheet values.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub overlap: usize,
    pub from: usize,
    pub to: usize,
    pub sheet_map: Vec<usize>,
    pub phases: Vec<f64>,
    pub shifts: Vec<(i64, i64)>,
    pub points: Vec<(usize, usize)>,
}

impl Transition {
    /// `g` with `g[(i, sheet_map[i])]` the transition of sheet `i`.
    pub fn matrix(&self, y: (f64, f64)) -> CMat {
        let n = self.sheet_map.len();
        let mut g = CMat::zeros(n, n);
        for i in 0..n {
            let (m, k) = self.shifts[i];
            let turns = self.phases[i] + k as f64 * y.0 - m as f64 * y.1;
            g[(i, self.sheet_map[i])] = C64::from_polar(1.0, TAU * turns);
        }
        g
    }

    /// `g^{-1} dg` along `(dy1, dy2)`; diagonal in the target labelling.
    pub fn log_derivative(&self) -> [CMat; 2] {
        let n = self.sheet_map.len();
        let mut out = [CMat::zeros(n, n), CMat::zeros(n, n)];
        for i in 0..n {
            let (m, k) = self.shifts[i];
            let t = self.sheet_map[i];
            out[0][(t, t)] = C64::new(0.0, TAU * k as f64);
            out[1][(t, t)] = C64::new(0.0, -TAU * m as f64);
        }
        out
    }
}

/// The transform: chart connections and the transitions between them.
#[derive(Clone, Debug)]
pub struct FmTransform {
    pub grid: FibrationGrid,
    pub charts: Vec<ChartConnection>,
    pub transitions: Vec<Transition>,
}

/// Build the chart connections of `data` twisted by `theta` on `grid`.
pub fn fm_transform(data: &SpectralData, theta: &ThetaCocycle, grid: &FibrationGrid) -> Result<FmTransform> {
    let n = data.rank();
    let base = &grid.base;
    theta.validate(n, base)?;
    let (m1, m2) = base.resolution();
    let all: Vec<(usize, usize)> = (0..m1).flat_map(|i| (0..m2).map(move |j| (i, j))).collect();
    if let Some(&(i, j)) = all
        .iter()
        .find(|&&(i, j)| !theta.charts.iter().any(|c| c.region.contains(base.x(i, j))))
    {
        return Err(LabError::InvalidGeometry(format!(
            "base point ({i}, {j}) at {:?} is not covered by any chart",
            base.x(i, j)
        )));
    }
    let mut charts = Vec::with_capacity(theta.charts.len());
    for chart in &theta.charts {
        let sheets: Vec<ComplexPoly> = chart
            .labels(n)
            .iter()
            .map(|l| {
                let (m, k) = l.shift;
                data.polys()[l.source].add(&ComplexPoly::constant(C64::new(m as f64, 0.0)).add(&base.tau.scale(C64::new(k as f64, 0.0))))
            })
            .collect();
        let points: Vec<(usize, usize)> = all.iter().copied().filter(|&(i, j)| chart.region.contains(base.x(i, j))).collect();
        for &(i, j) in &points {
            data.check_distinct(base.w(i, j), base.tau_at(i, j))?;
        }
        charts.push(ChartConnection {
            name: chart.name.clone(),
            points,
            connection: FmConnection::new(grid.clone(), sheets),
        });
    }
    let transitions = theta
        .overlaps
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let points = o.points(&theta.charts, base);
            if points.is_empty() {
                return Err(LabError::InvalidGeometry(format!("overlap {k} contains no base grid points")));
            }
            let (src, dst) = (&charts[o.from].connection, &charts[o.to].connection);
            let (sheet_map, shifts) = match_sheets(k, src, dst, o.sheet_map.as_deref(), &points, grid)?;
            Ok(Transition {
                overlap: k,
                from: o.from,
                to: o.to,
                sheet_map,
                phases: o.phases.clone(),
                shifts,
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FmTransform {
        grid: grid.clone(),
        charts,
        transitions,
    })
}

/// Match sheets across an overlap by nearest lattice representative; the
/// matching and the lattice vectors must be the same at every point.
fn match_sheets(
    k: usize,
    src: &FmConnection,
    dst: &FmConnection,
    given: Option<&[usize]>,
    points: &[(usize, usize)],
    grid: &FibrationGrid,
) -> Result<(Vec<usize>, Vec<(i64, i64)>)> {
    let n = src.sheets.len();
    let mut found: Option<(Vec<usize>, Vec<(i64, i64)>)> = None;
    for &(i, j) in points {
        let (w, tau) = (grid.base.w(i, j), grid.base.tau_at(i, j));
        let (a, b) = (src.sheet_values(w), dst.sheet_values(w));
        let mut map = Vec::with_capacity(n);
        let mut shifts = Vec::with_capacity(n);
        for s in 0..n {
            let candidates: Vec<(usize, (i64, i64))> = (0..n)
                .filter(|&t| given.is_none_or(|g| g[s] == t))
                .filter_map(|t| {
                    let r = reduce_mod_lattice(b[t] - a[s], tau);
                    (r.value.norm() <= SHEET_MATCH_TOL).then_some((t, r.shift))
                })
                .collect();
            match candidates.as_slice() {
                [(t, shift)] => {
                    map.push(*t);
                    shifts.push(*shift);
                }
                [] => {
                    return Err(LabError::SheetMismatch(format!(
                        "{k}: sheet {s} has no continuation at base point ({i}, {j})"
                    )))
                }
                _ => {
                    return Err(LabError::SheetMismatch(format!(
                        "{k}: sheet {s} has several continuations at base point ({i}, {j})"
                    )))
                }
            }
        }
        match &found {
            None => found = Some((map, shifts)),
            Some((m0, s0)) if *m0 == map && *s0 == shifts => {}
            Some(_) => {
                return Err(LabError::SheetMismatch(format!(
                    "{k}: sheet labels jump at base point ({i}, {j})"
                )))
            }
        }
    }
    found.ok_or_else(|| LabError::InvalidGeometry(format!("overlap {k} contains no base grid points")))
}

impl FmTransform {
    /// `sup |g^{-1} A_from g + g^{-1} dg - A_to|` over overlap and fiber points.
    pub fn overlap_consistency_residual(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for t in &self.transitions {
            let dlog = t.log_derivative();
            for &(i, j) in &t.points {
                let geom = self.grid.fiber_geometry(i, j)?;
                let src = self.charts[t.from].connection.slice(i, j)?;
                let dst = self.charts[t.to].connection.slice(i, j)?;
                for p in 0..geom.points() {
                    let g = t.matrix(geom.coords(p));
                    for c in 0..2 {
                        let lhs = g.adjoint() * src.a.matrix(p, c) * &g + &dlog[c];
                        let d = lhs - dst.a.matrix(p, c);
                        worst = worst.max(d.iter().fold(0.0f64, |m, z| m.max(z.norm())));
                    }
                }
            }
        }
        Ok(worst)
    }

    /// The product of transitions along a closed chain of overlaps at fiber
    /// point `y`, earlier crossings on the left. Steps are `(transition,
    /// forward)`; backward steps use `g^{-1}`.
    pub fn base_loop_holonomy(&self, path: &[(usize, bool)], y: (f64, f64)) -> Result<CMat> {
        let ends = |&(k, fwd): &(usize, bool)| -> Result<(usize, usize)> {
            let t = self
                .transitions
                .get(k)
                .ok_or_else(|| LabError::InvalidGeometry(format!("no transition {k}")))?;
            Ok(if fwd { (t.from, t.to) } else { (t.to, t.from) })
        };
        let first = path
            .first()
            .ok_or_else(|| LabError::InvalidGeometry("empty base loop".into()))?;
        let start = ends(first)?.0;
        let n = self.charts[start].connection.sheets.len();
        let mut at = start;
        let mut h = CMat::identity(n, n);
        for step in path {
            let (from, to) = ends(step)?;
            if from != at {
                return Err(LabError::InvalidGeometry(format!(
                    "base loop leaves chart {at} through a transition from chart {from}"
                )));
            }
            let g = self.transitions[step.0].matrix(y);
            h = if step.1 { h * g } else { h * g.adjoint() };
            at = to;
        }
        if at != start {
            return Err(LabError::InvalidGeometry(format!("base loop ends in chart {at}, not {start}")));
        }
        Ok(h)
    }

    /// Eigenvalue phases (turns) of [`Self::base_loop_holonomy`].
    pub fn base_loop_phases(&self, path: &[(usize, bool)], y: (f64, f64)) -> Result<Vec<f64>> {
        Ok(linalg::unitary_phases(&self.base_loop_holonomy(path, y)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::BasePatch;
    use crate::spectral::cocycle::SheetLabel;
    use crate::spectral::data::DEFAULT_MARGIN;
    use crate::spectral::flat::flat_family;

    fn setup(m: usize) -> (SpectralData, FibrationGrid) {
        let tau = ComplexPoly::linear(C64::new(0.0, 1.0), C64::new(0.1, 0.0));
        let base = BasePatch::new((-1.0, 1.0), (-1.0, 1.0), m, m, tau).unwrap();
        let q = ComplexPoly::linear(C64::new(0.2, 0.0), C64::new(0.1, 0.0));
        let data = SpectralData::new(vec![q.clone(), q.scale(C64::new(-1.0, 0.0))], DEFAULT_MARGIN).unwrap();
        (data, FibrationGrid::new(base, 8, 8).unwrap())
    }

    #[test]
    fn single_chart_is_the_flat_family() {
        let (data, grid) = setup(8);
        let fm = fm_transform(&data, &ThetaCocycle::trivial(&grid.base), &grid).unwrap();
        assert_eq!(fm.charts.len(), 1);
        let conn = fm.charts[0].connection.materialize().unwrap();
        for (k, s) in conn.slices().iter().enumerate() {
            let (i, j) = grid.base.unindex(k);
            let geom = grid.fiber_geometry(i, j).unwrap();
            let reference = flat_family(&data, grid.base.w(i, j), &geom).unwrap();
            assert_eq!(s.a.sub(&reference).unwrap().max_abs(), 0.0);
            assert_eq!(s.b[0].max_abs() + s.b[1].max_abs(), 0.0);
        }
    }

    #[test]
    fn annulus_overlaps_are_consistent_and_twists_conjugate() {
        let (data, grid) = setup(16);
        let mut theta = ThetaCocycle::annulus((0.0, 0.0), 0.0, 10.0, 2);
        theta.overlaps[0].phases = vec![0.15, -0.15];
        theta.overlaps[1].phases = vec![-0.05, 0.05];
        // Relabel the west chart: sheets swapped, one shifted by a lattice vector.
        theta.charts[1].sheets = Some(vec![
            SheetLabel { source: 1, shift: (1, 0) },
            SheetLabel { source: 0, shift: (0, -1) },
        ]);
        let fm = fm_transform(&data, &theta, &grid).unwrap();
        assert_eq!(fm.transitions[0].sheet_map, vec![1, 0]);
        assert_eq!(fm.transitions[0].shifts, vec![(0, -1), (1, 0)]);
        assert!(fm.overlap_consistency_residual().unwrap() < 1e-13);

        let path = [(0, true), (1, false)];
        let y = (0.3, 0.7);
        let phases = fm.base_loop_phases(&path, y).unwrap();
        let expect = [-0.2, 0.2];
        assert!(crate::linalg::phase_multiset_distance(&phases, &expect) < 1e-12);

        let s = vec![vec![0.31, -0.12], vec![0.07, 0.44]];
        let twisted = fm_transform(&data, &theta.cohomologous(&s).unwrap(), &grid).unwrap();
        assert!(twisted.overlap_consistency_residual().unwrap() < 1e-13);
        let other = twisted.base_loop_phases(&path, y).unwrap();
        assert!(crate::linalg::phase_multiset_distance(&phases, &other) < 1e-12);
    }

    #[test]
    fn wrong_sheet_map_is_reported() {
        let (data, grid) = setup(16);
        let mut theta = ThetaCocycle::annulus((0.0, 0.0), 0.0, 10.0, 2);
        theta.overlaps[0].sheet_map = Some(vec![1, 0]);
        assert!(matches!(fm_transform(&data, &theta, &grid), Err(LabError::SheetMismatch(_))));
    }

    #[test]
    fn uncovered_points_rejected() {
        let (data, grid) = setup(8);
        let theta = ThetaCocycle::annulus((0.0, 0.0), 0.5, 10.0, 2);
        assert!(matches!(fm_transform(&data, &theta, &grid), Err(LabError::InvalidGeometry(_))));
    }

    #[test]
    fn exact_base_derivative_matches_sampling() {
        let (data, grid) = setup(8);
        let fm = FmConnection::from_data(&data, grid.clone()).unwrap();
        let d = fm.base_derivative(3, 4).unwrap();
        let (x1, x2) = grid.base.x(3, 4);
        let h = 1e-5;
        let comp = |x: [f64; 4]| fm.eval(x)[2][(0, 0)];
        let fd = (comp([x1 + h, x2, 0.0, 0.0]) - comp([x1 - h, x2, 0.0, 0.0])) / (2.0 * h);
        assert!((fd - d[0].matrix(0, 0)[(0, 0)]).norm() < 1e-8);
        let fd = (comp([x1, x2 + h, 0.0, 0.0]) - comp([x1, x2 - h, 0.0, 0.0])) / (2.0 * h);
        assert!((fd - d[1].matrix(0, 0)[(0, 0)]).norm() < 1e-8);
    }
}
