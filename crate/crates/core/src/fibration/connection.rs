//! Connections `Xi = A + B1 dx1 + B2 dx2` on the total space.

use std::borrow::Cow;

use crate::fiber::{FieldFlags, FiberField, FiberGeometry};
use crate::linalg::CMat;
use crate::{LabError, Result};

use super::base::FibrationGrid;

/// The restriction of a connection to one fiber: the fiber part `A` and the
/// base components `B1`, `B2` as fiber 0-forms.
#[derive(Clone, Debug)]
pub struct ConnectionSlice {
    pub a: FiberField,
    pub b: [FiberField; 2],
}

impl ConnectionSlice {
    pub fn zero(n: usize, res: (usize, usize), flags: FieldFlags) -> Result<Self> {
        let z0 = FiberField::zeros(0, n, res)?.with_flags(flags);
        Ok(Self {
            a: FiberField::zeros(1, n, res)?.with_flags(flags),
            b: [z0.clone(), z0],
        })
    }

    /// Check the declared flags on every component.
    pub fn validate(&self, tol: f64) -> Result<()> {
        self.a.validate(tol)?;
        self.b[0].validate(tol)?;
        self.b[1].validate(tol)
    }
}

/// A connection on the total space, evaluated one fiber at a time.
pub trait ConnectionFamily: Sync {
    fn grid(&self) -> &FibrationGrid;
    fn matrix_size(&self) -> usize;
    fn slice(&self, i: usize, j: usize) -> Result<Cow<'_, ConnectionSlice>>;
}

/// Exact base derivatives `d/dx_j A` of the fiber part, where available.
pub trait BaseDerivative: Sync {
    fn base_derivative(&self, i: usize, j: usize) -> Result<[FiberField; 2]>;
}

/// A connection stored explicitly at every base point.
#[derive(Clone, Debug)]
pub struct TotalConnection {
    grid: FibrationGrid,
    n: usize,
    slices: Vec<ConnectionSlice>,
}

/// Tolerance on component flags when a connection is assembled.
pub const FLAG_TOL: f64 = 1e-12;

impl TotalConnection {
    pub fn new(grid: FibrationGrid, slices: Vec<ConnectionSlice>) -> Result<Self> {
        if slices.len() != grid.base.len() {
            return Err(LabError::ShapeMismatch(format!(
                "{} slices for {} base points",
                slices.len(),
                grid.base.len()
            )));
        }
        let n = slices.first().map(|s| s.a.matrix_size()).unwrap_or(1);
        for (k, s) in slices.iter().enumerate() {
            let (i, j) = grid.base.unindex(k);
            if s.a.degree() != 1 || s.b.iter().any(|b| b.degree() != 0) {
                return Err(LabError::ShapeMismatch(format!("slice ({i}, {j}) has wrong form degrees")));
            }
            if s.a.matrix_size() != n || s.a.resolution() != grid.fiber {
                return Err(LabError::ShapeMismatch(format!("slice ({i}, {j}) has the wrong shape")));
            }
            for b in &s.b {
                s.a.check_shape(b)?;
            }
            s.validate(FLAG_TOL)
                .map_err(|e| LabError::InvariantViolation(format!("base point ({i}, {j}): {e}")))?;
        }
        Ok(Self { grid, n, slices })
    }

    pub fn zero(grid: FibrationGrid, n: usize) -> Result<Self> {
        let s = ConnectionSlice::zero(n, grid.fiber, FieldFlags::SU)?;
        let slices = vec![s; grid.base.len()];
        Ok(Self { grid, n, slices })
    }

    /// Evaluate every slice of `family` and store it.
    pub fn materialize(family: &dyn ConnectionFamily) -> Result<Self> {
        let grid = family.grid().clone();
        let (m1, m2) = grid.base.resolution();
        let slices = (0..m1)
            .flat_map(|i| (0..m2).map(move |j| (i, j)))
            .map(|(i, j)| family.slice(i, j).map(Cow::into_owned))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, slices)
    }

    pub fn slices(&self) -> &[ConnectionSlice] {
        &self.slices
    }

    pub fn slices_mut(&mut self) -> &mut [ConnectionSlice] {
        &mut self.slices
    }
}

impl ConnectionFamily for TotalConnection {
    fn grid(&self) -> &FibrationGrid {
        &self.grid
    }

    fn matrix_size(&self) -> usize {
        self.n
    }

    fn slice(&self, i: usize, j: usize) -> Result<Cow<'_, ConnectionSlice>> {
        Ok(Cow::Borrowed(&self.slices[self.grid.base.index(i, j)]))
    }
}

/// A connection given in closed form on `R^2 x R^2`, periodic in `(y1, y2)`.
pub trait AnalyticConnection: Sync {
    fn matrix_size(&self) -> usize;
    fn flags(&self) -> FieldFlags;
    /// Components along `(dx1, dx2, dy1, dy2)` at `(x1, x2, y1, y2)`.
    fn eval(&self, x: [f64; 4]) -> [CMat; 4];
}

/// An analytic connection sampled on a fibration grid.
pub struct SampledConnection<'a, C: ?Sized> {
    grid: FibrationGrid,
    source: &'a C,
}

impl<'a, C: AnalyticConnection + ?Sized> SampledConnection<'a, C> {
    pub fn new(grid: FibrationGrid, source: &'a C) -> Self {
        Self { grid, source }
    }
}

/// Sample the fiber part and base components at one base point.
pub fn sample_slice<C: AnalyticConnection + ?Sized>(
    source: &C,
    geom: &FiberGeometry,
    x: (f64, f64),
) -> Result<ConnectionSlice> {
    let n = source.matrix_size();
    let flags = source.flags();
    let eval = |y1: f64, y2: f64| source.eval([x.0, x.1, y1, y2]);
    let fill = |comps: &[usize], deg: usize| {
        FiberField::from_fn(geom, deg, n, |y1, y2, out| {
            let v = eval(y1, y2);
            for (c, &k) in comps.iter().enumerate() {
                crate::linalg::write_mat(&v[k], &mut out[c * n * n..(c + 1) * n * n]);
            }
        })
        .map(|f| f.with_flags(flags))
    };
    Ok(ConnectionSlice {
        a: fill(&[2, 3], 1)?,
        b: [fill(&[0], 0)?, fill(&[1], 0)?],
    })
}

impl<C: AnalyticConnection + ?Sized> ConnectionFamily for SampledConnection<'_, C> {
    fn grid(&self) -> &FibrationGrid {
        &self.grid
    }

    fn matrix_size(&self) -> usize {
        self.source.matrix_size()
    }

    fn slice(&self, i: usize, j: usize) -> Result<Cow<'_, ConnectionSlice>> {
        let geom = self.grid.fiber_geometry(i, j)?;
        sample_slice(self.source, &geom, self.grid.base.x(i, j)).map(Cow::Owned)
    }
}

/// An [`AnalyticConnection`] defined by a closure.
pub struct FnConnection<F> {
    pub n: usize,
    pub flags: FieldFlags,
    pub f: F,
}

impl<F: Fn([f64; 4]) -> [CMat; 4] + Sync> AnalyticConnection for FnConnection<F> {
    fn matrix_size(&self) -> usize {
        self.n
    }

    fn flags(&self) -> FieldFlags {
        self.flags
    }

    fn eval(&self, x: [f64; 4]) -> [CMat; 4] {
        (self.f)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::BasePatch;
    use crate::poly::ComplexPoly;
    use crate::C64;

    fn grid() -> FibrationGrid {
        let patch = BasePatch::new((0.0, 1.0), (0.0, 1.0), 6, 5, ComplexPoly::constant(C64::new(0.2, 1.0))).unwrap();
        FibrationGrid::new(patch, 8, 4).unwrap()
    }

    #[test]
    fn sampling_places_components() {
        let conn = FnConnection {
            n: 1,
            flags: FieldFlags::U,
            f: |x: [f64; 4]| std::array::from_fn(|k| CMat::from_element(1, 1, C64::new(0.0, (k + 1) as f64 * x[0]))),
        };
        let fam = SampledConnection::new(grid(), &conn);
        let s = fam.slice(2, 3).unwrap();
        let x1 = fam.grid().base.x(2, 3).0;
        assert!((s.b[0].matrix(0, 0)[(0, 0)].im - x1).abs() < 1e-15);
        assert!((s.b[1].matrix(5, 0)[(0, 0)].im - 2.0 * x1).abs() < 1e-15);
        assert!((s.a.matrix(7, 1)[(0, 0)].im - 4.0 * x1).abs() < 1e-15);
        let stored = TotalConnection::materialize(&fam).unwrap();
        assert_eq!(stored.slices().len(), 30);
    }

    #[test]
    fn rejects_non_anti_hermitian_slices() {
        let g = grid();
        let conn = FnConnection {
            n: 1,
            flags: FieldFlags::U,
            f: |_: [f64; 4]| std::array::from_fn(|_| CMat::from_element(1, 1, C64::new(1.0, 0.0))),
        };
        let fam = SampledConnection::new(g, &conn);
        assert!(matches!(TotalConnection::materialize(&fam), Err(LabError::InvariantViolation(_))));
    }
}
