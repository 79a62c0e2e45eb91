//! Discretized flat elliptic curves and matrix-valued forms on them.
//!
//! A fiber is `C/(Z + tau Z)` in angle coordinates `(y1, y2)` on a uniform
//! periodic `N1 x N2` grid. Forms are stored in the `(dy1, dy2)` frame; the
//! complex frame `(dz, dzbar)` is reached through `dz = dy1 + tau dy2`.

mod calculus;
mod fft;
mod hodge;
mod holonomy;
mod io;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use calculus::{
    codifferential, covariant_d, curvature, exterior_d, hodge_star, l2_inner, l2_norm, laplacian0,
    lp_norm, pointwise_norm_sq, sup_norm,
};
pub use fft::{mode_label, wavenumber, Spectral2d};
pub use hodge::{hodge_decompose, FourierLaplacian, HodgeParts};
pub(crate) use calculus::partials;
pub(crate) use hodge::solve_laplacian0;
pub use holonomy::{holonomy, holonomy_at, Cycle};
pub use io::{FieldDump, FIELD_LAYOUT};

use crate::linalg::{self, CMat};
use crate::{LabError, Result, C64};

/// A flat torus with period `tau` and its sampling grid.
#[derive(Clone, Debug)]
pub struct FiberGeometry {
    tau: C64,
    res: (usize, usize),
    spectral: Arc<Spectral2d>,
}

impl FiberGeometry {
    pub fn new(tau: C64, n1: usize, n2: usize) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() {
            return Err(LabError::InvalidGeometry(format!("Im tau must be positive, got {tau}")));
        }
        if n1 < 4 || n2 < 4 {
            return Err(LabError::InvalidGeometry(format!(
                "fiber grid {n1}x{n2} is below the 4x4 minimum"
            )));
        }
        Ok(Self {
            tau,
            res: (n1, n2),
            spectral: Spectral2d::cached(n1, n2),
        })
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.res
    }

    pub fn points(&self) -> usize {
        self.res.0 * self.res.1
    }

    /// Metric factor `W = 1/Im tau`.
    pub fn w(&self) -> f64 {
        1.0 / self.tau.im
    }

    /// Quadrature weight of one grid cell; the fiber has unit area.
    pub fn cell_area(&self) -> f64 {
        1.0 / self.points() as f64
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.res.0.max(self.res.1) as f64
    }

    pub fn spectral(&self) -> &Spectral2d {
        &self.spectral
    }

    /// Angle coordinates of grid point `p = i1*N2 + i2`.
    pub fn coords(&self, p: usize) -> (f64, f64) {
        let (n1, n2) = self.res;
        ((p / n2) as f64 / n1 as f64, (p % n2) as f64 / n2 as f64)
    }

    pub fn z(&self, p: usize) -> C64 {
        let (y1, y2) = self.coords(p);
        C64::new(y1, 0.0) + self.tau * y2
    }

    /// Inverse metric on 1-forms in the `(dy1, dy2)` frame.
    pub fn inverse_metric(&self) -> [[f64; 2]; 2] {
        let w = self.w();
        let t1 = self.tau.re;
        [[w * self.tau.norm_sqr(), -w * t1], [-w * t1, w]]
    }

    /// `f1 dy1 + f2 dy2 = a dz + b dzbar`; returns `(a, b)`.
    pub fn to_complex_frame(&self, f1: C64, f2: C64) -> (C64, C64) {
        let tau = self.tau;
        let det = tau - tau.conj();
        ((f2 - tau.conj() * f1) / det, (tau * f1 - f2) / det)
    }

    pub fn from_complex_frame(&self, a: C64, b: C64) -> (C64, C64) {
        (a + b, a * self.tau + b * self.tau.conj())
    }

    /// Real matrix of the Hodge star on 1-forms, acting on `(f1, f2)`.
    pub fn star1(&self) -> [[f64; 2]; 2] {
        let (t1, t2) = (self.tau.re, self.tau.im);
        [[t1 / t2, -1.0 / t2], [self.tau.norm_sqr() / t2, -t1 / t2]]
    }

    pub fn same_grid(&self, other: &FiberGeometry) -> bool {
        self.res == other.res && (self.tau - other.tau).norm() == 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldFlags {
    pub anti_hermitian: bool,
    pub traceless: bool,
}

impl FieldFlags {
    pub const NONE: FieldFlags = FieldFlags {
        anti_hermitian: false,
        traceless: false,
    };
    pub const SU: FieldFlags = FieldFlags {
        anti_hermitian: true,
        traceless: true,
    };
    pub const U: FieldFlags = FieldFlags {
        anti_hermitian: true,
        traceless: false,
    };
}

/// Matrix-valued `k`-form sampled on a fiber grid.
///
/// Storage is point-major, then form component, then matrix row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberField {
    degree: usize,
    n: usize,
    res: (usize, usize),
    data: Vec<C64>,
    flags: FieldFlags,
}

pub fn components(degree: usize) -> usize {
    if degree == 1 {
        2
    } else {
        1
    }
}

impl FiberField {
    pub fn zeros(degree: usize, n: usize, res: (usize, usize)) -> Result<Self> {
        if degree > 2 {
            return Err(LabError::DegreeOutOfRange(degree));
        }
        Ok(Self {
            degree,
            n,
            res,
            data: vec![C64::new(0.0, 0.0); res.0 * res.1 * components(degree) * n * n],
            flags: FieldFlags::NONE,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![C64::new(0.0, 0.0); self.data.len()],
            ..self.clone()
        }
    }

    /// Sample `fill(y1, y2, out)` at every grid point; `out` holds all
    /// components of the point, each an `n x n` row-major block.
    pub fn from_fn(
        geom: &FiberGeometry,
        degree: usize,
        n: usize,
        mut fill: impl FnMut(f64, f64, &mut [C64]),
    ) -> Result<Self> {
        let mut field = Self::zeros(degree, n, geom.resolution())?;
        let stride = field.point_stride();
        for p in 0..geom.points() {
            let (y1, y2) = geom.coords(p);
            fill(y1, y2, &mut field.data[p * stride..(p + 1) * stride]);
        }
        Ok(field)
    }

    /// The same blocks at every grid point.
    pub fn constant(geom: &FiberGeometry, degree: usize, blocks: &[CMat]) -> Result<Self> {
        if blocks.len() != components(degree) {
            return Err(LabError::ShapeMismatch(format!(
                "degree {degree} needs {} blocks, got {}",
                components(degree),
                blocks.len()
            )));
        }
        let n = blocks[0].nrows();
        let flat: Vec<C64> = blocks
            .iter()
            .flat_map(|m| (0..n * n).map(move |k| m[(k / n, k % n)]))
            .collect();
        Self::from_fn(geom, degree, n, |_, _, out| out.copy_from_slice(&flat))
    }

    pub fn with_flags(mut self, flags: FieldFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn flags(&self) -> FieldFlags {
        self.flags
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn matrix_size(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> (usize, usize) {
        self.res
    }

    pub fn points(&self) -> usize {
        self.res.0 * self.res.1
    }

    pub fn ncomp(&self) -> usize {
        components(self.degree)
    }

    pub fn point_stride(&self) -> usize {
        self.ncomp() * self.n * self.n
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn from_data(degree: usize, n: usize, res: (usize, usize), data: Vec<C64>) -> Result<Self> {
        let mut f = Self::zeros(degree, n, res)?;
        if data.len() != f.data.len() {
            return Err(LabError::ShapeMismatch(format!(
                "expected {} values, got {}",
                f.data.len(),
                data.len()
            )));
        }
        f.data = data;
        Ok(f)
    }

    pub fn block(&self, p: usize, c: usize) -> &[C64] {
        let nn = self.n * self.n;
        let start = p * self.point_stride() + c * nn;
        &self.data[start..start + nn]
    }

    pub fn block_mut(&mut self, p: usize, c: usize) -> &mut [C64] {
        let nn = self.n * self.n;
        let start = p * self.point_stride() + c * nn;
        &mut self.data[start..start + nn]
    }

    pub fn matrix(&self, p: usize, c: usize) -> CMat {
        linalg::to_mat(self.block(p, c), self.n)
    }

    pub fn set_matrix(&mut self, p: usize, c: usize, m: &CMat) {
        linalg::write_mat(m, self.block_mut(p, c));
    }

    /// Copy one scalar channel (component `c`, matrix entry `e`) into `out`.
    pub fn gather(&self, c: usize, e: usize, out: &mut [C64]) {
        let stride = self.point_stride();
        let off = c * self.n * self.n + e;
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.data[p * stride + off];
        }
    }

    pub fn scatter(&mut self, c: usize, e: usize, values: &[C64]) {
        let stride = self.point_stride();
        let off = c * self.n * self.n + e;
        for (p, v) in values.iter().enumerate() {
            self.data[p * stride + off] = *v;
        }
    }

    pub fn check_shape(&self, other: &FiberField) -> Result<()> {
        if self.res != other.res || self.n != other.n {
            return Err(LabError::ShapeMismatch(format!(
                "fields on {:?} (n={}) and {:?} (n={})",
                self.res, self.n, other.res, other.n
            )));
        }
        Ok(())
    }

    pub fn check_grid(&self, geom: &FiberGeometry) -> Result<()> {
        if self.res != geom.resolution() {
            return Err(LabError::ShapeMismatch(format!(
                "field on {:?}, geometry on {:?}",
                self.res,
                geom.resolution()
            )));
        }
        Ok(())
    }

    fn check_same_kind(&self, other: &FiberField) -> Result<()> {
        self.check_shape(other)?;
        if self.degree != other.degree {
            return Err(LabError::ShapeMismatch(format!(
                "degrees {} and {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &FiberField) -> Result<FiberField> {
        self.check_same_kind(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b * alpha);
        out.flags = FieldFlags {
            anti_hermitian: self.flags.anti_hermitian && other.flags.anti_hermitian,
            traceless: self.flags.traceless && other.flags.traceless,
        };
        Ok(out)
    }

    pub fn add(&self, other: &FiberField) -> Result<FiberField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &FiberField) -> Result<FiberField> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: C64) -> FiberField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= s);
        out
    }

    pub fn scale_real(&self, s: f64) -> FiberField {
        self.scale(C64::new(s, 0.0))
    }

    /// Pointwise conjugate transpose of every block.
    pub fn adjoint(&self) -> FiberField {
        let mut out = self.clone();
        let n = self.n;
        for p in 0..self.points() {
            for c in 0..self.ncomp() {
                linalg::adjoint_into(self.block(p, c), out.block_mut(p, c), n);
            }
        }
        out
    }

    /// Largest deviation from the anti-Hermitian condition.
    pub fn anti_hermitian_defect(&self) -> f64 {
        (0..self.points())
            .flat_map(|p| (0..self.ncomp()).map(move |c| (p, c)))
            .map(|(p, c)| linalg::anti_hermitian_defect(self.block(p, c), self.n))
            .fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        (0..self.points())
            .flat_map(|p| (0..self.ncomp()).map(move |c| (p, c)))
            .map(|(p, c)| linalg::hermitian_defect(self.block(p, c), self.n))
            .fold(0.0, f64::max)
    }

    pub fn trace_defect(&self) -> f64 {
        (0..self.points())
            .flat_map(|p| (0..self.ncomp()).map(move |c| (p, c)))
            .map(|(p, c)| linalg::trace(self.block(p, c), self.n).norm())
            .fold(0.0, f64::max)
    }

    /// Verify the declared flags within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.flags.anti_hermitian {
            let d = self.anti_hermitian_defect();
            if d > tol {
                return Err(LabError::InvariantViolation(format!(
                    "field flagged anti-Hermitian has defect {d:.3e}"
                )));
            }
        }
        if self.flags.traceless {
            let d = self.trace_defect();
            if d > tol {
                return Err(LabError::InvariantViolation(format!(
                    "field flagged traceless has trace {d:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Remove the Nyquist modes of every channel.
    pub fn dealias(&self, geom: &FiberGeometry) -> FiberField {
        self.map_channels(geom, |s, buf| s.filter_nyquist(buf))
    }

    /// Spectral translation by `(s1, s2)`; Nyquist content is dropped.
    pub fn translate(&self, geom: &FiberGeometry, s1: f64, s2: f64) -> FiberField {
        self.map_channels(geom, |s, buf| s.translate(buf, s1, s2))
    }

    fn map_channels(&self, geom: &FiberGeometry, f: impl Fn(&Spectral2d, &mut [C64])) -> FiberField {
        let mut out = self.clone();
        let mut buf = vec![C64::new(0.0, 0.0); self.points()];
        for c in 0..self.ncomp() {
            for e in 0..self.n * self.n {
                self.gather(c, e, &mut buf);
                f(geom.spectral(), &mut buf);
                out.scatter(c, e, &buf);
            }
        }
        out
    }

    /// Remove the pointwise trace (scaled identity) from every block.
    pub fn remove_trace(&self) -> FiberField {
        let mut out = self.clone();
        let n = self.n;
        for p in 0..self.points() {
            for c in 0..self.ncomp() {
                let b = out.block_mut(p, c);
                let t = linalg::trace(b, n) / n as f64;
                for i in 0..n {
                    b[i * n + i] -= t;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometry_rejects_lower_half_plane() {
        assert!(FiberGeometry::new(C64::new(0.0, -1.0), 8, 8).is_err());
        assert!(FiberGeometry::new(C64::new(0.0, 1.0), 2, 8).is_err());
    }

    #[test]
    fn metric_factor_and_area() {
        let g = FiberGeometry::new(C64::new(0.3, 2.0), 8, 16).unwrap();
        assert_eq!(g.w(), 0.5);
        assert!((g.cell_area() * g.points() as f64 - 1.0).abs() < 1e-15);
        let gi = g.inverse_metric();
        let det = gi[0][0] * gi[1][1] - gi[0][1] * gi[1][0];
        assert!((det - 1.0).abs() < 1e-14);
    }

    #[test]
    fn z_maps_grid_into_fundamental_domain() {
        let g = FiberGeometry::new(C64::new(0.5, 1.5), 4, 4).unwrap();
        assert_eq!(g.z(0), C64::new(0.0, 0.0));
        let z = g.z(4 * 1 + 2);
        assert!((z - (C64::new(0.25, 0.0) + g.tau() * 0.5)).norm() < 1e-15);
    }

    #[test]
    fn degree_three_is_rejected() {
        assert!(matches!(FiberField::zeros(3, 2, (4, 4)), Err(LabError::DegreeOutOfRange(3))));
    }

    proptest! {
        #[test]
        fn complex_frame_round_trip(t1 in -1.0f64..1.0, t2 in 0.2f64..3.0,
                                    a in -5.0f64..5.0, b in -5.0f64..5.0,
                                    c in -5.0f64..5.0, d in -5.0f64..5.0) {
            let g = FiberGeometry::new(C64::new(t1, t2), 4, 4).unwrap();
            let (f1, f2) = (C64::new(a, b), C64::new(c, d));
            let (za, zb) = g.to_complex_frame(f1, f2);
            let (g1, g2) = g.from_complex_frame(za, zb);
            prop_assert!((g1 - f1).norm() <= 1e-12 * (1.0 + f1.norm()));
            prop_assert!((g2 - f2).norm() <= 1e-12 * (1.0 + f2.norm()));
        }

        #[test]
        fn star_matrix_squares_to_minus_one(t1 in -2.0f64..2.0, t2 in 0.1f64..4.0) {
            let g = FiberGeometry::new(C64::new(t1, t2), 4, 4).unwrap();
            let s = g.star1();
            let sq = [
                [s[0][0] * s[0][0] + s[0][1] * s[1][0], s[0][0] * s[0][1] + s[0][1] * s[1][1]],
                [s[1][0] * s[0][0] + s[1][1] * s[1][0], s[1][0] * s[0][1] + s[1][1] * s[1][1]],
            ];
            let scale = 1.0 + s.iter().flatten().map(|x| x * x).sum::<f64>();
            prop_assert!((sq[0][0] + 1.0).abs() < 1e-12 * scale);
            prop_assert!((sq[1][1] + 1.0).abs() < 1e-12 * scale);
            prop_assert!(sq[0][1].abs() < 1e-12 * scale);
            prop_assert!(sq[1][0].abs() < 1e-12 * scale);
        }
    }
}
