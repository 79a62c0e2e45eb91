//! The rectangular base patch, the total grid `U x T^2` and base finite differences.

use serde::{Deserialize, Serialize};

use crate::fiber::FiberGeometry;
use crate::poly::ComplexPoly;
use crate::{LabError, Result, C64};

/// Points this close to the base boundary use one-sided stencils and are
/// excluded from residuals and integrals.
pub const STENCIL_MARGIN: usize = 2;

/// Smallest base resolution that supports the 5-point stencils.
pub const MIN_BASE_POINTS: usize = 5;

/// A rectangle `[a1,b1] x [a2,b2]` in `w = x1 + i x2` with cell-centred
/// sample points and a holomorphic period `tau(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePatch {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
    pub m1: usize,
    pub m2: usize,
    pub tau: ComplexPoly,
}

impl BasePatch {
    pub fn new(x1: (f64, f64), x2: (f64, f64), m1: usize, m2: usize, tau: ComplexPoly) -> Result<Self> {
        if !(x1.0 < x1.1 && x2.0 < x2.1) {
            return Err(LabError::InvalidGeometry(format!("empty base rectangle {x1:?} x {x2:?}")));
        }
        if m1 < MIN_BASE_POINTS || m2 < MIN_BASE_POINTS {
            return Err(LabError::GridTooCoarse(format!(
                "{m1}x{m2} base points, need at least {MIN_BASE_POINTS} per direction"
            )));
        }
        let patch = Self { x1, x2, m1, m2, tau };
        for i in 0..m1 {
            for j in 0..m2 {
                let t = patch.tau_at(i, j);
                if !(t.im > 0.0) {
                    return Err(LabError::InvalidGeometry(format!(
                        "Im tau = {:.3e} at base point ({i}, {j}), w = {}",
                        t.im,
                        patch.w(i, j)
                    )));
                }
            }
        }
        Ok(patch)
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    pub fn len(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.x1.1 - self.x1.0) / self.m1 as f64,
            (self.x2.1 - self.x2.0) / self.m2 as f64,
        )
    }

    pub fn cell_area(&self) -> f64 {
        let (h1, h2) = self.spacing();
        h1 * h2
    }

    pub fn x(&self, i: usize, j: usize) -> (f64, f64) {
        let (h1, h2) = self.spacing();
        (self.x1.0 + (i as f64 + 0.5) * h1, self.x2.0 + (j as f64 + 0.5) * h2)
    }

    pub fn w(&self, i: usize, j: usize) -> C64 {
        let (a, b) = self.x(i, j);
        C64::new(a, b)
    }

    pub fn tau_at(&self, i: usize, j: usize) -> C64 {
        self.tau.eval(self.w(i, j))
    }

    /// `dtau/dw` at a grid point.
    pub fn tau_prime_at(&self, i: usize, j: usize) -> C64 {
        self.tau.derivative().eval(self.w(i, j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.m2 + j
    }

    pub fn unindex(&self, k: usize) -> (usize, usize) {
        (k / self.m2, k % self.m2)
    }

    /// True when both 5-point central stencils fit inside the patch.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        (STENCIL_MARGIN..self.m1 - STENCIL_MARGIN).contains(&i)
            && (STENCIL_MARGIN..self.m2 - STENCIL_MARGIN).contains(&j)
    }

    /// The same rectangle and period sampled at a different resolution.
    pub fn refined(&self, m1: usize, m2: usize) -> Result<Self> {
        Self::new(self.x1, self.x2, m1, m2, self.tau.clone())
    }
}

/// An axis-aligned sub-rectangle of the base used to restrict integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseRegion {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl BaseRegion {
    pub fn whole(patch: &BasePatch) -> Self {
        Self { x1: patch.x1, x2: patch.x2 }
    }

    pub fn contains(&self, x: (f64, f64)) -> bool {
        (self.x1.0..=self.x1.1).contains(&x.0) && (self.x2.0..=self.x2.1).contains(&x.1)
    }
}

/// First-derivative weights at index `i` of an `m`-point grid with spacing `h`.
///
/// Interior points use the 4th-order central stencil; the two points nearest
/// each end use 4th-order one-sided stencils and are reported as boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub taps: Vec<(usize, f64)>,
    pub boundary: bool,
}

impl Stencil {
    pub fn first_derivative(i: usize, m: usize, h: f64) -> Result<Self> {
        if m < MIN_BASE_POINTS {
            return Err(LabError::GridTooCoarse(format!("{m} points for a 5-point stencil")));
        }
        const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
        const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
        const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
        let s = 1.0 / (12.0 * h);
        let (start, weights, sign, boundary) = if i >= 2 && i + 2 < m {
            (i - 2, CENTRAL, 1.0, false)
        } else if i == 0 {
            (0, EDGE0, 1.0, true)
        } else if i == 1 {
            (0, EDGE1, 1.0, true)
        } else if i == m - 1 {
            (m - 5, EDGE0, -1.0, true)
        } else {
            (m - 5, EDGE1, -1.0, true)
        };
        // The right-edge stencils are the left ones mirrored, with a sign flip.
        let taps = (0..5)
            .map(|k| {
                let (idx, wgt) = if sign > 0.0 { (start + k, weights[k]) } else { (start + 4 - k, weights[k]) };
                (idx, sign * wgt * s)
            })
            .filter(|&(_, w)| w != 0.0)
            .collect();
        Ok(Self { taps, boundary })
    }
}

/// The total space: a base patch with a fiber grid over every base point.
///
/// Forms are stored in the global real frame `(dx1, dx2, dy1, dy2)`. The
/// complex frame `(dw, dwbar, theta, thetabar)` uses `theta = dz + b dw` with
/// `b = -Im(z) Im(tau)^{-1} dtau/dw`; since `z = y1 + tau(w) y2`, this reduces
/// to `theta = dy1 + tau dy2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibrationGrid {
    pub base: BasePatch,
    pub fiber: (usize, usize),
}

impl FibrationGrid {
    pub fn new(base: BasePatch, n1: usize, n2: usize) -> Result<Self> {
        FiberGeometry::new(C64::new(0.0, 1.0), n1, n2)?;
        Ok(Self { base, fiber: (n1, n2) })
    }

    pub fn fiber_geometry(&self, i: usize, j: usize) -> Result<FiberGeometry> {
        FiberGeometry::new(self.base.tau_at(i, j), self.fiber.0, self.fiber.1)
    }

    /// `W = Im(tau)^{-1}`.
    pub fn w_factor(&self, i: usize, j: usize) -> f64 {
        1.0 / self.base.tau_at(i, j).im
    }

    /// The frame coefficient `b` at fiber height `y2`.
    pub fn frame_b(&self, i: usize, j: usize, y2: f64) -> C64 {
        let tau = self.base.tau_at(i, j);
        let im_z = y2 * tau.im;
        -im_z / tau.im * self.base.tau_prime_at(i, j)
    }

    pub fn frame(&self, i: usize, j: usize) -> Frame {
        Frame::new(self.base.tau_at(i, j))
    }

    /// Indices of base points whose stencils are central and whose centre
    /// lies in `region`.
    pub fn interior_points(&self, region: &BaseRegion) -> Vec<(usize, usize)> {
        let (m1, m2) = self.base.resolution();
        (0..m1)
            .flat_map(|i| (0..m2).map(move |j| (i, j)))
            .filter(|&(i, j)| self.base.is_interior(i, j) && region.contains(self.base.x(i, j)))
            .collect()
    }

    pub fn with_base_resolution(&self, m1: usize, m2: usize) -> Result<Self> {
        Self::new(self.base.refined(m1, m2)?, self.fiber.0, self.fiber.1)
    }
}

/// Index pairs `(mu, nu)` with `mu < nu` over `(x1, x2, y1, y2)`, in storage order.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn pair_index(mu: usize, nu: usize) -> Option<(usize, f64)> {
    let (a, b, s) = if mu < nu { (mu, nu, 1.0) } else { (nu, mu, -1.0) };
    PAIRS.iter().position(|&p| p == (a, b)).map(|k| (k, s))
}

/// Change of frame between `e = (dx1, dx2, dy1, dy2)` and
/// `f = (dw, dwbar, theta, thetabar)` at one base point.
#[derive(Clone, Debug)]
pub struct Frame {
    /// `f_k = sum_l p[k][l] e_l`.
    pub p: [[C64; 4]; 4],
}

impl Frame {
    pub fn new(tau: C64) -> Self {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        Self {
            p: [[l, i, o, o], [l, -i, o, o], [o, o, l, tau], [o, o, l, tau.conj()]],
        }
    }

    fn p_mat(&self) -> nalgebra::Matrix4<C64> {
        nalgebra::Matrix4::from_fn(|k, l| self.p[k][l])
    }

    /// `f_0 ^ f_1 ^ f_2 ^ f_3 = det(P) e_0 ^ e_1 ^ e_2 ^ e_3`.
    pub fn det(&self) -> C64 {
        self.p_mat().determinant()
    }

    /// Second exterior power: `f_I = sum_J lambda2[I][J] e_J` over [`PAIRS`].
    pub fn lambda2(&self) -> [[C64; 6]; 6] {
        let mut out = [[C64::new(0.0, 0.0); 6]; 6];
        for (a, &(k, l)) in PAIRS.iter().enumerate() {
            for (b, &(m, n)) in PAIRS.iter().enumerate() {
                out[a][b] = self.p[k][m] * self.p[l][n] - self.p[k][n] * self.p[l][m];
            }
        }
        out
    }

    /// 1-form coefficients in the `e` frame to the `f` frame.
    pub fn one_form_to_complex(&self, a: [C64; 4]) -> [C64; 4] {
        let pt = self.p_mat().transpose();
        let inv = pt.try_inverse().expect("frame matrix is invertible for Im tau > 0");
        let c = inv * nalgebra::Vector4::from(a);
        [c[0], c[1], c[2], c[3]]
    }

    pub fn one_form_from_complex(&self, c: [C64; 4]) -> [C64; 4] {
        let a = self.p_mat().transpose() * nalgebra::Vector4::from(c);
        [a[0], a[1], a[2], a[3]]
    }

    pub fn two_form_from_complex(&self, c: [C64; 6]) -> [C64; 6] {
        let l2 = self.lambda2();
        std::array::from_fn(|b| (0..6).map(|a| l2[a][b] * c[a]).sum())
    }

    pub fn two_form_to_complex(&self, a: [C64; 6]) -> [C64; 6] {
        let l2 = self.lambda2();
        let m = nalgebra::Matrix6::from_fn(|r, c| l2[c][r]);
        let inv = m.try_inverse().expect("second exterior power of an invertible frame");
        let c = inv * nalgebra::Vector6::from(a);
        std::array::from_fn(|k| c[k])
    }

    /// `dz` in the `e` frame: `theta - b dw`.
    pub fn dz(&self, b: C64) -> [C64; 4] {
        let mut c = [C64::new(0.0, 0.0); 4];
        c[2] = C64::new(1.0, 0.0);
        c[0] = -b;
        self.one_form_from_complex(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn patch(m: usize) -> BasePatch {
        BasePatch::new((-1.0, 1.0), (-1.0, 1.0), m, m, ComplexPoly::linear(C64::new(0.0, 1.0), C64::new(0.1, 0.0)))
            .unwrap()
    }

    #[test]
    fn rejects_degenerate_period() {
        let tau = ComplexPoly::linear(C64::new(0.0, 0.5), C64::new(1.0, 0.0));
        // Im tau = 0.5 + x2 vanishes inside the patch.
        assert!(BasePatch::new((-1.0, 1.0), (-1.0, 1.0), 8, 8, tau).is_err());
        assert!(matches!(
            BasePatch::new((0.0, 1.0), (0.0, 1.0), 4, 8, ComplexPoly::constant(C64::new(0.0, 1.0))),
            Err(LabError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn stencils_differentiate_quartics_exactly() {
        let m = 9;
        let h = 0.3;
        let f = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x.powi(3) - 0.25 * x.powi(4);
        let df = |x: f64| 2.0 - 2.0 * x + 1.5 * x * x - x.powi(3);
        for i in 0..m {
            let s = Stencil::first_derivative(i, m, h).unwrap();
            let approx: f64 = s.taps.iter().map(|&(k, w)| w * f(k as f64 * h)).sum();
            assert!((approx - df(i as f64 * h)).abs() < 1e-11, "i = {i}");
            assert_eq!(s.boundary, !(2..m - 2).contains(&i));
        }
    }

    #[test]
    fn stencil_converges_at_fourth_order() {
        let err = |m: usize| {
            let h = 1.0 / m as f64;
            let s = Stencil::first_derivative(m / 2, m + 1, h).unwrap();
            let approx: f64 = s.taps.iter().map(|&(k, w)| w * (k as f64 * h).sin()).sum();
            (approx - 0.5f64.cos()).abs()
        };
        let order = (err(16) / err(32)).log2();
        assert!((order - 4.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn dz_matches_differential_of_z() {
        let g = FibrationGrid::new(patch(8), 8, 8).unwrap();
        let (i, j, y2) = (3, 5, 0.7);
        let frame = g.frame(i, j);
        let dz = frame.dz(g.frame_b(i, j, y2));
        // z = y1 + tau(w) y2 differentiated by hand along each coordinate.
        let tp = g.base.tau_prime_at(i, j);
        let tau = g.base.tau_at(i, j);
        let expect = [tp * y2, C64::new(0.0, 1.0) * tp * y2, C64::new(1.0, 0.0), tau];
        for k in 0..4 {
            assert!((dz[k] - expect[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn interior_excludes_margin() {
        let g = FibrationGrid::new(patch(10), 4, 4).unwrap();
        let pts = g.interior_points(&BaseRegion::whole(&g.base));
        assert_eq!(pts.len(), 36);
        assert!(pts.iter().all(|&(i, j)| (2..8).contains(&i) && (2..8).contains(&j)));
    }

    proptest! {
        #[test]
        fn frame_conversions_are_inverse(
            t1 in -1.0f64..1.0, t2 in 0.2f64..3.0,
            a in prop::array::uniform6(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0),
        ) {
            let f = Frame::new(C64::new(t1, t2));
            let two: [C64; 6] = a.map(|v| C64::new(v, 0.5 * v));
            let back = f.two_form_from_complex(f.two_form_to_complex(two));
            for k in 0..6 {
                prop_assert!((back[k] - two[k]).norm() < 1e-10);
            }
            let one: [C64; 4] = b.map(|v| C64::new(v, -v));
            let back = f.one_form_from_complex(f.one_form_to_complex(one));
            for k in 0..4 {
                prop_assert!((back[k] - one[k]).norm() < 1e-12);
            }
        }
    }
}
