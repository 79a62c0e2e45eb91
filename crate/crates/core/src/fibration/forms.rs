//! Fiber-constant 2-forms on the total space: the semi-flat Kähler form, the
//! holomorphic symplectic form and hyperkähler triples.

use serde::{Deserialize, Serialize};

use super::base::{pair_index, FibrationGrid, Frame, Stencil};
use crate::{LabError, Result, C64};

/// Coefficients of a 2-form over `PAIRS` at one point.
pub type TwoForm = [C64; 6];

/// Coefficient of `dx1^dx2^dy1^dy2` in `alpha ^ beta` for scalar 2-forms.
pub fn wedge(alpha: &TwoForm, beta: &TwoForm) -> C64 {
    alpha[0] * beta[5] + alpha[5] * beta[0] - alpha[1] * beta[4] - alpha[4] * beta[1]
        + alpha[2] * beta[3]
        + alpha[3] * beta[2]
}

/// Pairing partner and sign of each `PAIRS` entry in the 4-form wedge.
pub const WEDGE_PARTNER: [(usize, f64); 6] = [(5, 1.0), (4, -1.0), (3, 1.0), (2, 1.0), (1, -1.0), (0, 1.0)];

/// A 2-form whose coefficients depend on the base point only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormField {
    pub base_resolution: (usize, usize),
    pub values: Vec<TwoForm>,
}

impl FormField {
    pub fn from_fn(grid: &FibrationGrid, f: impl Fn(usize, usize) -> TwoForm) -> Self {
        let (m1, m2) = grid.base.resolution();
        let values = (0..m1).flat_map(|i| (0..m2).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { base_resolution: (m1, m2), values }
    }

    pub fn at(&self, i: usize, j: usize) -> &TwoForm {
        &self.values[i * self.base_resolution.1 + j]
    }

    pub fn map(&self, f: impl Fn(&TwoForm) -> TwoForm) -> Self {
        Self {
            base_resolution: self.base_resolution,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn re(&self) -> Self {
        self.map(|v| v.map(|c| C64::new(c.re, 0.0)))
    }

    pub fn im(&self) -> Self {
        self.map(|v| v.map(|c| C64::new(c.im, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v.map(|c| c * s))
    }

    /// `self + i other`.
    pub fn complexify(&self, other: &FormField) -> Result<Self> {
        if self.base_resolution != other.base_resolution {
            return Err(LabError::ShapeMismatch("forms on different base grids".into()));
        }
        let i = C64::new(0.0, 1.0);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| std::array::from_fn(|k| a[k] + i * b[k]))
            .collect();
        Ok(Self { base_resolution: self.base_resolution, values })
    }

    /// Pointwise `dx1^dx2^dy1^dy2` coefficient of `self ^ other`.
    pub fn wedge(&self, other: &FormField) -> Result<Vec<C64>> {
        if self.base_resolution != other.base_resolution {
            return Err(LabError::ShapeMismatch("forms on different base grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| wedge(a, b)).collect())
    }

    /// Sup over interior base points of the exterior-derivative coefficients,
    /// using base finite differences (the coefficients are fiber-constant).
    pub fn closedness_residual(&self, grid: &FibrationGrid) -> Result<f64> {
        let (m1, m2) = grid.base.resolution();
        let (h1, h2) = grid.base.spacing();
        let mut worst: f64 = 0.0;
        for (i, j) in grid.interior_points(&super::BaseRegion::whole(&grid.base)) {
            let s1 = Stencil::first_derivative(i, m1, h1)?;
            let s2 = Stencil::first_derivative(j, m2, h2)?;
            let partial = |dir: usize, k: usize| -> C64 {
                match dir {
                    0 => s1.taps.iter().map(|&(ii, w)| self.at(ii, j)[k] * w).sum(),
                    1 => s2.taps.iter().map(|&(jj, w)| self.at(i, jj)[k] * w).sum(),
                    _ => C64::new(0.0, 0.0),
                }
            };
            for (mu, nu, rho) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
                let coeff = |a: usize, b: usize| pair_index(a, b).expect("distinct indices");
                let (k_nr, s_nr) = coeff(nu, rho);
                let (k_mr, s_mr) = coeff(mu, rho);
                let (k_mn, s_mn) = coeff(mu, nu);
                let d = partial(mu, k_nr) * s_nr - partial(nu, k_mr) * s_mr + partial(rho, k_mn) * s_mn;
                worst = worst.max(d.norm());
            }
        }
        Ok(worst)
    }
}

/// The semi-flat model over a fibration grid at fiber area `t`.
#[derive(Clone, Debug)]
pub struct SemiFlatGeometry {
    pub grid: FibrationGrid,
    pub t: f64,
}

impl SemiFlatGeometry {
    pub fn new(grid: FibrationGrid, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(LabError::InvalidGeometry(format!("fiber area t = {t} must be positive")));
        }
        Ok(Self { grid, t })
    }

    pub fn omega(&self) -> FormField {
        semiflat_form(&self.grid, self.t).expect("t validated at construction")
    }

    pub fn big_omega(&self) -> FormField {
        hol_symplectic(&self.grid)
    }

    /// The Riemannian inverse metric of `omega_t^SF` in `(x1, x2, y1, y2)`:
    /// `W` on the base and `t^{-1}` times the unit-area fiber metric.
    pub fn inverse_metric(&self, i: usize, j: usize) -> [[f64; 4]; 4] {
        let tau = self.grid.base.tau_at(i, j);
        let w = 1.0 / tau.im;
        let t = self.t;
        let mut g = [[0.0; 4]; 4];
        g[0][0] = w;
        g[1][1] = w;
        g[2][2] = w * tau.norm_sqr() / t;
        g[2][3] = -w * tau.re / t;
        g[3][2] = -w * tau.re / t;
        g[3][3] = w / t;
        g
    }

    /// Coefficient of `omega^2 / 2` against `dx1^dx2^dy1^dy2`.
    pub fn volume_density(&self, i: usize, j: usize) -> f64 {
        let a = semiflat_at(&self.grid, i, j, self.t);
        0.5 * wedge(&a, &a).re
    }

    /// The hyperkähler triple `(omega, Re(c Omega), Im(c Omega))` with the scale
    /// `c` fixed by equating `omega^2` and `Re(c Omega)^2`.
    pub fn triple(&self) -> Result<HKTriple> {
        let omega = self.omega();
        let big = self.big_omega();
        let (m1, m2) = self.grid.base.resolution();
        let mut scales = Vec::with_capacity(m1 * m2);
        for k in 0..omega.values.len() {
            let w2 = wedge(&omega.values[k], &omega.values[k]).re;
            let re: TwoForm = big.values[k].map(|c| C64::new(c.re, 0.0));
            let r2 = wedge(&re, &re).re;
            scales.push((w2 / r2).sqrt());
        }
        let c = scales[0];
        let spread = scales.iter().map(|s| (s - c).abs()).fold(0.0, f64::max);
        if spread > 1e-12 * c {
            return Err(LabError::InvariantViolation(format!(
                "triple scale varies over the base by {spread:.3e}"
            )));
        }
        let scaled = big.scale(C64::new(c, 0.0));
        let triple = HKTriple { omega, re_omega: scaled.re(), im_omega: scaled.im(), scale: c };
        Ok(triple)
    }
}

/// `omega_t^SF = (i/2)(t W theta^thetabar + W^{-1} dw^dwbar)`, assembled in the
/// complex frame and converted to the real frame.
pub fn semiflat_form(grid: &FibrationGrid, t: f64) -> Result<FormField> {
    if !(t > 0.0) {
        return Err(LabError::InvalidGeometry(format!("fiber area t = {t} must be positive")));
    }
    Ok(FormField::from_fn(grid, |i, j| semiflat_at(grid, i, j, t)))
}

fn semiflat_at(grid: &FibrationGrid, i: usize, j: usize, t: f64) -> TwoForm {
    let half_i = C64::new(0.0, 0.5);
    let w = grid.w_factor(i, j);
    let mut c = [C64::new(0.0, 0.0); 6];
    // (dw, dwbar) is pair 0 and (theta, thetabar) is pair 5 in the complex frame.
    c[0] = half_i / w;
    c[5] = half_i * t * w;
    grid.frame(i, j).two_form_from_complex(c)
}

/// `Omega = dw ^ theta` in the real frame.
pub fn hol_symplectic(grid: &FibrationGrid) -> FormField {
    FormField::from_fn(grid, |i, j| {
        let mut c = [C64::new(0.0, 0.0); 6];
        // (dw, theta) is pair 1 in the complex frame.
        c[1] = C64::new(1.0, 0.0);
        grid.frame(i, j).two_form_from_complex(c)
    })
}

/// The Hermitian matrix `h` with `omega = (i/2) h_{ab} f_a ^ conj(f_b)` in the
/// `(dw, theta)` frame, or `None` when `omega` has a `(2,0)` part.
pub fn kahler_matrix(frame: &Frame, form: &TwoForm) -> Option<[[C64; 2]; 2]> {
    let c = frame.two_form_to_complex(*form);
    // Complex-frame pairs: 0 = (dw, dwbar), 1 = (dw, theta), 2 = (dw, thetabar),
    // 3 = (dwbar, theta), 4 = (dwbar, thetabar), 5 = (theta, thetabar).
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if c[1].norm() > 1e-12 * scale || c[4].norm() > 1e-12 * scale {
        return None;
    }
    let m2i = C64::new(0.0, -2.0);
    Some([[m2i * c[0], m2i * c[2]], [-m2i * c[3], m2i * c[5]]])
}

/// A triple of real 2-forms `(omega, Re Omega, Im Omega)` with the scale used
/// for `Omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HKTriple {
    pub omega: FormField,
    pub re_omega: FormField,
    pub im_omega: FormField,
    pub scale: f64,
}

/// Pointwise defects of the hyperkähler triple identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleResidual {
    pub omega_re: f64,
    pub omega_im: f64,
    pub re_im: f64,
    pub square_re: f64,
    pub square_im: f64,
}

impl TripleResidual {
    pub fn max(&self) -> f64 {
        [self.omega_re, self.omega_im, self.re_im, self.square_re, self.square_im]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl HKTriple {
    /// `Omega = Re Omega + i Im Omega`.
    pub fn holomorphic(&self) -> FormField {
        self.re_omega.complexify(&self.im_omega).expect("triple forms share a grid")
    }

    /// Sup over the base of `|omega^Re|, |omega^Im|, |Re^Im|`, `|omega^2 - Re^2|`
    /// and `|omega^2 - Im^2|`, relative to `omega^2`.
    pub fn residual(&self) -> Result<TripleResidual> {
        let ww = self.omega.wedge(&self.omega)?;
        let norm = ww.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let sup = |v: Vec<C64>| v.iter().map(|z| z.norm()).fold(0.0, f64::max) / norm;
        let rr = self.re_omega.wedge(&self.re_omega)?;
        let ii = self.im_omega.wedge(&self.im_omega)?;
        Ok(TripleResidual {
            omega_re: sup(self.omega.wedge(&self.re_omega)?),
            omega_im: sup(self.omega.wedge(&self.im_omega)?),
            re_im: sup(self.re_omega.wedge(&self.im_omega)?),
            square_re: sup(ww.iter().zip(&rr).map(|(a, b)| a - b).collect()),
            square_im: sup(ww.iter().zip(&ii).map(|(a, b)| a - b).collect()),
        })
    }
}

/// Tolerance on the input triple identities for [`hk_rotate`].
pub const TRIPLE_TOL: f64 = 1e-10;

/// `(omega_J, Re Omega_J, Im Omega_J) = (Re Omega, Im Omega, omega)`.
pub fn hk_rotate(triple: &HKTriple) -> Result<HKTriple> {
    let r = triple.residual()?;
    if r.max() > TRIPLE_TOL {
        return Err(LabError::InvariantViolation(format!(
            "input triple defect {:.3e} exceeds {TRIPLE_TOL:.0e}",
            r.max()
        )));
    }
    Ok(HKTriple {
        omega: triple.re_omega.clone(),
        re_omega: triple.im_omega.clone(),
        im_omega: triple.omega.clone(),
        scale: triple.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::BasePatch;
    use crate::oracles::oracle_integral;
    use crate::poly::ComplexPoly;

    fn grid(m: usize) -> FibrationGrid {
        let tau = ComplexPoly::new(vec![C64::new(0.1, 1.0), C64::new(0.1, 0.05), C64::new(0.02, 0.0)]);
        FibrationGrid::new(BasePatch::new((-1.0, 1.0), (-0.5, 1.0), m, m, tau).unwrap(), 8, 8).unwrap()
    }

    #[test]
    fn semiflat_form_matches_real_frame_closed_form() {
        let g = grid(8);
        let t = 0.3;
        let om = semiflat_form(&g, t).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let tau = g.base.tau_at(i, j);
                let v = om.at(i, j);
                assert!((v[0] - tau.im).norm() < 1e-14);
                assert!((v[5] - t).norm() < 1e-14);
                assert!(v[1..5].iter().all(|c| c.norm() < 1e-14));
            }
        }
        assert!(semiflat_form(&g, 0.0).is_err());
    }

    #[test]
    fn square_torus_unit_area_is_constant_product() {
        let patch = BasePatch::new((0.0, 1.0), (0.0, 1.0), 6, 6, ComplexPoly::constant(C64::new(0.0, 1.0))).unwrap();
        let g = FibrationGrid::new(patch, 4, 4).unwrap();
        let om = semiflat_form(&g, 1.0).unwrap();
        assert!(om.values.iter().all(|v| *v == om.values[0]));
    }

    #[test]
    fn fiber_volume_is_t() {
        let g = grid(6);
        let t = 0.07;
        let om = semiflat_form(&g, t).unwrap();
        for (i, j) in [(0, 0), (3, 4), (5, 5)] {
            let c = om.at(i, j)[5].re;
            let vol = oracle_integral(&|_: &[f64]| c, &[(0.0, 1.0), (0.0, 1.0)], &[8, 8]).unwrap();
            assert!((vol - t).abs() < 1e-14);
        }
    }

    #[test]
    fn forms_are_closed_to_truncation() {
        let err = |m: usize| {
            let g = grid(m);
            let a = semiflat_form(&g, 0.5).unwrap().closedness_residual(&g).unwrap();
            let b = hol_symplectic(&g).closedness_residual(&g).unwrap();
            a.max(b)
        };
        // tau is quadratic, so 4th-order stencils are exact up to round-off.
        assert!(err(16) < 1e-12 && err(32) < 1e-12);
    }

    #[test]
    fn omega_is_positive_and_of_type_11() {
        let g = grid(6);
        let om = semiflat_form(&g, 0.2).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let h = kahler_matrix(&g.frame(i, j), om.at(i, j)).expect("(1,1) form");
                assert!((h[0][1] - h[1][0].conj()).norm() < 1e-13);
                let det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).re;
                assert!(h[0][0].re > 0.0 && det > 0.0);
            }
        }
        assert!(kahler_matrix(&g.frame(0, 0), hol_symplectic(&g).at(0, 0)).is_none());
    }

    #[test]
    fn omega_wedges_and_volume_ratio() {
        let g = grid(6);
        let big = hol_symplectic(&g);
        let bar = big.map(|v| v.map(|c| c.conj()));
        for t in [1.0, 0.1, 0.01] {
            let om = semiflat_form(&g, t).unwrap();
            let w_big = om.wedge(&big).unwrap();
            let big_big = big.wedge(&big).unwrap();
            assert!(w_big.iter().chain(&big_big).all(|z| z.norm() == 0.0));
            // Both 4-form coefficients evaluated symbolically: omega^2 = 2 t Im tau
            // and Omega^Omegabar = 4 Im tau.
            let ww = om.wedge(&om).unwrap();
            let bb = big.wedge(&bar).unwrap();
            for (k, (a, b)) in ww.iter().zip(&bb).enumerate() {
                let (i, j) = g.base.unindex(k);
                let im = g.base.tau_at(i, j).im;
                assert!((a.re - 2.0 * t * im).abs() < 1e-13);
                assert!((b.re - 4.0 * im).abs() < 1e-13);
                assert!((a / b - 0.5 * t).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn triple_scale_is_root_t_and_rotation_preserves_identities() {
        let g = grid(6);
        for t in [1.0, 0.1, 0.01] {
            let sf = SemiFlatGeometry::new(g.clone(), t).unwrap();
            let triple = sf.triple().unwrap();
            assert!((triple.scale - t.sqrt()).abs() < 1e-14);
            assert!(triple.residual().unwrap().max() < 1e-10);
            let once = hk_rotate(&triple).unwrap();
            assert!(once.residual().unwrap().max() < 1e-10);
            let twice = hk_rotate(&once).unwrap();
            assert_eq!(twice.omega, triple.im_omega);
            assert_eq!(twice.re_omega, triple.omega);
            assert_eq!(twice.im_omega, triple.re_omega);
        }
    }

    #[test]
    fn rotation_rejects_a_broken_triple() {
        let g = grid(6);
        let sf = SemiFlatGeometry::new(g, 0.5).unwrap();
        let mut triple = sf.triple().unwrap();
        triple.re_omega = triple.re_omega.scale(C64::new(2.0, 0.0));
        assert!(matches!(hk_rotate(&triple), Err(LabError::InvariantViolation(_))));
    }

    #[test]
    fn volume_density_is_t_im_tau() {
        let g = grid(6);
        let sf = SemiFlatGeometry::new(g.clone(), 0.25).unwrap();
        let v = sf.volume_density(2, 3);
        assert!((v - 0.25 * g.base.tau_at(2, 3).im).abs() < 1e-14);
    }
}
