//! Hodge decomposition of bundle-valued 1-forms for a flat connection.

use std::f64::consts::TAU;

use super::calculus::{codifferential, covariant_d, curvature, hodge_star, l2_inner, laplacian0, sup_norm};
use super::{wavenumber, FiberField, FiberGeometry};
use crate::{LabError, Result, C64};

/// Threshold below which a Fourier symbol is treated as a kernel mode.
const KERNEL_SYMBOL: f64 = 1e-10;

/// `-Delta_A` for a constant diagonal connection, diagonalised by the FFT.
///
/// Entry `(r, c)` of a 0-form is twisted by the difference of the diagonal
/// coefficients, so each entry decouples into scalar Fourier modes.
#[derive(Clone, Debug)]
pub struct FourierLaplacian {
    geom: FiberGeometry,
    n: usize,
    /// Diagonal entries of `A_1` and `A_2`.
    diag: Vec<(C64, C64)>,
}

impl FourierLaplacian {
    /// Returns `None` unless `a` is constant and diagonal.
    pub fn new(geom: &FiberGeometry, a: &FiberField) -> Option<Self> {
        let n = a.matrix_size();
        let first = a.data()[..a.point_stride()].to_vec();
        let scale = first.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        for p in 1..a.points() {
            let block = &a.data()[p * a.point_stride()..(p + 1) * a.point_stride()];
            if block.iter().zip(&first).any(|(x, y)| (x - y).norm() > 1e-14 * scale) {
                return None;
            }
        }
        for c in 0..2 {
            for r in 0..n {
                for s in 0..n {
                    if r != s && first[c * n * n + r * n + s].norm() > 1e-14 * scale {
                        return None;
                    }
                }
            }
        }
        let diag = (0..n)
            .map(|r| (first[r * n + r], first[n * n + r * n + r]))
            .collect();
        Some(Self {
            geom: geom.clone(),
            n,
            diag,
        })
    }

    pub fn geometry(&self) -> &FiberGeometry {
        &self.geom
    }

    /// Twist `(alpha_1, alpha_2)` acting on entry `(r, c)`.
    pub fn twist(&self, r: usize, c: usize) -> (C64, C64) {
        (self.diag[r].0 - self.diag[c].0, self.diag[r].1 - self.diag[c].1)
    }

    /// Symbol of the discrete operator on entry `(r, c)` at FFT indices `(k1, k2)`.
    pub fn symbol(&self, r: usize, c: usize, k1: usize, k2: usize) -> f64 {
        let (n1, n2) = self.geom.resolution();
        let (a1, a2) = self.twist(r, c);
        let (m1, m2) = (wavenumber(k1, n1), wavenumber(k2, n2));
        let both = m1.is_some() && m2.is_some();
        let v1 = a1 + if both { C64::new(0.0, TAU * m1.unwrap_or(0) as f64) } else { C64::new(0.0, 0.0) };
        let v2 = a2 + if both { C64::new(0.0, TAU * m2.unwrap_or(0) as f64) } else { C64::new(0.0, 0.0) };
        let gi = self.geom.inverse_metric();
        let v = [v1, v2];
        let mut s = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                s += v[a] * v[b].conj() * gi[a][b];
            }
        }
        s.re
    }

    fn apply_symbol(&self, f: &FiberField, op: impl Fn(f64) -> f64) -> FiberField {
        let n = self.n;
        let mut out = f.zeros_like();
        let spec = self.geom.spectral();
        let (n1, n2) = self.geom.resolution();
        let mut buf = vec![C64::new(0.0, 0.0); f.points()];
        for r in 0..n {
            for c in 0..n {
                let e = r * n + c;
                f.gather(0, e, &mut buf);
                spec.forward(&mut buf);
                for k1 in 0..n1 {
                    for k2 in 0..n2 {
                        buf[k1 * n2 + k2] *= op(self.symbol(r, c, k1, k2));
                    }
                }
                spec.inverse(&mut buf);
                out.scatter(0, e, &buf);
            }
        }
        out.with_flags(f.flags())
    }

    pub fn apply(&self, f: &FiberField) -> FiberField {
        self.apply_symbol(f, |s| s)
    }

    /// Pseudo-inverse: kernel modes are mapped to zero.
    pub fn solve(&self, f: &FiberField) -> FiberField {
        self.apply_symbol(f, |s| if s > KERNEL_SYMBOL { 1.0 / s } else { 0.0 })
    }

    /// Orthogonal projection onto the kernel.
    pub fn kernel_projection(&self, f: &FiberField) -> FiberField {
        self.apply_symbol(f, |s| if s > KERNEL_SYMBOL { 0.0 } else { 1.0 })
    }

    /// Every symbol value, one per entry and mode.
    pub fn all_symbols(&self) -> Vec<f64> {
        let (n1, n2) = self.geom.resolution();
        let mut out = Vec::with_capacity(self.n * self.n * n1 * n2);
        for r in 0..self.n {
            for c in 0..self.n {
                for k1 in 0..n1 {
                    for k2 in 0..n2 {
                        out.push(self.symbol(r, c, k1, k2));
                    }
                }
            }
        }
        out
    }
}

/// Conjugate gradients for a positive semi-definite operator; `b` must lie in
/// its range.
pub(crate) fn conjugate_gradient(
    geom: &FiberGeometry,
    apply: impl Fn(&FiberField) -> Result<FiberField>,
    b: &FiberField,
    rel_tol: f64,
    max_iter: usize,
) -> Result<FiberField> {
    let bn = l2_inner(geom, b, b)?.re.sqrt();
    let mut x = b.zeros_like();
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = l2_inner(geom, &r, &r)?.re;
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * bn {
            return Ok(x);
        }
        let ap = apply(&p)?;
        let pap = l2_inner(geom, &p, &ap)?.re;
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x = x.axpy(alpha, &p)?;
        r = r.axpy(-alpha, &ap)?;
        let rr_new = l2_inner(geom, &r, &r)?.re;
        p = r.axpy(rr_new / rr, &p)?;
        rr = rr_new;
    }
    if rr.sqrt() <= rel_tol * bn {
        return Ok(x);
    }
    Err(LabError::NoConvergence {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt() / bn,
    })
}

/// Solve `-Delta_A x = b` on 0-forms, by FFT when possible.
pub(crate) fn solve_laplacian0(geom: &FiberGeometry, a: &FiberField, b: &FiberField) -> Result<FiberField> {
    match FourierLaplacian::new(geom, a) {
        Some(fl) => Ok(fl.solve(b)),
        None => conjugate_gradient(geom, |x| laplacian0(geom, a, x), b, 1e-10, 20 * b.points()),
    }
}

/// `f = harmonic + d_A alpha + d*_A beta`.
#[derive(Clone, Debug)]
pub struct HodgeParts {
    pub harmonic: FiberField,
    pub exact: FiberField,
    pub coexact: FiberField,
    /// The 0-form potential `alpha`.
    pub alpha: FiberField,
    /// The 2-form potential `beta`.
    pub beta: FiberField,
}

/// Orthogonal Hodge decomposition of a 1-form with respect to a flat connection.
pub fn hodge_decompose(geom: &FiberGeometry, a0: &FiberField, f: &FiberField) -> Result<HodgeParts> {
    if f.degree() != 1 {
        return Err(LabError::ShapeMismatch("hodge_decompose acts on 1-forms".into()));
    }
    a0.check_shape(f)?;
    let sup = sup_norm(geom, &curvature(geom, a0)?);
    if sup > 1e-9 * (1.0 + a0.max_abs().powi(2)) {
        return Err(LabError::NotFlat { sup });
    }
    let alpha = solve_laplacian0(geom, a0, &codifferential(geom, a0, f)?)?;
    let exact = covariant_d(geom, a0, &alpha)?;
    let rhs = hodge_star(geom, &covariant_d(geom, a0, f)?)?;
    let phi = solve_laplacian0(geom, a0, &rhs)?;
    let beta = hodge_star(geom, &phi)?;
    let coexact = codifferential(geom, a0, &beta)?;
    let harmonic = f.sub(&exact)?.sub(&coexact)?;
    Ok(HodgeParts {
        harmonic,
        exact,
        coexact,
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{l2_norm, FieldFlags};
    use crate::gauge::act_unitary;
    use crate::linalg::CMat;
    use crate::sampling::{random_band_limited, random_unitary};
    use std::f64::consts::PI;

    fn flat(g: &FiberGeometry, q1: f64, q2: f64) -> FiberField {
        let d = |x: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.0, x), C64::new(0.0, -x)]));
        FiberField::constant(g, 1, &[d(2.0 * PI * q2), d(-2.0 * PI * q1)]).unwrap().with_flags(FieldFlags::SU)
    }

    fn check_parts(g: &FiberGeometry, a0: &FiberField, f: &FiberField, parts: &HodgeParts, harmonic_tol: f64) {
        let fnorm = l2_norm(g, f).unwrap();
        let rec = parts.harmonic.add(&parts.exact).unwrap().add(&parts.coexact).unwrap();
        assert!(l2_norm(g, &rec.sub(f).unwrap()).unwrap() <= 1e-8 * fnorm);
        let pairs = [
            (&parts.harmonic, &parts.exact),
            (&parts.harmonic, &parts.coexact),
            (&parts.exact, &parts.coexact),
        ];
        for (x, y) in pairs {
            assert!(l2_inner(g, x, y).unwrap().norm() <= 1e-8 * fnorm * fnorm);
        }
        let dh = covariant_d(g, a0, &parts.harmonic).unwrap();
        let dsh = codifferential(g, a0, &parts.harmonic).unwrap();
        let (x, y) = (l2_norm(g, &dh).unwrap(), l2_norm(g, &dsh).unwrap());
        assert!(x <= harmonic_tol * fnorm && y <= harmonic_tol * fnorm, "d h = {x:.3e}, d* h = {y:.3e}, |f| = {fnorm:.3e}");
    }

    #[test]
    fn constant_diagonal_form_is_harmonic() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 8, 8).unwrap();
        let a0 = flat(&g, 0.2, 0.1);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)]));
        let f = FiberField::constant(&g, 1, &[d.clone(), d * C64::new(0.5, 0.0)]).unwrap();
        let parts = hodge_decompose(&g, &a0, &f).unwrap();
        assert!(parts.exact.max_abs() < 1e-12);
        assert!(parts.coexact.max_abs() < 1e-12);
    }

    #[test]
    fn exact_form_is_recovered() {
        let g = FiberGeometry::new(C64::new(0.2, 1.1), 12, 12).unwrap();
        let a0 = flat(&g, 0.2, 0.15);
        let alpha = random_band_limited(&g, 0, 2, 3, 9);
        let f = covariant_d(&g, &a0, &alpha).unwrap();
        let parts = hodge_decompose(&g, &a0, &f).unwrap();
        let fn_ = l2_norm(&g, &f).unwrap();
        assert!(l2_norm(&g, &parts.exact.sub(&f).unwrap()).unwrap() <= 1e-10 * fn_);
        assert!(l2_norm(&g, &parts.harmonic).unwrap() <= 1e-10 * fn_);
        assert!(l2_norm(&g, &parts.coexact).unwrap() <= 1e-10 * fn_);
    }

    #[test]
    fn random_form_decomposes_orthogonally() {
        let g = FiberGeometry::new(C64::new(-0.3, 0.9), 16, 12).unwrap();
        let a0 = flat(&g, 0.3, -0.1);
        let f = random_band_limited(&g, 1, 2, 4, 21);
        let parts = hodge_decompose(&g, &a0, &f).unwrap();
        check_parts(&g, &a0, &f, &parts, 1e-8);
    }

    #[test]
    fn conjugate_gradient_path_matches_fourier_path() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 16, 16).unwrap();
        let a0 = flat(&g, 0.2, 0.1);
        let u = random_unitary(&g, 2, 0.1, 1, 4);
        let au = act_unitary(&g, &u, &a0).unwrap();
        let f = random_band_limited(&g, 1, 2, 3, 22);
        let parts = hodge_decompose(&g, &au, &f).unwrap();
        // A gauge-transformed connection is not band-limited, so products alias
        // and the discrete d_A d_A only vanishes to truncation accuracy.
        check_parts(&g, &au, &f, &parts, 1e-5);
        let fourier = hodge_decompose(&g, &a0, &f).unwrap();
        // Harmonic spaces of gauge-equivalent flat connections have the same dimension.
        let hf = l2_norm(&g, &fourier.harmonic).unwrap();
        assert!(hf.is_finite());
    }

    #[test]
    fn non_flat_connection_is_rejected() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 8, 8).unwrap();
        let a = crate::sampling::random_su_connection(&g, 2, 0.5, 2, 1);
        let f = random_band_limited(&g, 1, 2, 2, 2);
        assert!(matches!(hodge_decompose(&g, &a, &f), Err(LabError::NotFlat { .. })));
    }

    #[test]
    fn fourier_laplacian_agrees_with_matrix_free_operator() {
        let g = FiberGeometry::new(C64::new(0.4, 1.3), 10, 12).unwrap();
        let a0 = flat(&g, 0.22, -0.31);
        let fl = FourierLaplacian::new(&g, &a0).unwrap();
        let x = random_band_limited(&g, 0, 2, 5, 3);
        let lhs = fl.apply(&x);
        let rhs = laplacian0(&g, &a0, &x).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-9 * rhs.max_abs());
    }
}
