//! Spectral exterior and covariant calculus on a fiber.

use super::{FiberField, FiberGeometry, FieldFlags};
use crate::linalg;
use crate::{LabError, Result, C64};

/// Spectral partial derivatives `(d/dy1, d/dy2)` of every channel.
pub(crate) fn partials(geom: &FiberGeometry, f: &FiberField) -> (FiberField, FiberField) {
    let mut d1 = f.zeros_like();
    let mut d2 = f.zeros_like();
    let np = f.points();
    let mut buf = vec![C64::new(0.0, 0.0); np];
    let mut o1 = buf.clone();
    let mut o2 = buf.clone();
    for c in 0..f.ncomp() {
        for e in 0..f.n * f.n {
            f.gather(c, e, &mut buf);
            geom.spectral().gradient(&buf, &mut o1, &mut o2);
            d1.scatter(c, e, &o1);
            d2.scatter(c, e, &o2);
        }
    }
    (d1, d2)
}

fn require_connection(a: &FiberField) -> Result<()> {
    if a.degree() != 1 {
        return Err(LabError::ShapeMismatch(format!(
            "connection must be a 1-form, got degree {}",
            a.degree()
        )));
    }
    Ok(())
}

/// Exterior derivative, raising the degree by one.
pub fn exterior_d(geom: &FiberGeometry, eta: &FiberField) -> Result<FiberField> {
    eta.check_grid(geom)?;
    let n = eta.n;
    match eta.degree() {
        0 => {
            let (d1, d2) = partials(geom, eta);
            let mut out = FiberField::zeros(1, n, eta.res)?;
            for p in 0..eta.points() {
                out.block_mut(p, 0).copy_from_slice(d1.block(p, 0));
                out.block_mut(p, 1).copy_from_slice(d2.block(p, 0));
            }
            Ok(out.with_flags(eta.flags()))
        }
        1 => {
            let (d1, d2) = partials(geom, eta);
            let mut out = FiberField::zeros(2, n, eta.res)?;
            for p in 0..eta.points() {
                let (a, b) = (d1.block(p, 1), d2.block(p, 0));
                out.block_mut(p, 0)
                    .iter_mut()
                    .zip(a.iter().zip(b))
                    .for_each(|(o, (x, y))| *o = x - y);
            }
            Ok(out.with_flags(eta.flags()))
        }
        k => Err(LabError::DegreeOutOfRange(k + 1)),
    }
}

/// `d_A eta = d eta + A ^ eta - (-1)^k eta ^ A`, i.e. `d eta + [A, eta]` with the
/// graded commutator.
pub fn covariant_d(geom: &FiberGeometry, a: &FiberField, eta: &FiberField) -> Result<FiberField> {
    require_connection(a)?;
    a.check_shape(eta)?;
    let mut out = exterior_d(geom, eta)?;
    let n = eta.n;
    let one = C64::new(1.0, 0.0);
    for p in 0..eta.points() {
        match eta.degree() {
            0 => {
                for c in 0..2 {
                    let (ac, e0) = (a.block(p, c).to_vec(), eta.block(p, 0).to_vec());
                    linalg::add_commutator(&ac, &e0, one, out.block_mut(p, c), n);
                }
            }
            _ => {
                let (a1, a2) = (a.block(p, 0).to_vec(), a.block(p, 1).to_vec());
                let (e1, e2) = (eta.block(p, 0).to_vec(), eta.block(p, 1).to_vec());
                let o = out.block_mut(p, 0);
                linalg::add_commutator(&a1, &e2, one, o, n);
                linalg::add_commutator(&a2, &e1, -one, o, n);
            }
        }
    }
    Ok(out.with_flags(FieldFlags {
        anti_hermitian: a.flags().anti_hermitian && eta.flags().anti_hermitian,
        traceless: eta.flags().traceless,
    }))
}

/// Hodge star of the flat fiber metric: `*1 = dy1^dy2`, `*dz = -i dz`,
/// `*dzbar = i dzbar`.
pub fn hodge_star(geom: &FiberGeometry, f: &FiberField) -> Result<FiberField> {
    f.check_grid(geom)?;
    match f.degree() {
        0 | 2 => {
            let mut out = f.clone();
            out.degree = 2 - f.degree();
            Ok(out)
        }
        _ => {
            let s = geom.star1();
            let mut out = f.zeros_like();
            let nn = f.n * f.n;
            for p in 0..f.points() {
                let (f1, f2) = (f.block(p, 0), f.block(p, 1));
                let start = p * 2 * nn;
                for e in 0..nn {
                    out.data[start + e] = f1[e] * s[0][0] + f2[e] * s[0][1];
                    out.data[start + nn + e] = f1[e] * s[1][0] + f2[e] * s[1][1];
                }
            }
            Ok(out)
        }
    }
}

/// Formal adjoint `d*_A = -* d_A *`, lowering the degree by one.
pub fn codifferential(geom: &FiberGeometry, a: &FiberField, f: &FiberField) -> Result<FiberField> {
    if f.degree() == 0 {
        return Err(LabError::DegreeOutOfRange(0));
    }
    let s = hodge_star(geom, f)?;
    let d = covariant_d(geom, a, &s)?;
    Ok(hodge_star(geom, &d)?.scale_real(-1.0))
}

/// `F_A = dA + A ^ A`.
pub fn curvature(geom: &FiberGeometry, a: &FiberField) -> Result<FiberField> {
    require_connection(a)?;
    let mut out = exterior_d(geom, a)?;
    let n = a.n;
    for p in 0..a.points() {
        let (a1, a2) = (a.block(p, 0).to_vec(), a.block(p, 1).to_vec());
        linalg::add_commutator(&a1, &a2, C64::new(1.0, 0.0), out.block_mut(p, 0), n);
    }
    Ok(out.with_flags(a.flags()))
}

/// The non-negative operator `-Delta_A = d*_A d_A` on 0-forms.
pub fn laplacian0(geom: &FiberGeometry, a: &FiberField, eta: &FiberField) -> Result<FiberField> {
    if eta.degree() != 0 {
        return Err(LabError::ShapeMismatch("laplacian0 acts on 0-forms".into()));
    }
    codifferential(geom, a, &covariant_d(geom, a, eta)?)
}

fn pointwise_pair(geom: &FiberGeometry, f: &FiberField, g: &FiberField, p: usize) -> C64 {
    match f.degree() {
        1 => {
            let gi = geom.inverse_metric();
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    acc += linalg::hermitian_pair(f.block(p, a), g.block(p, b)) * gi[a][b];
                }
            }
            acc
        }
        _ => linalg::hermitian_pair(f.block(p, 0), g.block(p, 0)),
    }
}

/// Pointwise `|f|^2 = g^{ab} tr(f_a f_b^*)`.
pub fn pointwise_norm_sq(geom: &FiberGeometry, f: &FiberField) -> Vec<f64> {
    (0..f.points())
        .map(|p| pointwise_pair(geom, f, f, p).re.max(0.0))
        .collect()
}

/// `<f, g>_w = integral of tr(f g^*)` against the unit-area fiber form.
pub fn l2_inner(geom: &FiberGeometry, f: &FiberField, g: &FiberField) -> Result<C64> {
    f.check_grid(geom)?;
    f.check_shape(g)?;
    if f.degree() != g.degree() {
        return Err(LabError::ShapeMismatch(format!(
            "inner product of degrees {} and {}",
            f.degree(),
            g.degree()
        )));
    }
    let sum: C64 = (0..f.points()).map(|p| pointwise_pair(geom, f, g, p)).sum();
    Ok(sum * geom.cell_area())
}

pub fn l2_norm(geom: &FiberGeometry, f: &FiberField) -> Result<f64> {
    Ok(l2_inner(geom, f, f)?.re.max(0.0).sqrt())
}

/// Grid supremum of the pointwise norm.
pub fn sup_norm(geom: &FiberGeometry, f: &FiberField) -> f64 {
    pointwise_norm_sq(geom, f).into_iter().fold(0.0, f64::max).sqrt()
}

pub fn lp_norm(geom: &FiberGeometry, f: &FiberField, p: f64) -> f64 {
    let s: f64 = pointwise_norm_sq(geom, f).into_iter().map(|v| v.powf(p / 2.0)).sum();
    (s * geom.cell_area()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;
    use crate::sampling::{random_band_limited, random_su_connection};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn square(n: usize) -> FiberGeometry {
        FiberGeometry::new(C64::new(0.0, 1.0), n, n).unwrap()
    }

    fn diag2(a: C64, b: C64) -> CMat {
        CMat::from_row_slice(2, 2, &[a, C64::new(0.0, 0.0), C64::new(0.0, 0.0), b])
    }

    fn flat_quarter(g: &FiberGeometry) -> FiberField {
        // q = +-1/4 on the square torus: A = -(pi i / 2) dy2 on the first sheet.
        let z = C64::new(0.0, 0.0);
        let c = C64::new(0.0, -PI / 2.0);
        FiberField::constant(g, 1, &[diag2(z, z), diag2(c, -c)]).unwrap().with_flags(FieldFlags::SU)
    }

    #[test]
    fn d_of_constant_vanishes() {
        let g = square(8);
        let eta = FiberField::constant(&g, 0, &[CMat::identity(2, 2)]).unwrap();
        let a = FiberField::zeros(1, 2, g.resolution()).unwrap();
        assert!(covariant_d(&g, &a, &eta).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn diagonal_constants_are_covariantly_constant() {
        let g = square(8);
        let a = flat_quarter(&g);
        let eta = FiberField::constant(&g, 0, &[diag2(C64::new(1.0, 0.0), C64::new(-1.0, 0.0))]).unwrap();
        assert!(covariant_d(&g, &a, &eta).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn star_on_square_torus() {
        let g = square(4);
        let one = CMat::identity(1, 1);
        let zero = CMat::zeros(1, 1);
        let dy1 = FiberField::constant(&g, 1, &[one.clone(), zero.clone()]).unwrap();
        let s = hodge_star(&g, &dy1).unwrap();
        assert!((s.block(0, 0)[0]).norm() < 1e-15);
        assert!((s.block(0, 1)[0] - 1.0).norm() < 1e-15);
        let dy2 = FiberField::constant(&g, 1, &[zero, one]).unwrap();
        let s = hodge_star(&g, &dy2).unwrap();
        assert!((s.block(0, 0)[0] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn star_multiplies_dz_by_minus_i() {
        let g = FiberGeometry::new(C64::new(0.3, 1.2), 4, 4).unwrap();
        let c = C64::new(0.7, -0.2);
        let (f1, f2) = g.from_complex_frame(c, C64::new(0.0, 0.0));
        let f = FiberField::constant(&g, 1, &[CMat::from_element(1, 1, f1), CMat::from_element(1, 1, f2)]).unwrap();
        let s = hodge_star(&g, &f).unwrap();
        let (a, b) = g.to_complex_frame(s.block(0, 0)[0], s.block(0, 1)[0]);
        assert!((a - c * C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!(b.norm() < 1e-14);
    }

    #[test]
    fn identity_norm_is_rank_times_area() {
        let g = FiberGeometry::new(C64::new(0.2, 1.7), 8, 6).unwrap();
        let id = FiberField::constant(&g, 0, &[CMat::identity(3, 3)]).unwrap();
        let n2 = l2_inner(&g, &id, &id).unwrap().re;
        assert!((n2 - 3.0).abs() < 1e-13);
        let zero = id.zeros_like();
        assert_eq!(l2_norm(&g, &zero).unwrap(), 0.0);
    }

    #[test]
    fn constant_diagonal_connection_is_flat() {
        let g = square(16);
        let f = curvature(&g, &flat_quarter(&g)).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn curvature_is_anti_hermitian_and_traceless() {
        let g = square(12);
        let a = random_su_connection(&g, 2, 0.4, 3, 7);
        let f = curvature(&g, &a).unwrap();
        assert!(f.anti_hermitian_defect() < 1e-12);
        assert!(f.trace_defect() < 1e-12);
    }

    #[test]
    fn codifferential_is_adjoint_of_covariant_d() {
        let g = FiberGeometry::new(C64::new(0.25, 0.9), 12, 10).unwrap();
        let a = random_su_connection(&g, 2, 0.5, 3, 11);
        let eta = random_band_limited(&g, 0, 2, 3, 12);
        let f = random_band_limited(&g, 1, 2, 3, 13);
        let lhs = l2_inner(&g, &covariant_d(&g, &a, &eta).unwrap(), &f).unwrap();
        let rhs = l2_inner(&g, &eta, &codifferential(&g, &a, &f).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-11 * (1.0 + lhs.norm()));

        let h = random_band_limited(&g, 2, 2, 3, 14);
        let lhs = l2_inner(&g, &covariant_d(&g, &a, &f).unwrap(), &h).unwrap();
        let rhs = l2_inner(&g, &f, &codifferential(&g, &a, &h).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-11 * (1.0 + lhs.norm()));
    }

    #[test]
    fn bianchi_for_zero_form_laplacian_on_flat_connection() {
        // d_A d_A eta = [F, eta] vanishes for flat A.
        let g = square(10);
        let a = flat_quarter(&g);
        let eta = random_band_limited(&g, 0, 2, 3, 2);
        let dd = covariant_d(&g, &a, &covariant_d(&g, &a, &eta).unwrap()).unwrap();
        assert!(dd.max_abs() < 1e-11);
    }

    #[test]
    fn degree_two_has_no_covariant_derivative() {
        let g = square(4);
        let a = FiberField::zeros(1, 1, g.resolution()).unwrap();
        let f = FiberField::zeros(2, 1, g.resolution()).unwrap();
        assert!(matches!(covariant_d(&g, &a, &f), Err(LabError::DegreeOutOfRange(3))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn star_is_an_isometry_and_squares_to_minus_one(t1 in -0.8f64..0.8, t2 in 0.3f64..2.5, seed in 0u64..1000) {
            let g = FiberGeometry::new(C64::new(t1, t2), 8, 8).unwrap();
            let f = random_band_limited(&g, 1, 2, 2, seed);
            let s = hodge_star(&g, &f).unwrap();
            let nf = l2_norm(&g, &f).unwrap();
            prop_assert!((l2_norm(&g, &s).unwrap() - nf).abs() <= 1e-12 * nf);
            let ss = hodge_star(&g, &s).unwrap();
            prop_assert!(ss.add(&f).unwrap().max_abs() <= 1e-12 * f.max_abs());
        }

        #[test]
        fn translation_preserves_norms(s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, seed in 0u64..1000) {
            let g = FiberGeometry::new(C64::new(0.1, 1.1), 12, 12).unwrap();
            let a = random_su_connection(&g, 2, 0.5, 2, seed);
            let f = curvature(&g, &a).unwrap();
            let at = a.translate(&g, s1, s2);
            let ft = curvature(&g, &at).unwrap();
            let (n0, n1) = (l2_norm(&g, &f).unwrap(), l2_norm(&g, &ft).unwrap());
            prop_assert!((n0 - n1).abs() <= 1e-10 * (1.0 + n0));
            let (m0, m1) = (l2_norm(&g, &a).unwrap(), l2_norm(&g, &at).unwrap());
            prop_assert!((m0 - m1).abs() <= 1e-10 * (1.0 + m0));
        }
    }
}
