//! Unitary gauge transformations.

use crate::fiber::{partials, FiberField, FiberGeometry};
use crate::linalg::{self, CMat};
use crate::{LabError, Result, C64};

/// A periodic `SU(n)`-valued 0-form.
#[derive(Clone, Debug)]
pub struct UnitaryGauge {
    u: FiberField,
}

impl UnitaryGauge {
    pub fn new(u: FiberField) -> Result<Self> {
        if u.degree() != 0 {
            return Err(LabError::ShapeMismatch("a gauge transformation is a 0-form".into()));
        }
        let mut deviation = 0.0f64;
        for p in 0..u.points() {
            let m = u.matrix(p, 0);
            deviation = deviation.max(linalg::unitarity_defect(&m));
            deviation = deviation.max((m.determinant() - C64::new(1.0, 0.0)).norm());
        }
        if deviation > 1e-10 {
            return Err(LabError::NonUnitary { deviation });
        }
        Ok(Self { u })
    }

    pub fn identity(n: usize, res: (usize, usize)) -> Self {
        let mut u = FiberField::zeros(0, n, res).expect("degree 0");
        for p in 0..u.points() {
            u.set_matrix(p, 0, &CMat::identity(n, n));
        }
        Self { u }
    }

    pub fn field(&self) -> &FiberField {
        &self.u
    }

    /// `u^{-1} X u` pointwise for every component of `x`.
    pub fn conjugate(&self, x: &FiberField) -> Result<FiberField> {
        self.u.check_shape(x)?;
        let mut out = x.clone();
        for p in 0..x.points() {
            let u = self.u.matrix(p, 0);
            let ui = u.adjoint();
            for c in 0..x.ncomp() {
                out.set_matrix(p, c, &(&ui * x.matrix(p, c) * &u));
            }
        }
        Ok(out)
    }
}

/// `u(A) = u^{-1} A u + u^{-1} du`.
pub fn act_unitary(geom: &FiberGeometry, u: &UnitaryGauge, a: &FiberField) -> Result<FiberField> {
    if a.degree() != 1 {
        return Err(LabError::ShapeMismatch("gauge action on a non-connection".into()));
    }
    a.check_grid(geom)?;
    let mut out = u.conjugate(a)?;
    let (d1, d2) = partials(geom, &u.u);
    for p in 0..a.points() {
        let ui = u.u.matrix(p, 0).adjoint();
        for (c, d) in [(0, &d1), (1, &d2)] {
            let m = out.matrix(p, c) + &ui * d.matrix(p, 0);
            out.set_matrix(p, c, &m);
        }
    }
    Ok(out.with_flags(a.flags()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{curvature, l2_norm, FieldFlags};
    use crate::sampling::{random_su_connection, random_unitary};

    #[test]
    fn identity_gauge_is_trivial() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 8, 8).unwrap();
        let a = random_su_connection(&g, 2, 0.5, 2, 1);
        let u = UnitaryGauge::identity(2, g.resolution());
        assert!(act_unitary(&g, &u, &a).unwrap().sub(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 4, 4).unwrap();
        let m = CMat::identity(2, 2) * C64::new(1.1, 0.0);
        let f = FiberField::constant(&g, 0, &[m]).unwrap();
        assert!(matches!(UnitaryGauge::new(f), Err(LabError::NonUnitary { .. })));
    }

    #[test]
    fn constant_gauge_conjugates_curvature() {
        let g = FiberGeometry::new(C64::new(0.2, 1.0), 12, 12).unwrap();
        let a = random_su_connection(&g, 2, 0.6, 2, 2);
        let x = crate::sampling::random_su_form(&g, 0, 2, 0.7, 0, 3);
        let u = UnitaryGauge::new(FiberField::constant(&g, 0, &[linalg::skew_exp(&x.matrix(0, 0))]).unwrap()).unwrap();
        let au = act_unitary(&g, &u, &a).unwrap();
        let fa = curvature(&g, &a).unwrap();
        let fu = curvature(&g, &au).unwrap();
        assert!(fu.sub(&u.conjugate(&fa).unwrap()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn random_gauge_preserves_curvature_norm() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 32, 32).unwrap();
        let a = random_su_connection(&g, 2, 0.6, 2, 4);
        let u = random_unitary(&g, 2, 0.3, 1, 5);
        let au = act_unitary(&g, &u, &a).unwrap();
        let n0 = l2_norm(&g, &curvature(&g, &a).unwrap()).unwrap();
        let n1 = l2_norm(&g, &curvature(&g, &au).unwrap()).unwrap();
        assert!((n0 - n1).abs() <= 1e-8 * n0, "{n0} vs {n1}");
        assert_eq!(au.flags(), FieldFlags::SU);
        assert!(au.anti_hermitian_defect() < 1e-12);
    }
}
