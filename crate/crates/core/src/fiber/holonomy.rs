//! Holonomy around the generating cycles of the fiber.
//!
//! The connection is restricted to a coordinate line, trigonometrically
//! interpolated, and integrated with the fourth-order two-point Gauss–Magnus
//! scheme. The result is the ordered exponential of `+A`, earlier points on
//! the left; for a constant diagonal `A` this is `exp(A_1)` around `e1`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{FiberField, FiberGeometry};
use crate::linalg::{self, CMat};
use crate::{LabError, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cycle {
    /// The loop `y1 -> y1 + 1`.
    E1,
    /// The loop `y2 -> y2 + 1`, i.e. `z -> z + tau`.
    Tau,
}

impl Cycle {
    pub fn component(self) -> usize {
        match self {
            Cycle::E1 => 0,
            Cycle::Tau => 1,
        }
    }
}

/// Trigonometric interpolant of a matrix-valued periodic function sampled at
/// `N` equispaced points on `[0, 1)`.
pub(crate) struct LineInterpolant {
    n: usize,
    modes: Vec<(f64, bool, CMat)>,
}

impl LineInterpolant {
    pub(crate) fn new(samples: &[CMat]) -> Self {
        let len = samples.len();
        let n = samples[0].nrows();
        let mut modes = Vec::with_capacity(len);
        for k in 0..len {
            let mut coef = CMat::zeros(n, n);
            for (j, s) in samples.iter().enumerate() {
                let ph = C64::from_polar(1.0, -TAU * (k * j) as f64 / len as f64);
                coef += s * ph;
            }
            coef /= C64::new(len as f64, 0.0);
            let nyquist = 2 * k == len;
            let freq = if 2 * k <= len { k as f64 } else { k as f64 - len as f64 };
            modes.push((freq, nyquist, coef));
        }
        Self { n, modes }
    }

    pub(crate) fn eval(&self, s: f64) -> CMat {
        let mut out = CMat::zeros(self.n, self.n);
        for (freq, nyquist, coef) in &self.modes {
            let ph = if *nyquist {
                C64::new((TAU * freq * s).cos(), 0.0)
            } else {
                C64::from_polar(1.0, TAU * freq * s)
            };
            out += coef * ph;
        }
        out
    }
}

/// Samples of the `cycle` component of `a` along the coordinate line through
/// grid point `base`, starting at the basepoint.
pub(crate) fn line_samples(geom: &FiberGeometry, a: &FiberField, cycle: Cycle, base: usize) -> Vec<CMat> {
    let (n1, n2) = geom.resolution();
    let (i1, i2) = (base / n2, base % n2);
    let c = cycle.component();
    match cycle {
        Cycle::E1 => (0..n1).map(|j| a.matrix(((i1 + j) % n1) * n2 + i2, c)).collect(),
        Cycle::Tau => (0..n2).map(|j| a.matrix(i1 * n2 + (i2 + j) % n2, c)).collect(),
    }
}

pub fn holonomy(geom: &FiberGeometry, a: &FiberField, cycle: Cycle) -> Result<CMat> {
    holonomy_at(geom, a, cycle, 0)
}

/// Holonomy around `cycle` based at grid point `base`.
pub fn holonomy_at(geom: &FiberGeometry, a: &FiberField, cycle: Cycle, base: usize) -> Result<CMat> {
    a.check_grid(geom)?;
    if a.degree() != 1 {
        return Err(LabError::ShapeMismatch("holonomy needs a 1-form".into()));
    }
    let scale = a.max_abs().max(1.0);
    let defect = a.anti_hermitian_defect();
    if defect > 1e-10 * scale {
        return Err(LabError::InvariantViolation(format!(
            "holonomy of a non-anti-Hermitian connection (defect {defect:.3e})"
        )));
    }
    let (n1, n2) = geom.resolution();
    let steps = 8 * n1.max(n2);
    let line = LineInterpolant::new(&line_samples(geom, a, cycle, base));
    let h = 1.0 / steps as f64;
    let off = 3f64.sqrt() / 6.0;
    let n = a.matrix_size();
    let mut hol = CMat::identity(n, n);
    for k in 0..steps {
        let s = k as f64 * h;
        let a1 = line.eval(s + (0.5 - off) * h);
        let a2 = line.eval(s + (0.5 + off) * h);
        let comm = &a1 * &a2 - &a2 * &a1;
        let omega = (&a1 + &a2) * C64::new(0.5 * h, 0.0) + comm * C64::new(3f64.sqrt() / 12.0 * h * h, 0.0);
        hol *= linalg::skew_exp(&omega);
    }
    let drift = linalg::unitarity_defect(&hol);
    if drift > 1e-10 {
        return Err(LabError::UnitarityDrift(drift));
    }
    Ok(hol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FieldFlags;
    use crate::sampling::{random_su_connection, random_unitary};
    use std::f64::consts::PI;

    #[test]
    fn zero_connection_has_trivial_holonomy() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 8, 8).unwrap();
        let a = FiberField::zeros(1, 2, g.resolution()).unwrap();
        for cyc in [Cycle::E1, Cycle::Tau] {
            let h = holonomy(&g, &a, cyc).unwrap();
            assert!((h - CMat::identity(2, 2)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_diagonal_holonomy_is_exponential() {
        let g = FiberGeometry::new(C64::new(0.1, 1.3), 8, 8).unwrap();
        let d = |x: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.0, x), C64::new(0.0, -x)]));
        let a = FiberField::constant(&g, 1, &[d(0.7), d(-2.0 * PI * 0.3)]).unwrap().with_flags(FieldFlags::SU);
        let h = holonomy(&g, &a, Cycle::E1).unwrap();
        assert!((h[(0, 0)] - C64::from_polar(1.0, 0.7)).norm() < 1e-13);
        let h = holonomy(&g, &a, Cycle::Tau).unwrap();
        assert!((h[(1, 1)] - C64::from_polar(1.0, 2.0 * PI * 0.3)).norm() < 1e-13);
    }

    #[test]
    fn interpolant_reproduces_samples() {
        let samples: Vec<CMat> = (0..8)
            .map(|j| CMat::from_element(1, 1, C64::new(0.0, (j as f64 * 0.7).sin())))
            .collect();
        let li = LineInterpolant::new(&samples);
        for (j, s) in samples.iter().enumerate() {
            assert!((li.eval(j as f64 / 8.0) - s).norm() < 1e-14);
        }
    }

    #[test]
    fn holonomy_spectrum_is_gauge_invariant() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 16, 16).unwrap();
        let a = random_su_connection(&g, 2, 0.8, 2, 5);
        let u = random_unitary(&g, 2, 0.2, 1, 6);
        let au = crate::gauge::act_unitary(&g, &u, &a).unwrap();
        for cyc in [Cycle::E1, Cycle::Tau] {
            let p0 = linalg::unitary_phases(&holonomy(&g, &a, cyc).unwrap());
            let p1 = linalg::unitary_phases(&holonomy(&g, &au, cyc).unwrap());
            assert!(linalg::phase_multiset_distance(&p0, &p1) < 1e-6, "{p0:?} vs {p1:?}");
        }
    }
}
