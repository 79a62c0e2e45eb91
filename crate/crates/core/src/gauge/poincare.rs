//! The Poincaré ratio `||F_A||_w / ||d*_A F_A||_w` and its `L^p` variants.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::fiber::{
    codifferential, curvature, hodge_star, l2_norm, lp_norm, FiberField, FiberGeometry, FourierLaplacian,
};
use crate::{LabError, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoincareRatio {
    Ratio(f64),
    /// The curvature vanishes, so the ratio is `0/0`.
    Flat,
}

impl PoincareRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Ratio(r) => Some(r),
            Self::Flat => None,
        }
    }
}

const FLAT_FLOOR: f64 = 1e-13;

fn ratio_with(geom: &FiberGeometry, a: &FiberField, numer: impl Fn(&FiberField) -> Result<f64>) -> Result<PoincareRatio> {
    let f = curvature(geom, a)?;
    let fnorm = l2_norm(geom, &f)?;
    let scale = a.max_abs().max(1.0).powi(2);
    if fnorm <= FLAT_FLOOR * scale {
        return Ok(PoincareRatio::Flat);
    }
    let d = l2_norm(geom, &codifferential(geom, a, &f)?)?;
    if d == 0.0 {
        return Ok(PoincareRatio::Flat);
    }
    Ok(PoincareRatio::Ratio(numer(&f)? / d))
}

pub fn poincare_ratio(geom: &FiberGeometry, a: &FiberField) -> Result<PoincareRatio> {
    ratio_with(geom, a, |f| l2_norm(geom, f))
}

/// `||F_A||_{L^p} / ||d*_A F_A||_w`.
pub fn sobolev_ratio(geom: &FiberGeometry, a: &FiberField, p: f64) -> Result<PoincareRatio> {
    ratio_with(geom, a, |f| Ok(lp_norm(geom, f, p)))
}

/// A coexact eigen-direction for a constant diagonal flat connection: the
/// 2-form `beta = *(e_k E_rc - conj(e_k) E_cr)` with `d d* beta = mu beta`.
pub fn coexact_eigendirection(
    geom: &FiberGeometry,
    a0: &FiberField,
    entry: (usize, usize),
    mode: (i64, i64),
) -> Result<(FiberField, f64)> {
    let fl = FourierLaplacian::new(geom, a0)
        .ok_or_else(|| LabError::InvariantViolation("eigen-direction needs a constant diagonal connection".into()))?;
    let n = a0.matrix_size();
    let (r, c) = entry;
    if r == c || r >= n || c >= n {
        return Err(LabError::ShapeMismatch(format!("entry {entry:?} is not off-diagonal for n = {n}")));
    }
    let (n1, n2) = geom.resolution();
    let idx = |m: i64, len: usize| m.rem_euclid(len as i64) as usize;
    let mu = fl.symbol(r, c, idx(mode.0, n1), idx(mode.1, n2));
    let phi = FiberField::from_fn(geom, 0, n, |y1, y2, out| {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let e = C64::from_polar(1.0, TAU * (mode.0 as f64 * y1 + mode.1 as f64 * y2));
        out[r * n + c] = e;
        out[c * n + r] = -e.conj();
    })?;
    Ok((hodge_star(geom, &phi)?, mu))
}

/// `eps -> 0` limit of the ratio along `A_0 + eps d*_{A_0} beta`, by
/// Richardson extrapolation from `eps` and `eps/2`.
pub fn linearized_ratio(geom: &FiberGeometry, a0: &FiberField, beta: &FiberField, eps: f64) -> Result<f64> {
    let dir = codifferential(geom, a0, beta)?;
    let at = |e: f64| -> Result<f64> {
        let a = a0.axpy(e, &dir)?.with_flags(a0.flags());
        poincare_ratio(geom, &a)?
            .value()
            .ok_or_else(|| LabError::InvariantViolation("perturbed connection is flat".into()))
    };
    Ok(2.0 * at(0.5 * eps)? - at(eps)?)
}
