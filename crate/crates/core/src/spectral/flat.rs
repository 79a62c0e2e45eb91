//! Flat diagonal connections on a fiber built from spectral data, and the
//! inverse map from holonomy back to the data.

use std::f64::consts::PI;

use crate::fiber::{holonomy, Cycle};
use crate::fiber::{FieldFlags, FiberField, FiberGeometry};
use crate::linalg;
use crate::{LabError, Result, C64};

use super::data::{lattice_coords_derivative, SpectralData};

/// Components `(A_y1, A_y2)` of `pi W (q theta_bar - q_bar theta)` with
/// `theta = dy1 + tau dy2`; equal to `2 pi i (q2, -q1)`.
pub fn chern_components(q: C64, tau: C64) -> (C64, C64) {
    let w = 1.0 / tau.im;
    let a1 = (q - q.conj()) * (PI * w);
    let a2 = (q * tau.conj() - q.conj() * tau) * (PI * w);
    (a1, a2)
}

/// Derivatives of [`chern_components`] given the derivatives `dq`, `dtau`
/// along one real direction.
pub fn chern_components_derivative(q: C64, tau: C64, dq: C64, dtau: C64) -> (C64, C64) {
    let (dq1, dq2) = lattice_coords_derivative(q, tau, dq, dtau);
    let i2pi = C64::new(0.0, 2.0 * PI);
    (i2pi * dq2, -i2pi * dq1)
}

/// The constant diagonal connection with entries `chern_components(q_j)`,
/// without any distinctness check.
pub fn flat_connection(q: &[C64], geom: &FiberGeometry) -> Result<FiberField> {
    let n = q.len();
    let tau = geom.tau();
    let mut blocks = [linalg::CMat::zeros(n, n), linalg::CMat::zeros(n, n)];
    for (k, &qk) in q.iter().enumerate() {
        let (a1, a2) = chern_components(qk, tau);
        blocks[0][(k, k)] = a1;
        blocks[1][(k, k)] = a2;
    }
    let traceless = q.iter().sum::<C64>().norm() <= super::data::TRACE_TOL;
    let flags = FieldFlags {
        anti_hermitian: true,
        traceless,
    };
    Ok(FiberField::constant(geom, 1, &blocks)?.with_flags(flags))
}

/// The flat background connection of `data` on the fiber over `w`.
pub fn flat_family(data: &SpectralData, w: C64, geom: &FiberGeometry) -> Result<FiberField> {
    data.check_distinct(w, geom.tau())?;
    flat_connection(&data.values(w), geom)
}

/// Exact base derivatives `(d/dx1, d/dx2)` of the flat family, from `q'` and
/// `tau'`.
pub fn flat_family_derivative(
    data: &SpectralData,
    w: C64,
    tau_prime: C64,
    geom: &FiberGeometry,
) -> Result<[FiberField; 2]> {
    let n = data.rank();
    let tau = geom.tau();
    let (q, dq) = (data.values(w), data.derivatives(w));
    let i = C64::new(0.0, 1.0);
    let dir = |k: usize| {
        let s = if k == 0 { C64::new(1.0, 0.0) } else { i };
        let mut blocks = [linalg::CMat::zeros(n, n), linalg::CMat::zeros(n, n)];
        for j in 0..n {
            let (d1, d2) = chern_components_derivative(q[j], tau, dq[j] * s, tau_prime * s);
            blocks[0][(j, j)] = d1;
            blocks[1][(j, j)] = d2;
        }
        FiberField::constant(geom, 1, &blocks).map(|f| f.with_flags(FieldFlags::SU))
    };
    Ok([dir(0)?, dir(1)?])
}

/// The `u(1)` Chern connection of the degree-0 line bundle with parameter `q`.
pub fn line_chern_connection(q: C64, geom: &FiberGeometry) -> Result<FiberField> {
    let f = flat_connection(&[q], geom)?;
    Ok(f.with_flags(FieldFlags::U))
}

/// Spectral coordinates `(q1 mod 1, q2 mod 1)` per sheet, recovered from the
/// holonomy phases `exp(2 pi i q2)` around `e1` and `exp(-2 pi i q1)` around
/// `tau`, in `[0, 1)`. Sheets are matched by simultaneous diagonalisation,
/// which is exact for the diagonal connections produced here.
pub fn recover_spectral_data(geom: &FiberGeometry, a: &FiberField) -> Result<Vec<(f64, f64)>> {
    let h1 = holonomy(geom, a, Cycle::E1)?;
    let h2 = holonomy(geom, a, Cycle::Tau)?;
    let n = h1.nrows();
    let offdiag = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter(|(r, c)| r != c)
        .map(|(r, c)| h1[(r, c)].norm().max(h2[(r, c)].norm()))
        .fold(0.0, f64::max);
    if offdiag > 1e-10 {
        return Err(LabError::InvariantViolation(format!(
            "holonomy is not diagonal (off-diagonal {offdiag:.3e}); sheets cannot be matched"
        )));
    }
    let turns = |z: C64| (z.arg() / (2.0 * PI)).rem_euclid(1.0);
    Ok((0..n)
        .map(|k| {
            let q2 = turns(h1[(k, k)]);
            let q1 = (-turns(h2[(k, k)])).rem_euclid(1.0);
            (q1, q2)
        })
        .collect())
}
