//! Independence of the flat connection from the choice of lattice basis.

use crate::{LabError, Result, C64};

use super::data::SpectralData;
use super::flat::chern_components;

/// Recompute the flat connection in the angle coordinates of the basis
/// `e1' = a + b tau`, `e2' = c + d tau` for `change = [[a, b], [c, d]]`, pull
/// it back to the original coordinates and return the largest component
/// difference over all sheets.
pub fn lattice_basis_invariance(data: &SpectralData, w: C64, tau: C64, change: [[i64; 2]; 2]) -> Result<f64> {
    let [[a, b], [c, d]] = change;
    let det = a * d - b * c;
    if det != 1 {
        return Err(LabError::NotUnimodular(det));
    }
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let e1 = C64::new(a, 0.0) + tau * b;
    let e2 = C64::new(c, 0.0) + tau * d;
    let tau_new = e2 / e1;
    // y = M y' with M = [[a, c], [b, d]]; a 1-form pulls back by M^{-T} = [[d, -b], [-c, a]].
    let worst = data
        .values(w)
        .into_iter()
        .map(|q| {
            let (r1, r2) = chern_components(q, tau);
            let (p1, p2) = chern_components(q / e1, tau_new);
            let back1 = p1 * d - p2 * b;
            let back2 = -p1 * c + p2 * a;
            (back1 - r1).norm().max((back2 - r2).norm())
        })
        .fold(0.0, f64::max);
    Ok(worst)
}
