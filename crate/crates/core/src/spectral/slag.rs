//! Restriction of `Re Omega` and `Im Omega` to the graph of one sheet of the
//! spectral cover, `{(w, z) : z = q_j(w) + eps * conj(w)}` mod the lattice.

use serde::{Deserialize, Serialize};

use crate::fibration::{FibrationGrid, FormField, PAIRS};
use crate::poly::ComplexPoly;
use crate::{LabError, Result, C64};

use super::data::{lattice_coords_derivative, reduce_mod_lattice, SpectralData};

/// A sheet graph `z = q(w) + anti * conj(w)`; holomorphic when `anti = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SheetGraph {
    pub q: ComplexPoly,
    pub anti: C64,
}

impl SheetGraph {
    pub fn from_data(data: &SpectralData, sheet: usize) -> Result<Self> {
        let q = data
            .polys()
            .get(sheet)
            .ok_or_else(|| LabError::ShapeMismatch(format!("sheet {sheet} of a rank {} cover", data.rank())))?;
        Ok(Self {
            q: q.clone(),
            anti: C64::new(0.0, 0.0),
        })
    }

    pub fn perturbed(mut self, eps: C64) -> Self {
        self.anti = eps;
        self
    }

    /// Pullback of `(x1, x2, y1, y2)` to the graph at `w`: rows are the four
    /// coordinates, columns `d/dx1`, `d/dx2`.
    pub fn jacobian(&self, w: C64, tau: C64, dtau: C64) -> [[f64; 2]; 4] {
        let z = self.q.eval(w) + self.anti * w.conj();
        let shift = reduce_mod_lattice(z, tau).shift;
        let zr = z - C64::new(shift.0 as f64, 0.0) - tau * shift.1 as f64;
        let dq = self.q.derivative().eval(w);
        let i = C64::new(0.0, 1.0);
        let n = shift.1 as f64;
        let d1 = dq + self.anti - dtau * n;
        let d2 = i * dq - i * self.anti - i * dtau * n;
        let (a1, a2) = lattice_coords_derivative(zr, tau, d1, dtau);
        let (b1, b2) = lattice_coords_derivative(zr, tau, d2, i * dtau);
        [[1.0, 0.0], [0.0, 1.0], [a1, b1], [a2, b2]]
    }
}

/// The calibrating pair `(Re Omega, Im Omega_check = -Im Omega)`.
#[derive(Clone, Debug)]
pub struct SlagForms {
    pub re_omega: FormField,
    pub im_omega_check: FormField,
}

impl SlagForms {
    pub fn from_big_omega(big_omega: &FormField) -> Self {
        Self {
            re_omega: big_omega.re(),
            im_omega_check: big_omega.im().scale(C64::new(-1.0, 0.0)),
        }
    }
}

/// Sup over the base grid of the `dw ^ dw_bar` coefficient of each pulled-back form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlagResidual {
    pub re_omega: f64,
    pub im_omega: f64,
}

impl SlagResidual {
    pub fn max(&self) -> f64 {
        self.re_omega.max(self.im_omega)
    }
}

/// `dx1 ^ dx2` coefficient of a 2-form pulled back through `jac`.
fn pull_back(form: &[C64; 6], jac: &[[f64; 2]; 4]) -> C64 {
    PAIRS
        .iter()
        .zip(form)
        .map(|(&(mu, nu), &a)| a * (jac[mu][0] * jac[nu][1] - jac[mu][1] * jac[nu][0]))
        .sum()
}

pub fn slag_residual_graph(graph: &SheetGraph, grid: &FibrationGrid, forms: &SlagForms) -> Result<SlagResidual> {
    let (m1, m2) = grid.base.resolution();
    let mut out = SlagResidual::default();
    for i in 0..m1 {
        for j in 0..m2 {
            let jac = graph.jacobian(grid.base.w(i, j), grid.base.tau_at(i, j), grid.base.tau_prime_at(i, j));
            // dx1 ^ dx2 = (i/2) dw ^ dw_bar.
            let re = pull_back(forms.re_omega.at(i, j), &jac).norm() / 2.0;
            let im = pull_back(forms.im_omega_check.at(i, j), &jac).norm() / 2.0;
            out.re_omega = out.re_omega.max(re);
            out.im_omega = out.im_omega.max(im);
        }
    }
    Ok(out)
}

/// Residuals of the holomorphic graph of sheet `sheet`.
pub fn slag_residual(data: &SpectralData, sheet: usize, grid: &FibrationGrid, forms: &SlagForms) -> Result<SlagResidual> {
    slag_residual_graph(&SheetGraph::from_data(data, sheet)?, grid, forms)
}
