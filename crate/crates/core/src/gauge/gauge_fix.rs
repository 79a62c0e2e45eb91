//! Solve `e^{s}(A_0) = A_target` for `s` orthogonal to `ker d_{A_0}`.
//!
//! The iteration is a chord method: every correction solves the linearised
//! equation `-i * d_{A_0} delta = -r` in the least-squares sense, using the
//! fixed operator at `A_0`.

use crate::fiber::{
    codifferential, curvature, hodge_star, l2_inner, l2_norm, solve_laplacian0, sup_norm, FiberField,
    FiberGeometry, FourierLaplacian,
};
use crate::gauge::complex::{act_complex, HermitianGauge};
use crate::gauge::spectrum::{laplacian_spectrum_with, SpectrumOptions};
use crate::{LabError, Result, C64};

#[derive(Clone, Debug)]
pub struct GaugeFixParams {
    /// Largest admissible `sup |F_{A_target}|`.
    pub eps0: f64,
    /// Target residual relative to `max(1, ||A_0||_w)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GaugeFixParams {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaugeFixResult {
    pub s_hat: HermitianGauge,
    /// `||e^{s_hat}(A_0) - A_target||_w`.
    pub residual: f64,
    /// `||P_ker s_hat||_w`, bounding the pairing with any unit kernel element.
    pub kernel_overlap: f64,
    pub c0_norm: f64,
    pub iterations: usize,
}

/// Kernel of `d_{A_0}` on 0-forms together with a pseudo-inverse of `-Delta`.
pub enum KernelModel {
    Fourier(FourierLaplacian),
    Basis { a0: FiberField, basis: Vec<FiberField> },
}

impl KernelModel {
    pub fn new(geom: &FiberGeometry, a0: &FiberField) -> Result<Self> {
        if let Some(fl) = FourierLaplacian::new(geom, a0) {
            return Ok(Self::Fourier(fl));
        }
        let n = a0.matrix_size();
        let mut opts = SpectrumOptions::new(n * n + 2);
        opts.keep_fields = true;
        opts.traceless = Some(false);
        let spec = laplacian_spectrum_with(geom, a0, &opts)?;
        let fields = spec.eigenfields.expect("requested");
        // Orthonormalise the kernel vectors in the L2 product.
        let mut basis: Vec<FiberField> = Vec::new();
        for f in fields.into_iter().take(spec.kernel_dim) {
            let mut v = f;
            for b in &basis {
                let c = l2_inner(geom, &v, b)?;
                v = v.sub(&b.scale(c))?;
            }
            let nv = l2_norm(geom, &v)?;
            basis.push(v.scale_real(1.0 / nv));
        }
        Ok(Self::Basis { a0: a0.clone(), basis })
    }

    pub fn project_kernel(&self, geom: &FiberGeometry, f: &FiberField) -> Result<FiberField> {
        match self {
            Self::Fourier(fl) => Ok(fl.kernel_projection(f)),
            Self::Basis { basis, .. } => {
                let mut out = f.zeros_like();
                for b in basis {
                    out = out.add(&b.scale(l2_inner(geom, f, b)?))?;
                }
                Ok(out)
            }
        }
    }

    pub fn solve(&self, geom: &FiberGeometry, f: &FiberField) -> Result<FiberField> {
        match self {
            Self::Fourier(fl) => Ok(fl.solve(f)),
            Self::Basis { a0, .. } => solve_laplacian0(geom, a0, f),
        }
    }
}

fn admissible(geom: &FiberGeometry, model: &KernelModel, s: &FiberField) -> Result<FiberField> {
    let h = s.add(&s.adjoint())?.scale_real(0.5).remove_trace().dealias(geom);
    let k = model.project_kernel(geom, &h)?;
    h.sub(&k)
}

pub fn gauge_fix(
    geom: &FiberGeometry,
    a_target: &FiberField,
    a0: &FiberField,
    params: &GaugeFixParams,
) -> Result<GaugeFixResult> {
    a0.check_shape(a_target)?;
    let flat = sup_norm(geom, &curvature(geom, a0)?);
    if flat > 1e-9 * (1.0 + a0.max_abs().powi(2)) {
        return Err(LabError::NotFlat { sup: flat });
    }
    let curv = sup_norm(geom, &curvature(geom, a_target)?);
    if curv > params.eps0 {
        return Err(LabError::OutsideRegime {
            curvature: curv,
            threshold: params.eps0,
        });
    }
    let model = KernelModel::new(geom, a0)?;
    let scale = l2_norm(geom, a0)?.max(1.0);
    let mut s = FiberField::zeros(0, a0.matrix_size(), a0.resolution())?;
    let mut history: Vec<f64> = Vec::new();
    for it in 0..=params.max_iter {
        let gauge = HermitianGauge::new(s.clone())?;
        let r = act_complex(geom, &gauge, a0)?.sub(a_target)?;
        let rn = l2_norm(geom, &r)?;
        history.push(rn);
        if rn <= params.tol * scale {
            let kernel = l2_norm(geom, &model.project_kernel(geom, &s)?)?;
            return Ok(GaugeFixResult {
                c0_norm: sup_norm(geom, &s),
                s_hat: gauge,
                residual: rn,
                kernel_overlap: kernel,
                iterations: it,
            });
        }
        if it >= 8 && rn > 0.5 * history[it - 8] {
            break;
        }
        let rhs = codifferential(geom, a0, &hodge_star(geom, &r)?.scale(C64::new(0.0, -1.0)))?;
        let delta = model.solve(geom, &rhs)?;
        s = admissible(geom, &model, &s.sub(&delta)?)?;
    }
    Err(LabError::NoConvergence {
        solver: "gauge fixing",
        iterations: history.len() - 1,
        residual: *history.last().expect("at least one residual") / scale,
    })
}
