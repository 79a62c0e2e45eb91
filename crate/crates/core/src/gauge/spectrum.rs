//! Low spectrum of the covariant Laplacian `-Delta_A = d*_A d_A` on 0-forms.
//!
//! The operator acts on the band-limited (Nyquist-free) subspace, and on
//! traceless fields when `n > 1`. The main solver is a block LOBPCG with the
//! Fourier preconditioner of the trivial connection; small problems are
//! solved densely.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fiber::{curvature, laplacian0, sup_norm, wavenumber, FiberField, FiberGeometry};
use crate::linalg::CMat;
use crate::sampling;
use crate::{LabError, Result, C64};

/// Relative splitting threshold for counting kernel eigenvalues.
pub const KERNEL_SPLIT: f64 = 1e-6;
/// Problems with at most this many unknowns are solved densely.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    Lobpcg,
    Dense,
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    pub count: usize,
    /// Restrict to traceless fields; defaults to `n > 1`.
    pub traceless: Option<bool>,
    pub keep_fields: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub method: Option<SpectrumMethod>,
}

impl SpectrumOptions {
    pub fn new(count: usize) -> Self {
        Self {
            count,
            traceless: None,
            keep_fields: false,
            tol: 1e-9,
            max_iter: 500,
            seed: 0x5eed,
            method: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    /// Kernel larger than for generic (regular) flat data.
    pub degenerate: bool,
    pub threshold: f64,
    pub method: SpectrumMethod,
    pub iterations: usize,
    pub eigenfields: Option<Vec<FiberField>>,
}

impl SpectrumResult {
    /// Smallest eigenvalue above the kernel threshold.
    pub fn first_nonzero(&self) -> Option<f64> {
        self.eigenvalues.get(self.kernel_dim).copied()
    }
}

struct Operator<'a> {
    geom: &'a FiberGeometry,
    a: &'a FiberField,
    traceless: bool,
}

impl Operator<'_> {
    fn project(&self, f: &FiberField) -> FiberField {
        let f = if self.traceless { f.remove_trace() } else { f.clone() };
        f.dealias(self.geom)
    }

    fn apply(&self, f: &FiberField) -> Result<FiberField> {
        Ok(self.project(&laplacian0(self.geom, self.a, f)?))
    }

    /// `(K0 + shift)^{-1}` with `K0` the Laplacian of the trivial connection.
    fn precondition(&self, f: &FiberField, shift: f64) -> FiberField {
        let (n1, n2) = self.geom.resolution();
        let tau = self.geom.tau();
        let w = self.geom.w();
        let spec = self.geom.spectral();
        let mut out = f.zeros_like();
        let mut buf = vec![C64::new(0.0, 0.0); f.points()];
        let nn = f.matrix_size() * f.matrix_size();
        for e in 0..nn {
            f.gather(0, e, &mut buf);
            spec.forward(&mut buf);
            for k1 in 0..n1 {
                for k2 in 0..n2 {
                    let idx = k1 * n2 + k2;
                    match (wavenumber(k1, n1), wavenumber(k2, n2)) {
                        (Some(m1), Some(m2)) => {
                            let sym = TAU * TAU * w * (tau * m1 as f64 - m2 as f64).norm_sqr();
                            buf[idx] /= sym + shift;
                        }
                        _ => buf[idx] = C64::new(0.0, 0.0),
                    }
                }
            }
            spec.inverse(&mut buf);
            out.scatter(0, e, &buf);
        }
        out
    }
}

fn dot(a: &FiberField, b: &FiberField) -> C64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
}

fn combine(cols: &[&FiberField], coef: &CMat, j: usize) -> FiberField {
    let mut out = cols[0].zeros_like();
    for (i, c) in cols.iter().enumerate() {
        let w = coef[(i, j)];
        if w != C64::new(0.0, 0.0) {
            out.data_mut().iter_mut().zip(c.data()).for_each(|(o, x)| *o += w * x);
        }
    }
    out.with_flags(cols[0].flags())
}

/// Rayleigh–Ritz on `span(S)`; returns the lowest `m` Ritz values and the
/// coefficient matrix.
fn rayleigh_ritz(s: &[&FiberField], as_: &[&FiberField], m: usize) -> Result<(Vec<f64>, CMat)> {
    let k = s.len();
    // Columns are rescaled to unit norm first so that small residual
    // directions are not mistaken for rank deficiency.
    let d: Vec<f64> = s.iter().map(|v| 1.0 / dot(v, v).re.sqrt().max(f64::MIN_POSITIVE)).collect();
    let g = CMat::from_fn(k, k, |i, j| dot(s[i], s[j]) * d[i] * d[j]);
    let h = CMat::from_fn(k, k, |i, j| dot(s[i], as_[j]) * d[i] * d[j]);
    let g = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let ge = g.symmetric_eigen();
    let gmax = ge.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..k).filter(|&i| ge.eigenvalues[i] > 1e-12 * gmax).collect();
    if keep.len() < m {
        return Err(LabError::NoConvergence {
            solver: "LOBPCG (basis rank collapse)",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let q = CMat::from_fn(k, keep.len(), |i, j| {
        ge.eigenvectors[(i, keep[j])] * d[i] / ge.eigenvalues[keep[j]].sqrt()
    });
    let h = CMat::from_fn(k, k, |i, j| h[(i, j)] / (d[i] * d[j]));
    let hq = q.adjoint() * &h * &q;
    let hq = (&hq + hq.adjoint()) * C64::new(0.5, 0.0);
    let he = hq.symmetric_eigen();
    let mut order: Vec<usize> = (0..keep.len()).collect();
    order.sort_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b]));
    let vals = order[..m].iter().map(|&i| he.eigenvalues[i]).collect();
    let y = CMat::from_fn(keep.len(), m, |i, j| he.eigenvectors[(i, order[j])]);
    Ok((vals, q * y))
}

fn lobpcg(op: &Operator, n: usize, opts: &SpectrumOptions, block: usize) -> Result<(Vec<f64>, Vec<FiberField>, usize)> {
    let res = op.geom.resolution();
    let mut rng = sampling::rng(opts.seed);
    let mut x: Vec<FiberField> = (0..block)
        .map(|_| {
            let data = (0..res.0 * res.1 * n * n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            op.project(&FiberField::from_data(0, n, res, data).expect("shape"))
        })
        .collect();
    let ax0 = x.iter().map(|v| op.apply(v)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&FiberField> = x.iter().collect();
    let arefs: Vec<&FiberField> = ax0.iter().collect();
    let (mut lam, c) = rayleigh_ritz(&refs, &arefs, block)?;
    x = (0..block).map(|j| combine(&refs, &c, j)).collect();
    let mut p: Vec<FiberField> = Vec::new();
    let mut ap: Vec<FiberField> = Vec::new();
    let mut worst = f64::INFINITY;
    for it in 0..opts.max_iter {
        let ax = x.iter().map(|v| op.apply(v)).collect::<Result<Vec<_>>>()?;
        let scale = lam.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        let mut r = Vec::with_capacity(block);
        worst = 0.0;
        for j in 0..block {
            let nrm = dot(&x[j], &x[j]).re.sqrt();
            let rj = ax[j].axpy(-lam[j], &x[j])?;
            let rn = dot(&rj, &rj).re.sqrt() / nrm;
            if j < opts.count {
                worst = worst.max(rn / scale);
            }
            r.push(rj);
        }
        if worst <= opts.tol {
            return Ok((lam, x, it));
        }
        let shift = lam[0].abs().max(1.0);
        let w: Vec<FiberField> = r.iter().map(|v| op.project(&op.precondition(v, shift))).collect();
        let aw = w.iter().map(|v| op.apply(v)).collect::<Result<Vec<_>>>()?;
        let mut s: Vec<&FiberField> = x.iter().chain(&w).collect();
        let mut as_: Vec<&FiberField> = ax.iter().chain(&aw).collect();
        s.extend(p.iter());
        as_.extend(ap.iter());
        let (vals, c) = rayleigh_ritz(&s, &as_, block)?;
        let tail = CMat::from_fn(s.len(), block, |i, j| if i < block { C64::new(0.0, 0.0) } else { c[(i, j)] });
        let new_p: Vec<FiberField> = (0..block).map(|j| combine(&s, &tail, j)).collect();
        let new_ap: Vec<FiberField> = (0..block).map(|j| combine(&as_, &tail, j)).collect();
        let new_x: Vec<FiberField> = (0..block).map(|j| combine(&s, &c, j)).collect();
        x = new_x;
        p = new_p;
        ap = new_ap;
        lam = vals;
    }
    Err(LabError::NoConvergence {
        solver: "LOBPCG",
        iterations: opts.max_iter,
        residual: worst,
    })
}

fn dense(op: &Operator, n: usize, keep: usize) -> Result<(Vec<f64>, Vec<FiberField>)> {
    let res = op.geom.resolution();
    let dim = res.0 * res.1 * n * n;
    let unit = |j: usize| {
        let mut data = vec![C64::new(0.0, 0.0); dim];
        data[j] = C64::new(1.0, 0.0);
        FiberField::from_data(0, n, res, data).expect("shape")
    };
    let mut proj = CMat::zeros(dim, dim);
    let mut m = CMat::zeros(dim, dim);
    for j in 0..dim {
        let pj = op.project(&unit(j));
        let lj = op.apply(&pj)?;
        for i in 0..dim {
            proj[(i, j)] = pj.data()[i];
            m[(i, j)] = lj.data()[i];
        }
    }
    let penalty = 1.0 + m.norm();
    m += (CMat::identity(dim, dim) - proj) * C64::new(penalty, 0.0);
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order[..keep].iter().map(|&i| eig.eigenvalues[i]).collect();
    let fields = order[..keep]
        .iter()
        .map(|&i| FiberField::from_data(0, n, res, eig.eigenvectors.column(i).iter().copied().collect()).expect("shape"))
        .collect();
    Ok((vals, fields))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s[s.len() / 2]
}

/// Lowest `count` eigenvalues of `-Delta_A` for a flat connection `a`.
pub fn laplacian_spectrum(geom: &FiberGeometry, a: &FiberField, count: usize) -> Result<SpectrumResult> {
    laplacian_spectrum_with(geom, a, &SpectrumOptions::new(count))
}

pub fn laplacian_spectrum_with(geom: &FiberGeometry, a: &FiberField, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let sup = sup_norm(geom, &curvature(geom, a)?);
    if sup > 1e-8 * (1.0 + a.max_abs().powi(2)) {
        return Err(LabError::NotFlat { sup });
    }
    let n = a.matrix_size();
    let traceless = opts.traceless.unwrap_or(n > 1);
    let op = Operator { geom, a, traceless };
    let block = opts.count + 6;
    let dim = geom.points() * n * n;
    let method = opts
        .method
        .unwrap_or(if dim <= DENSE_LIMIT { SpectrumMethod::Dense } else { SpectrumMethod::Lobpcg });
    let (vals, fields, iterations) = match method {
        SpectrumMethod::Dense => {
            let (v, f) = dense(&op, n, block.min(dim))?;
            (v, f, 0)
        }
        SpectrumMethod::Lobpcg => lobpcg(&op, n, opts, block)?,
    };
    let threshold = KERNEL_SPLIT * median(&vals);
    let kernel_dim = vals.iter().filter(|&&v| v < threshold).count();
    let generic = if traceless { n - 1 } else { n };
    let eigenvalues: Vec<f64> = vals.iter().take(opts.count).copied().collect();
    let eigenfields = opts.keep_fields.then(|| fields.into_iter().take(opts.count).collect());
    Ok(SpectrumResult {
        eigenvalues,
        kernel_dim,
        degenerate: kernel_dim > generic,
        threshold,
        method,
        iterations,
        eigenfields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{l2_inner, FieldFlags};
    use crate::sampling::random_band_limited;
    use std::f64::consts::PI;

    fn flat(g: &FiberGeometry, q: &[(f64, f64)]) -> FiberField {
        let n = q.len();
        let d = |f: &dyn Fn(f64, f64) -> f64| {
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, q.iter().map(|&(a, b)| C64::new(0.0, f(a, b)))))
        };
        FiberField::constant(g, 1, &[d(&|_, q2| 2.0 * PI * q2), d(&|q1, _| -2.0 * PI * q1)])
            .unwrap()
            .with_flags(FieldFlags::SU)
    }

    #[test]
    fn trivial_scalar_spectrum_on_square_torus() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 16, 16).unwrap();
        let a = FiberField::zeros(1, 1, g.resolution()).unwrap();
        let r = laplacian_spectrum(&g, &a, 6).unwrap();
        assert_eq!(r.kernel_dim, 1);
        assert!((r.eigenvalues[1] - 4.0 * PI * PI).abs() < 1e-9);
        assert!((r.eigenvalues[4] - 4.0 * PI * PI).abs() < 1e-9);
        assert!((r.eigenvalues[5] - 8.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn lobpcg_and_dense_agree() {
        let g = FiberGeometry::new(C64::new(0.1, 1.2), 16, 16).unwrap();
        let a = flat(&g, &[(0.2, 0.1), (-0.2, -0.1)]);
        let mut o = SpectrumOptions::new(8);
        o.method = Some(SpectrumMethod::Dense);
        let d = laplacian_spectrum_with(&g, &a, &o).unwrap();
        o.method = Some(SpectrumMethod::Lobpcg);
        let l = laplacian_spectrum_with(&g, &a, &o).unwrap();
        for (x, y) in d.eigenvalues.iter().zip(&l.eigenvalues) {
            assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()), "{x} vs {y}");
        }
        assert_eq!(d.kernel_dim, 1);
        assert_eq!(l.kernel_dim, 1);
    }

    #[test]
    fn kernel_dimension_for_distinct_and_degenerate_data() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 12, 12).unwrap();
        let a = flat(&g, &[(0.2, 0.1), (-0.1, 0.05), (-0.1, -0.15)]);
        let r = laplacian_spectrum(&g, &a, 6).unwrap();
        assert_eq!(r.kernel_dim, 2);
        assert!(!r.degenerate);
        let a = flat(&g, &[(0.5, 0.0), (-0.5, 0.0)]);
        let r = laplacian_spectrum(&g, &a, 6).unwrap();
        assert_eq!(r.kernel_dim, 3);
        assert!(r.degenerate);
    }

    #[test]
    fn operator_is_self_adjoint() {
        let g = FiberGeometry::new(C64::new(0.3, 0.8), 12, 10).unwrap();
        let a = flat(&g, &[(0.2, 0.1), (-0.2, -0.1)]);
        let f = random_band_limited(&g, 0, 2, 3, 1);
        let h = random_band_limited(&g, 0, 2, 3, 2);
        let lf = laplacian0(&g, &a, &f).unwrap();
        let lh = laplacian0(&g, &a, &h).unwrap();
        let x = l2_inner(&g, &lf, &h).unwrap();
        let y = l2_inner(&g, &f, &lh).unwrap();
        let nf = l2_inner(&g, &f, &f).unwrap().re.sqrt();
        let nh = l2_inner(&g, &h, &h).unwrap().re.sqrt();
        assert!((x - y).norm() <= 1e-9 * nf * nh);
    }

    #[test]
    fn eigenvalues_are_non_negative() {
        let g = FiberGeometry::new(C64::new(0.0, 1.0), 8, 8).unwrap();
        let a = flat(&g, &[(0.3, 0.2), (-0.3, -0.2)]);
        let r = laplacian_spectrum(&g, &a, 10).unwrap();
        assert!(r.eigenvalues.iter().all(|&v| v > -1e-10));
    }
}
