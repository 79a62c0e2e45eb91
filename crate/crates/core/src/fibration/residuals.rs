//! Curvature decomposition on the total space and the residuals, densities and
//! energies built from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::base::{BaseRegion, FibrationGrid, Stencil, PAIRS};
use super::connection::{BaseDerivative, ConnectionFamily, ConnectionSlice};
use super::forms::{FormField, SemiFlatGeometry, TwoForm, WEDGE_PARTNER};
use crate::fiber::{covariant_d, curvature, hodge_star, l2_norm, sup_norm, FiberField, FiberGeometry};
use crate::linalg;
use crate::{LabError, Result, C64};

/// Fiber, mixed and base curvature at one base point:
/// `F = F_A - kappa_1^dx1 - kappa_2^dx2 - F_B dx1^dx2`.
#[derive(Clone, Debug)]
pub struct PointCurvature {
    pub f_a: FiberField,
    pub kappa: [FiberField; 2],
    pub f_b: FiberField,
    /// One-sided base stencils were used.
    pub boundary: bool,
}

/// The six coefficient fields of a matrix-valued 2-form over `PAIRS`, each
/// holding one `n x n` block per fiber point.
#[derive(Clone, Debug)]
pub struct TotalCurvature {
    pub n: usize,
    pub comps: [Vec<C64>; 6],
}

impl TotalCurvature {
    pub fn points(&self) -> usize {
        self.comps[0].len() / (self.n * self.n)
    }

    fn block(&self, k: usize, p: usize) -> &[C64] {
        let nn = self.n * self.n;
        &self.comps[k][p * nn..(p + 1) * nn]
    }

    /// `F ^ alpha` for a scalar 2-form, as one block per fiber point.
    pub fn wedge_scalar(&self, alpha: &TwoForm) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.comps[0].len()];
        for (k, &(partner, sign)) in WEDGE_PARTNER.iter().enumerate() {
            let s = alpha[partner] * sign;
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            out.iter_mut().zip(&self.comps[k]).for_each(|(o, f)| *o += f * s);
        }
        out
    }

    /// `-tr(F ^ F)` at each fiber point.
    pub fn minus_trace_square(&self) -> Vec<f64> {
        let n = self.n;
        let mut prod = vec![C64::new(0.0, 0.0); n * n];
        (0..self.points())
            .map(|p| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &(partner, sign)) in WEDGE_PARTNER.iter().enumerate() {
                    linalg::matmul_into(self.block(k, p), self.block(partner, p), &mut prod, n);
                    acc += linalg::trace(&prod, n) * sign;
                }
                -acc.re
            })
            .collect()
    }

    /// `|F|^2 = sum_{I,J} (G^{mu rho} G^{nu sigma} - G^{mu sigma} G^{nu rho}) tr(F_I F_J^*)`.
    pub fn norm_sq(&self, g: &[[f64; 4]; 4]) -> Vec<f64> {
        let mut l2 = [[0.0; 6]; 6];
        for (a, &(mu, nu)) in PAIRS.iter().enumerate() {
            for (b, &(rho, sig)) in PAIRS.iter().enumerate() {
                l2[a][b] = g[mu][rho] * g[nu][sig] - g[mu][sig] * g[nu][rho];
            }
        }
        (0..self.points())
            .map(|p| {
                let mut acc = 0.0;
                for a in 0..6 {
                    for b in 0..6 {
                        if l2[a][b] != 0.0 {
                            acc += l2[a][b] * linalg::hermitian_pair(self.block(a, p), self.block(b, p)).re;
                        }
                    }
                }
                acc.max(0.0)
            })
            .collect()
    }
}

fn component(f: &FiberField, c: usize) -> FiberField {
    let n = f.matrix_size();
    let data = (0..f.points()).flat_map(|p| f.block(p, c).iter().copied()).collect();
    FiberField::from_data(0, n, f.resolution(), data).expect("component of a valid field")
}

impl PointCurvature {
    pub fn total(&self) -> TotalCurvature {
        let n = self.f_a.matrix_size();
        let neg_fb: Vec<C64> = self.f_b.data().iter().map(|z| -z).collect();
        TotalCurvature {
            n,
            comps: [
                neg_fb,
                component(&self.kappa[0], 0).into_data(),
                component(&self.kappa[0], 1).into_data(),
                component(&self.kappa[1], 0).into_data(),
                component(&self.kappa[1], 1).into_data(),
                self.f_a.data().to_vec(),
            ],
        }
    }
}

/// Base finite difference of a slice-valued quantity along direction `dir`.
fn base_partial(
    family: &dyn ConnectionFamily,
    i: usize,
    j: usize,
    dir: usize,
    pick: impl Fn(&ConnectionSlice) -> &FiberField,
) -> Result<(FiberField, bool)> {
    let grid = family.grid();
    let (m1, m2) = grid.base.resolution();
    let (h1, h2) = grid.base.spacing();
    let st = if dir == 0 {
        Stencil::first_derivative(i, m1, h1)?
    } else {
        Stencil::first_derivative(j, m2, h2)?
    };
    let mut acc: Option<FiberField> = None;
    for &(k, wgt) in &st.taps {
        let s = if dir == 0 { family.slice(k, j)? } else { family.slice(i, k)? };
        let f = pick(&s);
        acc = Some(match acc {
            None => f.scale_real(wgt).with_flags(f.flags()),
            Some(a) => a.axpy(wgt, f)?,
        });
    }
    Ok((acc.expect("stencils have taps"), st.boundary))
}

/// Decompose the curvature at one base point.
pub fn decompose_point(family: &dyn ConnectionFamily, i: usize, j: usize) -> Result<PointCurvature> {
    let geom = family.grid().fiber_geometry(i, j)?;
    let s = family.slice(i, j)?;
    let f_a = curvature(&geom, &s.a)?;
    let mut boundary = false;
    let mut kappa = Vec::with_capacity(2);
    for d in 0..2 {
        let (da, b) = base_partial(family, i, j, d, |s| &s.a)?;
        boundary |= b;
        kappa.push(da.sub(&covariant_d(&geom, &s.a, &s.b[d])?)?.with_flags(s.a.flags()));
    }
    let (d2b1, b1) = base_partial(family, i, j, 1, |s| &s.b[0])?;
    let (d1b2, b2) = base_partial(family, i, j, 0, |s| &s.b[1])?;
    boundary |= b1 | b2;
    let mut f_b = d2b1.sub(&d1b2)?;
    let n = s.a.matrix_size();
    for p in 0..f_b.points() {
        let (x, y) = (s.b[0].block(p, 0).to_vec(), s.b[1].block(p, 0).to_vec());
        linalg::add_commutator(&x, &y, C64::new(-1.0, 0.0), f_b.block_mut(p, 0), n);
    }
    let [k1, k2]: [FiberField; 2] = kappa.try_into().expect("two base directions");
    Ok(PointCurvature {
        f_a,
        kappa: [k1, k2],
        f_b: f_b.with_flags(s.a.flags()),
        boundary,
    })
}

/// The curvature decomposition at every base point.
#[derive(Clone, Debug)]
pub struct CurvatureDecomp {
    pub grid: FibrationGrid,
    pub points: Vec<PointCurvature>,
}

impl CurvatureDecomp {
    pub fn at(&self, i: usize, j: usize) -> &PointCurvature {
        &self.points[self.grid.base.index(i, j)]
    }
}

/// Decompose the curvature at every base point (boundary points are flagged).
pub fn decompose_curvature(family: &dyn ConnectionFamily) -> Result<CurvatureDecomp> {
    let grid = family.grid().clone();
    let points = (0..grid.base.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.base.unindex(k);
            decompose_point(family, i, j)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurvatureDecomp { grid, points })
}

/// Sup and `L^2` norms over the chosen base points and the fiber.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    pub sup: f64,
    pub l2: f64,
}

/// Per base point: for each reported quantity, its fiber sup and its fiber
/// integral of squares.
type PointNorms = Vec<(f64, f64)>;

fn aggregate(
    grid: &FibrationGrid,
    region: &BaseRegion,
    count: usize,
    per_point: impl Fn(usize, usize) -> Result<PointNorms> + Sync,
) -> Result<Vec<NormPair>> {
    let pts = grid.interior_points(region);
    if pts.is_empty() {
        return Err(LabError::GridTooCoarse("no interior base points in the region".into()));
    }
    let rows = pts.par_iter().map(|&(i, j)| per_point(i, j)).collect::<Result<Vec<_>>>()?;
    let cell = grid.base.cell_area();
    Ok((0..count)
        .map(|q| NormPair {
            sup: rows.iter().map(|r| r[q].0).fold(0.0, f64::max),
            l2: (rows.iter().map(|r| r[q].1).sum::<f64>() * cell).sqrt(),
        })
        .collect())
}

/// Fiber sup and integral of `|block|_F^2` over scalar-coefficient blocks.
fn block_norms(values: &[C64], n: usize, fiber_cell: f64) -> (f64, f64) {
    let nn = n * n;
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    for b in values.chunks(nn) {
        let v = linalg::frob_norm_sq(b);
        sup = sup.max(v);
        sum += v;
    }
    (sup.sqrt(), sum * fiber_cell)
}

/// Norms of the `dx1^dx2^dy1^dy2` coefficients of `F ^ omega` and `F ^ Omega`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsdResidual {
    pub omega: NormPair,
    pub big_omega: NormPair,
}

impl AsdResidual {
    pub fn sup(&self) -> f64 {
        self.omega.sup.max(self.big_omega.sup)
    }
}

/// ASD residuals of a connection against a Kähler form and a holomorphic
/// symplectic form, over the interior base points of `region`.
pub fn asd_residual(
    family: &dyn ConnectionFamily,
    omega: &FormField,
    big_omega: &FormField,
    region: &BaseRegion,
) -> Result<AsdResidual> {
    let grid = family.grid();
    if omega.base_resolution != grid.base.resolution() || big_omega.base_resolution != grid.base.resolution() {
        return Err(LabError::ShapeMismatch("forms and connection live on different base grids".into()));
    }
    let n = family.matrix_size();
    let fiber_cell = 1.0 / (grid.fiber.0 * grid.fiber.1) as f64;
    let r = aggregate(grid, region, 2, |i, j| {
        let total = decompose_point(family, i, j)?.total();
        Ok(vec![
            block_norms(&total.wedge_scalar(omega.at(i, j)), n, fiber_cell),
            block_norms(&total.wedge_scalar(big_omega.at(i, j)), n, fiber_cell),
        ])
    })?;
    Ok(AsdResidual { omega: r[0], big_omega: r[1] })
}

/// `r1 = |*_w kappa_1 - kappa_2|` and `r2 = |t^{-1} *_w F_A - W F_B|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedAsd {
    pub r1: NormPair,
    pub r2: NormPair,
}

fn reduced_at(geom: &FiberGeometry, pc: &PointCurvature, t: f64) -> Result<PointNorms> {
    let r1 = hodge_star(geom, &pc.kappa[0])?.sub(&pc.kappa[1])?;
    let r2 = hodge_star(geom, &pc.f_a)?.scale_real(1.0 / t).axpy(-geom.w(), &pc.f_b)?;
    let pair = |f: &FiberField| -> Result<(f64, f64)> { Ok((sup_norm(geom, f), l2_norm(geom, f)?.powi(2))) };
    Ok(vec![pair(&r1)?, pair(&r2)?])
}

pub fn reduced_asd_residual(family: &dyn ConnectionFamily, t: f64, region: &BaseRegion) -> Result<ReducedAsd> {
    let grid = family.grid();
    let r = aggregate(grid, region, 2, |i, j| {
        reduced_at(&grid.fiber_geometry(i, j)?, &decompose_point(family, i, j)?, t)
    })?;
    Ok(ReducedAsd { r1: r[0], r2: r[1] })
}

impl CurvatureDecomp {
    pub fn reduced_asd_residual(&self, t: f64, region: &BaseRegion) -> Result<ReducedAsd> {
        let r = aggregate(&self.grid, region, 2, |i, j| {
            reduced_at(&self.grid.fiber_geometry(i, j)?, self.at(i, j), t)
        })?;
        Ok(ReducedAsd { r1: r[0], r2: r[1] })
    }
}

/// `|kappa_j - d/dx_j A|` summed over both directions, against exact base
/// derivatives of the fiber part.
pub fn kappa_identity_residual(
    family: &dyn ConnectionFamily,
    reference: &dyn BaseDerivative,
    region: &BaseRegion,
) -> Result<NormPair> {
    let grid = family.grid();
    let r = aggregate(grid, region, 1, |i, j| {
        let geom = grid.fiber_geometry(i, j)?;
        let pc = decompose_point(family, i, j)?;
        let exact = reference.base_derivative(i, j)?;
        let mut sup: f64 = 0.0;
        let mut ss = 0.0;
        for d in 0..2 {
            let diff = pc.kappa[d].sub(&exact[d])?;
            sup = sup.max(sup_norm(&geom, &diff));
            ss += l2_norm(&geom, &diff)?.powi(2);
        }
        Ok(vec![(sup, ss)])
    })?;
    Ok(r[0])
}

/// Convention constant `c` in `-tr(F^F) = c |F|^2 dvol` for ASD curvature,
/// with `dvol = omega^2/2` and the orientation `dx1^dx2^dy1^dy2`.
pub const CHERN_WEIL_CONSTANT: f64 = -1.0;

/// Both sides of the Chern–Weil identity as `dx1^dx2^dy1^dy2` coefficients at
/// every fiber point of the interior base points.
#[derive(Clone, Debug)]
pub struct ChernWeil {
    pub points: Vec<(usize, usize)>,
    pub minus_tr_ff: Vec<Vec<f64>>,
    pub norm_sq_vol: Vec<Vec<f64>>,
    /// Base cell area times fiber cell area.
    pub weight: f64,
}

impl ChernWeil {
    pub fn integrals(&self) -> (f64, f64) {
        let sum = |v: &[Vec<f64>]| v.iter().flatten().sum::<f64>() * self.weight;
        (sum(&self.minus_tr_ff), sum(&self.norm_sq_vol))
    }

    /// Ratio of the integrated densities.
    pub fn measured_constant(&self) -> f64 {
        let (a, b) = self.integrals();
        a / b
    }

    /// `max |lhs - c rhs| / max |rhs|` over all samples.
    pub fn pointwise_defect(&self, c: f64) -> f64 {
        let scale = self.norm_sq_vol.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = self
            .minus_tr_ff
            .iter()
            .flatten()
            .zip(self.norm_sq_vol.iter().flatten())
            .map(|(a, b)| (a - c * b).abs())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }
}

pub fn chern_weil_density(family: &dyn ConnectionFamily, sf: &SemiFlatGeometry, region: &BaseRegion) -> Result<ChernWeil> {
    let grid = family.grid();
    if grid != &sf.grid {
        return Err(LabError::ShapeMismatch("connection and semi-flat geometry use different grids".into()));
    }
    let points = grid.interior_points(region);
    let rows = points
        .par_iter()
        .map(|&(i, j)| {
            let total = decompose_point(family, i, j)?.total();
            let vol = sf.volume_density(i, j);
            let nsq: Vec<f64> = total.norm_sq(&sf.inverse_metric(i, j)).into_iter().map(|v| v * vol).collect();
            Ok((total.minus_trace_square(), nsq))
        })
        .collect::<Result<Vec<_>>>()?;
    let (minus_tr_ff, norm_sq_vol) = rows.into_iter().unzip();
    Ok(ChernWeil {
        points,
        minus_tr_ff,
        norm_sq_vol,
        weight: grid.base.cell_area() / (grid.fiber.0 * grid.fiber.1) as f64,
    })
}

/// Convention constant `ym_energy / dirichlet_energy` for connections whose
/// curvature is purely mixed.
pub const ENERGY_RATIO_CONSTANT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    /// `integral of |F|^2_{omega_t} omega_t^2/2` over the region.
    pub ym: f64,
    /// `integral of sum_j ||d/dx_j A_0||_w^2 dx1 dx2` over the region.
    pub dirichlet: f64,
}

impl Energy {
    pub fn ratio(&self) -> f64 {
        self.ym / self.dirichlet
    }
}

pub fn energy(
    family: &dyn ConnectionFamily,
    reference: &dyn BaseDerivative,
    sf: &SemiFlatGeometry,
    region: &BaseRegion,
) -> Result<Energy> {
    let grid = family.grid();
    if grid != &sf.grid {
        return Err(LabError::ShapeMismatch("connection and semi-flat geometry use different grids".into()));
    }
    let fiber_cell = 1.0 / (grid.fiber.0 * grid.fiber.1) as f64;
    let pts = grid.interior_points(region);
    let rows = pts
        .par_iter()
        .map(|&(i, j)| -> Result<(f64, f64)> {
            let total = decompose_point(family, i, j)?.total();
            let vol = sf.volume_density(i, j);
            let ym: f64 = total.norm_sq(&sf.inverse_metric(i, j)).iter().sum::<f64>() * vol * fiber_cell;
            let geom = grid.fiber_geometry(i, j)?;
            let d = reference.base_derivative(i, j)?;
            let dir = l2_norm(&geom, &d[0])?.powi(2) + l2_norm(&geom, &d[1])?.powi(2);
            Ok((ym, dir))
        })
        .collect::<Result<Vec<_>>>()?;
    let cell = grid.base.cell_area();
    Ok(Energy {
        ym: rows.iter().map(|r| r.0).sum::<f64>() * cell,
        dirichlet: rows.iter().map(|r| r.1).sum::<f64>() * cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::FieldFlags;
    use crate::fibration::{BasePatch, FnConnection, SampledConnection, TotalConnection};
    use crate::linalg::CMat;
    use crate::oracles::oracle_curvature;
    use crate::poly::ComplexPoly;
    use crate::spectral::{FmConnection, SpectralData, DEFAULT_MARGIN};
    use std::f64::consts::TAU;

    fn fm(m: usize, tau: ComplexPoly) -> FmConnection {
        let base = BasePatch::new((-1.0, 1.0), (-1.0, 1.0), m, m, tau).unwrap();
        let q = ComplexPoly::linear(C64::new(0.2, 0.0), C64::new(0.1, 0.0));
        let data = SpectralData::new(vec![q.clone(), q.scale(C64::new(-1.0, 0.0))], DEFAULT_MARGIN).unwrap();
        FmConnection::from_data(&data, FibrationGrid::new(base, 8, 8).unwrap()).unwrap()
    }

    fn default_tau() -> ComplexPoly {
        ComplexPoly::linear(C64::new(0.0, 1.0), C64::new(0.1, 0.0))
    }

    #[test]
    fn zero_connection_has_zero_residuals() {
        let base = BasePatch::new((0.0, 1.0), (0.0, 1.0), 8, 8, default_tau()).unwrap();
        let grid = FibrationGrid::new(base, 6, 6).unwrap();
        let zero = TotalConnection::zero(grid.clone(), 2).unwrap();
        let sf = SemiFlatGeometry::new(grid.clone(), 0.1).unwrap();
        let region = BaseRegion::whole(&grid.base);
        let r = asd_residual(&zero, &sf.omega(), &sf.big_omega(), &region).unwrap();
        assert_eq!(r.sup(), 0.0);
        let cw = chern_weil_density(&zero, &sf, &region).unwrap();
        assert_eq!(cw.integrals(), (0.0, 0.0));
    }

    #[test]
    fn fm_connection_is_asd_to_high_order() {
        let region = |f: &FmConnection| BaseRegion::whole(&f.grid().base);
        let mut sups = Vec::new();
        for m in [16, 32] {
            let f = fm(m, default_tau());
            let sf = SemiFlatGeometry::new(f.grid().clone(), 0.1).unwrap();
            let r = asd_residual(&f, &sf.omega(), &sf.big_omega(), &region(&f)).unwrap();
            assert!(r.omega.sup < 1e-12, "{r:?}");
            sups.push(r.big_omega.sup);
            let red = reduced_asd_residual(&f, 0.1, &region(&f)).unwrap();
            assert!(red.r2.sup < 1e-12);
        }
        assert!(sups[0] / sups[1] > 8.0, "{sups:?}");
    }

    #[test]
    fn kappa_matches_exact_derivative() {
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&m| {
                let f = fm(m, default_tau());
                kappa_identity_residual(&f, &f, &BaseRegion::whole(&f.grid().base)).unwrap().sup
            })
            .collect();
        assert!(errs[1] < 1e-4 && errs[0] / errs[1] > 8.0, "{errs:?}");
    }

    #[test]
    fn chern_weil_sign_separates_asd_from_self_dual() {
        let f = fm(24, default_tau());
        let sf = SemiFlatGeometry::new(f.grid().clone(), 0.3).unwrap();
        let cw = chern_weil_density(&f, &sf, &BaseRegion::whole(&f.grid().base)).unwrap();
        assert!((cw.measured_constant() - CHERN_WEIL_CONSTANT).abs() < 1e-4, "{}", cw.measured_constant());

        // A = i (x1 dy1 + (tau1 x1 - tau2 x2) dy2) has F = i Re(Omega), self-dual.
        let tau = C64::new(0.2, 1.1);
        let base = BasePatch::new((-1.0, 1.0), (-1.0, 1.0), 8, 8, ComplexPoly::constant(tau)).unwrap();
        let grid = FibrationGrid::new(base, 4, 4).unwrap();
        let sd = FnConnection {
            n: 1,
            flags: FieldFlags::U,
            f: move |x: [f64; 4]| {
                let c = |v: f64| CMat::from_element(1, 1, C64::new(0.0, v));
                [c(0.0), c(0.0), c(x[0]), c(tau.re * x[0] - tau.im * x[1])]
            },
        };
        let fam = SampledConnection::new(grid.clone(), &sd);
        let sf = SemiFlatGeometry::new(grid.clone(), 0.3).unwrap();
        let cw = chern_weil_density(&fam, &sf, &BaseRegion::whole(&grid.base)).unwrap();
        assert!((cw.measured_constant() + CHERN_WEIL_CONSTANT).abs() < 1e-12);
        assert!(cw.pointwise_defect(-CHERN_WEIL_CONSTANT) < 1e-12);
    }

    #[test]
    fn energy_ratio_is_t_independent() {
        let f = fm(32, default_tau());
        let region = BaseRegion::whole(&f.grid().base);
        let ratios: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&t| energy(&f, &f, &SemiFlatGeometry::new(f.grid().clone(), t).unwrap(), &region).unwrap().ratio())
            .collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }
        assert!((ratios[0] - ENERGY_RATIO_CONSTANT).abs() < 1e-5, "{ratios:?}");
    }

    #[test]
    fn decomposition_reassembles_the_oracle_curvature() {
        let tau = C64::new(0.1, 0.9);
        let base = BasePatch::new((0.0, 0.6), (0.0, 0.6), 32, 32, ComplexPoly::constant(tau)).unwrap();
        let grid = FibrationGrid::new(base, 8, 8).unwrap();
        let su = |a: f64, b: C64| {
            let mut m = CMat::zeros(2, 2);
            m[(0, 0)] = C64::new(0.0, a);
            m[(1, 1)] = C64::new(0.0, -a);
            m[(0, 1)] = b;
            m[(1, 0)] = -b.conj();
            m
        };
        let conn = FnConnection {
            n: 2,
            flags: FieldFlags::SU,
            f: move |x: [f64; 4]| {
                let (s1, s2) = ((TAU * x[2]).sin(), (TAU * x[3]).cos());
                [
                    su(0.3 * x[1] * s2, C64::new(0.2 * s1, 0.1 * x[0])),
                    su(0.2 * x[0].sin() + 0.1 * s1, C64::new(0.1 * x[1] * s2, 0.2)),
                    su(0.4 * s2 + x[0] * x[1], C64::new(0.3 * x[0], 0.1 * s1)),
                    su(0.2 * s1 * x[1], C64::new(0.1 * s2, 0.2 * x[0] * x[0])),
                ]
            },
        };
        let fam = SampledConnection::new(grid.clone(), &conn);
        let (i, j) = (13, 17);
        let total = decompose_point(&fam, i, j).unwrap().total();
        let geom = grid.fiber_geometry(i, j).unwrap();
        let x = grid.base.x(i, j);
        let mut worst: f64 = 0.0;
        for p in [0, 9, 27, 63] {
            let (y1, y2) = geom.coords(p);
            let reference = oracle_curvature(&conn, [x.0, x.1, y1, y2], 1e-3);
            for (k, r) in reference.iter().enumerate() {
                let got = crate::linalg::to_mat(&total.comps[k][p * 4..(p + 1) * 4], 2);
                worst = worst.max((got - r).norm());
            }
        }
        assert!(worst < 1e-5, "{worst:.3e}");
    }
}
