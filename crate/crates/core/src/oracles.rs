//! Slow, independent reference implementations.
//!
//! Nothing here calls the FFT or the iterative solvers of the main path:
//! derivatives use dense differentiation matrices, interpolation uses a naive
//! DFT, integrals use the midpoint rule at twice the requested resolution and
//! 4d curvature uses finite differences of a closed-form connection.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::fiber::{Cycle, FiberField, FiberGeometry};
use crate::fibration::{AnalyticConnection, PAIRS};
use crate::linalg::CMat;
use crate::{LabError, Result, C64};

/// Oracle resolutions are this multiple of the main path.
pub const ORACLE_REFINEMENT: usize = 2;

/// Largest fiber grid the dense oracles accept.
pub const DENSE_ORACLE_POINTS: usize = 32 * 32;

/// Minimum number of steps for the path-ordered holonomy.
pub const MIN_HOLONOMY_STEPS: usize = 1000;

/// A main-path value next to its oracle value. The discrepancies are derived
/// from the values whenever they are read or serialized.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: Vec<f64>,
    pub main: Vec<f64>,
    pub resolutions: Vec<usize>,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, oracle: Vec<f64>, main: Vec<f64>, resolutions: Vec<usize>) -> Self {
        Self { quantity: quantity.into(), oracle, main, resolutions }
    }

    pub fn abs_discrepancy(&self) -> f64 {
        if self.oracle.len() != self.main.len() {
            return f64::INFINITY;
        }
        self.oracle.iter().zip(&self.main).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn rel_discrepancy(&self) -> f64 {
        let scale = self.oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            self.abs_discrepancy()
        } else {
            self.abs_discrepancy() / scale
        }
    }
}

#[derive(Serialize, Deserialize)]
struct OracleReportRepr {
    quantity: String,
    oracle: Vec<f64>,
    main: Vec<f64>,
    resolutions: Vec<usize>,
    #[serde(default)]
    abs_discrepancy: Option<f64>,
    #[serde(default)]
    rel_discrepancy: Option<f64>,
}

impl Serialize for OracleReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OracleReportRepr {
            quantity: self.quantity.clone(),
            oracle: self.oracle.clone(),
            main: self.main.clone(),
            resolutions: self.resolutions.clone(),
            abs_discrepancy: Some(self.abs_discrepancy()),
            rel_discrepancy: Some(self.rel_discrepancy()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OracleReport {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = OracleReportRepr::deserialize(d)?;
        Ok(Self::new(r.quantity, r.oracle, r.main, r.resolutions))
    }
}

/// Naive trigonometric interpolation of equispaced samples on `[0, 1)`; the
/// Nyquist mode of an even grid enters as a cosine.
fn naive_interpolate(samples: &[C64], s: f64) -> C64 {
    let n = samples.len();
    let mut out = C64::new(0.0, 0.0);
    for k in 0..n {
        let coef: C64 = samples
            .iter()
            .enumerate()
            .map(|(j, v)| v * C64::from_polar(1.0, -TAU * (k * j) as f64 / n as f64))
            .sum::<C64>()
            / n as f64;
        let basis = if 2 * k == n {
            C64::new((PI * n as f64 * s).cos(), 0.0)
        } else {
            let freq = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
            C64::from_polar(1.0, TAU * freq * s)
        };
        out += coef * basis;
    }
    out
}

/// Path-ordered exponential of `+A` around `cycle` through grid point `base`,
/// as a product of `steps` midpoint exponentials (earlier points on the left).
pub fn oracle_holonomy(geom: &FiberGeometry, a: &FiberField, cycle: Cycle, base: usize, steps: usize) -> Result<CMat> {
    if steps < MIN_HOLONOMY_STEPS {
        return Err(LabError::OracleGuard(format!("{steps} steps, need at least {MIN_HOLONOMY_STEPS}")));
    }
    a.check_grid(geom)?;
    let (n1, n2) = geom.resolution();
    let (i1, i2) = (base / n2, base % n2);
    let n = a.matrix_size();
    let c = cycle.component();
    let line: Vec<CMat> = match cycle {
        Cycle::E1 => (0..n1).map(|k| a.matrix(((i1 + k) % n1) * n2 + i2, c)).collect(),
        Cycle::Tau => (0..n2).map(|k| a.matrix(i1 * n2 + (i2 + k) % n2, c)).collect(),
    };
    let entry_samples: Vec<Vec<C64>> = (0..n * n).map(|e| line.iter().map(|m| m[(e / n, e % n)]).collect()).collect();
    let ds = 1.0 / steps as f64;
    let mut hol = CMat::identity(n, n);
    for k in 0..steps {
        let s = (k as f64 + 0.5) * ds;
        let am = CMat::from_fn(n, n, |r, col| naive_interpolate(&entry_samples[r * n + col], s));
        hol *= (am * C64::new(ds, 0.0)).exp();
    }
    let defect = (hol.adjoint() * &hol - CMat::identity(n, n)).norm();
    if defect > 1e-10 {
        return Err(LabError::UnitarityDrift(defect));
    }
    Ok(hol)
}

/// Dense Fourier differentiation matrix on `N` points of `[0, 1)`: the
/// derivative of the trigonometric interpolant, with the Nyquist mode of an
/// even grid differentiated as a cosine (to zero at the nodes).
pub fn differentiation_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            return 0.0;
        }
        let d = j as f64 - k as f64;
        let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
        let x = PI * d / n as f64;
        if n.is_multiple_of(2) {
            PI * sign / x.tan()
        } else {
            PI * sign / x.sin()
        }
    })
}

/// Projector removing the Nyquist mode `v_j = (-1)^j` of an even grid.
pub fn nyquist_projector(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(n, n);
    if n.is_multiple_of(2) {
        let v = DVector::from_fn(n, |j, _| if j % 2 == 0 { 1.0 } else { -1.0 });
        p -= &v * v.transpose() / n as f64;
    }
    p
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Dense partials on the Nyquist-free space, flattened point-major
/// (`p = i1*N2 + i2`), and the projector onto that space.
struct DenseCalculus {
    d1: DMatrix<C64>,
    d2: DMatrix<C64>,
    proj: DMatrix<C64>,
    ginv: [[f64; 2]; 2],
    star1: [[f64; 2]; 2],
    cell: f64,
}

impl DenseCalculus {
    fn new(geom: &FiberGeometry) -> Result<Self> {
        let (n1, n2) = geom.resolution();
        if n1 * n2 > DENSE_ORACLE_POINTS {
            return Err(LabError::OracleGuard(format!(
                "{n1}x{n2} fiber grid exceeds the dense limit of {DENSE_ORACLE_POINTS} points"
            )));
        }
        let (p1, p2) = (nyquist_projector(n1), nyquist_projector(n2));
        let cplx = |m: DMatrix<f64>| m.map(|v| C64::new(v, 0.0));
        let tau = geom.tau();
        let w = 1.0 / tau.im;
        Ok(Self {
            d1: cplx(kron(&differentiation_matrix(n1), &p2)),
            d2: cplx(kron(&p1, &differentiation_matrix(n2))),
            proj: cplx(kron(&p1, &p2)),
            ginv: [[w * tau.norm_sqr(), -w * tau.re], [-w * tau.re, w]],
            star1: [[tau.re * w, -w], [tau.norm_sqr() * w, -tau.re * w]],
            cell: 1.0 / (n1 * n2) as f64,
        })
    }

    fn dim(&self) -> usize {
        self.proj.nrows()
    }

    /// Covariant partials for a constant scalar twist `(a1, a2)`.
    fn twisted(&self, twist: (C64, C64)) -> (DMatrix<C64>, DMatrix<C64>) {
        let id = DMatrix::<C64>::identity(self.dim(), self.dim());
        (&self.d1 + &id * twist.0, &self.d2 + &id * twist.1)
    }
}

/// Constant diagonal entries of a connection's two components.
fn diagonal_twists(a0: &FiberField) -> Result<Vec<(C64, C64)>> {
    let n = a0.matrix_size();
    let m0 = (a0.matrix(0, 0), a0.matrix(0, 1));
    for p in 0..a0.points() {
        for (c, m) in [(0, &m0.0), (1, &m0.1)] {
            let mp = a0.matrix(p, c);
            if (&mp - m).norm() > 1e-14 * (1.0 + m.norm()) {
                return Err(LabError::OracleGuard("connection is not constant".into()));
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            if r != c && (m0.0[(r, c)].norm() > 0.0 || m0.1[(r, c)].norm() > 0.0) {
                return Err(LabError::OracleGuard("connection is not diagonal".into()));
            }
        }
    }
    Ok((0..n).map(|r| (m0.0[(r, r)], m0.1[(r, r)])).collect())
}

/// The dense covariant Laplacian on 0-forms for one matrix entry.
fn entry_laplacian(calc: &DenseCalculus, twist: (C64, C64)) -> DMatrix<C64> {
    let (t1, t2) = calc.twisted(twist);
    let g = calc.ginv;
    let l = (&t1 * &t1) * C64::new(-g[0][0], 0.0)
        + (&t1 * &t2) * C64::new(-g[0][1], 0.0)
        + (&t2 * &t1) * C64::new(-g[1][0], 0.0)
        + (&t2 * &t2) * C64::new(-g[1][1], 0.0);
    &calc.proj * l * &calc.proj
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    /// All eigenvalues on the Nyquist-free space, sorted.
    pub eigenvalues: Vec<f64>,
    /// Bendixson bound on the imaginary parts: the spectral norm of the
    /// skew-Hermitian part of the assembled matrix.
    pub max_imag: f64,
}

/// Full spectrum of `-Delta_{A0}` on matrix-valued 0-forms for a constant
/// diagonal `A0`, assembled entry by entry with dense differentiation
/// matrices. For `n > 1` the space is traceless.
pub fn oracle_spectrum(geom: &FiberGeometry, a0: &FiberField) -> Result<OracleSpectrum> {
    a0.check_grid(geom)?;
    let calc = DenseCalculus::new(geom)?;
    let twists = diagonal_twists(a0)?;
    let n = twists.len();
    let (n1, n2) = geom.resolution();
    let free = (n1 - 1 + n1 % 2) * (n2 - 1 + n2 % 2);
    let mut all = Vec::new();
    let mut max_imag: f64 = 0.0;
    let mut push = |m: DMatrix<C64>, copies: usize| {
        let skew = (&m - m.adjoint()) * C64::new(0.0, -0.5);
        let skew_norm = skew.symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        max_imag = max_imag.max(skew_norm);
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        // The Nyquist subspace contributes exact zeros that are not part of
        // the operator's domain: keep only the top `free` eigenvalues.
        let kept = ev.split_off(ev.len() - free);
        for _ in 0..copies {
            all.extend_from_slice(&kept);
        }
    };
    let zero = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    push(entry_laplacian(&calc, zero), if n > 1 { n - 1 } else { 1 });
    for r in 0..n {
        for c in 0..n {
            if r != c {
                let tw = (twists[r].0 - twists[c].0, twists[r].1 - twists[c].1);
                push(entry_laplacian(&calc, tw), 1);
            }
        }
    }
    all.sort_by(f64::total_cmp);
    Ok(OracleSpectrum { eigenvalues: all, max_imag })
}

/// `||d_A d*_A beta|| / ||d*_A d_A d*_A beta||` for a 2-form `beta` and a
/// constant diagonal `A0`, with dense matrices entry by entry. This is the
/// `eps -> 0` limit of the Poincaré ratio along `A0 + eps d*_{A0} beta`.
pub fn oracle_linearized_poincare(geom: &FiberGeometry, a0: &FiberField, beta: &FiberField) -> Result<f64> {
    if beta.degree() != 2 {
        return Err(LabError::ShapeMismatch("the direction must be a 2-form".into()));
    }
    let calc = DenseCalculus::new(geom)?;
    let twists = diagonal_twists(a0)?;
    let n = twists.len();
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            let tw = (twists[r].0 - twists[c].0, twists[r].1 - twists[c].1);
            let (t1, t2) = calc.twisted(tw);
            let b = DVector::from_fn(beta.points(), |p, _| beta.block(p, 0)[r * n + c]);
            let b = &calc.proj * b;
            let s = calc.star1;
            // d* of a 2-form f: -* d_A * f, with * copying the coefficient.
            let codiff2 = |f: &DVector<C64>| {
                let (e1, e2) = (&t1 * f, &t2 * f);
                let h = |k: usize| (&e1 * C64::new(s[k][0], 0.0) + &e2 * C64::new(s[k][1], 0.0)) * C64::new(-1.0, 0.0);
                (h(0), h(1))
            };
            let d1 = |eta: &(DVector<C64>, DVector<C64>)| &t1 * &eta.1 - &t2 * &eta.0;
            let norm1 = |eta: &(DVector<C64>, DVector<C64>)| {
                let g = calc.ginv;
                let mut acc = 0.0;
                for (a, x) in [&eta.0, &eta.1].into_iter().enumerate() {
                    for (bb, y) in [&eta.0, &eta.1].into_iter().enumerate() {
                        acc += g[a][bb] * x.dotc(y).re;
                    }
                }
                acc * calc.cell
            };
            let f = d1(&codiff2(&b));
            num += f.norm_squared() * calc.cell;
            den += norm1(&codiff2(&f));
        }
    }
    if den == 0.0 {
        return Err(LabError::OracleGuard("direction is annihilated by the linearized operator".into()));
    }
    Ok((num / den).sqrt())
}

/// Midpoint rule over a box at `ORACLE_REFINEMENT` times the given cell counts.
pub fn oracle_integral(f: &dyn Fn(&[f64]) -> f64, region: &[(f64, f64)], cells: &[usize]) -> Result<f64> {
    if region.len() != cells.len() || region.is_empty() {
        return Err(LabError::ShapeMismatch("region and cell counts disagree".into()));
    }
    let counts: Vec<usize> = cells.iter().map(|c| c * ORACLE_REFINEMENT).collect();
    let h: Vec<f64> = region.iter().zip(&counts).map(|(r, &c)| (r.1 - r.0) / c as f64).collect();
    let total: usize = counts.iter().product();
    let mut x = vec![0.0; region.len()];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..region.len()).rev() {
            let k = rem % counts[d];
            rem /= counts[d];
            x[d] = region[d].0 + (k as f64 + 0.5) * h[d];
        }
        sum += f(&x);
    }
    Ok(sum * h.iter().product::<f64>())
}

/// Curvature components over `PAIRS` of a closed-form connection at a point,
/// by 6th-order central differences with step `h`.
pub fn oracle_curvature(conn: &dyn AnalyticConnection, x: [f64; 4], h: f64) -> [CMat; 6] {
    const W: [(f64, f64); 3] = [(1.0, 45.0 / 60.0), (2.0, -9.0 / 60.0), (3.0, 1.0 / 60.0)];
    let deriv = |mu: usize| -> [CMat; 4] {
        let n = conn.matrix_size();
        let mut acc: [CMat; 4] = std::array::from_fn(|_| CMat::zeros(n, n));
        for &(k, w) in &W {
            let mut xp = x;
            let mut xm = x;
            xp[mu] += k * h;
            xm[mu] -= k * h;
            let (vp, vm) = (conn.eval(xp), conn.eval(xm));
            for c in 0..4 {
                acc[c] += (&vp[c] - &vm[c]) * C64::new(w / h, 0.0);
            }
        }
        acc
    };
    let d: Vec<[CMat; 4]> = (0..4).map(deriv).collect();
    let v = conn.eval(x);
    std::array::from_fn(|k| {
        let (mu, nu) = PAIRS[k];
        &d[mu][nu] - &d[nu][mu] + &v[mu] * &v[nu] - &v[nu] * &v[mu]
    })
}
