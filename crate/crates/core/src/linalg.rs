//! Kernels on small dense complex matrices stored row-major in slices.
//!
//! Field operations touch every grid point, so the hot loops work on `&[C64]`
//! blocks of length `n*n` instead of allocating matrices. The nalgebra
//! conversions are used where a decomposition is needed.

use nalgebra::DMatrix;

use crate::C64;

pub type CMat = DMatrix<C64>;

#[inline]
pub fn matmul_into(a: &[C64], b: &[C64], out: &mut [C64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += a[r * n + k] * b[k * n + c];
            }
            out[r * n + c] = acc;
        }
    }
}

/// `out += alpha * (a*b - b*a)`.
#[inline]
pub fn add_commutator(a: &[C64], b: &[C64], alpha: C64, out: &mut [C64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += a[r * n + k] * b[k * n + c] - b[r * n + k] * a[k * n + c];
            }
            out[r * n + c] += alpha * acc;
        }
    }
}

pub fn adjoint_into(a: &[C64], out: &mut [C64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = a[r * n + c].conj();
        }
    }
}

pub fn trace(a: &[C64], n: usize) -> C64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// `tr(a b^*)`, the Hermitian pairing of two blocks.
#[inline]
pub fn hermitian_pair(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn frob_norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Largest entry of `a + a^*`; zero for anti-Hermitian blocks.
pub fn anti_hermitian_defect(a: &[C64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            worst = worst.max((a[r * n + c] + a[c * n + r].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_defect(a: &[C64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            worst = worst.max((a[r * n + c] - a[c * n + r].conj()).norm());
        }
    }
    worst
}

pub fn to_mat(a: &[C64], n: usize) -> CMat {
    CMat::from_row_slice(n, n, a)
}

pub fn write_mat(m: &CMat, out: &mut [C64]) {
    let n = m.nrows();
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = m[(r, c)];
        }
    }
}

/// `exp` of a Hermitian matrix through its eigendecomposition. Returns
/// `(exp(s), exp(-s))`.
pub fn hermitian_exp_pair(s: &CMat) -> (CMat, CMat) {
    let n = s.nrows();
    let sym = (s + s.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut plus = CMat::zeros(n, n);
    let mut minus = CMat::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        let col = v.column(k);
        let outer = col * col.adjoint();
        plus += &outer * C64::new(lam.exp(), 0.0);
        minus += &outer * C64::new((-lam).exp(), 0.0);
    }
    (plus, minus)
}

/// `exp` of an anti-Hermitian matrix `a = i h`, unitary to rounding.
pub fn skew_exp(a: &CMat) -> CMat {
    let n = a.nrows();
    let h = a * C64::new(0.0, -1.0);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        let col = v.column(k);
        out += (col * col.adjoint()) * C64::from_polar(1.0, lam);
    }
    out
}

/// Deviation of `u` from the unitary group, `max |u^* u - I|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u - CMat::identity(n, n);
    p.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let schur = nalgebra::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Eigenvalues of a unitary matrix as phases in `(-1/2, 1/2]` turns, sorted.
pub fn unitary_phases(m: &CMat) -> Vec<f64> {
    let mut out: Vec<f64> = eigenvalues(m)
        .into_iter()
        .map(|z| z.arg() / std::f64::consts::TAU)
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Distance between two phase multisets on the circle (turns), minimised over
/// matchings. Only intended for the small ranks used here.
pub fn phase_multiset_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let circ = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let worst = (0..n).map(|i| circ(a[i], b[p[i]])).fold(0.0, f64::max);
        best = best.min(worst);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn skew_exp_of_diagonal_matches_scalar_exponentials() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 0.3), c(0.0, -0.3)]));
        let u = skew_exp(&a);
        assert!((u[(0, 0)] - C64::from_polar(1.0, 0.3)).norm() < 1e-15);
        assert!((u[(1, 1)] - C64::from_polar(1.0, -0.3)).norm() < 1e-15);
        assert!(unitarity_defect(&u) < 1e-14);
    }

    #[test]
    fn schur_eigenvalues_for_complex_matrices() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.0), c(-1.0, 0.5)]);
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c(-1.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_exp_pair_inverts() {
        let s = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.1, 0.3), c(0.1, -0.3), c(-0.2, 0.0)]);
        let (p, m) = hermitian_exp_pair(&s);
        let id = &p * &m;
        assert!((id - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn phase_distance_ignores_ordering_and_wraps() {
        let d = phase_multiset_distance(&[0.49, -0.2], &[-0.2, -0.49]);
        assert!((d - 0.02).abs() < 1e-12);
    }
}
