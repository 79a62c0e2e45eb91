//! Seeded random fields for tests, ensembles and experiments.
//!
//! All generators take an explicit `u64` seed and draw from ChaCha8 so that
//! results are reproducible across platforms.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fiber::{components, FiberField, FiberGeometry, FieldFlags};
use crate::gauge::UnitaryGauge;
use crate::linalg::{self, CMat};
use crate::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Trigonometric polynomial with modes `|k1|, |k2| <= kmax` and random matrix
/// coefficients decaying like `1/(1+|k|^2)`.
pub fn random_band_limited(geom: &FiberGeometry, degree: usize, n: usize, kmax: i64, seed: u64) -> FiberField {
    let mut rng = rng(seed);
    let ncomp = components(degree);
    let mut modes = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            let decay = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
            let coeffs: Vec<CMat> = (0..ncomp).map(|_| random_matrix(&mut rng, n) * C64::new(decay, 0.0)).collect();
            modes.push((k1, k2, coeffs));
        }
    }
    FiberField::from_fn(geom, degree, n, |y1, y2, out| {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (k1, k2, coeffs) in &modes {
            let ph = C64::from_polar(1.0, TAU * (*k1 as f64 * y1 + *k2 as f64 * y2));
            for (c, m) in coeffs.iter().enumerate() {
                for e in 0..n * n {
                    out[c * n * n + e] += m[(e / n, e % n)] * ph;
                }
            }
        }
    })
    .expect("degree is in range")
}

fn project(f: &FiberField, anti: bool) -> FiberField {
    let adj = f.adjoint();
    let s = if anti { -1.0 } else { 1.0 };
    f.axpy(s, &adj).expect("same shape").scale_real(0.5).remove_trace()
}

fn normalise_sup(f: FiberField, size: f64) -> FiberField {
    let m = f.max_abs();
    if m == 0.0 {
        f
    } else {
        f.scale_real(size / m)
    }
}

/// Random smooth `su(n)` connection with largest entry `amp`.
pub fn random_su_connection(geom: &FiberGeometry, n: usize, amp: f64, kmax: i64, seed: u64) -> FiberField {
    let f = project(&random_band_limited(geom, 1, n, kmax, seed), true);
    normalise_sup(f, amp).with_flags(FieldFlags::SU)
}

/// Random smooth `su(n)`-valued form of the given degree with largest entry `amp`.
pub fn random_su_form(geom: &FiberGeometry, degree: usize, n: usize, amp: f64, kmax: i64, seed: u64) -> FiberField {
    let f = project(&random_band_limited(geom, degree, n, kmax, seed), true);
    normalise_sup(f, amp).with_flags(FieldFlags::SU)
}

/// Random traceless Hermitian 0-form with pointwise sup norm `c0`.
pub fn random_hermitian(geom: &FiberGeometry, n: usize, c0: f64, kmax: i64, seed: u64) -> FiberField {
    let f = project(&random_band_limited(geom, 0, n, kmax, seed), false);
    let sup = crate::fiber::sup_norm(geom, &f);
    if sup == 0.0 {
        f
    } else {
        f.scale_real(c0 / sup)
    }
}

/// Random periodic `SU(n)` gauge `exp(X)` with `X` a smooth `su(n)` 0-form.
pub fn random_unitary(geom: &FiberGeometry, n: usize, amp: f64, kmax: i64, seed: u64) -> UnitaryGauge {
    let x = random_su_form(geom, 0, n, amp, kmax, seed);
    let mut u = x.zeros_like();
    for p in 0..x.points() {
        let e = linalg::skew_exp(&x.matrix(p, 0));
        u.set_matrix(p, 0, &e);
    }
    UnitaryGauge::new(u).expect("exponential of su(n) is special unitary")
}

/// Uniform draws in `[lo, hi)`; a convenience for ensembles.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
