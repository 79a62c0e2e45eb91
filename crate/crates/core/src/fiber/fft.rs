//! Two-dimensional periodic FFT with spectral differentiation.
//!
//! Plans are cached per resolution so that fiber geometries created at every
//! base point share them.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::{Fft, FftPlanner};

use crate::C64;

pub struct Spectral2d {
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2d")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .finish()
    }
}

/// Signed wavenumber for FFT index `k` of an `n`-point grid, `None` for the
/// Nyquist mode of an even grid.
pub fn wavenumber(k: usize, n: usize) -> Option<i64> {
    if 2 * k == n {
        None
    } else if 2 * k < n {
        Some(k as i64)
    } else {
        Some(k as i64 - n as i64)
    }
}

/// Wavenumber with the Nyquist mode mapped to its positive representative,
/// used where a mode label is needed rather than a derivative.
pub fn mode_label(k: usize, n: usize) -> i64 {
    wavenumber(k, n).unwrap_or((n / 2) as i64)
}

impl Spectral2d {
    fn build(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        }
    }

    /// Shared plan set for an `n1 x n2` grid.
    pub fn cached(n1: usize, n2: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Spectral2d>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("fft cache poisoned");
        guard
            .entry((n1, n2))
            .or_insert_with(|| Arc::new(Self::build(n1, n2)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }

    fn along_axis1(&self, buf: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let mut t = vec![C64::new(0.0, 0.0); buf.len()];
        Self::transpose(buf, &mut t, self.n1, self.n2);
        plan.process(&mut t);
        Self::transpose(&t, buf, self.n2, self.n1);
    }

    /// Unnormalised forward transform in place; `buf[i1*n2 + i2]`.
    pub fn forward(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.fwd2.process(buf);
        self.along_axis1(buf, &self.fwd1.clone());
    }

    /// Inverse transform in place, normalised so that it inverts [`forward`](Self::forward).
    pub fn inverse(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.inv2.process(buf);
        self.along_axis1(buf, &self.inv1.clone());
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Spectral partial derivatives `(d/dy1, d/dy2)` of one scalar channel.
    pub fn gradient(&self, input: &[C64], d1: &mut [C64], d2: &mut [C64]) {
        let mut hat = input.to_vec();
        self.forward(&mut hat);
        for k1 in 0..self.n1 {
            let m1 = wavenumber(k1, self.n1);
            for k2 in 0..self.n2 {
                let m2 = wavenumber(k2, self.n2);
                let idx = k1 * self.n2 + k2;
                let h = hat[idx];
                d1[idx] = match (m1, m2) {
                    (Some(m), Some(_)) => h * C64::new(0.0, TAU * m as f64),
                    _ => C64::new(0.0, 0.0),
                };
                d2[idx] = match (m1, m2) {
                    (Some(_), Some(m)) => h * C64::new(0.0, TAU * m as f64),
                    _ => C64::new(0.0, 0.0),
                };
            }
        }
        self.inverse(d1);
        self.inverse(d2);
    }

    /// Remove every Fourier mode on a Nyquist line.
    pub fn filter_nyquist(&self, buf: &mut [C64]) {
        if self.n1 % 2 == 1 && self.n2 % 2 == 1 {
            return;
        }
        self.forward(buf);
        for k1 in 0..self.n1 {
            for k2 in 0..self.n2 {
                if wavenumber(k1, self.n1).is_none() || wavenumber(k2, self.n2).is_none() {
                    buf[k1 * self.n2 + k2] = C64::new(0.0, 0.0);
                }
            }
        }
        self.inverse(buf);
    }

    /// Translate a band-limited channel by `(s1, s2)` (in units of the period).
    pub fn translate(&self, buf: &mut [C64], s1: f64, s2: f64) {
        self.forward(buf);
        for k1 in 0..self.n1 {
            for k2 in 0..self.n2 {
                let idx = k1 * self.n2 + k2;
                match (wavenumber(k1, self.n1), wavenumber(k2, self.n2)) {
                    (Some(m1), Some(m2)) => {
                        buf[idx] *= C64::from_polar(1.0, -TAU * (m1 as f64 * s1 + m2 as f64 * s2));
                    }
                    _ => buf[idx] = C64::new(0.0, 0.0),
                }
            }
        }
        self.inverse(buf);
    }
}
