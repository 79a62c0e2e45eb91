//! Complex polynomials in the base coordinate `w = x1 + i x2`.

use serde::{Deserialize, Serialize};

use crate::C64;

/// `p(w) = sum_k coeffs[k] w^k`; holomorphic by construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoly {
    pub coeffs: Vec<C64>,
}

impl ComplexPoly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: C64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c0 + c1 w`.
    pub fn linear(c0: C64, c1: C64) -> Self {
        Self { coeffs: vec![c0, c1] }
    }

    pub fn eval(&self, w: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * w + c)
    }

    pub fn derivative(&self) -> ComplexPoly {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        }
    }

    /// `(d/dx1, d/dx2) p = (p', i p')`.
    pub fn real_partials(&self, w: C64) -> (C64, C64) {
        let d = self.derivative().eval(w);
        (d, d * C64::new(0.0, 1.0))
    }

    pub fn add(&self, other: &ComplexPoly) -> ComplexPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &Vec<C64>, k: usize| v.get(k).copied().unwrap_or_default();
        Self {
            coeffs: (0..len).map(|k| get(&self.coeffs, k) + get(&other.coeffs, k)).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> ComplexPoly {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().skip(1).all(|c| c.norm() == 0.0)
    }
}
