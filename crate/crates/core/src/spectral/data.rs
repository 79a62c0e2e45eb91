//! Local spectral-cover data and lattice arithmetic on `C/(Z + tau Z)`.

use serde::{Deserialize, Serialize};

use crate::fibration::BasePatch;
use crate::poly::ComplexPoly;
use crate::{LabError, Result, C64};

/// Default minimum lattice distance between distinct sheets.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Tolerance on `sum_j q_j = 0`.
pub const TRACE_TOL: f64 = 1e-12;

/// `q = q1 + tau q2` with real `(q1, q2)`.
pub fn lattice_coords(q: C64, tau: C64) -> (f64, f64) {
    let q2 = q.im / tau.im;
    (q.re - tau.re * q2, q2)
}

/// Derivatives `(dq1, dq2)` of [`lattice_coords`] along one real direction,
/// given `dq` and `dtau` along it.
pub fn lattice_coords_derivative(q: C64, tau: C64, dq: C64, dtau: C64) -> (f64, f64) {
    let (_, q2) = lattice_coords(q, tau);
    let dq2 = (dq.im - q2 * dtau.im) / tau.im;
    (dq.re - dtau.re * q2 - tau.re * dq2, dq2)
}

/// The representative of `q` modulo `Z + tau Z` of least modulus, with the
/// lattice vector `m + n tau` that was removed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeRep {
    pub value: C64,
    pub shift: (i64, i64),
}

pub fn reduce_mod_lattice(q: C64, tau: C64) -> LatticeRep {
    let (q1, q2) = lattice_coords(q, tau);
    let (m0, n0) = (q1.round() as i64, q2.round() as i64);
    let mut best: Option<LatticeRep> = None;
    for dm in -3..=3 {
        for dn in -3..=3 {
            let (m, n) = (m0 + dm, n0 + dn);
            let value = q - C64::new(m as f64, 0.0) - tau * n as f64;
            let cand = LatticeRep { value, shift: (m, n) };
            best = Some(match best {
                None => cand,
                Some(b) => {
                    let (a, c) = (cand.value.norm(), b.value.norm());
                    // Ties go to the lexicographically smaller (Re, Im).
                    let better = a < c - 1e-15
                        || ((a - c).abs() <= 1e-15
                            && (cand.value.re, cand.value.im) < (b.value.re, b.value.im));
                    if better {
                        cand
                    } else {
                        b
                    }
                }
            });
        }
    }
    best.expect("search window is non-empty")
}

/// Distance between `a` and `b` modulo the lattice.
pub fn lattice_distance(a: C64, b: C64, tau: C64) -> f64 {
    reduce_mod_lattice(a - b, tau).value.norm()
}

/// `n` holomorphic functions `q_j(w)` with `sum_j q_j = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    q: Vec<ComplexPoly>,
    margin: f64,
}

impl SpectralData {
    pub fn new(q: Vec<ComplexPoly>, margin: f64) -> Result<Self> {
        if q.is_empty() {
            return Err(LabError::InvalidGeometry("spectral data needs at least one sheet".into()));
        }
        if !(margin >= 0.0) {
            return Err(LabError::InvalidGeometry(format!("distinctness margin {margin} is negative")));
        }
        let sum = q.iter().fold(ComplexPoly::default(), |acc, p| acc.add(p));
        let worst = sum.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if worst > TRACE_TOL {
            return Err(LabError::InvariantViolation(format!(
                "sum of the q_j has a coefficient of size {worst:.3e}"
            )));
        }
        Ok(Self { q, margin })
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn polys(&self) -> &[ComplexPoly] {
        &self.q
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn values(&self, w: C64) -> Vec<C64> {
        self.q.iter().map(|p| p.eval(w)).collect()
    }

    pub fn derivatives(&self, w: C64) -> Vec<C64> {
        self.q.iter().map(|p| p.derivative().eval(w)).collect()
    }

    /// The closest pair of sheets at `w` and their lattice distance.
    pub fn closest_pair(&self, w: C64, tau: C64) -> Option<(usize, usize, f64)> {
        let v = self.values(w);
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = lattice_distance(v[i], v[j], tau);
                if best.is_none_or(|b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }

    pub fn check_distinct(&self, w: C64, tau: C64) -> Result<()> {
        match self.closest_pair(w, tau) {
            Some((i, j, distance)) if distance <= self.margin => Err(LabError::NotDistinct { i, j, distance }),
            _ => Ok(()),
        }
    }

    /// Every invariant at every point of the base grid.
    pub fn validate_on(&self, base: &BasePatch) -> Result<()> {
        let (m1, m2) = base.resolution();
        for i in 0..m1 {
            for j in 0..m2 {
                let w = base.w(i, j);
                let s: C64 = self.values(w).into_iter().sum();
                if s.norm() > TRACE_TOL * (1.0 + w.norm()).powi(self.degree() as i32) {
                    return Err(LabError::InvariantViolation(format!(
                        "sum of the q_j is {:.3e} at base point ({i}, {j})",
                        s.norm()
                    )));
                }
                self.check_distinct(w, base.tau_at(i, j))?;
            }
        }
        Ok(())
    }

    fn degree(&self) -> usize {
        self.q.iter().map(|p| p.coeffs.len()).max().unwrap_or(1)
    }

    /// Smallest sheet distance over the base grid.
    pub fn min_distance_on(&self, base: &BasePatch) -> f64 {
        let (m1, m2) = base.resolution();
        (0..m1)
            .flat_map(|i| (0..m2).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.closest_pair(base.w(i, j), base.tau_at(i, j)).map(|c| c.2))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trace_constraint_enforced() {
        let q = vec![ComplexPoly::constant(C64::new(0.2, 0.0)), ComplexPoly::constant(C64::new(-0.1, 0.0))];
        assert!(matches!(SpectralData::new(q, DEFAULT_MARGIN), Err(LabError::InvariantViolation(_))));
    }

    #[test]
    fn distinctness_reports_pair() {
        let tau = C64::new(0.0, 1.0);
        let q = vec![
            ComplexPoly::constant(C64::new(0.5, 0.0)),
            ComplexPoly::constant(C64::new(-0.5, 0.0)),
        ];
        let d = SpectralData::new(q, DEFAULT_MARGIN).unwrap();
        match d.check_distinct(C64::new(0.0, 0.0), tau) {
            Err(LabError::NotDistinct { i: 0, j: 1, distance }) => assert!(distance < 1e-15),
            other => panic!("expected NotDistinct, got {other:?}"),
        }
    }

    #[test]
    fn reduction_picks_smallest_with_tie_break() {
        let tau = C64::new(0.0, 1.0);
        let r = reduce_mod_lattice(C64::new(2.3, -1.1), tau);
        assert!((r.value - C64::new(0.3, -0.1)).norm() < 1e-14);
        assert_eq!(r.shift, (2, -1));
        // 1/2 and -1/2 tie; the smaller real part wins.
        let r = reduce_mod_lattice(C64::new(0.5, 0.0), tau);
        assert!((r.value - C64::new(-0.5, 0.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn reduction_is_a_lattice_translate(
            re in -5.0f64..5.0, im in -5.0f64..5.0, t1 in -0.5f64..0.5, t2 in 0.8f64..2.0,
        ) {
            let tau = C64::new(t1, t2);
            let q = C64::new(re, im);
            let r = reduce_mod_lattice(q, tau);
            let back = r.value + C64::new(r.shift.0 as f64, 0.0) + tau * r.shift.1 as f64;
            prop_assert!((back - q).norm() < 1e-12);
            for (m, n) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                let other = r.value - C64::new(m as f64, 0.0) - tau * n as f64;
                prop_assert!(r.value.norm() <= other.norm() + 1e-12);
                let other = r.value + C64::new(m as f64, 0.0) + tau * n as f64;
                prop_assert!(r.value.norm() <= other.norm() + 1e-12);
            }
        }
    }
}
