//! The complexified gauge action by `exp(s)` with `s` Hermitian.

use crate::fiber::{partials, FiberField, FiberGeometry};
use crate::linalg::{self, CMat};
use crate::{LabError, Result, C64};

/// Number of terms kept in the series for `Upsilon(s)`.
pub const UPSILON_TERMS: usize = 12;

/// A traceless Hermitian 0-form `s`, acting through `exp(s)`.
#[derive(Clone, Debug)]
pub struct HermitianGauge {
    s: FiberField,
}

impl HermitianGauge {
    pub fn new(s: FiberField) -> Result<Self> {
        if s.degree() != 0 {
            return Err(LabError::ShapeMismatch("a Hermitian gauge is a 0-form".into()));
        }
        let scale = s.max_abs().max(1.0);
        let h = s.hermitian_defect();
        let t = s.trace_defect();
        if h > 1e-10 * scale || t > 1e-10 * scale {
            return Err(LabError::InvariantViolation(format!(
                "Hermitian gauge has Hermitian defect {h:.3e} and trace {t:.3e}"
            )));
        }
        Ok(Self { s })
    }

    pub fn zero(n: usize, res: (usize, usize)) -> Self {
        Self {
            s: FiberField::zeros(0, n, res).expect("degree 0"),
        }
    }

    pub fn field(&self) -> &FiberField {
        &self.s
    }

    pub fn into_field(self) -> FiberField {
        self.s
    }

    /// `(exp(s), exp(-s))` as 0-forms.
    pub fn exponentials(&self) -> (FiberField, FiberField) {
        let mut plus = self.s.zeros_like();
        let mut minus = self.s.zeros_like();
        for p in 0..self.s.points() {
            let (e, ei) = linalg::hermitian_exp_pair(&self.s.matrix(p, 0));
            plus.set_matrix(p, 0, &e);
            minus.set_matrix(p, 0, &ei);
        }
        (plus, minus)
    }
}

/// Value of `Upsilon(s) x = sum_m ad_s^m(x) / (m+1)!` and a bound on the
/// discarded tail.
#[derive(Clone, Debug)]
pub struct UpsilonEval {
    pub value: CMat,
    pub remainder_bound: f64,
}

/// Truncated series for `(exp(ad_s) - 1)/ad_s` applied to `x`.
pub fn upsilon(s: &CMat, x: &CMat) -> UpsilonEval {
    let mut term = x.clone();
    let mut value = x.clone();
    let mut fact = 1.0;
    for m in 1..UPSILON_TERMS {
        term = s * &term - &term * s;
        fact *= (m + 1) as f64;
        value += &term * C64::new(1.0 / fact, 0.0);
    }
    let ad_norm = 2.0 * s.norm();
    let k = UPSILON_TERMS as f64;
    fact *= k + 1.0;
    let remainder_bound = ad_norm.powf(k) / fact * ad_norm.exp() * x.norm();
    UpsilonEval { value, remainder_bound }
}

/// `(0,1)`-part of a 1-form block pair in the dy-frame: `b dzbar = (b, b taubar)`.
pub(crate) fn anti_holomorphic_part(geom: &FiberGeometry, f1: &CMat, f2: &CMat) -> (CMat, CMat) {
    let tau = geom.tau();
    let b = (f1 * tau - f2) / (tau - tau.conj());
    let b2 = &b * tau.conj();
    (b, b2)
}

/// `e^s(A) = A + X - X^*` with `X = e^{-s} dbar_A e^{s}`.
pub fn act_complex(geom: &FiberGeometry, g: &HermitianGauge, a: &FiberField) -> Result<FiberField> {
    if a.degree() != 1 {
        return Err(LabError::ShapeMismatch("gauge action on a non-connection".into()));
    }
    a.check_shape(&g.s)?;
    a.check_grid(geom)?;
    let (e, ei) = g.exponentials();
    let (d1, d2) = partials(geom, &e);
    let mut out = a.clone();
    for p in 0..a.points() {
        let ep = e.matrix(p, 0);
        let (a1, a2) = (a.matrix(p, 0), a.matrix(p, 1));
        let da1 = d1.matrix(p, 0) + &a1 * &ep - &ep * &a1;
        let da2 = d2.matrix(p, 0) + &a2 * &ep - &ep * &a2;
        let (b1, b2) = anti_holomorphic_part(geom, &da1, &da2);
        let eip = ei.matrix(p, 0);
        let x1 = &eip * b1;
        let x2 = &eip * b2;
        out.set_matrix(p, 0, &(a1 + &x1 - x1.adjoint()));
        out.set_matrix(p, 1, &(a2 + &x2 - x2.adjoint()));
    }
    // The trace of X is a total derivative of tr s, so it only survives as
    // spectral truncation error when both inputs are traceless.
    if a.flags().traceless && g.s.trace_defect() < 1e-12 {
        out = out.remove_trace();
    }
    Ok(out.with_flags(a.flags()))
}

/// The same action computed through `X = Upsilon(-s) dbar_A s`.
pub fn act_complex_series(geom: &FiberGeometry, g: &HermitianGauge, a: &FiberField) -> Result<FiberField> {
    let ds = crate::fiber::covariant_d(geom, a, &g.s)?;
    let mut out = a.clone();
    for p in 0..a.points() {
        let s = g.s.matrix(p, 0);
        let (b1, b2) = anti_holomorphic_part(geom, &ds.matrix(p, 0), &ds.matrix(p, 1));
        let neg = -s;
        let x1 = upsilon(&neg, &b1).value;
        let x2 = upsilon(&neg, &b2).value;
        out.set_matrix(p, 0, &(a.matrix(p, 0) + &x1 - x1.adjoint()));
        out.set_matrix(p, 1, &(a.matrix(p, 1) + &x2 - x2.adjoint()));
    }
    Ok(out)
}
