//! Log–log order fits for grid-convergence studies.

use serde::{Deserialize, Serialize};

/// Errors at or below this level are treated as exact.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// Least-squares slope of `log(error)` against `log(h)`; `None` when every
    /// error is at the floor.
    pub order: Option<f64>,
    /// Orders between consecutive resolutions.
    pub pairwise: Vec<f64>,
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    pub at_floor: bool,
}

impl OrderFit {
    /// Passes when the fitted order reaches `min_order`, or when all errors are
    /// at the exact floor.
    pub fn meets(&self, min_order: f64) -> bool {
        self.at_floor || self.order.is_some_and(|o| o >= min_order)
    }
}

pub fn fit_order(spacings: &[f64], errors: &[f64]) -> OrderFit {
    assert_eq!(spacings.len(), errors.len());
    let at_floor = errors.iter().all(|&e| e <= EXACT_FLOOR);
    let pairwise = spacings
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let order = if at_floor || errors.iter().any(|&e| e <= 0.0) {
        None
    } else {
        let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Some(sxy / sxx)
    };
    OrderFit {
        order,
        pairwise,
        spacings: spacings.to_vec(),
        errors: errors.to_vec(),
        at_floor,
    }
}

/// Least-squares exponent `p` in `y = C x^p`.
pub fn fit_power(xs: &[f64], ys: &[f64]) -> f64 {
    fit_order(xs, ys).order.unwrap_or(f64::NAN)
}
