//! The total space `U x T^2` over a base patch: semi-flat geometry, connections
//! and their curvature decomposition, ASD residuals, Chern–Weil densities and
//! energies.
//!
//! Per-base-point work is a pure map over the base grid and runs in parallel;
//! base derivatives use 4th-order finite differences and only read neighbours.

mod base;
mod connection;
mod forms;
mod residuals;

pub use base::{
    pair_index, BasePatch, BaseRegion, FibrationGrid, Frame, Stencil, MIN_BASE_POINTS, PAIRS, STENCIL_MARGIN,
};
pub use connection::{
    sample_slice, AnalyticConnection, BaseDerivative, ConnectionFamily, ConnectionSlice, FnConnection,
    SampledConnection, TotalConnection, FLAG_TOL,
};
pub use forms::{
    hk_rotate, hol_symplectic, kahler_matrix, semiflat_form, wedge, FormField, HKTriple, SemiFlatGeometry,
    TripleResidual, TwoForm, TRIPLE_TOL, WEDGE_PARTNER,
};
pub use residuals::{
    asd_residual, chern_weil_density, decompose_curvature, decompose_point, energy, kappa_identity_residual,
    reduced_asd_residual, AsdResidual, ChernWeil, CurvatureDecomp, Energy, NormPair, PointCurvature,
    ReducedAsd, TotalCurvature, CHERN_WEIL_CONSTANT, ENERGY_RATIO_CONSTANT,
};
