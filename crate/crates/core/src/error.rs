use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("form degree {0} is out of range (expected 0, 1 or 2)")]
    DegreeOutOfRange(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("gauge transformation is not special unitary (deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("connection is not flat (sup |F| = {sup:.3e})")]
    NotFlat { sup: f64 },

    #[error("spectral points {i} and {j} are within {distance:.3e} of each other mod the lattice")]
    NotDistinct { i: usize, j: usize, distance: f64 },

    #[error("curvature sup norm {curvature:.3e} exceeds the gauge-fixing threshold {threshold:.3e}")]
    OutsideRegime { curvature: f64, threshold: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("step size underflow in {0}")]
    StepUnderflow(String),

    #[error("holonomy lost unitarity (deviation {0:.3e}); use more steps")]
    UnitarityDrift(f64),

    #[error("cocycle condition fails on {0}")]
    CocycleViolation(String),

    #[error("sheet matching failed on overlap {0}")]
    SheetMismatch(String),

    #[error("basis change is not in SL(2,Z): determinant {0}")]
    NotUnimodular(i64),

    #[error("base grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("oracle refused: {0}")]
    OracleGuard(String),

    #[error("serialization: {0}")]
    Serialization(String),
}
