//! Gauge-group actions, Laplacian spectra, Yang–Mills flow, gauge fixing and
//! the Poincaré ratio on a single fiber.

pub mod complex;
pub mod flow;
pub mod gauge_fix;
pub mod poincare;
pub mod spectrum;
pub mod unitary;

pub use complex::{act_complex, act_complex_series, upsilon, HermitianGauge, UpsilonEval};
pub use flow::{default_step, ym_flow, FlowParams, FlowRecord, FlowResult, FlowScheme, FlowStatus, COMPLEX_GAUGE_STEP};
pub use gauge_fix::{gauge_fix, GaugeFixParams, GaugeFixResult, KernelModel};
pub use poincare::{coexact_eigendirection, linearized_ratio, poincare_ratio, sobolev_ratio, PoincareRatio};
pub use spectrum::{laplacian_spectrum, laplacian_spectrum_with, SpectrumMethod, SpectrumOptions, SpectrumResult};
pub use unitary::{act_unitary, UnitaryGauge};
