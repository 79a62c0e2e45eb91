//! Local spectral-cover data and the connections built from it.
//!
//! A rank `n` cover is modelled locally by `n` holomorphic functions
//! `q_j(w)` with `sum_j q_j = 0`, pairwise distinct modulo the lattice
//! `Z + tau(w) Z`. Each sheet gives a flat `u(1)` connection on the fiber; the
//! diagonal sum is the flat background family, and assembling it over the base
//! with constant per-overlap phases gives the Fourier–Mukai connection.

mod basis;
mod cocycle;
mod data;
mod flat;
mod fm;
mod slag;

pub use basis::lattice_basis_invariance;
pub use cocycle::{Chart, ChartRegion, Overlap, SheetLabel, ThetaCocycle, COCYCLE_TOL};
pub use data::{
    lattice_coords, lattice_coords_derivative, lattice_distance, reduce_mod_lattice, LatticeRep, SpectralData,
    DEFAULT_MARGIN, TRACE_TOL,
};
pub use flat::{
    chern_components, chern_components_derivative, flat_connection, flat_family, flat_family_derivative,
    line_chern_connection, recover_spectral_data,
};
pub use fm::{fm_transform, ChartConnection, FmConnection, FmTransform, Transition, SHEET_MATCH_TOL};
pub use slag::{slag_residual, slag_residual_graph, SheetGraph, SlagForms, SlagResidual};
