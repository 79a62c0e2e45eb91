//! Fast solvers against the dense and brute-force reference implementations.

use fiblab::fiber::{holonomy_at, Cycle, FiberGeometry};
use fiblab::gauge::{coexact_eigendirection, laplacian_spectrum, linearized_ratio};
use fiblab::linalg::{phase_multiset_distance, unitary_phases};
use fiblab::oracles::{oracle_holonomy, oracle_linearized_poincare, oracle_spectrum, MIN_HOLONOMY_STEPS};
use fiblab::sampling::random_su_connection;
use fiblab::spectral::flat_connection;
use fiblab::C64;

fn geometry() -> FiberGeometry {
    FiberGeometry::new(C64::new(0.2, 1.1), 12, 12).unwrap()
}

#[test]
fn holonomy_agrees_with_the_brute_force_integrator() {
    let g = geometry();
    let a = flat_connection(&[C64::new(0.13, 0.07), C64::new(-0.13, -0.07)], &g)
        .unwrap()
        .add(&random_su_connection(&g, 2, 0.2, 2, 11))
        .unwrap();
    for cycle in [Cycle::E1, Cycle::Tau] {
        for base in [0, 5] {
            let main = unitary_phases(&holonomy_at(&g, &a, cycle, base).unwrap());
            let oracle = unitary_phases(&oracle_holonomy(&g, &a, cycle, base, 4 * MIN_HOLONOMY_STEPS).unwrap());
            assert!(phase_multiset_distance(&main, &oracle) < 1e-8, "{cycle:?} at {base}");
        }
    }
}

#[test]
fn laplacian_spectrum_agrees_with_the_dense_matrix() {
    let g = geometry();
    let a = flat_connection(&[C64::new(0.21, 0.13), C64::new(-0.21, -0.13)], &g).unwrap();
    let main = laplacian_spectrum(&g, &a, 8).unwrap();
    let oracle = oracle_spectrum(&g, &a).unwrap();
    assert!(oracle.max_imag < 1e-10);
    for (m, o) in main.eigenvalues.iter().zip(&oracle.eigenvalues) {
        assert!((m - o).abs() <= 1e-8 * o.max(1.0), "{m} vs {o}");
    }
}

#[test]
fn linearized_poincare_ratio_agrees_with_the_dense_limit() {
    let g = geometry();
    let a = flat_connection(&[C64::new(0.21, 0.13), C64::new(-0.21, -0.13)], &g).unwrap();
    let (beta, _) = coexact_eigendirection(&g, &a, (0, 1), (1, -1)).unwrap();
    let main = linearized_ratio(&g, &a, &beta, 1e-3).unwrap();
    let oracle = oracle_linearized_poincare(&g, &a, &beta).unwrap();
    assert!((main - oracle).abs() <= 1e-4 * oracle, "{main} vs {oracle}");
}
