//! Gauge invariants checked over random inputs.

use fiblab::fiber::{curvature, holonomy_at, hodge_star, l2_norm, Cycle, FiberGeometry};
use fiblab::gauge::{act_complex, act_complex_series, act_unitary, HermitianGauge};
use fiblab::linalg::{phase_multiset_distance, unitary_phases};
use fiblab::sampling::{random_hermitian, random_su_connection, random_unitary};
use fiblab::spectral::{flat_connection, lattice_coords};
use fiblab::C64;
use proptest::prelude::*;

fn geometry(tau1: f64, tau2: f64) -> FiberGeometry {
    FiberGeometry::new(C64::new(tau1, tau2), 16, 16).unwrap()
}

/// Gauge actions multiply fields pointwise, which is only exact up to
/// spectral truncation: these checks need the finer grid.
fn fine_geometry(tau1: f64, tau2: f64) -> FiberGeometry {
    FiberGeometry::new(C64::new(tau1, tau2), 32, 32).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn curvature_norm_is_unitary_gauge_invariant(
        tau1 in -0.4f64..0.4,
        tau2 in 0.8f64..1.5,
        seed in 0u64..1000,
    ) {
        let g = fine_geometry(tau1, tau2);
        let a = random_su_connection(&g, 2, 0.3, 2, seed);
        let u = random_unitary(&g, 2, 0.3, 1, seed + 1);
        let b = act_unitary(&g, &u, &a).unwrap();
        let fa = l2_norm(&g, &curvature(&g, &a).unwrap()).unwrap();
        let fb = l2_norm(&g, &curvature(&g, &b).unwrap()).unwrap();
        prop_assert!((fa - fb).abs() <= 1e-8 * fa.max(1.0), "{fa} vs {fb}");
    }

    #[test]
    fn complex_action_agrees_with_its_series(
        tau1 in -0.4f64..0.4,
        tau2 in 0.8f64..1.5,
        c0 in 0.01f64..0.3,
        seed in 0u64..1000,
    ) {
        let g = fine_geometry(tau1, tau2);
        let a = random_su_connection(&g, 2, 0.3, 2, seed);
        let s = HermitianGauge::new(random_hermitian(&g, 2, c0, 2, seed + 7)).unwrap();
        let direct = act_complex(&g, &s, &a).unwrap();
        let series = act_complex_series(&g, &s, &a).unwrap();
        prop_assert!(direct.sub(&series).unwrap().max_abs() <= 1e-9);
        prop_assert!(direct.anti_hermitian_defect() <= 1e-12);
    }

    #[test]
    fn flat_connection_holonomy_matches_lattice_coordinates(
        tau1 in -0.4f64..0.4,
        tau2 in 0.8f64..1.5,
        qr in -0.45f64..0.45,
        qi in -0.45f64..0.45,
    ) {
        let g = geometry(tau1, tau2);
        let q = C64::new(qr, qi);
        let a = flat_connection(&[q, -q], &g).unwrap();
        prop_assert!(curvature(&g, &a).unwrap().max_abs() <= 1e-12);
        let c = [lattice_coords(q, g.tau()), lattice_coords(-q, g.tau())];
        let e1 = unitary_phases(&holonomy_at(&g, &a, Cycle::E1, 0).unwrap());
        let et = unitary_phases(&holonomy_at(&g, &a, Cycle::Tau, 0).unwrap());
        prop_assert!(phase_multiset_distance(&e1, &[c[0].1, c[1].1]) <= 1e-10);
        prop_assert!(phase_multiset_distance(&et, &[-c[0].0, -c[1].0]) <= 1e-10);
    }

    #[test]
    fn hodge_star_squares_to_minus_one_on_one_forms(
        tau1 in -0.4f64..0.4,
        tau2 in 0.8f64..1.5,
        seed in 0u64..1000,
    ) {
        let g = geometry(tau1, tau2);
        let a = random_su_connection(&g, 2, 1.0, 3, seed);
        let twice = hodge_star(&g, &hodge_star(&g, &a).unwrap()).unwrap();
        prop_assert!(twice.add(&a).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn phase_distance_is_a_symmetric_permutation_invariant(
        a in proptest::collection::vec(-2.0f64..2.0, 3),
        b in proptest::collection::vec(-2.0f64..2.0, 3),
        shift in -3i32..3,
    ) {
        let d = phase_multiset_distance(&a, &b);
        prop_assert!((d - phase_multiset_distance(&b, &a)).abs() <= 1e-12);
        let moved: Vec<f64> = a.iter().rev().map(|x| x + f64::from(shift)).collect();
        prop_assert!(phase_multiset_distance(&a, &moved) <= 1e-12);
        prop_assert!((0.0..=0.5).contains(&d));
    }
}
