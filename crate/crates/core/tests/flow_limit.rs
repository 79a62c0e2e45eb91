//! The flow limit depends only on the complex gauge orbit of its start.

use fiblab::fiber::{curvature, holonomy_at, l2_norm, Cycle, FiberGeometry};
use fiblab::gauge::{act_complex, ym_flow, FlowParams, FlowScheme, FlowStatus, HermitianGauge};
use fiblab::linalg::{phase_multiset_distance, unitary_phases};
use fiblab::sampling::random_hermitian;
use fiblab::spectral::flat_connection;
use fiblab::C64;

#[test]
fn two_complex_gauges_over_one_flat_connection_share_a_limit() {
    let g = FiberGeometry::new(C64::new(0.1, 1.0), 24, 24).unwrap();
    let a0 = flat_connection(&[C64::new(0.2, 0.1), C64::new(-0.2, -0.1)], &g).unwrap();
    let params = FlowParams {
        grad_tol: 1e-8,
        scheme: FlowScheme::ComplexGauge { theta: 2.0 },
        ..FlowParams::default()
    };
    let limits: Vec<_> = [3u64, 4]
        .iter()
        .map(|&seed| {
            let s = HermitianGauge::new(random_hermitian(&g, 2, 0.05, 2, seed)).unwrap();
            let r = ym_flow(&g, &act_complex(&g, &s, &a0).unwrap(), &params).unwrap();
            assert_eq!(r.status, FlowStatus::Converged);
            assert!(r.energy_is_monotone());
            assert!(l2_norm(&g, &curvature(&g, &r.terminal).unwrap()).unwrap() < 1e-7);
            r.terminal
        })
        .collect();
    for cycle in [Cycle::E1, Cycle::Tau] {
        let h = |a| unitary_phases(&holonomy_at(&g, a, cycle, 0).unwrap());
        let reference = h(&a0);
        for limit in &limits {
            assert!(phase_multiset_distance(&h(limit), &reference) < 1e-6 / std::f64::consts::TAU);
        }
    }
}

#[test]
fn explicit_flow_decreases_energy_from_a_random_start() {
    let g = FiberGeometry::new(C64::new(0.0, 1.0), 16, 16).unwrap();
    let a = fiblab::sampling::random_su_connection(&g, 2, 0.2, 2, 17);
    let params = FlowParams {
        max_steps: 2000,
        grad_tol: 1e-6,
        ..FlowParams::default()
    };
    let r = ym_flow(&g, &a, &params).unwrap();
    assert!(r.energy_is_monotone());
    assert!(r.final_record().energy < r.records[0].energy);
}
