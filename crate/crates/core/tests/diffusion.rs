mod common;

use ghl_core::diffusion::{combinatorial_steady_state, integrate_samples, lp_solve, lp_step};
use ghl_core::graph::dirichlet_energy;
use ghl_core::learner::default_front;
use ghl_core::{integrate, steady_state_solve, ClampMode, NodeSignal, Scheme, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clamped_rows_are_exact(seed in any::<u64>(), n in 2usize..=30, k in 1usize..4, t in 0.0f64..5.0) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.15);
        let b = common::boundary(&mut r, n, k);
        let psi = common::signal(&mut r, n, k);
        for scheme in [Scheme::Dopri5, Scheme::Rk4, Scheme::Euler] {
            let cfg = SolverConfig { scheme, t_final: t, ..SolverConfig::default() };
            let f = integrate(&g, &psi, &b, ClampMode::Clamped, &cfg).unwrap();
            for &(u, c) in b.labels() {
                for j in 0..k {
                    prop_assert_eq!(f.row(u)[j], if j == c { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn energy_never_increases(seed in any::<u64>(), n in 2usize..=40, k in 1usize..4) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.1);
        let b = common::boundary(&mut r, n, k);
        let psi = common::signal(&mut r, n, k);
        let times: Vec<f64> = (1..=10).map(|i| 0.25 * i as f64 * i as f64).collect();
        let states = integrate_samples(&g, &psi, &b, ClampMode::Clamped, &SolverConfig::dopri5(1.0), &times).unwrap();
        let mut last = f64::INFINITY;
        for f in &states {
            let e = dirichlet_energy(&g, f).unwrap();
            prop_assert!(e <= last + 1e-6, "{e} after {last}");
            last = e;
        }
    }

    #[test]
    fn steady_state_matches_dense_oracle(seed in any::<u64>(), n in 2usize..=50, k in 1usize..4) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.1);
        let b = common::boundary(&mut r, n, k);
        let f = steady_state_solve(&g, &b).unwrap();
        prop_assert!(common::max_abs_diff(&f, &common::normalized_oracle(&g, &b)) <= 1e-8);
        let c = combinatorial_steady_state(&g, &b).unwrap();
        prop_assert!(common::max_abs_diff(&c, &common::combinatorial_oracle(&g, &b)) <= 1e-8);
    }

    #[test]
    fn long_integration_reaches_steady_state(seed in any::<u64>(), n in 2usize..=30, k in 1usize..3) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.15);
        let b = common::boundary(&mut r, n, k);
        let psi = common::signal(&mut r, n, k);
        let (f, _) = common::integrate_to_residual(&g, &psi, &b, 1e-6);
        let steady = steady_state_solve(&g, &b).unwrap();
        prop_assert!(f.max_abs_diff(&steady) <= 1e-4);
        let other = common::rerandomize_free_rows(&mut r, &psi, &b);
        let (h, _) = common::integrate_to_residual(&g, &other, &b, 1e-6);
        prop_assert!(f.max_abs_diff(&h) <= 1e-4);
    }

    #[test]
    fn lp_converges_to_the_combinatorial_solution(seed in any::<u64>(), n in 2usize..=50, k in 1usize..4) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.1);
        let b = common::boundary(&mut r, n, k);
        let out = lp_solve(&g, &b, 1_000_000, 1e-14).unwrap();
        prop_assert!(out.converged);
        prop_assert!(common::max_abs_diff(&out.signal, &common::combinatorial_oracle(&g, &b)) <= 1e-8);
    }

    #[test]
    fn lp_fixed_point(seed in any::<u64>(), n in 2usize..=30, k in 1usize..3) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.2);
        let b = common::boundary(&mut r, n, k);
        let f = combinatorial_steady_state(&g, &b).unwrap();
        prop_assert!(lp_step(&g, &f, &b).unwrap().max_abs_diff(&f) <= 1e-12);
    }

    #[test]
    fn lp_values_stay_in_unit_interval(seed in any::<u64>(), n in 2usize..=30, k in 1usize..4, iters in 1usize..20) {
        let mut r = common::rng(seed);
        let g = common::connected_graph(&mut r, n, 0.2);
        let b = common::boundary(&mut r, n, k);
        let out = lp_solve(&g, &b, iters, 0.0).unwrap();
        prop_assert!(out.signal.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

#[test]
fn two_node_heat_flow_matches_closed_form() {
    let g = ghl_core::build_graph([(0, 1, 1.0)], 2).unwrap();
    let b = ghl_core::BoundarySpec::new(1, [(1, 0)]).unwrap();
    let psi = default_front(&b, 2, 1);
    for t in [0.1f64, 1.0, 3.0, 50.0] {
        let f = integrate(&g, &psi, &b, ClampMode::Clamped, &SolverConfig::dopri5(t)).unwrap();
        assert!((f.row(0)[0] - (1.0 - (-t).exp())).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn default_front_is_one_hot_on_the_boundary() {
    let b = ghl_core::BoundarySpec::new(3, [(0, 2), (3, 1)]).unwrap();
    let f = default_front(&b, 4, 3);
    let expect = NodeSignal::from_rows(&[
        vec![0.0, 0.0, 1.0],
        vec![0.0; 3],
        vec![0.0; 3],
        vec![0.0, 1.0, 0.0],
    ])
    .unwrap();
    assert_eq!(f, expect);
}
