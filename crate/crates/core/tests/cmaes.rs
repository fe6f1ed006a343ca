use cagetool::cmaes::{decode_tool, optimize, CmaParams};
use proptest::prelude::*;

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - 0.6).powi(2)).sum()
}

// Rosenbrock with its minimum (1,1) mapped to (0.75,0.75) in the unit box.
fn rosenbrock(x: &[f64]) -> f64 {
    let a = 4.0 * x[0] - 2.0;
    let b = 4.0 * x[1] - 2.0;
    (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
}

#[test]
fn sphere_converges() {
    let p = CmaParams { lambda: 20, iterations: 200, seed: 1, ..Default::default() };
    let r = optimize(sphere, 5, &p).unwrap();
    assert!(r.best_f < 1e-8, "best {}", r.best_f);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn rosenbrock_within_budget() {
    let p = CmaParams { lambda: 10, iterations: 500, seed: 3, ..Default::default() };
    let r = optimize(rosenbrock, 2, &p).unwrap();
    assert!(r.evaluations <= 5000);
    assert!(r.best_f < 1e-4, "best {}", r.best_f);
    assert!((r.best_x[0] - 0.75).abs() < 0.01 && (r.best_x[1] - 0.75).abs() < 0.01);
}

#[test]
fn optimum_on_the_box_edge() {
    let p = CmaParams { lambda: 12, iterations: 100, seed: 2, ..Default::default() };
    let r = optimize(|x| x.iter().map(|v| (v + 0.5).powi(2)).sum(), 3, &p).unwrap();
    assert!(r.best_x.iter().all(|v| *v >= 0.0 && *v < 1e-3));
}

#[test]
fn constant_objective_stays_in_the_box() {
    let p = CmaParams { lambda: 8, iterations: 100, seed: 4, ..Default::default() };
    let r = optimize(|_| 1.0, 4, &p).unwrap();
    for (m, s) in r.means.iter().zip(&r.sigmas) {
        assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(*s > 0.0 && *s <= 1.0);
    }
}

#[test]
fn infinite_values_are_rejected_not_fatal() {
    let p = CmaParams { lambda: 16, iterations: 60, seed: 5, ..Default::default() };
    let r = optimize(|x| if x[0] < 0.3 { f64::INFINITY } else { sphere(x) }, 3, &p).unwrap();
    assert!(r.best_f < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_seed_same_trajectory(seed in 0u64..1000, d in 1usize..6) {
        let p = CmaParams { lambda: 8, iterations: 15, seed, ..Default::default() };
        let a = optimize(sphere, d, &p).unwrap();
        let b = optimize(sphere, d, &p).unwrap();
        prop_assert_eq!(&a.means, &b.means);
        prop_assert_eq!(&a.sigmas, &b.sigmas);
        prop_assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn decode_tool_partitions_evenly(x in 0.0f64..=1.0, n in 1usize..8) {
        let k = decode_tool(x, n);
        prop_assert!(k < n);
        let w = 1.0 / n as f64;
        if x < 1.0 {
            prop_assert!(x >= k as f64 * w - 1e-12 && x < (k + 1) as f64 * w + 1e-12);
        } else {
            prop_assert_eq!(k, n - 1);
        }
    }
}
