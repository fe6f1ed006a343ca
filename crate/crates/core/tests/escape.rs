use std::time::Instant;

use cagetool::escape::{estimate_mee, oracle_mee, EscapeQuery, PlannerParams};
use cagetool::fixtures;
use cagetool::{ObjectConfig, Pose2};

const G: f64 = 9.81;

fn u_cup_expected() -> f64 {
    fixtures::MASS * G * fixtures::CUP_WALL_HEIGHT
}

#[test]
fn u_cup_oracle_matches_lift_over_wall() {
    let s = fixtures::u_cup();
    let q = EscapeQuery::new(&s, 0, fixtures::u_cup_tool_pose(), s.start);
    let t = Instant::now();
    let r = oracle_mee(&q, &[0.01, 0.01, 0.05]).unwrap();
    eprintln!("oracle {:?} in {:?}", r.q_mee, t.elapsed());
    let cell = fixtures::MASS * G * 0.01;
    assert!(!r.q_c);
    assert!((r.q_mee.unwrap() - u_cup_expected()).abs() <= cell + 1e-12);
}

#[test]
fn u_cup_sampler_is_a_tight_upper_bound() {
    let s = fixtures::u_cup();
    let q = EscapeQuery::new(&s, 0, fixtures::u_cup_tool_pose(), s.start);
    let oracle = oracle_mee(&q, &[0.01, 0.01, 0.05]).unwrap().q_mee.unwrap();
    for seed in 0..5 {
        let t = Instant::now();
        let r = estimate_mee(&q, &PlannerParams { rng_seed: seed, ..Default::default() }).unwrap();
        eprintln!("seed {seed}: {:?} {:?} in {:?}", r.q_mee, r.history, t.elapsed());
        let v = r.q_mee.unwrap();
        let slack = fixtures::MASS * G * 0.01;
        assert!(v >= oracle - slack && v <= oracle * 1.10, "{v} vs {oracle}");
        for w in r.history.windows(2) {
            assert!(w[1].unwrap_or(f64::INFINITY) <= w[0].unwrap_or(f64::INFINITY));
        }
    }
}

#[test]
fn closed_ring_is_caged_and_open_floor_is_free() {
    let s = fixtures::closed_ring();
    let q = EscapeQuery::new(&s, 0, Pose2::IDENTITY, s.start);
    let r = oracle_mee(&q, &[0.01, 0.01, 0.1]).unwrap();
    assert!(r.q_c);
    assert!(r.q_mee.is_none());
    let r = estimate_mee(&q, &PlannerParams::default()).unwrap();
    assert!(r.q_c);

    let s = fixtures::open_floor();
    let q = EscapeQuery::new(&s, 0, fixtures::open_floor_tool_pose(), s.start);
    assert_eq!(oracle_mee(&q, &[0.01, 0.01, 0.1]).unwrap().q_mee, Some(0.0));
    for seed in 0..3 {
        let r = estimate_mee(&q, &PlannerParams { rng_seed: seed, ..Default::default() }).unwrap();
        eprintln!("open floor {:?}", r.history);
        assert_eq!(r.q_mee, Some(0.0));
    }
}

#[test]
fn tape_tools_order() {
    let s = fixtures::tape_pull();
    for (tool, pose) in
        [(0, Pose2::new(-0.07, 0.81, 0.0)), (1, Pose2::new(-0.07, 0.79, 0.0)), (2, Pose2::new(0.0, 0.75, 0.0))]
    {
        let q = EscapeQuery::new(&s, tool, pose, ObjectConfig::new(0.0, 0.75, 0.0));
        let t = Instant::now();
        let r = oracle_mee(&q, &[0.01, 0.01, 0.1]);
        eprintln!("tool {tool}: {:?} in {:?}", r.map(|r| r.q_mee), t.elapsed());
        let t = Instant::now();
        let r = estimate_mee(&q, &PlannerParams::default());
        eprintln!("  sampler {:?} in {:?}", r.map(|r| r.q_mee), t.elapsed());
    }
}
