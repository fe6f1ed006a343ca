use std::time::Instant;

use cagetool::clearance::{compute_pcc, PccParams};
use cagetool::escape::{oracle_mee, EscapeQuery, PlannerParams};
use cagetool::fixtures;
use cagetool::Pose2;

#[test]
fn two_wall_cup_matches_passage_width() {
    let s = fixtures::two_wall_cup();
    let q = EscapeQuery::new(&s, 0, Pose2::IDENTITY, s.start);
    let t = Instant::now();
    let r = compute_pcc(&q, &PccParams::grid(vec![0.01, 0.01, 0.1])).unwrap();
    eprintln!("{r:?} in {:?}", t.elapsed());
    let expected = fixtures::TWO_WALL_OPENING / 2.0 - fixtures::DISK_RADIUS;
    assert!(r.q_pc);
    assert!((r.q_pcc.unwrap() + expected).abs() <= 1e-3);
    assert!(r.epsilon_col > expected);
}

#[test]
fn flat_stick_is_not_partially_caged() {
    let s = fixtures::two_wall_cup();
    let q = EscapeQuery::new(&s, 1, Pose2::IDENTITY, s.start);
    let r = compute_pcc(&q, &PccParams::grid(vec![0.01, 0.01, 0.1])).unwrap();
    assert!(!r.q_pc);
    let t = Instant::now();
    let r = compute_pcc(&q, &PccParams::sampler(PlannerParams::default())).unwrap();
    eprintln!("sampler {r:?} in {:?}", t.elapsed());
    assert!(!r.q_pc);
}

#[test]
fn sampler_backend_on_two_wall_cup() {
    let s = fixtures::two_wall_cup();
    let q = EscapeQuery::new(&s, 0, Pose2::IDENTITY, s.start);
    let t = Instant::now();
    let r = compute_pcc(&q, &PccParams::sampler(PlannerParams::default())).unwrap();
    eprintln!("sampler {r:?} in {:?}", t.elapsed());
    assert!(r.q_pc);
}

#[test]
fn caged_start_agrees_with_pcc() {
    let s = fixtures::closed_ring();
    let q = EscapeQuery::new(&s, 0, Pose2::IDENTITY, s.start);
    assert!(oracle_mee(&q, &[0.02, 0.02, 0.2]).unwrap().q_c);
    let r = compute_pcc(&q, &PccParams::grid(vec![0.02, 0.02, 0.2])).unwrap();
    assert_eq!(r.q_pcc, Some(0.0));
}
