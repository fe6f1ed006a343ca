mod common;

use cagetool::cmaes::CmaParams;
use cagetool::fixtures;
use cagetool::keyframe::{solve_keyframe, KeyframeProblem};
use cagetool::sim::goal_reached;
use cagetool::surrogate::{MetricKind, UnifiedParams};
use cagetool::trajopt::{plan, PlanParams, TrajCostParams, TrajectoryProblem, ViaTrajectory};
use cagetool::{ObjectConfig, Pose2};
use proptest::prelude::*;
use std::f64::consts::TAU;
use std::time::Instant;

fn midpoint_keyframe(kind: MetricKind) -> cagetool::keyframe::KeyframeSolution {
    let s = fixtures::u_cup();
    let t = Pose2::new(0.125, 0.11, 0.0);
    let o = ObjectConfig::new(0.125, 0.21, 0.0);
    common::keyframe(&s, 0, t, o, kind)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn via_points_are_interpolated_exactly(
        start in (-1.0f64..1.0, -1.0f64..1.0, -3.0f64..3.0),
        via in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -3.0f64..3.0), 1..8),
    ) {
        let via: Vec<Pose2> = via.into_iter().map(|(x, y, t)| Pose2::new(x, y, t)).collect();
        let t = ViaTrajectory::new(Pose2::new(start.0, start.1, start.2), via.clone(), 3.0).unwrap();
        prop_assert_eq!(t.pose(0.0).unwrap(), Pose2::new(start.0, start.1, start.2));
        for (i, v) in via.iter().enumerate() {
            let p = t.pose(t.via_phase(i)).unwrap();
            let d = ((p.x - v.x).powi(2) + (p.y - v.y).powi(2)).sqrt()
                + cagetool::geometry::angle_diff(p.theta, v.theta).abs();
            prop_assert!(d < 1e-9, "via {} off by {}", i, d);
        }
        let (_, v1) = t.eval(1.0).unwrap();
        prop_assert_eq!(v1, [0.0; 3]);
    }
}

#[test]
fn cost_terms_sum_and_ignore_full_turns() {
    let s = fixtures::u_cup();
    let metric = common::surrogate(&s, MetricKind::Mee, &[], 0, 0);
    let kf = midpoint_keyframe(MetricKind::Mee);
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: 0,
        keyframe: &kf,
        metric: &metric,
        unified: UnifiedParams::default(),
        cost: TrajCostParams::default(),
    };
    let via = vec![Pose2::new(0.1, 0.06, 0.05), Pose2::new(0.2, 0.15, -0.05), Pose2::new(0.25, 0.2, 0.0)];
    let traj = ViaTrajectory::new(fixtures::u_cup_tool_pose(), via.clone(), 4.0).unwrap();
    let (_, c) = p.evaluate(&traj).unwrap();
    assert!((c.goal + c.keyframe_tool + c.keyframe_obj + c.robustness - c.total).abs() < 1e-9);

    let wrapped: Vec<Pose2> = via.iter().map(|v| Pose2 { theta: v.theta + TAU, ..*v }).collect();
    let traj2 = ViaTrajectory::new(fixtures::u_cup_tool_pose(), wrapped, 4.0).unwrap();
    let (_, c2) = p.evaluate(&traj2).unwrap();
    assert!((c.total - c2.total).abs() < 1e-9, "{} vs {}", c.total, c2.total);

    let mut kf2 = kf.clone();
    kf2.s_tool.theta += TAU;
    let p2 = TrajectoryProblem { keyframe: &kf2, ..p };
    let (_, c3) = p2.evaluate(&traj).unwrap();
    assert!((c.total - c3.total).abs() < 1e-9);
}

#[test]
fn plan_is_deterministic_per_seed() {
    let s = fixtures::u_cup();
    let metric = common::surrogate(&s, MetricKind::Mee, &[], 0, 0);
    let kf = midpoint_keyframe(MetricKind::Mee);
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: 0,
        keyframe: &kf,
        metric: &metric,
        unified: UnifiedParams::default(),
        cost: TrajCostParams { n_cost_samples: 20, ..Default::default() },
    };
    let params = PlanParams {
        cma: CmaParams { lambda: 20, iterations: 2, seed: 4, ..PlanParams::default().cma },
        ..Default::default()
    };
    let a = plan(&p, &params).unwrap();
    let b = plan(&p, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace.object.len(), 21);
}

#[test]
fn infeasible_keyframe_is_rejected() {
    let s = fixtures::u_cup();
    let metric = common::surrogate(&s, MetricKind::Mee, &[], 0, 0);
    let mut kf = midpoint_keyframe(MetricKind::Mee);
    kf.feasible = false;
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: 0,
        keyframe: &kf,
        metric: &metric,
        unified: UnifiedParams::default(),
        cost: TrajCostParams::default(),
    };
    assert!(plan(&p, &PlanParams::default()).is_err());
}

#[test]
fn all_infeasible_candidates_are_diagnosed() {
    let mut s = fixtures::u_cup();
    // the cup starts inside the floor: every rollout hits the statics
    s.task.tool_start = Pose2::new(0.0, -0.05, 0.0);
    let metric = common::surrogate(&s, MetricKind::Mee, &[], 0, 0);
    let kf = midpoint_keyframe(MetricKind::Mee);
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: 0,
        keyframe: &kf,
        metric: &metric,
        unified: UnifiedParams::default(),
        cost: TrajCostParams { n_cost_samples: 10, ..Default::default() },
    };
    let params =
        PlanParams { cma: CmaParams { lambda: 10, iterations: 2, ..PlanParams::default().cma }, ..Default::default() };
    let e = plan(&p, &params).unwrap_err().to_string();
    eprintln!("{e}");
    assert!(e.contains("rejections") && e.contains("tool_static"), "{e}");
}

#[test]
fn without_robustness_the_plan_reaches_the_goal() {
    let s = fixtures::u_cup();
    let metric = common::surrogate(&s, MetricKind::Mee, &[], 0, 0);
    let kf = midpoint_keyframe(MetricKind::Mee);
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: 0,
        keyframe: &kf,
        metric: &metric,
        unified: UnifiedParams::default(),
        cost: TrajCostParams { w_robust: 0.0, ..Default::default() },
    };
    let params = PlanParams {
        cma: CmaParams { lambda: 20, iterations: 30, seed: 1, ..PlanParams::default().cma },
        ..Default::default()
    };
    let t = Instant::now();
    let r = plan(&p, &params).unwrap();
    eprintln!("plan {:?} cost {:?}", t.elapsed(), r.cost);
    assert!(goal_reached(&s, r.trace.final_object()), "final {:?}", r.trace.final_object());
}

#[test]
fn robust_plan_is_at_least_as_robust_as_the_straight_line() {
    let s = fixtures::u_cup_pull();
    let t = Instant::now();
    let metric = common::surrogate(&s, MetricKind::Mee, &[0, 1], 2000, 200);
    eprintln!("models {:?}", t.elapsed());
    let unified = match &metric {
        cagetool::keyframe::Metric::Surrogate(m) => m[0].unified,
        _ => unreachable!(),
    };
    let kp = KeyframeProblem { scene: &s, metric: metric.clone(), unified, t_k: 25, tool: None };
    let kf = solve_keyframe(&kp, &CmaParams { seed: 3, ..Default::default() }).unwrap();
    eprintln!("keyframe {} {:?} {:?} score {}", kf.tool_name, kf.s_tool, kf.s_obj, kf.score);
    assert_eq!(kf.tool_id, 0);
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: 0,
        keyframe: &kf,
        metric: &metric,
        unified,
        cost: TrajCostParams::default(),
    };
    let t = Instant::now();
    let r = plan(
        &p,
        &PlanParams {
            cma: CmaParams { lambda: 100, iterations: 50, seed: 2, ..PlanParams::default().cma },
            ..Default::default()
        },
    )
    .unwrap();
    eprintln!("plan {:?} cost {:?}", t.elapsed(), r.cost);
    let end = *r.trajectory.via.last().unwrap();
    let base = ViaTrajectory::straight(s.task.tool_start, end, r.trajectory.n_via(), s.task.duration).unwrap();
    let (_, bc) = p.evaluate(&base).expect("baseline is feasible");
    eprintln!("baseline {:?}", bc);
    assert!(r.cost.mean_robustness >= bc.mean_robustness);
    assert!(r.cost.keyframe_deviation <= 0.02);
}
