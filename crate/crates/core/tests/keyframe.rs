use cagetool::cmaes::CmaParams;
use cagetool::fixtures;
use cagetool::keyframe::{feasible, oracle_score, solve_keyframe, KeyframeProblem, Metric};
use cagetool::surrogate::{MetricKind, UnifiedParams};
use cagetool::{Polygon, Pose2, Scene, Vec2};
use rayon::prelude::*;

const TAPE_GRID: [f64; 3] = [0.01, 0.01, 0.1];

fn oracle<'a>(scene: &'a Scene, grid: &[f64]) -> KeyframeProblem<'a> {
    KeyframeProblem {
        scene,
        metric: Metric::Oracle { kind: MetricKind::Mee, grid: grid.to_vec() },
        unified: UnifiedParams::default(),
        t_k: 0,
        tool: None,
    }
}

/// Best unified oracle score per tool over a regular sweep of tool poses
/// with the object at its start configuration.
fn sweep(scene: &Scene, grid: &[f64], steps: [usize; 3]) -> Vec<f64> {
    let b = &scene.bounds.tool;
    let u = UnifiedParams::default();
    (0..scene.tools.len())
        .map(|tool| {
            let mut poses = Vec::new();
            for i in 0..steps[0] {
                for j in 0..steps[1] {
                    for k in 0..steps[2] {
                        let f = |n: usize, s: usize| if s == 1 { 0.5 } else { n as f64 / (s - 1) as f64 };
                        let v = b.denormalize(&[f(i, steps[0]), f(j, steps[1]), f(k, steps[2])]);
                        poses.push(Pose2::new(v[0], v[1], v[2]));
                    }
                }
            }
            poses
                .par_iter()
                .filter(|t| feasible(scene, tool, t, &scene.start))
                .map(|t| oracle_score(scene, MetricKind::Mee, grid, &u, tool, *t, scene.start).unwrap())
                .reduce(|| f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap()
}

#[test]
fn tape_pull_selects_the_sweep_optimum() {
    let s = fixtures::tape_pull();
    let best = sweep(&s, &TAPE_GRID, [13, 13, 5]);
    let expected = argmax(&best);
    assert_eq!(s.tools[expected].name, "mugtree", "sweep {best:?}");
    let hits = (0..10)
        .filter(|&seed| {
            let r = solve_keyframe(&oracle(&s, &TAPE_GRID), &CmaParams { seed, ..Default::default() }).unwrap();
            assert!(r.feasible && feasible(&s, r.tool_id, &r.s_tool, &r.s_obj));
            r.tool_id == expected
        })
        .count();
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn reach_limit_flips_to_the_runner_up() {
    let s = fixtures::tape_pull_constrained();
    let best = sweep(&s, &TAPE_GRID, [13, 13, 5]);
    assert!(best[2].is_infinite(), "mugtree must be unreachable: {best:?}");
    let expected = argmax(&best);
    assert_eq!(s.tools[expected].name, "umbrella", "sweep {best:?}");
    for seed in 0..10 {
        let r = solve_keyframe(&oracle(&s, &TAPE_GRID), &CmaParams { seed, ..Default::default() }).unwrap();
        assert_eq!(r.tool_id, expected, "seed {seed}: {r:?}");
        assert!(r.score <= best[expected] + 0.3 * 0.01 + 1e-9, "score {} above sweep {}", r.score, best[expected]);
    }
}

#[test]
fn cup_beats_flat_stick() {
    // free-floating cup: no floor and no bounds edge to trap the disk, so
    // the best pose is upright and holds m·g·h
    let mut s = fixtures::u_cup();
    s.statics.clear();
    s.bounds.object.lo[1] = -1.0;
    s.rebuild();
    let grid = [0.01, 0.01, 0.1];
    let mgh = fixtures::MASS * 9.81 * fixtures::CUP_WALL_HEIGHT;
    for seed in 0..3 {
        let r = solve_keyframe(&oracle(&s, &grid), &CmaParams { seed, ..Default::default() }).unwrap();
        assert_eq!(s.tools[r.tool_id].name, "u_cup");
        assert!((r.score - mgh).abs() <= 0.1 * mgh, "Q* {} vs {mgh}: {r:?}", r.score);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn unreachable_cup_falls_back_to_stick() {
    let mut s = fixtures::u_cup();
    s.tools[0].reachable_region = Polygon::rect(Vec2::new(5.0, 5.0), Vec2::new(6.0, 6.0)).unwrap();
    for seed in 0..3 {
        let r = solve_keyframe(&oracle(&s, &[0.01, 0.01, 0.1]), &CmaParams { seed, ..Default::default() }).unwrap();
        assert_eq!(s.tools[r.tool_id].name, "flat_stick");
        assert!(s.reachable(&r.s_tool, r.tool_id));
    }
}

#[test]
fn selection_is_invariant_to_energy_scale() {
    let s = fixtures::u_cup();
    let mut heavy = s.clone();
    heavy.field.m_obj *= 3.0;
    let grid = [0.01, 0.01, 0.1];
    for seed in 0..5 {
        let cma = CmaParams { seed, lambda: 40, iterations: 10, ..Default::default() };
        let a = solve_keyframe(&oracle(&s, &grid), &cma).unwrap();
        let mut p = oracle(&heavy, &grid);
        p.unified.q_max *= 3.0;
        let b = solve_keyframe(&p, &cma).unwrap();
        assert_eq!(a.tool_id, b.tool_id);
    }
}

#[test]
fn no_feasible_candidate_is_reported() {
    let mut s = fixtures::u_cup();
    for t in &mut s.tools {
        t.reachable_region = Polygon::rect(Vec2::new(5.0, 5.0), Vec2::new(6.0, 6.0)).unwrap();
    }
    let r =
        solve_keyframe(&oracle(&s, &[0.01, 0.01, 0.1]), &CmaParams { lambda: 10, iterations: 2, ..Default::default() })
            .unwrap();
    assert!(!r.feasible);
    assert!(r.violations.unreachable > 0);
}

#[test]
fn fixed_tool_is_respected() {
    let s = fixtures::u_cup();
    let grid = [0.01, 0.01, 0.1];
    let cma = CmaParams { lambda: 20, iterations: 5, seed: 2, ..Default::default() };
    let r = solve_keyframe(&KeyframeProblem { tool: Some(1), ..oracle(&s, &grid) }, &cma).unwrap();
    assert_eq!(s.tools[r.tool_id].name, "flat_stick");
    assert!(solve_keyframe(&KeyframeProblem { tool: Some(7), ..oracle(&s, &grid) }, &cma).is_err());
}
