//! Via-point trajectory optimization: minimum-jerk tool trajectories through
//! CMA-ES-chosen via points, scored by rolling out the quasi-static
//! simulation and integrating the robustness metric.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmaes::{optimize_batch, CmaParams};
use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Pose2};
use crate::keyframe::{KeyframeSolution, Metric};
use crate::scene::{BoxBounds, ObjectConfig, Scene};
use crate::sim::{rollout, RolloutTrace};
use crate::surrogate::{MetricKind, UnifiedParams};

/// Quintic Hermite basis on [0,1]: weights of p0, h·v0, h²·a0, h²·a1, h·v1, p1.
fn basis(s: f64) -> [[f64; 6]; 5] {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    [
        [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
            0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5,
            0.5 * s3 - s4 + 0.5 * s5,
            -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
        ],
        [
            -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
            1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
            s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4,
            1.5 * s2 - 4.0 * s3 + 2.5 * s4,
            -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
            30.0 * s2 - 60.0 * s3 + 30.0 * s4,
        ],
        [
            -60.0 * s + 180.0 * s2 - 120.0 * s3,
            -36.0 * s + 96.0 * s2 - 60.0 * s3,
            1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3,
            3.0 * s - 12.0 * s2 + 10.0 * s3,
            -24.0 * s + 84.0 * s2 - 60.0 * s3,
            60.0 * s - 180.0 * s2 + 120.0 * s3,
        ],
        [
            -60.0 + 360.0 * s - 360.0 * s2,
            -36.0 + 192.0 * s - 180.0 * s2,
            -9.0 + 36.0 * s - 30.0 * s2,
            3.0 - 24.0 * s + 30.0 * s2,
            -24.0 + 168.0 * s - 180.0 * s2,
            60.0 - 360.0 * s + 360.0 * s2,
        ],
        [
            360.0 - 720.0 * s,
            192.0 - 360.0 * s,
            36.0 - 60.0 * s,
            -24.0 + 60.0 * s,
            168.0 - 360.0 * s,
            -360.0 + 720.0 * s,
        ],
    ]
}

/// Knot data of one coordinate: position, velocity and acceleration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Knot {
    p: f64,
    v: f64,
    a: f64,
}

/// `m`-th derivative (with respect to normalized time) on a segment of
/// width `h` at local parameter `s`.
fn seg_deriv(k0: &Knot, k1: &Knot, h: f64, s: f64, m: usize) -> f64 {
    let b = &basis(s)[m];
    let w = [k0.p, h * k0.v, h * h * k0.a, h * h * k1.a, h * k1.v, k1.p];
    let sum: f64 = b.iter().zip(w).map(|(b, w)| b * w).sum();
    sum / h.powi(m as i32)
}

/// Rest-to-rest trajectory through via points at uniformly spaced phases,
/// built from quintic pieces with continuous derivatives up to the fourth
/// (the minimum-jerk spline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ViaFile", into = "ViaFile")]
pub struct ViaTrajectory {
    pub start: Pose2,
    /// The last via point is the final pose.
    pub via: Vec<Pose2>,
    pub duration: f64,
    knots: Vec<f64>,
    /// Knot states per coordinate (x, y, θ).
    states: [Vec<Knot>; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ViaFile {
    start: Pose2,
    via: Vec<Pose2>,
    duration: f64,
}

impl TryFrom<ViaFile> for ViaTrajectory {
    type Error = Error;
    fn try_from(f: ViaFile) -> Result<Self> {
        ViaTrajectory::new(f.start, f.via, f.duration)
    }
}

impl From<ViaTrajectory> for ViaFile {
    fn from(t: ViaTrajectory) -> Self {
        ViaFile { start: t.start, via: t.via, duration: t.duration }
    }
}

fn raw(p: &Pose2, i: usize) -> f64 {
    [p.x, p.y, p.theta][i]
}

impl ViaTrajectory {
    /// Angles of consecutive via points are unwrapped so the tool turns
    /// along the shortest arc.
    pub fn new(start: Pose2, via: Vec<Pose2>, duration: f64) -> Result<Self> {
        if via.is_empty() {
            return Err(Error::InvalidArgument("at least one via point (the final pose) is required".into()));
        }
        if !(duration > 0.0) {
            return Err(Error::InvalidArgument("duration must be > 0".into()));
        }
        let n = via.len();
        let knots: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let mut states: [Vec<Knot>; 3] = Default::default();
        let mut thetas = vec![start.theta];
        for v in &via {
            let last = *thetas.last().expect("non-empty");
            thetas.push(last + angle_diff(v.theta, last));
        }
        for (dim, st) in states.iter_mut().enumerate() {
            let pos: Vec<f64> = (0..=n)
                .map(|i| match (dim, i) {
                    (2, _) => thetas[i],
                    (_, 0) => raw(&start, dim),
                    _ => raw(&via[i - 1], dim),
                })
                .collect();
            *st = solve_knots(&knots, &pos);
        }
        Ok(ViaTrajectory { start, via, duration, knots, states })
    }

    pub fn n_via(&self) -> usize {
        self.via.len()
    }

    /// Phase of via point `i`.
    pub fn via_phase(&self, i: usize) -> f64 {
        self.knots[i + 1]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.via.len();
        let i = ((t * n as f64).floor() as usize).min(n - 1);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let s = if t == b { 1.0 } else { ((t - a) / (b - a)).clamp(0.0, 1.0) };
        (i, s)
    }

    fn deriv(&self, t: f64, m: usize) -> Result<[f64; 3]> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("phase {t} outside [0, 1]")));
        }
        let (i, s) = self.locate(t);
        let h = self.knots[i + 1] - self.knots[i];
        let mut out = [0.0; 3];
        for (d, st) in self.states.iter().enumerate() {
            out[d] = seg_deriv(&st[i], &st[i + 1], h, s, m);
        }
        Ok(out)
    }

    pub fn pose(&self, t: f64) -> Result<Pose2> {
        let p = self.deriv(t, 0)?;
        Ok(Pose2::new(p[0], p[1], p[2]))
    }

    /// Pose and velocity (per unit phase) at normalized time `t`.
    pub fn eval(&self, t: f64) -> Result<(Pose2, [f64; 3])> {
        Ok((self.pose(t)?, self.deriv(t, 1)?))
    }

    /// Derivative of order `m` (0 to 4) per unit phase.
    pub fn derivative(&self, t: f64, m: usize) -> Result<[f64; 3]> {
        if m > 4 {
            return Err(Error::InvalidArgument("derivative order must be <= 4".into()));
        }
        self.deriv(t, m)
    }

    /// Evenly spaced via points on the straight line between two poses.
    pub fn straight(start: Pose2, end: Pose2, n_via: usize, duration: f64) -> Result<Self> {
        let dth = angle_diff(end.theta, start.theta);
        let via = (1..=n_via)
            .map(|i| {
                let f = i as f64 / n_via as f64;
                Pose2::new(start.x + f * (end.x - start.x), start.y + f * (end.y - start.y), start.theta + f * dth)
            })
            .collect();
        ViaTrajectory::new(start, via, duration)
    }
}

/// Velocities and accelerations at interior knots so that jerk and snap are
/// continuous; rest at both ends.
fn solve_knots(knots: &[f64], pos: &[f64]) -> Vec<Knot> {
    let n = knots.len() - 1;
    let build = |u: &[f64]| -> Vec<Knot> {
        (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    Knot { p: pos[i], v: 0.0, a: 0.0 }
                } else {
                    Knot { p: pos[i], v: u[2 * (i - 1)], a: u[2 * (i - 1) + 1] }
                }
            })
            .collect()
    };
    let m = 2 * (n - 1);
    if m == 0 {
        return build(&[]);
    }
    let residual = |u: &[f64]| -> Vec<f64> {
        let k = build(u);
        let mut r = Vec::with_capacity(m);
        for i in 1..n {
            let (hl, hr) = (knots[i] - knots[i - 1], knots[i + 1] - knots[i]);
            for order in [3, 4] {
                r.push(seg_deriv(&k[i - 1], &k[i], hl, 1.0, order) - seg_deriv(&k[i], &k[i + 1], hr, 0.0, order));
            }
        }
        r
    };
    // the residual is affine in the unknowns
    let zero = vec![0.0; m];
    let b = DVector::from_vec(residual(&zero));
    let mut a = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut e = zero.clone();
        e[j] = 1.0;
        let col = DVector::from_vec(residual(&e)) - &b;
        a.set_column(j, &col);
    }
    let u = a.lu().solve(&(-b)).expect("knot system is non-singular");
    build(u.as_slice())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajCostParams {
    pub w_goal: f64,
    pub w_keyframe_tool: f64,
    pub w_keyframe_obj: f64,
    pub w_robust: f64,
    /// Rollout steps; the robustness integral is their mean.
    pub n_cost_samples: usize,
}

impl Default for TrajCostParams {
    fn default() -> Self {
        TrajCostParams { w_goal: 10.0, w_keyframe_tool: 10.0, w_keyframe_obj: 10.0, w_robust: 1.0, n_cost_samples: 50 }
    }
}

impl TrajCostParams {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_goal, self.w_keyframe_tool, self.w_keyframe_obj, self.w_robust];
        if w.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("cost weights must be finite and >= 0".into()));
        }
        if self.n_cost_samples < 2 {
            return Err(Error::InvalidArgument("n_cost_samples must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub n_via: usize,
    pub cma: CmaParams,
    pub cost: TrajCostParams,
    /// Padding of the via-point box around start, keyframe and goal.
    pub margin: f64,
    /// Start the search at the polyline start, keyframe, goal unless
    /// `cma.x0` is given.
    pub warm_start: bool,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            n_via: 5,
            cma: CmaParams { lambda: 100, iterations: 50, seed: 0, sigma0: 0.1, x0: None },
            cost: TrajCostParams::default(),
            margin: 0.15,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub goal: f64,
    pub keyframe_tool: f64,
    pub keyframe_obj: f64,
    /// Negative weighted mean robustness, in units of the unified cap.
    pub robustness: f64,
    pub total: f64,
    pub mean_robustness: f64,
    /// Tool distance from the keyframe pose at T_k, in tool-bounds units.
    pub keyframe_deviation: f64,
    pub goal_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub tool_id: usize,
    pub trajectory: ViaTrajectory,
    pub trace: RolloutTrace,
    pub cost: CostBreakdown,
    pub via_box: BoxBounds,
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Why a candidate trajectory was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reject {
    Decode,
    Rollout,
    ToolStatic,
    Unreachable,
    Metric,
}

/// Rejection counts over a whole plan.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRejections {
    pub decode: usize,
    pub rollout: usize,
    pub tool_static: usize,
    pub unreachable: usize,
    pub metric: usize,
}

impl PlanRejections {
    fn add(&mut self, r: Reject) {
        match r {
            Reject::Decode => self.decode += 1,
            Reject::Rollout => self.rollout += 1,
            Reject::ToolStatic => self.tool_static += 1,
            Reject::Unreachable => self.unreachable += 1,
            Reject::Metric => self.metric += 1,
        }
    }
}

/// Everything needed to score a trajectory for one tool.
pub struct TrajectoryProblem<'a> {
    pub scene: &'a Scene,
    pub tool_id: usize,
    pub keyframe: &'a KeyframeSolution,
    pub metric: &'a Metric,
    pub unified: UnifiedParams,
    pub cost: TrajCostParams,
}

/// Object distance over the coordinates the task cares about: those whose
/// goal tolerance is below a half turn.
pub fn task_distance(scene: &Scene, a: &ObjectConfig, b: &ObjectConfig) -> f64 {
    let w = scene.object.metric_weights();
    let (va, vb) = (a.to_vec(), b.to_vec());
    let mut s = 0.0;
    for i in 0..va.len() {
        if scene.goal_tol.get(i).is_some_and(|t| *t >= std::f64::consts::PI) {
            continue;
        }
        let d = if i == 2 { angle_diff(va[i], vb[i]) } else { va[i] - vb[i] };
        s += (d * w[i]).powi(2);
    }
    s.sqrt()
}

/// Tool distance in units of the tool bounds, shortest arc for the angle.
pub fn tool_distance(scene: &Scene, a: &Pose2, b: &Pose2) -> f64 {
    let bt = &scene.bounds.tool;
    let d = [a.x - b.x, a.y - b.y, angle_diff(a.theta, b.theta)];
    d.iter().enumerate().map(|(i, d)| (d / bt.width(i)).powi(2)).sum::<f64>().sqrt()
}

impl TrajectoryProblem<'_> {
    /// Largest unified score of the planning metric.
    fn cap(&self) -> f64 {
        match self.metric.kind() {
            Ok(MetricKind::Pcc) => self.unified.q_max_pcc,
            _ => self.unified.q_max,
        }
    }

    /// Tool pose that would place the keyframe object at the goal.
    pub fn end_pose(&self) -> Pose2 {
        let kf = self.keyframe;
        let g = &self.scene.goal.pose;
        Pose2::new(g.x + kf.s_tool.x - kf.s_obj.pose.x, g.y + kf.s_tool.y - kf.s_obj.pose.y, kf.s_tool.theta)
    }

    /// Normalized via points on the polyline start, keyframe tool pose,
    /// end pose, with the keyframe at its phase.
    pub fn warm_start(&self, b: &BoxBounds, n_via: usize) -> Vec<f64> {
        let start = self.scene.task.tool_start;
        let kf = self.keyframe.s_tool;
        let end = self.end_pose();
        let phase = self.scene.task.keyframe_phase.clamp(1e-6, 1.0);
        let lerp = |a: &Pose2, b: &Pose2, f: f64| {
            Pose2::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), a.theta + f * angle_diff(b.theta, a.theta))
        };
        let mut x = Vec::with_capacity(3 * n_via);
        for i in 1..=n_via {
            let t = i as f64 / n_via as f64;
            let p = if t <= phase || phase >= 1.0 {
                lerp(&start, &kf, (t / phase).min(1.0))
            } else {
                lerp(&kf, &end, (t - phase) / (1.0 - phase))
            };
            x.extend(b.normalize(&[p.x, p.y, p.theta]).into_iter().map(|v| v.clamp(0.0, 1.0)));
        }
        x
    }

    fn t_k(&self) -> usize {
        let n = self.cost.n_cost_samples;
        ((self.scene.task.keyframe_phase * n as f64).round() as usize).min(n)
    }

    fn terms(&self, trace: &RolloutTrace, mean_q: f64) -> CostBreakdown {
        let c = &self.cost;
        let k = self.t_k();
        let fin = trace.final_object();
        let goal_error = task_distance(self.scene, &self.scene.goal, fin);
        let kt = tool_distance(self.scene, &self.keyframe.s_tool, &trace.tool[k]);
        let ko = task_distance(self.scene, &self.keyframe.s_obj, &trace.object[k]);
        let goal = c.w_goal * goal_error;
        let keyframe_tool = c.w_keyframe_tool * kt;
        let keyframe_obj = c.w_keyframe_obj * ko;
        let robustness = -c.w_robust * mean_q / self.cap();
        CostBreakdown {
            goal,
            keyframe_tool,
            keyframe_obj,
            robustness,
            total: goal + keyframe_tool + keyframe_obj + robustness,
            mean_robustness: mean_q,
            keyframe_deviation: kt,
            goal_error,
        }
    }

    /// Rolls out each trajectory and scores the valid ones.
    pub fn evaluate_checked(
        &self,
        trajs: &[ViaTrajectory],
    ) -> Vec<std::result::Result<(RolloutTrace, CostBreakdown), Reject>> {
        let n = self.cost.n_cost_samples;
        let traces: Vec<std::result::Result<RolloutTrace, Reject>> = trajs
            .par_iter()
            .map(|t| {
                let tr = rollout(self.scene, t, self.tool_id, n).map_err(|_| Reject::Rollout)?;
                if tr.failure.is_some() {
                    Err(Reject::Rollout)
                } else if tr.tool_static.is_some() {
                    Err(Reject::ToolStatic)
                } else if tr.unreachable.is_some() {
                    Err(Reject::Unreachable)
                } else {
                    Ok(tr)
                }
            })
            .collect();
        let mut items = Vec::new();
        for tr in traces.iter().flatten() {
            for k in 1..=n {
                items.push((self.tool_id, tr.tool[k], tr.object[k]));
            }
        }
        let scores = if items.is_empty() { vec![] } else { self.metric.score_batch(self.scene, &self.unified, &items) };
        let mut it = scores.chunks(n);
        traces
            .into_iter()
            .map(|tr| {
                let tr = tr?;
                let s = it.next().expect("scores for every valid trace");
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Reject::Metric);
                }
                let mean = s.iter().sum::<f64>() / n as f64;
                let terms = self.terms(&tr, mean);
                Ok((tr, terms))
            })
            .collect()
    }

    /// Like [`Self::evaluate_checked`]; `None` marks an infeasible candidate.
    pub fn evaluate_batch(&self, trajs: &[ViaTrajectory]) -> Vec<Option<(RolloutTrace, CostBreakdown)>> {
        self.evaluate_checked(trajs).into_iter().map(|r| r.ok()).collect()
    }

    pub fn evaluate(&self, traj: &ViaTrajectory) -> Option<(RolloutTrace, CostBreakdown)> {
        self.evaluate_batch(std::slice::from_ref(traj)).pop().flatten()
    }

    /// Box for the via points: start, keyframe tool pose and the tool pose
    /// that would carry the keyframe object offset to the goal.
    pub fn via_box(&self, margin: f64) -> BoxBounds {
        let s = self.scene;
        let kf = self.keyframe;
        let start = s.task.tool_start;
        let end = self.end_pose();
        let xs = [start.x, kf.s_tool.x, end.x];
        let ys = [start.y, kf.s_tool.y, end.y];
        let ts = [start.theta, kf.s_tool.theta];
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        BoxBounds::new(
            vec![lo(&xs) - margin, lo(&ys) - margin, lo(&ts) - 0.5],
            vec![hi(&xs) + margin, hi(&ys) + margin, hi(&ts) + 0.5],
        )
    }

    pub fn decode(&self, b: &BoxBounds, x: &[f64], n_via: usize) -> Result<ViaTrajectory> {
        let via = (0..n_via)
            .map(|i| {
                let v = b.denormalize(&x[3 * i..3 * i + 3]);
                Pose2::new(v[0], v[1], v[2])
            })
            .collect();
        ViaTrajectory::new(self.scene.task.tool_start, via, self.scene.task.duration)
    }
}

/// Optimizes the via points of a trajectory through the keyframe.
pub fn plan(p: &TrajectoryProblem, params: &PlanParams) -> Result<PlanResult> {
    if !p.keyframe.feasible {
        return Err(Error::Infeasible("keyframe solution is infeasible".into()));
    }
    p.cost.validate()?;
    p.scene.tool(p.tool_id)?;
    if params.n_via == 0 {
        return Err(Error::InvalidArgument("n_via must be >= 1".into()));
    }
    let b = p.via_box(params.margin);
    let d = 3 * params.n_via;
    let mut rejections = PlanRejections::default();
    let objective = |xs: &[Vec<f64>]| -> Vec<f64> {
        let trajs: Vec<Option<ViaTrajectory>> = xs.iter().map(|x| p.decode(&b, x, params.n_via).ok()).collect();
        let ok: Vec<ViaTrajectory> = trajs.iter().flatten().cloned().collect();
        let mut res = p.evaluate_checked(&ok).into_iter();
        trajs
            .iter()
            .map(|t| {
                let r = match t {
                    Some(_) => res.next().expect("one result per decoded candidate").map(|(_, c)| c.total),
                    None => Err(Reject::Decode),
                };
                r.unwrap_or_else(|e| {
                    rejections.add(e);
                    f64::INFINITY
                })
            })
            .collect()
    };
    let mut cma = params.cma.clone();
    if params.warm_start && cma.x0.is_none() {
        cma.x0 = Some(p.warm_start(&b, params.n_via));
    }
    let r = match optimize_batch(objective, d, &cma) {
        Err(Error::Infeasible(m)) => return Err(Error::Infeasible(format!("{m}; rejections {rejections:?}"))),
        r => r?,
    };
    let trajectory = p.decode(&b, &r.best_x, params.n_via)?;
    let (trace, cost) =
        p.evaluate(&trajectory).ok_or_else(|| Error::Infeasible("best trajectory failed re-evaluation".into()))?;
    Ok(PlanResult {
        tool_id: p.tool_id,
        trajectory,
        trace,
        cost,
        via_box: b,
        history: r.history,
        evaluations: r.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment_is_the_rest_to_rest_quintic() {
        let t = ViaTrajectory::new(Pose2::IDENTITY, vec![Pose2::new(1.0, 0.0, 0.0)], 1.0).unwrap();
        let (p, _) = t.eval(0.5).unwrap();
        assert!((p.x - 0.5).abs() < 1e-15 && p.y == 0.0);
        let (p0, v0) = t.eval(0.0).unwrap();
        assert_eq!(p0, Pose2::IDENTITY);
        assert_eq!(v0, [0.0; 3]);
        let (p1, v1) = t.eval(1.0).unwrap();
        assert_eq!(p1.x, 1.0);
        assert_eq!(v1, [0.0; 3]);
        assert!(t.eval(1.5).is_err());
    }

    #[test]
    fn interior_derivatives_are_continuous() {
        let via = vec![Pose2::new(0.3, 0.2, 0.1), Pose2::new(0.1, 0.5, -0.4), Pose2::new(0.8, 0.1, 0.3)];
        let t = ViaTrajectory::new(Pose2::new(0.0, 0.0, 0.2), via, 2.0).unwrap();
        for i in 0..2 {
            let k = t.via_phase(i);
            for m in 0..=4 {
                let l = t.derivative(k - 1e-9, m).unwrap();
                let r = t.derivative(k + 1e-9, m).unwrap();
                for d in 0..3 {
                    let scale = 1.0 + l[d].abs();
                    assert!((l[d] - r[d]).abs() < 1e-4 * scale, "order {m} dim {d}: {} vs {}", l[d], r[d]);
                }
            }
        }
    }
}
