//! Quasi-static contact simulation: the object follows local energy minima
//! while the tool pushes it, plus the random-disturbance harness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::{escape_set, EscapeQuery};
use crate::geometry::{angle_diff, Body, Pose2, Vec2};
use crate::rng::{stream_rng, streams};
use crate::scene::{ObjectConfig, Plane, Scene};
use crate::trajopt::ViaTrajectory;

pub const STEP_TRANSLATION: f64 = 1e-3;
pub const STEP_ROTATION: f64 = 1e-2;
pub const STEP_JOINT: f64 = 1e-2;
pub const DEFAULT_SETTLE_ITERS: usize = 2000;
/// Step multipliers of the coarse-to-fine descent; the last one is the
/// nominal step size.
const SCALES: [f64; 3] = [16.0, 4.0, 1.0];
const CONTACT_TOL: f64 = 2e-3;
const PUSH_STEP: f64 = 5e-4;
const PUSHOUT_BUDGET: f64 = 0.1;
const PUSH_DIRECTIONS: usize = 32;
const TRANSLATION_FAN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettleResult {
    pub config: ObjectConfig,
    /// Translation applied to resolve an initial penetration.
    pub pushout: f64,
    pub iterations: usize,
    pub energy_in: f64,
    pub energy_out: f64,
}

/// Settling environment: a placed tool, an optional extra uniform force
/// and an optional cap on how far the mass center may travel.
struct Env<'a> {
    scene: &'a Scene,
    tool: Body,
    force: Vec2,
    travel: Option<(Vec2, f64)>,
}

impl<'a> Env<'a> {
    fn new(scene: &'a Scene, tool_id: usize, s_tool: &Pose2) -> Self {
        Env { scene, tool: scene.place_tool(tool_id, s_tool), force: Vec2::new(0.0, 0.0), travel: None }
    }

    fn energy(&self, c: &ObjectConfig) -> f64 {
        self.energy_at(c, self.scene.object.mass_center(c))
    }

    fn energy_at(&self, c: &ObjectConfig, mc: Vec2) -> f64 {
        self.scene.energy_at(c, mc) - self.force.dot(mc)
    }

    fn collides(&self, c: &ObjectConfig) -> bool {
        let obj = self.scene.place_object(c);
        obj.collides(self.scene.statics_body()) || obj.collides(&self.tool)
    }

    fn in_contact(&self, c: &ObjectConfig) -> bool {
        if self.scene.field.plane() == Plane::Horizontal {
            // resting on the table
            return true;
        }
        let obj = self.scene.place_object(c);
        obj.collides_dilated(self.scene.statics_body(), CONTACT_TOL) || obj.collides_dilated(&self.tool, CONTACT_TOL)
    }

    fn within_travel(&self, mc: Vec2) -> bool {
        match self.travel {
            None => true,
            Some((anchor, cap)) => (mc - anchor).norm() <= cap,
        }
    }
}

fn shifted(c: &ObjectConfig, d: Vec2) -> ObjectConfig {
    let mut out = *c;
    out.pose.x += d.x;
    out.pose.y += d.y;
    out
}

/// Translates the object out of penetration, preferring `dir` when given,
/// otherwise the shortest of a fan of directions.
fn pushout(env: &Env, c: &ObjectConfig, dir: Option<Vec2>) -> Option<(ObjectConfig, f64)> {
    if !env.collides(c) {
        return Some((*c, 0.0));
    }
    let steps = (PUSHOUT_BUDGET / PUSH_STEP).ceil() as usize;
    if let Some(d) = dir.filter(|d| d.norm() > 1e-12) {
        let u = d * (1.0 / d.norm());
        for k in 1..=steps {
            let t = shifted(c, u * (k as f64 * PUSH_STEP));
            if !env.collides(&t) {
                return Some((t, k as f64 * PUSH_STEP));
            }
        }
    }
    for k in 1..=steps {
        let r = k as f64 * PUSH_STEP;
        for i in 0..PUSH_DIRECTIONS {
            let a = std::f64::consts::TAU * i as f64 / PUSH_DIRECTIONS as f64;
            let t = shifted(c, Vec2::new(a.cos(), a.sin()) * r);
            if !env.collides(&t) {
                return Some((t, r));
            }
        }
    }
    None
}

/// Unit-step combinations: a fan of translation directions (so the object
/// can slide along inclined contacts) times {-1, 0, 1} for the angles.
fn step_directions(dims: usize) -> Vec<[f64; 4]> {
    let mut trans = vec![[0.0, 0.0]];
    for i in 0..TRANSLATION_FAN {
        let a = std::f64::consts::TAU * i as f64 / TRANSLATION_FAN as f64;
        trans.push([a.cos(), a.sin()]);
    }
    let rest = dims - 2;
    let mut out = Vec::new();
    for t in &trans {
        for code in 0..3usize.pow(rest as u32) {
            let mut v = [t[0], t[1], 0.0, 0.0];
            let mut k = code;
            for x in v.iter_mut().skip(2).take(rest) {
                *x = (k % 3) as f64 - 1.0;
                k /= 3;
            }
            if v.iter().any(|x| *x != 0.0) {
                out.push(v);
            }
        }
    }
    out
}

/// Energy descent from a collision-free configuration. Friction makes a
/// step count only if it releases more energy than it dissipates.
fn descend(env: &Env, start: ObjectConfig, max_iters: usize) -> (ObjectConfig, usize) {
    let scene = env.scene;
    let dims = scene.dims();
    let dirs = step_directions(dims);
    let base = [STEP_TRANSLATION, STEP_TRANSLATION, STEP_ROTATION, STEP_JOINT];
    let limits = scene.object.joint.as_ref().map(|j| j.limits);
    let friction = scene.sim.friction;
    let mut c = start;
    let mut iters = 0;
    let mut cands: Vec<(f64, ObjectConfig, Vec2)> = Vec::with_capacity(dirs.len());
    for scale in SCALES {
        while iters < max_iters {
            let mc0 = scene.object.mass_center(&c);
            let e0 = env.energy_at(&c, mc0);
            let contact = friction > 0.0 && env.in_contact(&c);
            cands.clear();
            // mass center of each angular offset, about the unshifted origin
            let mut spun = [None; 9];
            for d in &dirs {
                let mut nc = c;
                nc.pose.theta += d[2] * base[2] * scale;
                if let Some(a) = nc.alpha.as_mut() {
                    *a += d[3] * base[3] * scale;
                    if let Some(l) = limits {
                        *a = a.clamp(l[0], l[1]);
                    }
                }
                let k = (d[2] + 1.0) as usize + 3 * (d[3] + 1.0) as usize;
                let rel = *spun[k].get_or_insert_with(|| {
                    let mut o = nc;
                    o.pose.x = 0.0;
                    o.pose.y = 0.0;
                    scene.object.mass_center(&o)
                });
                nc.pose.x += d[0] * base[0] * scale;
                nc.pose.y += d[1] * base[1] * scale;
                let mc = rel + nc.pose.translation();
                let mut gain = e0 - env.energy_at(&nc, mc);
                if contact {
                    gain -= friction * (mc - mc0).norm();
                }
                if gain > 1e-12 {
                    cands.push((gain, nc, mc));
                }
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0));
            match cands.iter().find(|(_, nc, mc)| env.within_travel(*mc) && !env.collides(nc)) {
                Some((_, nc, _)) => {
                    c = *nc;
                    iters += 1;
                }
                None => break,
            }
        }
    }
    (c, iters)
}

fn settle_env(env: &Env, c: &ObjectConfig, push_dir: Option<Vec2>, max_iters: usize) -> Result<SettleResult> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    let energy_in = env.energy(c);
    let (free, pushed) =
        pushout(env, c, push_dir).ok_or_else(|| Error::Rollout("penetration could not be resolved".into()))?;
    let (config, iterations) = descend(env, free, max_iters);
    let energy_out = env.energy(&config);
    debug_assert!(energy_out <= env.energy(&free) + 1e-12);
    Ok(SettleResult { config, pushout: pushed, iterations, energy_in, energy_out })
}

/// Moves the object to a nearby local energy minimum, first pushing it out
/// of any penetration.
pub fn settle(
    scene: &Scene,
    s_obj: &ObjectConfig,
    s_tool: &Pose2,
    tool_id: usize,
    max_iters: usize,
) -> Result<SettleResult> {
    scene.tool(tool_id)?;
    if s_obj.dims() != scene.dims() {
        return Err(Error::DimensionMismatch { expected: scene.dims(), got: s_obj.dims() });
    }
    settle_env(&Env::new(scene, tool_id, s_tool), s_obj, None, max_iters)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub contact: bool,
    pub escaped: bool,
    pub pushout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTrace {
    pub tool: Vec<Pose2>,
    pub object: Vec<ObjectConfig>,
    /// One entry per state, the initial state included.
    pub events: Vec<StepEvent>,
    /// First step at which the tool interpenetrates the statics.
    pub tool_static: Option<usize>,
    /// First step at which the grasp point leaves the reachable region.
    pub unreachable: Option<usize>,
    pub failure: Option<String>,
}

impl RolloutTrace {
    /// No tool-static collision, reachability violation or failure.
    pub fn valid(&self) -> bool {
        self.tool_static.is_none() && self.unreachable.is_none() && self.failure.is_none()
    }

    pub fn final_object(&self) -> &ObjectConfig {
        self.object.last().expect("trace holds the initial state")
    }
}

/// A disturbance applied at one rollout step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub step: usize,
    pub force: Vec2,
}

fn simulate(
    scene: &Scene,
    traj: &ViaTrajectory,
    tool_id: usize,
    n_steps: usize,
    impulses: &[Impulse],
    travel: f64,
) -> Result<RolloutTrace> {
    scene.tool(tool_id)?;
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be >= 1".into()));
    }
    let mut tr = RolloutTrace {
        tool: Vec::with_capacity(n_steps + 1),
        object: Vec::with_capacity(n_steps + 1),
        events: Vec::with_capacity(n_steps + 1),
        tool_static: None,
        unreachable: None,
        failure: None,
    };
    let mut prev = traj.pose(0.0)?;
    let mut c = scene.start;
    let record = |tr: &mut RolloutTrace, k: usize, t: Pose2, c: ObjectConfig, pushout: f64| {
        if tr.tool_static.is_none() && scene.tool_hits_statics(&t, tool_id) {
            tr.tool_static = Some(k);
        }
        if tr.unreachable.is_none() && !scene.reachable(&t, tool_id) {
            tr.unreachable = Some(k);
        }
        let env = Env::new(scene, tool_id, &t);
        let escaped = escape_set(&EscapeQuery::new(scene, tool_id, t, c)).contains(&c);
        tr.events.push(StepEvent { contact: env.in_contact(&c), escaped, pushout });
        tr.tool.push(t);
        tr.object.push(c);
    };
    record(&mut tr, 0, prev, c, 0.0);
    for k in 1..=n_steps {
        let t = traj.pose(k as f64 / n_steps as f64)?;
        let env = Env::new(scene, tool_id, &t);
        // displacement of the object's mass center if it were carried by the tool
        let mc = scene.object.mass_center(&c);
        let carried = t.apply(prev.inverse().apply(mc)) - mc;
        let pushed = match settle_env(&env, &c, Some(carried), DEFAULT_SETTLE_ITERS) {
            Ok(r) => {
                c = r.config;
                r.pushout
            }
            Err(e) => {
                tr.failure = Some(format!("step {k}: {e}"));
                break;
            }
        };
        for imp in impulses.iter().filter(|i| i.step == k) {
            let mut tilted = Env::new(scene, tool_id, &t);
            tilted.force = imp.force;
            tilted.travel = Some((scene.object.mass_center(&c), travel));
            c = descend(&tilted, c, DEFAULT_SETTLE_ITERS).0;
            c = descend(&env, c, DEFAULT_SETTLE_ITERS).0;
        }
        record(&mut tr, k, t, c, pushed);
        prev = t;
    }
    Ok(tr)
}

/// Executes `traj` open loop from the scene's start configuration.
pub fn rollout(scene: &Scene, traj: &ViaTrajectory, tool_id: usize, n_steps: usize) -> Result<RolloutTrace> {
    simulate(scene, traj, tool_id, n_steps, &[], 0.0)
}

/// Object still contained by the tool at the end of `tr`: outside the
/// escape set around the final tool pose and not in contact with the statics.
pub fn held(scene: &Scene, tool_id: usize, tr: &RolloutTrace) -> bool {
    let (Some(c), Some(t)) = (tr.object.last(), tr.tool.last()) else { return false };
    !escape_set(&EscapeQuery::new(scene, tool_id, *t, *c)).contains(c)
        && !scene.place_object(c).collides_dilated(scene.statics_body(), CONTACT_TOL)
}

/// Object within the scene's goal tolerance, per coordinate.
pub fn goal_reached(scene: &Scene, c: &ObjectConfig) -> bool {
    let g = &scene.goal;
    let tol = &scene.goal_tol;
    let d = [c.pose.x - g.pose.x, c.pose.y - g.pose.y, angle_diff(c.pose.theta, g.pose.theta)];
    let mut ok = d.iter().zip(tol).all(|(d, t)| d.abs() <= *t);
    if let (Some(a), Some(b), Some(t)) = (c.alpha, g.alpha, tol.get(3)) {
        ok &= (a - b).abs() <= *t;
    }
    ok
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    /// Force magnitude in newtons.
    pub magnitude: f64,
    pub n_episodes: usize,
    pub impulses_per_episode: usize,
    pub rng_seed: u64,
    /// Cap on mass-center travel during one disturbance; unbounded (up to
    /// the settle iteration budget) when absent.
    pub travel: Option<f64>,
}

impl DisturbanceSpec {
    /// Disturbances matching the object's weight.
    pub fn weight(scene: &Scene, n_episodes: usize, rng_seed: u64) -> Self {
        DisturbanceSpec {
            magnitude: scene.field.m_obj * scene.field.g,
            n_episodes,
            impulses_per_episode: 3,
            rng_seed,
            travel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub impulses: Vec<Impulse>,
    pub success: bool,
    pub trace: RolloutTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceReport {
    pub success_rate: f64,
    pub successes: usize,
    pub n_episodes: usize,
    pub episodes: Vec<Episode>,
}

/// Replays `traj` under random uniform-force disturbances and reports how
/// often `success` holds on the final trace.
pub fn evaluate_disturbance<F>(
    scene: &Scene,
    traj: &ViaTrajectory,
    tool_id: usize,
    n_steps: usize,
    spec: &DisturbanceSpec,
    success: F,
) -> Result<DisturbanceReport>
where
    F: Fn(&Scene, &RolloutTrace) -> bool + Sync,
{
    if spec.n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    if !(spec.magnitude >= 0.0) {
        return Err(Error::InvalidArgument("disturbance magnitude must be >= 0".into()));
    }
    scene.tool(tool_id)?;
    let travel = spec.travel.unwrap_or(f64::INFINITY);
    let episodes: Vec<Episode> = (0..spec.n_episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream_rng(spec.rng_seed, streams::DISTURB, e as u64);
            let mut impulses: Vec<Impulse> = (0..spec.impulses_per_episode)
                .map(|_| {
                    let step = rng.random_range(1..=n_steps);
                    let a = rng.random::<f64>() * std::f64::consts::TAU;
                    Impulse { step, force: Vec2::new(a.cos(), a.sin()) * spec.magnitude }
                })
                .collect();
            impulses.sort_by_key(|i| i.step);
            match simulate(scene, traj, tool_id, n_steps, &impulses, travel) {
                Ok(trace) => {
                    let ok = trace.failure.is_none() && success(scene, &trace);
                    Episode { impulses, success: ok, trace }
                }
                Err(err) => {
                    let trace = RolloutTrace {
                        tool: vec![],
                        object: vec![],
                        events: vec![],
                        tool_static: None,
                        unreachable: None,
                        failure: Some(err.to_string()),
                    };
                    Episode { impulses, success: false, trace }
                }
            }
        })
        .collect();
    let successes = episodes.iter().filter(|e| e.success).count();
    Ok(DisturbanceReport {
        success_rate: successes as f64 / spec.n_episodes as f64,
        successes,
        n_episodes: spec.n_episodes,
        episodes,
    })
}
