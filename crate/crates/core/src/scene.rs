//! Task definition: object, candidate tools, static environment, energy
//! field, configuration bounds and the reachability constraint.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Aabb, Body, Polygon, Pose2, Shape, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Gravity,
    GravityPush,
    GravityElastic,
}

/// Orientation of the modeled plane relative to gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    /// The y axis points up; height is the world y of the mass center.
    Vertical,
    /// Top-down view of a table; height is constant.
    Horizontal,
}

fn default_g() -> f64 {
    9.81
}

fn default_v_hat() -> Vec2 {
    Vec2::new(1.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyField {
    pub kind: FieldKind,
    pub m_obj: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default)]
    pub f_p: f64,
    #[serde(default = "default_v_hat")]
    pub v_hat: Vec2,
    #[serde(default)]
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<Plane>,
    #[serde(default)]
    pub table_height: f64,
}

impl EnergyField {
    pub fn gravity(m_obj: f64) -> Self {
        EnergyField {
            kind: FieldKind::Gravity,
            m_obj,
            g: default_g(),
            f_p: 0.0,
            v_hat: default_v_hat(),
            k: 0.0,
            plane: None,
            table_height: 0.0,
        }
    }

    pub fn plane(&self) -> Plane {
        self.plane.unwrap_or(match self.kind {
            FieldKind::GravityPush => Plane::Horizontal,
            _ => Plane::Vertical,
        })
    }

    /// Magnitude of the dominant constant force of the field (N).
    pub fn force_scale(&self) -> f64 {
        let grav = if self.plane() == Plane::Vertical { self.m_obj * self.g } else { 0.0 };
        let push = if self.kind == FieldKind::GravityPush { self.f_p } else { 0.0 };
        grav.max(push)
    }

    fn validate(&self) -> Result<()> {
        if !(self.m_obj > 0.0) {
            return Err(Error::InvalidScene("field.m_obj must be > 0".into()));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidScene("field.g must be > 0".into()));
        }
        if !(self.f_p >= 0.0) {
            return Err(Error::InvalidScene("field.f_p must be >= 0".into()));
        }
        if !(self.k >= 0.0) {
            return Err(Error::InvalidScene("field.k must be >= 0".into()));
        }
        if (self.v_hat.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScene("field.v_hat must be a unit vector".into()));
        }
        Ok(())
    }
}

/// Object configuration: planar pose plus an optional joint angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ObjectConfig {
    pub pose: Pose2,
    pub alpha: Option<f64>,
}

impl TryFrom<Vec<f64>> for ObjectConfig {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ObjectConfig::from_slice(&v)
    }
}

impl From<ObjectConfig> for Vec<f64> {
    fn from(c: ObjectConfig) -> Self {
        c.to_vec()
    }
}

impl ObjectConfig {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        ObjectConfig { pose: Pose2::new(x, y, theta), alpha: None }
    }

    pub fn with_alpha(x: f64, y: f64, theta: f64, alpha: f64) -> Self {
        ObjectConfig { pose: Pose2::new(x, y, theta), alpha: Some(alpha) }
    }

    pub fn dims(&self) -> usize {
        if self.alpha.is_some() {
            4
        } else {
            3
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v.len() {
            3 => Ok(ObjectConfig::new(v[0], v[1], v[2])),
            4 => Ok(ObjectConfig::with_alpha(v[0], v[1], v[2], v[3])),
            n => Err(Error::DimensionMismatch { expected: 3, got: n }),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.pose.x, self.pose.y, self.pose.theta];
        if let Some(a) = self.alpha {
            v.push(a);
        }
        v
    }

    pub fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.pose.x,
            1 => self.pose.y,
            2 => self.pose.theta,
            _ => self.alpha.unwrap_or(0.0),
        }
    }
}

/// Axis-aligned box over configuration coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        BoxBounds { lo, hi }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.lo.len() && v.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *x >= *l && *x <= *h)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    /// Maps unit-cube coordinates into the box.
    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter().enumerate().map(|(i, x)| self.lo[i] + x * self.width(i)).collect()
    }

    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| if self.width(i) > 0.0 { (x - self.lo[i]) / self.width(i) } else { 0.5 })
            .collect()
    }

    /// True when the angular axis `i` spans the full circle.
    pub fn wraps(&self, i: usize) -> bool {
        self.width(i) >= 2.0 * std::f64::consts::PI - 1e-9
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::InvalidScene(format!("bounds.{what}: lo/hi length differ")));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidScene(format!("bounds.{what}: lo must not exceed hi")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub object: BoxBounds,
    pub tool: BoxBounds,
    /// Object box searched during keyframe selection; defaults to `object`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyframe_object: Option<BoxBounds>,
}

impl Bounds {
    pub fn keyframe_object(&self) -> &BoxBounds {
        self.keyframe_object.as_ref().unwrap_or(&self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    /// Hinge location in the base link frame.
    pub anchor: Vec2,
    pub limits: [f64; 2],
}

/// One- or two-link object. The second link hangs off `joint.anchor` and is
/// rotated by the joint angle relative to the base link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub links: Vec<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<Joint>,
}

impl ObjectModel {
    pub fn rigid(shape: Shape) -> Self {
        ObjectModel { links: vec![shape], joint: None }
    }

    pub fn dims(&self) -> usize {
        if self.joint.is_some() {
            4
        } else {
            3
        }
    }

    fn link_poses(&self, c: &ObjectConfig) -> (Pose2, Option<Pose2>) {
        let base = c.pose;
        let second = self.joint.as_ref().map(|j| {
            let rel = Pose2::new(j.anchor.x, j.anchor.y, c.alpha.unwrap_or(0.0));
            base.compose(&rel)
        });
        (base, second)
    }

    pub fn place(&self, c: &ObjectConfig) -> Body {
        let (base, second) = self.link_poses(c);
        match second {
            None => self.links[0].place(&base),
            Some(p1) => {
                let mut b = self.links[0].place(&base);
                let b1 = self.links[1].place(&p1);
                b.parts.extend(b1.parts);
                b.aabb = b.aabb.union(&b1.aabb);
                b
            }
        }
    }

    /// World-frame mass center; link masses are proportional to link area.
    pub fn mass_center(&self, c: &ObjectConfig) -> Vec2 {
        let (base, second) = self.link_poses(c);
        let m0 = base.apply(self.links[0].mass_center());
        match second {
            None => m0,
            Some(p1) => {
                let (a0, a1) = (self.links[0].area(), self.links[1].area());
                let m1 = p1.apply(self.links[1].mass_center());
                (m0 * a0 + m1 * a1) * (1.0 / (a0 + a1))
            }
        }
    }

    /// Radius of the disk about the base origin that contains every link at
    /// any joint angle.
    pub fn circumradius(&self) -> f64 {
        let r0 = self.links[0].circumradius();
        match &self.joint {
            None => r0,
            Some(j) => r0.max(j.anchor.norm() + self.links[1].circumradius()),
        }
    }

    /// Metric weights per configuration coordinate: angles are scaled by
    /// the object's circumradius so they mix with translations.
    pub fn metric_weights(&self) -> Vec<f64> {
        let r = self.circumradius();
        let mut w = vec![1.0, 1.0, r];
        if self.joint.is_some() {
            // link 1 rotates about its own origin (the hinge)
            w.push(self.links[1].circumradius());
        }
        w
    }

    /// Weighted configuration distance with shortest-arc angular terms.
    pub fn config_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let w = self.metric_weights();
        let mut s = 0.0;
        for i in 0..a.len() {
            let d = if i == 2 { angle_diff(a[i], b[i]) } else { a[i] - b[i] };
            s += (d * w[i]).powi(2);
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCandidate {
    pub id: usize,
    pub name: String,
    pub shape: Shape,
    /// Fixed grasp frame on the tool, in the tool frame.
    pub grasp_offset: Pose2,
    /// Workspace of the robot (world frame) the grasp point must stay in.
    pub reachable_region: Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticBody {
    pub name: String,
    pub shape: Shape,
    pub pose: Pose2,
}

/// Planning horizon and timing for trajectory optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub duration: f64,
    pub tool_start: Pose2,
    /// Keyframe time as a fraction of the horizon.
    pub keyframe_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SimSpec {
    /// Coulomb-style resistance (N) opposing object sliding.
    #[serde(default)]
    pub friction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    #[serde(default)]
    name: String,
    object: ObjectModel,
    tools: Vec<ToolCandidate>,
    #[serde(default)]
    statics: Vec<StaticBody>,
    field: EnergyField,
    bounds: Bounds,
    start: ObjectConfig,
    goal: ObjectConfig,
    goal_tol: Vec<f64>,
    task: TaskSpec,
    #[serde(default)]
    sim: SimSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub name: String,
    pub object: ObjectModel,
    pub tools: Vec<ToolCandidate>,
    pub statics: Vec<StaticBody>,
    pub field: EnergyField,
    pub bounds: Bounds,
    pub start: ObjectConfig,
    pub goal: ObjectConfig,
    pub goal_tol: Vec<f64>,
    pub task: TaskSpec,
    pub sim: SimSpec,
    statics_body: Body,
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;
    fn try_from(f: SceneFile) -> Result<Self> {
        let mut s = Scene {
            name: f.name,
            object: f.object,
            tools: f.tools,
            statics: f.statics,
            field: f.field,
            bounds: f.bounds,
            start: f.start,
            goal: f.goal,
            goal_tol: f.goal_tol,
            task: f.task,
            sim: f.sim,
            statics_body: Body::from_parts(vec![]),
        };
        s.rebuild();
        s.validate()?;
        Ok(s)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> Self {
        SceneFile {
            name: s.name,
            object: s.object,
            tools: s.tools,
            statics: s.statics,
            field: s.field,
            bounds: s.bounds,
            start: s.start,
            goal: s.goal,
            goal_tol: s.goal_tol,
            task: s.task,
            sim: s.sim,
        }
    }
}

impl Scene {
    /// Assembles and validates a scene.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        name: &str,
        object: ObjectModel,
        tools: Vec<ToolCandidate>,
        statics: Vec<StaticBody>,
        field: EnergyField,
        bounds: Bounds,
        start: ObjectConfig,
        goal: ObjectConfig,
        goal_tol: Vec<f64>,
        task: TaskSpec,
        sim: SimSpec,
    ) -> Result<Scene> {
        Scene::try_from(SceneFile {
            name: name.to_string(),
            object,
            tools,
            statics,
            field,
            bounds,
            start,
            goal,
            goal_tol,
            task,
            sim,
        })
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Scene> {
        Scene::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Short content hash of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("scene serializes"));
        hex::encode(&digest[..8])
    }

    /// Re-derives cached placements after a field was mutated.
    pub fn rebuild(&mut self) {
        let bodies: Vec<Body> = self.statics.iter().map(|s| s.shape.place(&s.pose)).collect();
        self.statics_body = Body::merge(&bodies);
    }

    /// Checks every scene invariant and names the first violation.
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        if self.object.links.is_empty() || self.object.links.len() > 2 {
            return Err(Error::InvalidScene("object must have one or two links".into()));
        }
        if (self.object.links.len() == 2) != self.object.joint.is_some() {
            return Err(Error::InvalidScene("a joint is required exactly when the object has two links".into()));
        }
        if self.tools.is_empty() {
            return Err(Error::InvalidScene("at least one tool candidate is required".into()));
        }
        for (i, t) in self.tools.iter().enumerate() {
            if t.id != i {
                return Err(Error::InvalidScene(format!("tool ids must be dense 0..N-1 (tool {i} has id {})", t.id)));
            }
        }
        let d = self.object.dims();
        self.bounds.object.validate("object")?;
        self.bounds.tool.validate("tool")?;
        if self.bounds.object.dims() != d {
            return Err(Error::InvalidScene(format!("bounds.object must have {d} dims")));
        }
        if self.bounds.tool.dims() != 3 {
            return Err(Error::InvalidScene("bounds.tool must have 3 dims".into()));
        }
        if let Some(k) = &self.bounds.keyframe_object {
            k.validate("keyframe_object")?;
            if k.dims() != d {
                return Err(Error::InvalidScene(format!("bounds.keyframe_object must have {d} dims")));
            }
        }
        for (label, c) in [("start", &self.start), ("goal", &self.goal)] {
            if c.dims() != d {
                return Err(Error::InvalidScene(format!("{label} must have {d} coordinates")));
            }
            if !self.bounds.object.contains(&c.to_vec()) {
                return Err(Error::InvalidScene(format!("bounds must contain {label}")));
            }
            if let (Some(j), Some(a)) = (&self.object.joint, c.alpha) {
                if a < j.limits[0] || a > j.limits[1] {
                    return Err(Error::InvalidScene(format!("{label} joint angle outside joint limits")));
                }
            }
        }
        if self.goal_tol.len() != d {
            return Err(Error::InvalidScene(format!("goal_tol must have {d} entries")));
        }
        if self.object_collides_statics(&self.start) {
            return Err(Error::InvalidScene("start must be collision-free against statics".into()));
        }
        if !(self.task.duration > 0.0) || !(0.0..=1.0).contains(&self.task.keyframe_phase) {
            return Err(Error::InvalidScene("task.duration must be > 0 and keyframe_phase in [0,1]".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.object.dims()
    }

    pub fn tool(&self, id: usize) -> Result<&ToolCandidate> {
        self.tools.get(id).ok_or_else(|| Error::InvalidArgument(format!("unknown tool id {id}")))
    }

    pub fn statics_body(&self) -> &Body {
        &self.statics_body
    }

    pub fn place_object(&self, c: &ObjectConfig) -> Body {
        self.object.place(c)
    }

    pub fn place_tool(&self, tool_id: usize, pose: &Pose2) -> Body {
        self.tools[tool_id].shape.place(pose)
    }

    pub fn object_collides_statics(&self, c: &ObjectConfig) -> bool {
        self.place_object(c).collides(&self.statics_body)
    }

    pub fn in_bounds(&self, c: &ObjectConfig) -> bool {
        self.bounds.object.contains(&c.to_vec())
            && match (&self.object.joint, c.alpha) {
                (Some(j), Some(a)) => a >= j.limits[0] && a <= j.limits[1],
                (None, None) => true,
                _ => false,
            }
    }

    /// Energy without the bounds check; used in inner loops.
    pub fn energy_unchecked(&self, c: &ObjectConfig) -> f64 {
        self.energy_at(c, self.object.mass_center(c))
    }

    /// Energy given the already computed mass center of `c`.
    pub fn energy_at(&self, c: &ObjectConfig, mc: Vec2) -> f64 {
        let f = &self.field;
        let height = match f.plane() {
            Plane::Vertical => mc.y,
            Plane::Horizontal => f.table_height,
        };
        let mut e = f.m_obj * f.g * height;
        match f.kind {
            FieldKind::Gravity => {}
            FieldKind::GravityPush => e += f.f_p * f.v_hat.dot(c.pose.translation()),
            FieldKind::GravityElastic => {
                let a = c.alpha.unwrap_or(0.0);
                e += 0.5 * f.k * a * a;
            }
        }
        e
    }

    pub fn energy(&self, c: &ObjectConfig) -> Result<f64> {
        if c.dims() != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), got: c.dims() });
        }
        if !self.in_bounds(c) {
            return Err(Error::OutOfBounds(format!("{:?}", c.to_vec())));
        }
        Ok(self.energy_unchecked(c))
    }

    /// Object free against the tool and every static body.
    pub fn free(&self, c: &ObjectConfig, s_tool: &Pose2, tool_id: usize) -> bool {
        let obj = self.place_object(c);
        !obj.collides(&self.statics_body) && !obj.collides(&self.place_tool(tool_id, s_tool))
    }

    pub fn grasp_point(&self, s_tool: &Pose2, tool_id: usize) -> Vec2 {
        s_tool.compose(&self.tools[tool_id].grasp_offset).translation()
    }

    pub fn reachable(&self, s_tool: &Pose2, tool_id: usize) -> bool {
        self.tools[tool_id].reachable_region.contains(self.grasp_point(s_tool, tool_id))
    }

    /// Tool interpenetrating the static environment.
    pub fn tool_hits_statics(&self, s_tool: &Pose2, tool_id: usize) -> bool {
        self.place_tool(tool_id, s_tool).collides(&self.statics_body)
    }

    pub fn tool_aabb(&self, s_tool: &Pose2, tool_id: usize) -> Aabb {
        self.place_tool(tool_id, s_tool).aabb
    }
}
