//! Keyframe selection: jointly choose a tool and a tool/object
//! configuration pair that maximizes the unified robustness score while
//! staying collision-free and reachable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clearance::{compute_pcc, PccParams};
use crate::cmaes::{decode_tool, optimize_batch, CmaParams};
use crate::error::{Error, Result};
use crate::escape::{oracle_mee, EscapeQuery};
use crate::geometry::Pose2;
use crate::scene::{ObjectConfig, Scene};
use crate::surrogate::{unified_mee_score, unified_pcc_score, MetricKind, MlpModel, UnifiedParams};

/// Source of the robustness score.
#[derive(Debug, Clone)]
pub enum Metric {
    /// One trained model per tool, indexed by tool id.
    Surrogate(Vec<MlpModel>),
    /// Grid oracle at the given resolution.
    Oracle { kind: MetricKind, grid: Vec<f64> },
}

impl Metric {
    pub fn kind(&self) -> Result<MetricKind> {
        match self {
            Metric::Surrogate(m) => {
                let k = m.first().ok_or_else(|| Error::Model("no surrogate models".into()))?.metric_kind;
                if m.iter().any(|x| x.metric_kind != k) {
                    return Err(Error::Model("surrogate models predict different metrics".into()));
                }
                Ok(k)
            }
            Metric::Oracle { kind, .. } => Ok(*kind),
        }
    }

    fn check(&self, scene: &Scene) -> Result<()> {
        self.kind()?;
        match self {
            Metric::Surrogate(m) => {
                if m.len() != scene.tools.len() {
                    return Err(Error::Model(format!("{} models for {} tools", m.len(), scene.tools.len())));
                }
                for (i, model) in m.iter().enumerate() {
                    if model.tool_id != i {
                        return Err(Error::Model(format!("model {i} was trained for tool {}", model.tool_id)));
                    }
                    if !model.scene_hash.is_empty() && model.scene_hash != scene.hash() {
                        log::warn!("model for tool {i} was trained on a different scene");
                    }
                }
            }
            Metric::Oracle { grid, .. } => {
                if grid.len() != scene.dims() {
                    return Err(Error::DimensionMismatch { expected: scene.dims(), got: grid.len() });
                }
            }
        }
        Ok(())
    }

    /// Unified scores of feasible configurations, in order.
    pub fn score_batch(&self, scene: &Scene, u: &UnifiedParams, items: &[(usize, Pose2, ObjectConfig)]) -> Vec<f64> {
        match self {
            Metric::Surrogate(models) => {
                let mut out = vec![f64::NAN; items.len()];
                for (tool, model) in models.iter().enumerate() {
                    let idx: Vec<usize> = (0..items.len()).filter(|&i| items[i].0 == tool).collect();
                    if idx.is_empty() {
                        continue;
                    }
                    let pairs: Vec<(ObjectConfig, Pose2)> = idx.iter().map(|&i| (items[i].2, items[i].1)).collect();
                    if let Ok(pred) = model.forward_batch(&pairs) {
                        for (&i, (q, v)) in idx.iter().zip(pred) {
                            out[i] = match model.metric_kind {
                                MetricKind::Mee => unified_mee_score(q, v, u),
                                MetricKind::Pcc => unified_pcc_score(q, v, u),
                            };
                        }
                    }
                }
                out
            }
            Metric::Oracle { kind, grid } => items
                .par_iter()
                .map(|(tool, t, o)| oracle_score(scene, *kind, grid, u, *tool, *t, *o).unwrap_or(f64::NAN))
                .collect(),
        }
    }
}

/// Unified score computed with the grid oracle.
pub fn oracle_score(
    scene: &Scene,
    kind: MetricKind,
    grid: &[f64],
    u: &UnifiedParams,
    tool_id: usize,
    s_tool: Pose2,
    s_obj: ObjectConfig,
) -> Result<f64> {
    let q = EscapeQuery::new(scene, tool_id, s_tool, s_obj);
    match kind {
        MetricKind::Mee => {
            let r = oracle_mee(&q, grid)?;
            Ok(match r.q_mee {
                None => u.q_max,
                Some(v) => v,
            })
        }
        MetricKind::Pcc => {
            let r = compute_pcc(&q, &PccParams::grid(grid.to_vec()))?;
            Ok(match r.q_pcc {
                Some(v) => u.q_max_pcc + v,
                None => 0.0,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct KeyframeProblem<'a> {
    pub scene: &'a Scene,
    pub metric: Metric,
    pub unified: UnifiedParams,
    /// Keyframe step index, passed through to trajectory planning.
    pub t_k: usize,
    /// Restrict the search to one tool.
    pub tool: Option<usize>,
}

/// Why candidates were rejected during a solve.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub collision: usize,
    pub unreachable: usize,
    pub tool_static: usize,
    pub out_of_bounds: usize,
    pub metric_error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeSolution {
    pub tool_id: usize,
    pub tool_name: String,
    pub s_tool: Pose2,
    pub s_obj: ObjectConfig,
    pub score: f64,
    pub feasible: bool,
    pub t_k: usize,
    pub metric: MetricKind,
    pub evaluations: usize,
    pub violations: Violations,
    /// Best score so far per generation.
    pub history: Vec<f64>,
}

impl KeyframeSolution {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<KeyframeSolution> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Decision vector layout: tool segment, tool pose (normalized to
/// `bounds.tool`), object configuration (normalized to the keyframe box).
pub fn decode(scene: &Scene, x: &[f64]) -> (usize, Pose2, ObjectConfig) {
    let tool = decode_tool(x[0], scene.tools.len());
    let t = scene.bounds.tool.denormalize(&x[1..4]);
    let o = scene.bounds.keyframe_object().denormalize(&x[4..]);
    (tool, Pose2::new(t[0], t[1], t[2]), ObjectConfig::from_slice(&o).expect("keyframe bounds match scene dims"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Check {
    Ok,
    Collision,
    Unreachable,
    ToolStatic,
    OutOfBounds,
}

fn check(scene: &Scene, tool: usize, t: &Pose2, o: &ObjectConfig) -> Check {
    if !scene.in_bounds(o) {
        Check::OutOfBounds
    } else if !scene.reachable(t, tool) {
        Check::Unreachable
    } else if scene.tool_hits_statics(t, tool) {
        Check::ToolStatic
    } else if !scene.free(o, t, tool) {
        Check::Collision
    } else {
        Check::Ok
    }
}

/// True when the configuration satisfies every keyframe constraint.
pub fn feasible(scene: &Scene, tool: usize, t: &Pose2, o: &ObjectConfig) -> bool {
    check(scene, tool, t, o) == Check::Ok
}

pub fn solve_keyframe(p: &KeyframeProblem, cma: &CmaParams) -> Result<KeyframeSolution> {
    let scene = p.scene;
    p.metric.check(scene)?;
    p.unified.validate()?;
    let kind = p.metric.kind()?;
    let d = 1 + 3 + scene.dims();
    let mut v = Violations::default();
    let mut best: Option<(f64, usize, Pose2, ObjectConfig)> = None;

    if let Some(t) = p.tool {
        scene.tool(t)?;
    }
    let objective = |xs: &[Vec<f64>]| -> Vec<f64> {
        let decoded: Vec<(usize, Pose2, ObjectConfig)> = xs
            .iter()
            .map(|x| {
                let (k, t, o) = decode(scene, x);
                (p.tool.unwrap_or(k), t, o)
            })
            .collect();
        let checks: Vec<Check> = decoded.par_iter().map(|(k, t, o)| check(scene, *k, t, o)).collect();
        let ok: Vec<(usize, Pose2, ObjectConfig)> =
            decoded.iter().zip(&checks).filter(|(_, c)| **c == Check::Ok).map(|(x, _)| *x).collect();
        let scores = p.metric.score_batch(scene, &p.unified, &ok);
        let mut it = scores.into_iter();
        let mut out = Vec::with_capacity(xs.len());
        for (x, c) in decoded.iter().zip(&checks) {
            let f = match c {
                Check::Ok => {
                    let s = it.next().expect("one score per feasible candidate");
                    if s.is_finite() {
                        if best.as_ref().is_none_or(|b| s > b.0) {
                            best = Some((s, x.0, x.1, x.2));
                        }
                        -s
                    } else {
                        v.metric_error += 1;
                        f64::INFINITY
                    }
                }
                Check::Collision => {
                    v.collision += 1;
                    f64::INFINITY
                }
                Check::Unreachable => {
                    v.unreachable += 1;
                    f64::INFINITY
                }
                Check::ToolStatic => {
                    v.tool_static += 1;
                    f64::INFINITY
                }
                Check::OutOfBounds => {
                    v.out_of_bounds += 1;
                    f64::INFINITY
                }
            };
            out.push(f);
        }
        out
    };

    let res = match optimize_batch(objective, d, cma) {
        Ok(r) => Some(r),
        Err(Error::Infeasible(_)) => None,
        Err(e) => return Err(e),
    };
    let evaluations = res.as_ref().map_or(cma.lambda, |r| r.evaluations);
    let history: Vec<f64> = res.map(|r| r.history.iter().map(|f| -f).collect()).unwrap_or_default();
    match best {
        Some((score, tool, t, o)) => {
            // re-validate independently of the optimizer bookkeeping
            let ok = feasible(scene, tool, &t, &o);
            Ok(KeyframeSolution {
                tool_id: tool,
                tool_name: scene.tools[tool].name.clone(),
                s_tool: t,
                s_obj: o,
                score,
                feasible: ok,
                t_k: p.t_k,
                metric: kind,
                evaluations,
                violations: v,
                history,
            })
        }
        None => {
            log::warn!("no feasible keyframe candidate: {v:?}");
            let tool = p.tool.unwrap_or(0);
            Ok(KeyframeSolution {
                tool_id: tool,
                tool_name: scene.tools[tool].name.clone(),
                s_tool: scene.task.tool_start,
                s_obj: scene.start,
                score: 0.0,
                feasible: false,
                t_k: p.t_k,
                metric: kind,
                evaluations,
                violations: v,
                history,
            })
        }
    }
}
