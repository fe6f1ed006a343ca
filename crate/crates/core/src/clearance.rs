//! Partial caging clearance: the smallest tool dilation that closes every
//! escape, reported as Q_pcc = -eps_min.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::{grid_escape_exists, sampler_escape_exists, EscapeQuery, PlannerParams};

/// Connectivity backend used at each bisection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PccBackend {
    Grid(Vec<f64>),
    Sampler(PlannerParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PccParams {
    pub backend: PccBackend,
    pub bisect_tol: f64,
    pub max_iters: usize,
}

impl PccParams {
    pub fn grid(resolution: Vec<f64>) -> Self {
        PccParams { backend: PccBackend::Grid(resolution), bisect_tol: 1e-3, max_iters: 20 }
    }

    pub fn sampler(params: PlannerParams) -> Self {
        PccParams { backend: PccBackend::Sampler(params), bisect_tol: 1e-3, max_iters: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PccResult {
    pub q_pc: bool,
    #[serde(rename = "Q_pcc")]
    pub q_pcc: Option<f64>,
    pub epsilon_col: f64,
}

fn escapes(q: &EscapeQuery, p: &PccParams, eps: f64) -> Result<bool> {
    match &p.backend {
        PccBackend::Grid(res) => grid_escape_exists(q, res, eps),
        PccBackend::Sampler(sp) => sampler_escape_exists(q, sp, eps),
    }
}

/// Bisects the dilation over `[0, eps_col]`. Only the tool is dilated; the
/// start configuration itself is exempt from the dilated check so contact
/// at `eps_col` does not count as a cage.
pub fn compute_pcc(q: &EscapeQuery, params: &PccParams) -> Result<PccResult> {
    q.validate()?;
    if !(params.bisect_tol > 0.0) {
        return Err(Error::InvalidArgument("bisect_tol must be > 0".into()));
    }
    if !q.scene.free(&q.s_obj, &q.s_tool, q.tool_id) {
        return Err(Error::StartInCollision);
    }
    let obj = q.scene.place_object(&q.s_obj);
    let tool = q.scene.place_tool(q.tool_id, &q.s_tool);
    let epsilon_col = obj.distance(&tool).min(tool.distance(&obj));
    if !escapes(q, params, 0.0)? {
        return Ok(PccResult { q_pc: true, q_pcc: Some(0.0), epsilon_col });
    }
    if escapes(q, params, epsilon_col)? {
        return Ok(PccResult { q_pc: false, q_pcc: None, epsilon_col });
    }
    let (mut lo, mut hi) = (0.0, epsilon_col);
    for _ in 0..params.max_iters {
        if hi - lo <= params.bisect_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if escapes(q, params, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PccResult { q_pc: true, q_pcc: Some(-hi), epsilon_col })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::Pose2;
    use crate::scene::ObjectConfig;

    #[test]
    fn closed_ring_needs_no_dilation() {
        let s = fixtures::closed_ring();
        let q = EscapeQuery::new(&s, 0, Pose2::IDENTITY, s.start);
        let r = compute_pcc(&q, &PccParams::grid(vec![0.01, 0.01, 0.1])).unwrap();
        assert!(r.q_pc);
        assert_eq!(r.q_pcc, Some(0.0));
        assert!((r.epsilon_col - 0.08).abs() < 1e-9);
    }

    #[test]
    fn disk_in_open_space_is_not_partially_caged() {
        let s = fixtures::two_wall_cup();
        let q = EscapeQuery::new(&s, 1, Pose2::IDENTITY, ObjectConfig::new(0.0, 0.6, 0.0));
        let r = compute_pcc(&q, &PccParams::grid(vec![0.01, 0.01, 0.1])).unwrap();
        assert!(!r.q_pc);
        assert!(r.q_pcc.is_none());
        assert!(r.epsilon_col > 0.4);
    }

    #[test]
    fn colliding_start_is_an_error() {
        let s = fixtures::two_wall_cup();
        let q = EscapeQuery::new(&s, 0, Pose2::IDENTITY, ObjectConfig::new(0.0, 0.05, 0.0));
        assert!(matches!(compute_pcc(&q, &PccParams::grid(vec![0.01, 0.01, 0.1])), Err(Error::StartInCollision)));
    }
}
