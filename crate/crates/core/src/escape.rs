//! Minimum escape energy: the least energy above the current level that an
//! object must reach on some collision-free path leaving the tool's vicinity.
//!
//! Two searches share one collision world: an exact bottleneck Dijkstra on a
//! uniform grid and an anytime batch-sampling roadmap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Aabb, Body, ConvexPart, Pose2, Vec2};
use crate::rng::{stream_rng, streams};
use crate::scene::{ObjectConfig, Scene};

/// Largest grid the oracle will allocate.
pub const MAX_GRID_NODES: u128 = 100_000_000;

#[derive(Debug, Clone)]
pub struct EscapeQuery<'a> {
    pub scene: &'a Scene,
    pub tool_id: usize,
    pub s_tool: Pose2,
    pub s_obj: ObjectConfig,
    /// Inflation of the tool's bounding box that defines the escape region.
    pub escape_margin: f64,
}

impl<'a> EscapeQuery<'a> {
    /// Query with the default margin of twice the object circumradius.
    pub fn new(scene: &'a Scene, tool_id: usize, s_tool: Pose2, s_obj: ObjectConfig) -> Self {
        let escape_margin = 2.0 * scene.object.circumradius();
        EscapeQuery { scene, tool_id, s_tool, s_obj, escape_margin }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.escape_margin = margin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.tool(self.tool_id)?;
        if !(self.escape_margin > 0.0 && self.escape_margin.is_finite()) {
            return Err(Error::InvalidArgument(format!("escape_margin must be > 0, got {}", self.escape_margin)));
        }
        if self.s_obj.dims() != self.scene.dims() {
            return Err(Error::DimensionMismatch { expected: self.scene.dims(), got: self.s_obj.dims() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeResult {
    pub q_c: bool,
    #[serde(rename = "Q_mee")]
    pub q_mee: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<ObjectConfig>>,
    /// Best Q_mee after each sampler batch (`None` while no escape is known).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<Option<f64>>,
}

impl EscapeResult {
    fn caged(history: Vec<Option<f64>>) -> Self {
        EscapeResult { q_c: true, q_mee: None, path: None, history }
    }

    /// Q_mee with complete cages mapped to +inf.
    pub fn value(&self) -> f64 {
        self.q_mee.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub batch_size: usize,
    pub max_batches: usize,
    pub neighbor_k: usize,
    /// Spacing of collision checks along roadmap edges, in the weighted
    /// configuration metric (meters).
    pub edge_resolution: f64,
    pub rng_seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams { batch_size: 200, max_batches: 10, neighbor_k: 15, edge_resolution: 0.01, rng_seed: 0 }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_batches == 0 || self.neighbor_k == 0 {
            return Err(Error::InvalidArgument("planner counts must be >= 1".into()));
        }
        if !(self.edge_resolution > 0.0 && self.edge_resolution.is_finite()) {
            return Err(Error::InvalidArgument("edge_resolution must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cell {
    Blocked,
    Free,
    Exit,
}

/// Collision world for one query, optionally with the tool dilated.
pub(crate) struct World<'a> {
    pub scene: &'a Scene,
    tool: Body,
    exit_box: Aabb,
    exit_body: Body,
    dilation: f64,
}

impl<'a> World<'a> {
    pub fn new(q: &EscapeQuery<'a>, dilation: f64) -> Self {
        let tool = q.scene.place_tool(q.tool_id, &q.s_tool);
        let exit_box = tool.aabb.inflate(q.escape_margin);
        let corners = vec![
            exit_box.min,
            Vec2::new(exit_box.max.x, exit_box.min.y),
            exit_box.max,
            Vec2::new(exit_box.min.x, exit_box.max.y),
        ];
        let exit_body = Body::from_parts(vec![ConvexPart::new(corners)]);
        World { scene: q.scene, tool, exit_box, exit_body, dilation }
    }

    fn blocked(&self, b: &Body) -> bool {
        b.collides(self.scene.statics_body()) || b.collides_dilated(&self.tool, self.dilation)
    }

    /// Footprint strictly outside the inflated tool box (touching is inside).
    fn outside(&self, b: &Body) -> bool {
        b.aabb.gap(&self.exit_box) > 0.0 || b.distance_below(&self.exit_body, f64::MIN_POSITIVE) > 0.0
    }

    pub fn in_exit_set(&self, c: &ObjectConfig) -> bool {
        self.scene.in_bounds(c) && self.outside(&self.scene.place_object(c))
    }

    pub fn classify(&self, c: &ObjectConfig) -> Cell {
        let b = self.scene.place_object(c);
        if self.blocked(&b) {
            Cell::Blocked
        } else if self.scene.in_bounds(c) && self.outside(&b) {
            Cell::Exit
        } else {
            Cell::Free
        }
    }

    /// Translation still needed to leave the escape box; search tie-breaker.
    fn exit_hint(&self, c: &ObjectConfig) -> f64 {
        let r = self.scene.object.circumradius();
        let (p, b) = (c.pose.translation(), &self.exit_box);
        let dx = (b.max.x + r - p.x).min(p.x - b.min.x + r);
        let dy = (b.max.y + r - p.y).min(p.y - b.min.y + r);
        dx.min(dy).max(0.0)
    }
}

/// Predicate for the escape region of a query.
pub struct EscapeSet<'a> {
    world: World<'a>,
}

impl EscapeSet<'_> {
    pub fn contains(&self, c: &ObjectConfig) -> bool {
        self.world.in_exit_set(c)
    }
}

pub fn escape_set<'a>(q: &EscapeQuery<'a>) -> EscapeSet<'a> {
    EscapeSet { world: World::new(q, 0.0) }
}

/// Per-coordinate limits combining the object box and joint limits.
fn config_limits(scene: &Scene) -> (Vec<f64>, Vec<f64>) {
    let b = &scene.bounds.object;
    let (mut lo, mut hi) = (b.lo.clone(), b.hi.clone());
    if let Some(j) = &scene.object.joint {
        lo[3] = lo[3].max(j.limits[0]);
        hi[3] = hi[3].min(j.limits[1]);
    }
    (lo, hi)
}

#[derive(Debug, PartialEq)]
struct Entry {
    level: f64,
    hint: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        o.level.total_cmp(&self.level).then_with(|| o.hint.total_cmp(&self.hint)).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Uniform grid anchored at the start configuration.
struct Grid {
    start: Vec<f64>,
    step: Vec<f64>,
    lo_idx: Vec<i64>,
    n: Vec<usize>,
    wrap: Vec<bool>,
    stride: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Grid {
    fn new(scene: &Scene, start: &ObjectConfig, res: &[f64]) -> Result<Grid> {
        let dims = scene.dims();
        if res.len() != dims {
            return Err(Error::DimensionMismatch { expected: dims, got: res.len() });
        }
        if res.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("grid resolution must be > 0".into()));
        }
        let (lo, hi) = config_limits(scene);
        let s = start.to_vec();
        let mut g = Grid {
            start: s.clone(),
            step: vec![0.0; dims],
            lo_idx: vec![0; dims],
            n: vec![0; dims],
            wrap: vec![false; dims],
            stride: vec![0; dims],
            lo: lo.clone(),
            hi: hi.clone(),
        };
        let mut total: u128 = 1;
        for i in 0..dims {
            if i == 2 && scene.bounds.object.wraps(2) {
                let n = ((2.0 * PI / res[i]).round() as usize).max(3);
                g.step[i] = 2.0 * PI / n as f64;
                g.n[i] = n;
                g.wrap[i] = true;
            } else {
                let a = ((lo[i] - s[i]) / res[i] - 1e-9).ceil() as i64;
                let b = ((hi[i] - s[i]) / res[i] + 1e-9).floor() as i64;
                g.step[i] = res[i];
                g.lo_idx[i] = a;
                g.n[i] = (b - a + 1).max(1) as usize;
            }
            total = total.saturating_mul(g.n[i] as u128);
        }
        if total > MAX_GRID_NODES {
            return Err(Error::GridTooLarge(total));
        }
        let mut acc = 1;
        for i in 0..dims {
            g.stride[i] = acc;
            acc *= g.n[i];
        }
        Ok(g)
    }

    fn start_index(&self) -> usize {
        (0..self.n.len()).map(|i| if self.wrap[i] { 0 } else { (-self.lo_idx[i]) as usize * self.stride[i] }).sum()
    }

    fn cell(&self, node: usize, i: usize) -> usize {
        (node / self.stride[i]) % self.n[i]
    }

    fn config(&self, node: usize) -> ObjectConfig {
        let v: Vec<f64> = (0..self.n.len())
            .map(|i| {
                let k = self.cell(node, i);
                if self.wrap[i] {
                    wrap_angle(self.start[i] + k as f64 * self.step[i])
                } else {
                    let x = self.start[i] + (self.lo_idx[i] + k as i64) as f64 * self.step[i];
                    x.clamp(self.lo[i], self.hi[i])
                }
            })
            .collect();
        ObjectConfig::from_slice(&v).expect("grid dims")
    }

    fn neighbors(&self, node: usize, out: &mut Vec<usize>) {
        out.clear();
        for i in 0..self.n.len() {
            let (k, n, st) = (self.cell(node, i), self.n[i], self.stride[i]);
            if k + 1 < n {
                out.push(node + st);
            } else if self.wrap[i] {
                out.push(node + st - n * st);
            }
            if k > 0 {
                out.push(node - st);
            } else if self.wrap[i] {
                out.push(node + (n - 1) * st);
            }
        }
    }
}

struct GridNode {
    cell: Cell,
    energy: f64,
    level: f64,
    parent: usize,
    closed: bool,
}

/// Bottleneck search on the grid. Returns the escape level and node path.
/// Without energy, levels are all zero and the search is a greedy
/// best-first connectivity test.
fn grid_search(world: &World, grid: &Grid, use_energy: bool, exempt_start: bool) -> Result<Option<(f64, Vec<usize>)>> {
    let scene = world.scene;
    let s = grid.start_index();
    let sc = grid.config(s);
    let mut cell = world.classify(&sc);
    if cell == Cell::Blocked {
        if !exempt_start {
            return Err(Error::StartInCollision);
        }
        cell = Cell::Free;
    }
    let energy = |c: &ObjectConfig| if use_energy { scene.energy_unchecked(c) } else { 0.0 };
    let e0 = energy(&sc);
    let mut nodes: FxHashMap<usize, GridNode> = FxHashMap::default();
    nodes.insert(s, GridNode { cell, energy: e0, level: e0, parent: usize::MAX, closed: false });
    let mut heap = BinaryHeap::new();
    heap.push(Entry { level: e0, hint: world.exit_hint(&sc), node: s });
    let mut nb = Vec::with_capacity(8);
    while let Some(Entry { level, node, .. }) = heap.pop() {
        let cur = nodes.get_mut(&node).expect("pushed node exists");
        if cur.closed || level > cur.level {
            continue;
        }
        cur.closed = true;
        if cur.cell == Cell::Exit {
            let mut path = vec![node];
            let mut p = cur.parent;
            while p != usize::MAX {
                path.push(p);
                p = nodes[&p].parent;
            }
            path.reverse();
            return Ok(Some((level, path)));
        }
        grid.neighbors(node, &mut nb);
        for &m in &nb {
            let entry = nodes.entry(m).or_insert_with(|| {
                let c = grid.config(m);
                let cell = world.classify(&c);
                let e = if cell == Cell::Blocked { f64::INFINITY } else { energy(&c) };
                GridNode { cell, energy: e, level: f64::INFINITY, parent: usize::MAX, closed: false }
            });
            if entry.closed || entry.cell == Cell::Blocked {
                continue;
            }
            let l = level.max(entry.energy);
            if l < entry.level {
                entry.level = l;
                entry.parent = node;
                let c = grid.config(m);
                heap.push(Entry { level: l, hint: world.exit_hint(&c), node: m });
            }
        }
    }
    Ok(None)
}

/// Exact minimum escape energy on a uniform grid (6- or 8-connected for 3
/// or 4 coordinates), anchored at the start configuration.
pub fn oracle_mee(q: &EscapeQuery, resolution: &[f64]) -> Result<EscapeResult> {
    q.validate()?;
    let world = World::new(q, 0.0);
    let grid = Grid::new(q.scene, &q.s_obj, resolution)?;
    let e0 = q.scene.energy_unchecked(&q.s_obj);
    Ok(match grid_search(&world, &grid, true, false)? {
        None => EscapeResult::caged(vec![]),
        Some((level, path)) => EscapeResult {
            q_c: false,
            q_mee: Some((level - e0).max(0.0)),
            path: Some(path.into_iter().map(|n| grid.config(n)).collect()),
            history: vec![],
        },
    })
}

/// Connectivity test at tool dilation `eps` on the grid (start exempt from
/// the dilated check).
pub(crate) fn grid_escape_exists(q: &EscapeQuery, resolution: &[f64], eps: f64) -> Result<bool> {
    let world = World::new(q, eps);
    let grid = Grid::new(q.scene, &q.s_obj, resolution)?;
    Ok(grid_search(&world, &grid, false, true)?.is_some())
}

struct RoadNode {
    v: Vec<f64>,
    energy: f64,
    exit: bool,
}

/// Incrementally grown roadmap with lazily validated edges.
struct Roadmap<'w, 'a> {
    world: &'w World<'a>,
    weights: Vec<f64>,
    wrap_theta: bool,
    resolution: f64,
    use_energy: bool,
    nodes: Vec<RoadNode>,
    edges: FxHashMap<(usize, usize), Option<f64>>,
}

impl Roadmap<'_, '_> {
    fn diff(&self, a: &[f64], b: &[f64], i: usize) -> f64 {
        if i == 2 && self.wrap_theta {
            wrap_angle(b[i] - a[i])
        } else {
            b[i] - a[i]
        }
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..a.len()).map(|i| (self.diff(a, b, i) * self.weights[i]).powi(2)).sum::<f64>().sqrt()
    }

    fn energy(&self, c: &ObjectConfig) -> f64 {
        if self.use_energy {
            self.world.scene.energy_unchecked(c)
        } else {
            0.0
        }
    }

    /// Peak energy along the straight edge, or `None` if it collides.
    fn edge(&mut self, a: usize, b: usize) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        if let Some(r) = self.edges.get(&key) {
            return *r;
        }
        let (va, vb) = (&self.nodes[key.0].v, &self.nodes[key.1].v);
        let steps = (self.dist(va, vb) / self.resolution).ceil().max(1.0) as usize;
        let mut peak = self.nodes[a].energy.max(self.nodes[b].energy);
        let mut ok = true;
        let mut v = va.clone();
        for s in 1..steps {
            let t = s as f64 / steps as f64;
            for i in 0..v.len() {
                v[i] = va[i] + t * self.diff(va, vb, i);
            }
            if v.len() > 2 {
                v[2] = wrap_angle(v[2]);
            }
            let c = ObjectConfig::from_slice(&v).expect("roadmap dims");
            if self.world.classify(&c) == Cell::Blocked {
                ok = false;
                break;
            }
            peak = peak.max(self.energy(&c));
        }
        let r = ok.then_some(peak);
        self.edges.insert(key, r);
        r
    }

    fn knn(&self, k: usize) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let near: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut d: Vec<(f64, usize)> =
                    (0..n).filter(|&j| j != i).map(|j| (self.dist(&self.nodes[i].v, &self.nodes[j].v), j)).collect();
                let kk = k.min(d.len());
                if kk < d.len() {
                    d.select_nth_unstable_by(kk, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    d.truncate(kk);
                }
                d.into_iter().map(|(_, j)| j).collect()
            })
            .collect();
        let mut adj = vec![Vec::new(); n];
        for (i, list) in near.iter().enumerate() {
            for &j in list {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        // direct connection attempts from the start to the lowest exits
        let mut exits: Vec<usize> = (1..n).filter(|&i| self.nodes[i].exit).collect();
        exits.sort_by(|&a, &b| self.nodes[a].energy.total_cmp(&self.nodes[b].energy).then(a.cmp(&b)));
        for &j in exits.iter().take(k) {
            adj[0].push(j);
            adj[j].push(0);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Bottleneck search from node 0 to any exit node.
    fn search(&mut self, adj: &[Vec<usize>]) -> Option<(f64, Vec<usize>)> {
        let n = self.nodes.len();
        let mut level = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        level[0] = self.nodes[0].energy;
        let mut heap = BinaryHeap::new();
        heap.push(Entry { level: level[0], hint: 0.0, node: 0 });
        while let Some(Entry { level: l, node: u, .. }) = heap.pop() {
            if closed[u] || l > level[u] {
                continue;
            }
            closed[u] = true;
            if self.nodes[u].exit {
                let mut path = vec![u];
                while parent[*path.last().unwrap()] != usize::MAX {
                    path.push(parent[*path.last().unwrap()]);
                }
                path.reverse();
                return Some((l, path));
            }
            for &w in &adj[u] {
                if closed[w] || l.max(self.nodes[w].energy) >= level[w] {
                    continue;
                }
                if let Some(peak) = self.edge(u, w) {
                    let lw = l.max(peak);
                    if lw < level[w] {
                        level[w] = lw;
                        parent[w] = u;
                        heap.push(Entry { level: lw, hint: 0.0, node: w });
                    }
                }
            }
        }
        None
    }
}

/// Outcome of a sampler run: best level, its waypoints, and per-batch levels.
type SamplerOutcome = (Option<(f64, Vec<ObjectConfig>)>, Vec<Option<f64>>);

fn sampler_run(
    world: &World,
    start: &ObjectConfig,
    params: &PlannerParams,
    use_energy: bool,
    exempt_start: bool,
) -> Result<SamplerOutcome> {
    params.validate()?;
    let scene = world.scene;
    let mut start_cell = world.classify(start);
    if start_cell == Cell::Blocked {
        if !exempt_start {
            return Err(Error::StartInCollision);
        }
        start_cell = Cell::Free;
    }
    let mut map = Roadmap {
        world,
        weights: scene.object.metric_weights(),
        wrap_theta: scene.bounds.object.wraps(2),
        resolution: params.edge_resolution,
        use_energy,
        nodes: Vec::new(),
        edges: FxHashMap::default(),
    };
    let e0 = map.energy(start);
    map.nodes.push(RoadNode { v: start.to_vec(), energy: e0, exit: start_cell == Cell::Exit });
    if start_cell == Cell::Exit {
        return Ok((Some((e0, vec![*start])), vec![Some(e0)]));
    }

    let (lo, hi) = config_limits(scene);
    let mut rng = stream_rng(params.rng_seed, streams::SAMPLER, 0);
    let mut best: Option<(f64, Vec<ObjectConfig>)> = None;
    let mut history = Vec::with_capacity(params.max_batches);
    let attempt_cap = params.batch_size * 50;
    for _ in 0..params.max_batches {
        let bound = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < params.batch_size && attempts < attempt_cap {
            let chunk: Vec<Vec<f64>> = (0..params.batch_size)
                .map(|_| lo.iter().zip(&hi).map(|(l, h)| l + rng.random::<f64>() * (h - l)).collect())
                .collect();
            attempts += chunk.len();
            let labeled: Vec<(Vec<f64>, Cell, f64)> = chunk
                .into_par_iter()
                .map(|v| {
                    let c = ObjectConfig::from_slice(&v).expect("sample dims");
                    let cell = world.classify(&c);
                    let e = if cell == Cell::Blocked { f64::INFINITY } else { map.energy(&c) };
                    (c.to_vec(), cell, e)
                })
                .collect();
            for (v, cell, e) in labeled {
                if accepted == params.batch_size {
                    break;
                }
                // informed pruning: nodes at or above the best level cannot
                // lower it
                if cell == Cell::Blocked || e >= bound {
                    continue;
                }
                map.nodes.push(RoadNode { v, energy: e, exit: cell == Cell::Exit });
                accepted += 1;
            }
        }
        let adj = map.knn(params.neighbor_k);
        if let Some((level, path)) = map.search(&adj) {
            if best.as_ref().is_none_or(|b| level < b.0) {
                let pts =
                    path.iter().map(|&i| ObjectConfig::from_slice(&map.nodes[i].v).expect("roadmap dims")).collect();
                best = Some((level, pts));
            }
        }
        history.push(best.as_ref().map(|b| b.0));
        if best.as_ref().is_some_and(|b| b.0 <= e0 || !use_energy) {
            break;
        }
    }
    Ok((best, history))
}

/// Anytime upper bound on the minimum escape energy from a batch-sampled
/// roadmap. `q_c` here means "no escape found within budget". Values within
/// the edge-check slack (`force_scale * edge_resolution`) are reported as 0.
pub fn estimate_mee(q: &EscapeQuery, params: &PlannerParams) -> Result<EscapeResult> {
    q.validate()?;
    let world = World::new(q, 0.0);
    let e0 = q.scene.energy_unchecked(&q.s_obj);
    let (best, history) = sampler_run(&world, &q.s_obj, params, true, false)?;
    // the roadmap cannot resolve energy below what one edge check spans
    let slack = q.scene.field.force_scale() * params.edge_resolution;
    let snap = |level: f64| {
        let v = level - e0;
        if v <= slack {
            0.0
        } else {
            v
        }
    };
    let history = history.into_iter().map(|h| h.map(snap)).collect();
    Ok(match best {
        None => EscapeResult::caged(history),
        Some((level, path)) => EscapeResult { q_c: false, q_mee: Some(snap(level)), path: Some(path), history },
    })
}

/// Connectivity test at tool dilation `eps` on a sampled roadmap.
pub(crate) fn sampler_escape_exists(q: &EscapeQuery, params: &PlannerParams, eps: f64) -> Result<bool> {
    let world = World::new(q, eps);
    Ok(sampler_run(&world, &q.s_obj, params, false, true)?.0.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn escape_set_boundary_is_inside() {
        let s = fixtures::open_floor();
        let tool = fixtures::open_floor_tool_pose();
        let q = EscapeQuery::new(&s, 0, tool, s.start).with_margin(0.05);
        let world = World::new(&q, 0.0);
        let x0 = world.exit_box.max.x;
        let square = |x: f64| {
            Body::from_parts(vec![ConvexPart::new(vec![
                Vec2::new(x, 0.0),
                Vec2::new(x + 0.1, 0.0),
                Vec2::new(x + 0.1, 0.05),
                Vec2::new(x, 0.05),
            ])])
        };
        assert!(!world.outside(&square(x0)));
        assert!(world.outside(&square(x0 + 1e-9)));
        assert!(!world.outside(&square(x0 - 1e-9)));
        let set = escape_set(&q);
        assert!(set.contains(&ObjectConfig::new(0.8, 0.1, 0.0)));
        assert!(!set.contains(&ObjectConfig::new(0.35, 0.12, 0.0)));
    }

    #[test]
    fn far_object_escapes_trivially() {
        let s = fixtures::open_floor();
        let q = EscapeQuery::new(&s, 0, Pose2::new(-0.4, 0.01, 0.0), ObjectConfig::new(0.8, 0.1, 0.0));
        let r = oracle_mee(&q, &[0.02, 0.02, 0.2]).unwrap();
        assert_eq!(r.q_mee, Some(0.0));
        assert_eq!(r.path.unwrap().len(), 1);
    }

    #[test]
    fn grid_neighbors_wrap_theta() {
        let s = fixtures::closed_ring();
        let g = Grid::new(&s, &s.start, &[0.1, 0.1, PI / 4.0]).unwrap();
        assert_eq!(g.n[2], 8);
        let st = g.start_index();
        let mut nb = Vec::new();
        g.neighbors(st, &mut nb);
        assert_eq!(nb.len(), 6);
        let thetas: Vec<f64> = nb.iter().map(|&n| g.config(n).pose.theta).collect();
        assert!(thetas.iter().any(|t| (t + PI / 4.0).abs() < 1e-12));
    }

    #[test]
    fn grid_too_large_is_rejected() {
        let s = fixtures::u_cup();
        let q = EscapeQuery::new(&s, 0, fixtures::u_cup_tool_pose(), s.start);
        assert!(matches!(oracle_mee(&q, &[1e-4, 1e-4, 1e-3]), Err(Error::GridTooLarge(_))));
    }

    #[test]
    fn colliding_start_is_an_error() {
        let s = fixtures::u_cup();
        let q = EscapeQuery::new(&s, 0, fixtures::u_cup_tool_pose(), ObjectConfig::new(0.19, 0.1, 0.0));
        assert!(matches!(oracle_mee(&q, &[0.01, 0.01, 0.1]), Err(Error::StartInCollision)));
        assert!(matches!(estimate_mee(&q, &PlannerParams::default()), Err(Error::StartInCollision)));
    }
}
