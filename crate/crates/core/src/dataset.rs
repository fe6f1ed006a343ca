//! Labeled robustness datasets: random collision-free tool/object
//! configurations with escape-energy and clearance labels.

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clearance::{compute_pcc, PccBackend, PccParams};
use crate::error::{Error, Result};
use crate::escape::{estimate_mee, oracle_mee, EscapeQuery, EscapeResult, PlannerParams};
use crate::geometry::Pose2;
use crate::rng::{derive, stream_rng, streams};
use crate::scene::{BoxBounds, ObjectConfig, Scene};

pub const DEFAULT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tool_id: usize,
    pub s_tool: Pose2,
    pub s_obj: ObjectConfig,
    pub q_c: bool,
    #[serde(rename = "Q_mee")]
    pub q_mee: Option<f64>,
    pub q_pc: bool,
    #[serde(rename = "Q_pcc")]
    pub q_pcc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub scene_hash: String,
    pub seed: u64,
    pub tool_id: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

/// How escape-energy labels are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeeLabeler {
    Sampler(PlannerParams),
    Oracle(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelParams {
    pub mee: MeeLabeler,
    pub pcc: PccParams,
}

impl LabelParams {
    /// Sampler labels for MEE and a coarse grid for PCC.
    pub fn new(scene: &Scene) -> Self {
        LabelParams { mee: MeeLabeler::Sampler(PlannerParams::default()), pcc: PccParams::grid(coarse_grid(scene)) }
    }

    pub fn oracle(scene: &Scene) -> Self {
        LabelParams { mee: MeeLabeler::Oracle(default_grid(scene)), pcc: PccParams::grid(coarse_grid(scene)) }
    }
}

/// Default oracle grid: 1 cm translations, 0.05 rad angles.
pub fn default_grid(scene: &Scene) -> Vec<f64> {
    let mut g = vec![0.01, 0.01, 0.05];
    if scene.dims() == 4 {
        g.push(0.1);
    }
    g
}

pub fn coarse_grid(scene: &Scene) -> Vec<f64> {
    let mut g = vec![0.01, 0.01, 0.1];
    if scene.dims() == 4 {
        g.push(0.2);
    }
    g
}

/// Labels one configuration with both metrics.
pub fn label(
    scene: &Scene,
    tool_id: usize,
    s_tool: Pose2,
    s_obj: ObjectConfig,
    p: &LabelParams,
    seed: u64,
) -> Result<Sample> {
    let q = EscapeQuery::new(scene, tool_id, s_tool, s_obj);
    let mee: EscapeResult = match &p.mee {
        MeeLabeler::Sampler(sp) => estimate_mee(&q, &PlannerParams { rng_seed: seed, ..sp.clone() })?,
        MeeLabeler::Oracle(res) => oracle_mee(&q, res)?,
    };
    let pcc = match &p.pcc.backend {
        PccBackend::Sampler(sp) => {
            let mut pp = p.pcc.clone();
            pp.backend = PccBackend::Sampler(PlannerParams { rng_seed: seed, ..sp.clone() });
            compute_pcc(&q, &pp)?
        }
        _ => compute_pcc(&q, &p.pcc)?,
    };
    Ok(Sample { tool_id, s_tool, s_obj, q_c: mee.q_c, q_mee: mee.q_mee, q_pc: pcc.q_pc, q_pcc: pcc.q_pcc })
}

fn draw(rng: &mut impl Rng, b: &BoxBounds, limits: Option<[f64; 2]>) -> Vec<f64> {
    (0..b.dims())
        .map(|i| {
            let (mut lo, mut hi) = (b.lo[i], b.hi[i]);
            if let (3, Some(l)) = (i, limits) {
                lo = lo.max(l[0]);
                hi = hi.min(l[1]);
            }
            lo + rng.random::<f64>() * (hi - lo)
        })
        .collect()
}

/// Draws `n` collision-free configurations: the tool inside `bounds.tool`
/// and clear of the statics, the object inside `bounds.keyframe_object`
/// and clear of both. Rejected draws do not count.
pub fn sample_configs(scene: &Scene, tool_id: usize, n: usize, seed: u64) -> Result<Vec<(Pose2, ObjectConfig)>> {
    scene.tool(tool_id)?;
    let limits = scene.object.joint.as_ref().map(|j| j.limits);
    let mut rng = stream_rng(seed, streams::DATASET, tool_id as u64);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0usize;
    while out.len() < n {
        let chunk: Vec<(Pose2, ObjectConfig)> = (0..n.clamp(64, 1024))
            .map(|_| {
                let t = draw(&mut rng, &scene.bounds.tool, None);
                let o = draw(&mut rng, scene.bounds.keyframe_object(), limits);
                (Pose2::new(t[0], t[1], t[2]), ObjectConfig::from_slice(&o).expect("bounds dims"))
            })
            .collect();
        let ok: Vec<bool> = chunk
            .par_iter()
            .map(|(t, o)| !scene.tool_hits_statics(t, tool_id) && scene.free(o, t, tool_id) && scene.in_bounds(o))
            .collect();
        for (c, good) in chunk.into_iter().zip(ok) {
            draws += 1;
            if good && out.len() < n {
                out.push(c);
            }
            if draws >= 100_000 && out.len() * 100 < draws {
                return Err(Error::BoundsMismatch(format!(
                    "{} of {draws} draws were collision-free; bounds do not match the scene",
                    out.len()
                )));
            }
        }
    }
    Ok(out)
}

/// Samples and labels `n_samples` configurations for one tool.
pub fn generate(
    scene: &Scene,
    tool_id: usize,
    n_samples: usize,
    params: &LabelParams,
    rng_seed: u64,
) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let configs = sample_configs(scene, tool_id, n_samples, rng_seed)?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let samples = configs
        .par_iter()
        .enumerate()
        .map(|(i, (t, o))| {
            let s = label(scene, tool_id, *t, *o, params, derive(rng_seed, streams::SAMPLER, i as u64));
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if k.is_multiple_of(100) {
                log::info!("labeled {k}/{n_samples}");
            }
            s
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { header: DatasetHeader { scene_hash: scene.hash(), seed: rng_seed, tool_id, n_samples }, samples })
}

impl Dataset {
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Dataset> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::InvalidArgument("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&head)?;
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                samples.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Dataset { header, samples })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Dataset> {
        Dataset::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn sample_lines_use_the_documented_keys() {
        let s = Sample {
            tool_id: 1,
            s_tool: Pose2::new(0.0, 0.1, 0.0),
            s_obj: ObjectConfig::new(0.5, 0.2, 0.0),
            q_c: true,
            q_mee: None,
            q_pc: false,
            q_pcc: None,
        };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["Q_mee", "Q_pcc", "q_c", "q_pc", "s_obj", "s_tool", "tool_id"]);
        assert!(v["Q_mee"].is_null());
        assert_eq!(v["s_tool"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn impossible_bounds_are_reported() {
        let mut s = fixtures::u_cup();
        // object box entirely inside the floor
        s.bounds.keyframe_object = Some(BoxBounds::new(vec![-0.3, -0.05, -0.1], vec![0.3, -0.04, 0.1]));
        s.bounds.object.lo[1] = -0.1;
        match sample_configs(&s, 0, 10, 1) {
            Err(Error::BoundsMismatch(_)) => {}
            other => panic!("expected bounds mismatch, got {other:?}"),
        }
    }

    #[test]
    fn small_dataset_is_consistent_and_reproducible() {
        let s = fixtures::u_cup();
        let p = LabelParams::oracle(&s);
        let a = generate(&s, 0, 10, &p, 7).unwrap();
        let b = generate(&s, 0, 10, &p, 7).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        for x in &a.samples {
            assert!(s.free(&x.s_obj, &x.s_tool, 0));
            assert_eq!(x.q_c, x.q_mee.is_none());
            assert_eq!(x.q_pc, x.q_pcc.is_some());
        }
        let back = Dataset::read_jsonl(a.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, a);
    }
}
