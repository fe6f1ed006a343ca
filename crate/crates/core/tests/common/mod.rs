#![allow(dead_code)]

use cagetool::dataset::{generate, LabelParams};
use cagetool::keyframe::{KeyframeSolution, Metric};
use cagetool::surrogate::{train, MetricKind, MlpModel, TrainParams};
use cagetool::{Pose2, Scene};

/// Surrogates for every tool of `scene`: trained on oracle labels for the
/// tools in `trained`, neutral untrained models for the rest.
pub fn models(scene: &Scene, kind: MetricKind, trained: &[usize], n: usize, hp: &TrainParams) -> Vec<MlpModel> {
    let labels = LabelParams::oracle(scene);
    (0..scene.tools.len())
        .map(|tool| {
            if trained.contains(&tool) {
                let data = generate(scene, tool, n, &labels, 17 + tool as u64).unwrap();
                train(&data, kind, hp).unwrap().0
            } else {
                let width = cagetool::surrogate::features(&scene.start, &Pose2::IDENTITY).len();
                let mut m = MlpModel::new(width, kind, 0);
                m.tool_id = tool;
                m
            }
        })
        .collect()
}

pub fn surrogate(scene: &Scene, kind: MetricKind, trained: &[usize], n: usize, epochs: usize) -> Metric {
    let hp = TrainParams { epochs, ..Default::default() };
    Metric::Surrogate(models(scene, kind, trained, n, &hp))
}

/// A hand-made feasible keyframe.
pub fn keyframe(
    scene: &Scene,
    tool_id: usize,
    s_tool: Pose2,
    s_obj: cagetool::ObjectConfig,
    kind: MetricKind,
) -> KeyframeSolution {
    assert!(cagetool::keyframe::feasible(scene, tool_id, &s_tool, &s_obj));
    KeyframeSolution {
        tool_id,
        tool_name: scene.tools[tool_id].name.clone(),
        s_tool,
        s_obj,
        score: 0.0,
        feasible: true,
        t_k: 0,
        metric: kind,
        evaluations: 0,
        violations: Default::default(),
        history: vec![],
    }
}
