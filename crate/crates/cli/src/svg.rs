use std::fmt::Write;

use cagetool::sim::RolloutTrace;
use cagetool::{Aabb, Body, Pose2, Scene, Vec2};

const WIDTH: f64 = 640.0;

/// Minimal SVG writer with a y-up world frame.
pub struct Canvas {
    view: Aabb,
    scale: f64,
    height: f64,
    body: String,
}

impl Canvas {
    pub fn new(view: Aabb) -> Self {
        let w = (view.max.x - view.min.x).max(1e-9);
        let h = (view.max.y - view.min.y).max(1e-9);
        let scale = WIDTH / w;
        Canvas { view, scale, height: h * scale, body: String::new() }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.view.min.x) * self.scale, self.height - (p.y - self.view.min.y) * self.scale)
    }

    fn points(&self, pts: &[Vec2]) -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = self.map(*p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn body(&mut self, b: &Body, fill: &str, opacity: f64) {
        for part in &b.parts {
            let pts = self.points(&part.verts);
            let _ = writeln!(
                self.body,
                r#"<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity:.2}" stroke="black" stroke-width="0.5"/>"#
            );
        }
    }

    pub fn polyline(&mut self, pts: &[Vec2], stroke: &str, width: f64, opacity: f64) {
        let pts = self.points(pts);
        let _ = writeln!(
            self.body,
            r#"<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width:.1}" stroke-opacity="{opacity:.2}"/>"#
        );
    }

    pub fn label(&mut self, at: Vec2, text: &str) {
        let (x, y) = self.map(at);
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="12" font-family="monospace">{}</text>"#,
            escape(text)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{:.0}\" viewBox=\"0 0 {WIDTH:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.height, self.height, self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn grow(b: Aabb, margin: f64) -> Aabb {
    Aabb { min: Vec2::new(b.min.x - margin, b.min.y - margin), max: Vec2::new(b.max.x + margin, b.max.y + margin) }
}

fn mass_path(scene: &Scene, tr: &RolloutTrace) -> Vec<Vec2> {
    tr.object.iter().map(|c| scene.object.mass_center(c)).collect()
}

/// Scene with the nominal rollout (black) and disturbed rollouts (red).
pub fn rollout(
    scene: &Scene,
    tool_id: usize,
    nominal: &RolloutTrace,
    disturbed: &[&RolloutTrace],
    title: &str,
) -> String {
    let mut view = Aabb::EMPTY;
    let snapshots: Vec<Pose2> = snapshot_poses(&nominal.tool);
    let tools: Vec<Body> = snapshots.iter().map(|t| scene.place_tool(tool_id, t)).collect();
    let objects: Vec<Body> =
        [nominal.object.first(), nominal.object.last()].into_iter().flatten().map(|c| scene.place_object(c)).collect();
    for b in tools.iter().chain(&objects) {
        view = view.union(&b.aabb);
    }
    for tr in disturbed {
        for p in mass_path(scene, tr) {
            if p.x.abs() < 10.0 && p.y.abs() < 10.0 {
                view = view.union(&Aabb { min: p, max: p });
            }
        }
    }
    let view = grow(view, 0.05);
    let mut c = Canvas::new(view);
    // statics can be far larger than the view; SVG clips them
    c.body(scene.statics_body(), "#999999", 1.0);
    for (i, b) in tools.iter().enumerate() {
        let o = 0.15 + 0.45 * i as f64 / tools.len().max(1) as f64;
        c.body(b, "#3366cc", o);
    }
    for (b, o) in objects.iter().zip([0.3, 0.8]) {
        c.body(b, "#e69f00", o);
    }
    for tr in disturbed {
        c.polyline(&mass_path(scene, tr), "#d62728", 1.0, 0.5);
    }
    c.polyline(&mass_path(scene, nominal), "black", 2.0, 1.0);
    c.label(Vec2::new(view.min.x + 0.01, view.max.y - 0.03), title);
    c.finish()
}

fn snapshot_poses(poses: &[Pose2]) -> Vec<Pose2> {
    if poses.is_empty() {
        return vec![];
    }
    let n = 5.min(poses.len());
    (0..n).map(|i| poses[i * (poses.len() - 1) / (n - 1).max(1)]).collect()
}

/// Horizontal bar chart of labelled values.
pub fn bars(title: &str, items: &[(String, f64)]) -> String {
    let row = 22.0;
    let height = 40.0 + row * items.len() as f64;
    let max = items.iter().map(|i| i.1.abs()).fold(0.0, f64::max).max(1e-12);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"10\" y=\"20\" font-size=\"14\" font-family=\"monospace\">{}</text>\n",
        escape(title)
    );
    for (i, (name, v)) in items.iter().enumerate() {
        let y = 32.0 + row * i as f64;
        let w = 300.0 * v.abs() / max;
        let _ = writeln!(s, r##"<rect x="220" y="{y:.1}" width="{w:.1}" height="16" fill="#3366cc"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="10" y="{:.1}" font-size="12" font-family="monospace">{}</text>"#,
            y + 12.0,
            escape(name)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" font-family="monospace">{v:.4}</text>"#,
            225.0 + w,
            y + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}
