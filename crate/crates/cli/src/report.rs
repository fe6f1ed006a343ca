use std::fmt::Write;

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use crate::manifest::{read_all, Run};
use crate::{svg, Global, ReportArgs, EXIT_OK};

fn read_json(dir: &std::path::Path, name: &str) -> Option<Value> {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).ok()?).ok()
}

/// One summary line for outputs the report knows how to read.
fn headline(dir: &std::path::Path, output: &str) -> Option<(String, f64)> {
    let v = read_json(dir, output)?;
    match output {
        "disturb.json" => Some(("disturbance success".into(), v["success_rate"].as_f64()?)),
        "mee.json" => Some(("Q_mee".into(), v["result"]["Q_mee"].as_f64()?)),
        "pcc.json" => Some(("Q_pcc".into(), v["result"]["q_pcc"].as_f64()?)),
        "keyframe.json" => Some(("keyframe score".into(), v["score"].as_f64()?)),
        "plan.json" => Some(("plan total cost".into(), v["cost"]["total"].as_f64()?)),
        o if o.starts_with("train_") => Some((format!("{o} holdout accuracy"), v["holdout"]["accuracy"].as_f64()?)),
        _ => None,
    }
}

pub fn run(g: &Global, a: &ReportArgs) -> Result<u8> {
    let dir = a.dir.as_deref().or(g.out.as_deref()).ok_or_else(|| anyhow!("report needs --dir or --out"))?;
    let runs: Vec<_> = read_all(dir)?.into_iter().filter(|(_, m)| m.command != "report").collect();
    if runs.is_empty() {
        bail!("no command manifests in {}", dir.display());
    }
    let missing: Vec<String> = runs
        .iter()
        .flat_map(|(stem, m)| {
            m.outputs.iter().filter(|o| !dir.join(o).exists()).map(move |o| format!("{o} (from {stem})"))
        })
        .collect();
    if !missing.is_empty() {
        bail!("missing outputs: {}", missing.join(", "));
    }

    let mut md = format!("# Report for {}\n\n", dir.display());
    md += "| run | command | scene | seeds | wall time (s) | outputs |\n|---|---|---|---|---|---|\n";
    let mut bars = Vec::new();
    let mut figures = Vec::new();
    for (stem, m) in &runs {
        let wall: f64 = m.wall_times.values().sum();
        let scene = m.scene_hash.as_deref().map(|h| &h[..h.len().min(12)]).unwrap_or("-");
        let seeds = m.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(md, "| {stem} | {} | {scene} | {seeds} | {wall:.2} | {} |", m.command, m.outputs.join(" "));
        for o in &m.outputs {
            if let Some(h) = headline(dir, o) {
                bars.push(h);
            }
            if o.ends_with(".svg") {
                figures.push(o.clone());
            }
        }
    }
    if !bars.is_empty() {
        md += "\n## Results\n\n";
        for (name, v) in &bars {
            let _ = writeln!(md, "- {name}: {v:.4}");
        }
    }
    if !figures.is_empty() {
        md += "\n## Figures\n\n";
        for f in &figures {
            let _ = writeln!(md, "![{f}]({f})");
        }
    }
    md += "\n![summary](report.svg)\n";

    let mut run =
        Run::new(Some(dir), "report", "report", json!({ "runs": runs.iter().map(|r| &r.0).collect::<Vec<_>>() }))?;
    run.stage("report");
    run.write("report.md", &md)?;
    run.write("report.svg", svg::bars("results", &bars))?;
    run.finish()?;
    println!("{}", dir.join("report.md").display());
    Ok(EXIT_OK)
}
