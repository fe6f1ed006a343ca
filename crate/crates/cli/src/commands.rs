use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use cagetool::clearance::{compute_pcc, PccParams};
use cagetool::cmaes::{Benchmark, CmaParams};
use cagetool::dataset::{coarse_grid, default_grid, generate, Dataset, LabelParams, MeeLabeler};
use cagetool::fixtures;
use cagetool::keyframe::{solve_keyframe, KeyframeProblem, KeyframeSolution, Metric};
use cagetool::sim::{evaluate_disturbance, goal_reached, held, rollout, DisturbanceSpec, RolloutTrace};
use cagetool::surrogate::{train, MetricKind, MlpModel, TrainParams, UnifiedParams};
use cagetool::trajopt::{plan, PlanParams, TrajCostParams, TrajectoryProblem, ViaTrajectory};
use cagetool::{estimate_mee, oracle_mee, EscapeQuery, ObjectConfig, PlannerParams, Pose2, Scene};

use crate::manifest::Run;
use crate::{
    svg, BenchArgs, Cli, Command, DatasetArgs, DatasetCmd, DisturbArgs, Global, KeyframeArgs, Labeler, MeeArgs,
    MeeMode, MetricArg, Models, PccArgs, PlanArgs, Predicate, PredictArgs, Query, RolloutArgs, Sampler, SceneCmd,
    TrainArgs, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK,
};

pub fn run(cli: &Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Scene(c) => scene_cmd(g, c),
        Command::Mee(a) => mee(g, a),
        Command::Pcc(a) => pcc(g, a),
        Command::Dataset(DatasetCmd::Gen(a)) => dataset_gen(g, a),
        Command::Train(a) => train_cmd(g, a),
        Command::Predict(a) => predict(a),
        Command::Keyframe(a) => keyframe(g, a),
        Command::Plan(a) => plan_cmd(g, a),
        Command::Rollout(a) => rollout_cmd(g, a),
        Command::Disturb(a) => disturb(g, a),
        Command::BenchCmaes(a) => bench(g, a),
        Command::Report(a) => crate::report::run(g, a),
    }
}

/// Infeasibility maps to exit 2, everything else to 1.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<cagetool::Error>()) {
        Some(cagetool::Error::Infeasible(_)) => EXIT_INFEASIBLE,
        _ => EXIT_INVALID,
    }
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads `--scene` as a file, falling back to the built-in fixture names.
fn scene_from(spec: &str) -> Result<Scene> {
    let path = Path::new(spec);
    if path.exists() {
        return Scene::load(path).with_context(|| format!("loading scene {spec}"));
    }
    let name = spec.trim_end_matches(".json");
    fixtures::shipped()
        .into_iter()
        .find(|(file, s)| file.trim_end_matches(".json") == name || s.name == name)
        .map(|(_, s)| s)
        .ok_or_else(|| anyhow!(cagetool::Error::InvalidArgument(format!("no scene file or fixture named {spec}"))))
}

fn scene(g: &Global) -> Result<Scene> {
    let spec =
        g.scene.as_deref().ok_or_else(|| anyhow!(cagetool::Error::InvalidArgument("--scene is required".into())))?;
    scene_from(spec)
}

fn pose(v: &[f64]) -> Result<Pose2> {
    match v {
        [x, y, t] => Ok(Pose2::new(*x, *y, *t)),
        _ => Err(cagetool::Error::InvalidArgument(format!("a pose needs x,y,theta, got {} values", v.len())).into()),
    }
}

fn query_poses(s: &Scene, q: &Query) -> Result<(Pose2, ObjectConfig)> {
    let t = match &q.s_tool {
        Some(v) => pose(v)?,
        None => s.task.tool_start,
    };
    let o = match &q.s_obj {
        Some(v) => ObjectConfig::from_slice(v)?,
        None => s.start,
    };
    Ok((t, o))
}

fn planner(p: &Sampler, seed: u64) -> PlannerParams {
    PlannerParams {
        batch_size: p.batch_size,
        max_batches: p.max_batches,
        neighbor_k: p.neighbor_k,
        edge_resolution: p.edge_resolution,
        rng_seed: seed,
    }
}

fn scene_cmd(g: &Global, c: &SceneCmd) -> Result<u8> {
    match c {
        SceneCmd::Validate { path } => {
            let spec = path.as_deref().or(g.scene.as_deref()).ok_or_else(|| anyhow!("a scene path is required"))?;
            let s = scene_from(spec)?;
            s.validate()?;
            print(&json!({ "scene": s.name, "hash": s.hash(), "valid": true }));
            Ok(EXIT_OK)
        }
        SceneCmd::Export => {
            let out = g.out.as_deref().ok_or_else(|| anyhow!("--out is required"))?;
            let mut run = Run::new(Some(out), "scenes", "scene export", json!({}))?;
            for (file, s) in fixtures::shipped() {
                run.write(file, s.to_json() + "\n")?;
                println!("{file} {}", s.hash());
            }
            run.finish()?;
            Ok(EXIT_OK)
        }
        SceneCmd::List => {
            for (file, s) in fixtures::shipped() {
                println!("{:<28} {} tools, {} dims", file, s.tools.len(), s.dims());
            }
            Ok(EXIT_OK)
        }
    }
}

fn mee(g: &Global, a: &MeeArgs) -> Result<u8> {
    let s = scene(g)?;
    let (t, o) = query_poses(&s, &a.query)?;
    let oracle = a.oracle || a.mode == Some(MeeMode::Oracle);
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(&s));
    let params = planner(&a.sampler, g.seed);
    let mut run = Run::new(
        g.out.as_deref(),
        &format!("mee_t{}", a.query.tool),
        "mee",
        json!({ "oracle": oracle, "grid": grid, "planner": params, "tool": a.query.tool, "s_tool": t, "s_obj": o }),
    )?;
    run.scene(s.hash());
    run.seed(g.seed);
    let mut q = EscapeQuery::new(&s, a.query.tool, t, o);
    if let Some(m) = a.query.margin {
        q = q.with_margin(m);
    }
    run.stage("mee");
    let mut r = if oracle { oracle_mee(&q, &grid)? } else { estimate_mee(&q, &params)? };
    if !a.path {
        r.path = None;
    }
    let v = json!({ "scene": s.name, "tool": a.query.tool, "mode": if oracle { "oracle" } else { "estimate" }, "result": r });
    run.write_json("mee.json", &v)?;
    run.finish()?;
    print(&v);
    Ok(EXIT_OK)
}

fn pcc(g: &Global, a: &PccArgs) -> Result<u8> {
    let s = scene(g)?;
    let (t, o) = query_poses(&s, &a.query)?;
    let mut params = if a.sampler {
        PccParams::sampler(planner(&a.planner, g.seed))
    } else {
        PccParams::grid(a.grid.clone().unwrap_or_else(|| coarse_grid(&s)))
    };
    params.bisect_tol = a.bisect_tol;
    params.max_iters = a.max_iters;
    let mut run = Run::new(
        g.out.as_deref(),
        &format!("pcc_t{}", a.query.tool),
        "pcc",
        json!({ "params": params, "tool": a.query.tool, "s_tool": t, "s_obj": o }),
    )?;
    run.scene(s.hash());
    run.seed(g.seed);
    let mut q = EscapeQuery::new(&s, a.query.tool, t, o);
    if let Some(m) = a.query.margin {
        q = q.with_margin(m);
    }
    run.stage("pcc");
    let r = compute_pcc(&q, &params)?;
    let v = json!({ "scene": s.name, "tool": a.query.tool, "result": r });
    run.write_json("pcc.json", &v)?;
    run.finish()?;
    print(&v);
    Ok(EXIT_OK)
}

fn dataset_gen(g: &Global, a: &DatasetArgs) -> Result<u8> {
    let s = scene(g)?;
    let mee = match a.labeler {
        Labeler::Sampler => MeeLabeler::Sampler(planner(&a.sampler, g.seed)),
        Labeler::Oracle => MeeLabeler::Oracle(a.grid.clone().unwrap_or_else(|| default_grid(&s))),
    };
    let labels = LabelParams { mee, pcc: PccParams::grid(a.pcc_grid.clone().unwrap_or_else(|| coarse_grid(&s))) };
    let stem = format!("dataset_t{}", a.tool);
    let mut run =
        Run::new(g.out.as_deref(), &stem, "dataset gen", json!({ "n": a.n, "tool": a.tool, "labels": labels }))?;
    run.scene(s.hash());
    run.seed(g.seed);
    run.stage("label");
    let d = generate(&s, a.tool, a.n, &labels, g.seed)?;
    let text = d.to_jsonl();
    let file = format!("{stem}.jsonl");
    run.write(&file, &text)?;
    run.finish()?;
    let caged = d.samples.iter().filter(|x| x.q_c).count();
    let partial = d.samples.iter().filter(|x| x.q_pc).count();
    print(
        &json!({ "file": file, "sha256": sha256(text.as_bytes()), "n": d.samples.len(), "caged": caged, "partially_caged": partial }),
    );
    Ok(EXIT_OK)
}

fn kind_of(m: Option<MetricArg>) -> Result<MetricKind> {
    match m.unwrap_or(MetricArg::Mee) {
        MetricArg::Mee => Ok(MetricKind::Mee),
        MetricArg::Pcc => Ok(MetricKind::Pcc),
        MetricArg::Oracle => Err(cagetool::Error::InvalidArgument("training needs --metric mee or pcc".into()).into()),
    }
}

fn kind_name(k: MetricKind) -> &'static str {
    match k {
        MetricKind::Mee => "mee",
        MetricKind::Pcc => "pcc",
    }
}

fn train_cmd(g: &Global, a: &TrainArgs) -> Result<u8> {
    let kind = kind_of(g.metric)?;
    let data = Dataset::load(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    if let Some(spec) = &g.scene {
        let s = scene_from(spec)?;
        if s.hash() != data.header.scene_hash {
            bail!(cagetool::Error::InvalidArgument(format!(
                "dataset was generated for scene {} but --scene hashes to {}",
                data.header.scene_hash,
                s.hash()
            )));
        }
    }
    let hp =
        TrainParams { lr: a.lr, epochs: a.epochs, batch: a.batch, seed: g.seed, lambda: a.lambda, holdout: a.holdout };
    let stem = format!("model_{}_t{}", kind_name(kind), data.header.tool_id);
    let mut run = Run::new(g.out.as_deref(), &stem, "train", json!({ "data": a.data, "metric": kind, "train": hp }))?;
    run.scene(data.header.scene_hash.clone());
    run.seed(g.seed);
    run.stage("train");
    let (model, report) = train(&data, kind, &hp)?;
    run.write_json(&format!("{stem}.json"), &model)?;
    run.write_json(&format!("train_{}_t{}.json", kind_name(kind), data.header.tool_id), &report)?;
    run.finish()?;
    print(
        &json!({ "model": format!("{stem}.json"), "holdout": report.holdout, "degenerate_auc": report.degenerate_auc }),
    );
    Ok(EXIT_OK)
}

fn predict(a: &PredictArgs) -> Result<u8> {
    let m = MlpModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let t = pose(&a.s_tool)?;
    let o = ObjectConfig::from_slice(&a.s_obj)?;
    let (q, v) = m.forward(&o, &t)?;
    let unified = match m.metric_kind {
        MetricKind::Mee => m.unified_mee(&m.unified, &o, &t)?,
        MetricKind::Pcc => m.unified_pcc(&m.unified, &o, &t)?,
    };
    print(&json!({ "metric": m.metric_kind, "tool": m.tool_id, "q": q, "value": v, "unified": unified }));
    Ok(EXIT_OK)
}

/// The scoring metric and its unified parameters. With `only` set, tools
/// other than `only` never get scored and need no model.
fn metric(g: &Global, m: &Models, s: &Scene, only: Option<usize>) -> Result<(Metric, UnifiedParams)> {
    let which = g.metric.unwrap_or(if m.models.is_empty() { MetricArg::Oracle } else { MetricArg::Mee });
    if which == MetricArg::Oracle {
        let grid = m.grid.clone().unwrap_or_else(|| coarse_grid(s));
        return Ok((Metric::Oracle { kind: MetricKind::Mee, grid }, UnifiedParams::default()));
    }
    let kind = kind_of(Some(which))?;
    let mut slots: Vec<Option<MlpModel>> = vec![None; s.tools.len()];
    for p in &m.models {
        let model = MlpModel::load(p).with_context(|| format!("loading {}", p.display()))?;
        if model.metric_kind != kind {
            bail!(cagetool::Error::InvalidArgument(format!("{} is not a {} model", p.display(), kind_name(kind))));
        }
        let id = model.tool_id;
        *slots
            .get_mut(id)
            .ok_or_else(|| anyhow!(cagetool::Error::InvalidArgument(format!("model tool id {id} not in scene"))))? =
            Some(model);
    }
    let width = cagetool::surrogate::features(&s.start, &Pose2::IDENTITY).len();
    let mut unified: Option<UnifiedParams> = None;
    let mut models = Vec::with_capacity(slots.len());
    for (i, slot) in slots.into_iter().enumerate() {
        let needed = only.is_none_or(|k| k == i);
        match slot {
            Some(model) => {
                if needed {
                    let u = model.unified;
                    unified = Some(match unified {
                        None => u,
                        Some(a) => {
                            UnifiedParams { q_max: a.q_max.max(u.q_max), q_max_pcc: a.q_max_pcc.max(u.q_max_pcc), ..a }
                        }
                    });
                }
                models.push(model);
            }
            None if needed => bail!(cagetool::Error::InvalidArgument(format!("no model for tool {i}"))),
            None => {
                // never scored: the search is restricted to another tool
                let mut placeholder = MlpModel::new(width, kind, 0);
                placeholder.tool_id = i;
                models.push(placeholder);
            }
        }
    }
    Ok((Metric::Surrogate(models), unified.expect("at least one needed tool")))
}

fn cma(c: &crate::Cma, base: CmaParams, seed: u64) -> CmaParams {
    CmaParams {
        lambda: c.lambda.unwrap_or(base.lambda),
        iterations: c.iterations.unwrap_or(base.iterations),
        sigma0: c.sigma0.unwrap_or(base.sigma0),
        seed,
        x0: None,
    }
}

fn keyframe(g: &Global, a: &KeyframeArgs) -> Result<u8> {
    let s = scene(g)?;
    if let Some(k) = a.tool {
        s.tool(k)?;
    }
    let (metric, unified) = metric(g, &a.models, &s, a.tool)?;
    let t_k = a.t_k.unwrap_or((s.task.keyframe_phase * 50.0).round() as usize);
    let params = cma(&a.cma, CmaParams::default(), g.seed);
    let mut run = Run::new(
        g.out.as_deref(),
        "keyframe",
        "keyframe",
        json!({ "metric": metric.kind()?, "models": a.models.models, "grid": a.models.grid, "tool": a.tool, "t_k": t_k, "cma": params, "unified": unified }),
    )?;
    run.scene(s.hash());
    run.seed(g.seed);
    run.stage("keyframe");
    let p = KeyframeProblem { scene: &s, metric, unified, t_k, tool: a.tool };
    let kf = solve_keyframe(&p, &params)?;
    run.write_json("keyframe.json", &kf)?;
    run.finish()?;
    print(&json!({
        "tool": kf.tool_name, "tool_id": kf.tool_id, "s_tool": kf.s_tool, "s_obj": kf.s_obj,
        "score": kf.score, "feasible": kf.feasible, "violations": kf.violations,
    }));
    Ok(if kf.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn trace_jsonl(tr: &RolloutTrace) -> String {
    let mut out = String::new();
    for (k, ((t, o), e)) in tr.tool.iter().zip(&tr.object).zip(&tr.events).enumerate() {
        out += &serde_json::to_string(&json!({ "step": k, "tool": t, "object": o, "event": e })).expect("json");
        out.push('\n');
    }
    out
}

fn plan_cmd(g: &Global, a: &PlanArgs) -> Result<u8> {
    let s = scene(g)?;
    let kf = KeyframeSolution::load(&a.keyframe).with_context(|| format!("loading {}", a.keyframe.display()))?;
    let (metric, unified) = metric(g, &a.models, &s, Some(kf.tool_id))?;
    let base = PlanParams::default();
    let params = PlanParams {
        n_via: a.n_via,
        cma: cma(&a.cma, base.cma, g.seed),
        cost: TrajCostParams {
            w_goal: a.w_goal,
            w_keyframe_tool: a.w_keyframe_tool,
            w_keyframe_obj: a.w_keyframe_obj,
            w_robust: a.w_robust,
            n_cost_samples: a.n_cost_samples,
        },
        margin: a.margin,
        warm_start: !a.no_warm_start,
    };
    let mut run = Run::new(
        g.out.as_deref(),
        "plan",
        "plan",
        json!({ "keyframe": a.keyframe, "metric": metric.kind()?, "models": a.models.models, "grid": a.models.grid, "plan": params, "unified": unified }),
    )?;
    run.scene(s.hash());
    run.seed(g.seed);
    run.stage("plan");
    let p = TrajectoryProblem {
        scene: &s,
        tool_id: kf.tool_id,
        keyframe: &kf,
        metric: &metric,
        unified,
        cost: params.cost.clone(),
    };
    let r = plan(&p, &params)?;
    run.write_json("plan.json", &r)?;
    run.write_json("trajectory.json", &r.trajectory)?;
    run.write("plan_trace.jsonl", trace_jsonl(&r.trace))?;
    run.write("plan.svg", svg::rollout(&s, r.tool_id, &r.trace, &[], &format!("{} plan", s.name)))?;
    run.finish()?;
    print(
        &json!({ "tool_id": r.tool_id, "cost": r.cost, "goal_reached": goal_reached(&s, r.trace.final_object()), "evaluations": r.evaluations }),
    );
    Ok(EXIT_OK)
}

/// Reads a bare trajectory or a plan result (which also names the tool).
fn load_traj(path: &Path) -> Result<(ViaTrajectory, Option<usize>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text)?;
    if let Some(t) = v.get("trajectory") {
        let tool = v.get("tool_id").and_then(Value::as_u64).map(|x| x as usize);
        return Ok((serde_json::from_value(t.clone())?, tool));
    }
    Ok((serde_json::from_value(v)?, None))
}

fn rollout_cmd(g: &Global, a: &RolloutArgs) -> Result<u8> {
    let s = scene(g)?;
    let (traj, plan_tool) = load_traj(&a.traj)?;
    let tool = a.tool.or(plan_tool).unwrap_or(0);
    let mut run = Run::new(
        g.out.as_deref(),
        "rollout",
        "rollout",
        json!({ "traj": a.traj, "tool": tool, "n_steps": a.n_steps }),
    )?;
    run.scene(s.hash());
    run.stage("rollout");
    let tr = rollout(&s, &traj, tool, a.n_steps)?;
    run.write("rollout.jsonl", trace_jsonl(&tr))?;
    run.write("rollout.svg", svg::rollout(&s, tool, &tr, &[], &format!("{} rollout", s.name)))?;
    run.finish()?;
    print(&json!({
        "final_object": tr.final_object(), "valid": tr.valid(), "tool_static": tr.tool_static,
        "unreachable": tr.unreachable, "failure": tr.failure, "goal_reached": goal_reached(&s, tr.final_object()),
        "held": held(&s, tool, &tr),
    }));
    Ok(if tr.valid() { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn disturb(g: &Global, a: &DisturbArgs) -> Result<u8> {
    let s = scene(g)?;
    let (traj, plan_tool) = load_traj(&a.traj)?;
    let tool = a.tool.or(plan_tool).unwrap_or(0);
    let mut spec = DisturbanceSpec::weight(&s, a.n_episodes, g.seed);
    if let Some(m) = a.magnitude {
        spec.magnitude = m;
    }
    spec.impulses_per_episode = a.impulses_per_episode;
    spec.travel = a.travel;
    let mut run = Run::new(
        g.out.as_deref(),
        "disturb",
        "disturb",
        json!({ "traj": a.traj, "tool": tool, "n_steps": a.n_steps, "spec": spec, "predicate": format!("{:?}", a.predicate) }),
    )?;
    run.scene(s.hash());
    run.seed(g.seed);
    run.stage("nominal");
    let nominal = rollout(&s, &traj, tool, a.n_steps)?;
    run.stage("episodes");
    let pred = a.predicate;
    let rep = evaluate_disturbance(&s, &traj, tool, a.n_steps, &spec, move |sc, tr| match pred {
        Predicate::Held => held(sc, tool, tr),
        Predicate::Goal => goal_reached(sc, tr.final_object()),
        Predicate::HeldGoal => held(sc, tool, tr) && goal_reached(sc, tr.final_object()),
    })?;
    let summary = json!({
        "success_rate": rep.success_rate, "successes": rep.successes, "n_episodes": rep.n_episodes,
        "magnitude": spec.magnitude, "nominal_goal_reached": goal_reached(&s, nominal.final_object()),
        "nominal_held": held(&s, tool, &nominal),
        "episodes": rep.episodes.iter().map(|e| json!({ "impulses": e.impulses, "success": e.success, "final_object": e.trace.object.last() })).collect::<Vec<_>>(),
    });
    run.write_json("disturb.json", &summary)?;
    let mut lines = String::new();
    for (i, e) in rep.episodes.iter().enumerate() {
        lines += &serde_json::to_string(
            &json!({ "episode": i, "success": e.success, "impulses": e.impulses, "trace": e.trace }),
        )?;
        lines.push('\n');
    }
    run.write("disturb.jsonl", lines)?;
    let traces: Vec<&RolloutTrace> = rep.episodes.iter().map(|e| &e.trace).collect();
    let title = format!("{}: {}/{} under {:.3} N", s.name, rep.successes, rep.n_episodes, spec.magnitude);
    run.write("disturb.svg", svg::rollout(&s, tool, &nominal, &traces, &title))?;
    run.finish()?;
    print(&json!({ "success_rate": rep.success_rate, "successes": rep.successes, "n_episodes": rep.n_episodes }));
    Ok(EXIT_OK)
}

fn bench(g: &Global, a: &BenchArgs) -> Result<u8> {
    let mut run = Run::new(g.out.as_deref(), "bench_cmaes", "bench-cmaes", json!({ "seeds": a.seeds }))?;
    run.stage("bench");
    let mut all = Vec::new();
    for b in Benchmark::ALL {
        let outcomes = (0..a.seeds).map(|seed| b.run(seed)).collect::<cagetool::Result<Vec<_>>>()?;
        let passed = outcomes.iter().filter(|o| o.passed).count();
        let worst = outcomes.iter().map(|o| o.best_f).fold(0.0, f64::max);
        println!(
            "{:<11} {passed}/{} below {:e} (worst {worst:.3e})",
            format!("{b:?}"),
            outcomes.len(),
            outcomes[0].target
        );
        all.extend(outcomes);
    }
    run.write_json("bench_cmaes.json", &all)?;
    run.finish()?;
    Ok(EXIT_OK)
}
